"""Joint RFI mitigation and echo recovery from one-bit (CTBV) UWB radar data."""

from .di import recover_di
from .experiment import ExperimentConfig, RunRecord, load_config, run_experiment
from .io import export_measured_rfi, ingest_measured_rfi
from .metrics import inr_db, nre, sinr_db, spectrum_map
from .model import (CpiConfig, DictionaryPair, FourierDictionary, PulseDictionary, SignedCpi,
                    ThresholdSchedule, build_dictionaries, build_fourier_dictionary,
                    build_pulse_dictionary, build_threshold_schedule, quantize_ctbv)
from .probit import stable_normal_ratio
from .scene import (DEFAULT_RFI_TONES, PulseWaveform, SceneSpec, default_targets, scale_to_levels,
                    synth_echo, synth_noise, synth_pulse_band, synth_rfi)
from .spice_1b import RecoveryResult, SolverOptions, solve
from .spice_hp import hp_run, hp_step, hp_weights

__version__ = "0.1.0"
