"""Sweep orchestration: scene -> scale -> quantize -> recover -> score.

Every cell ``(method, sinr, seed)`` is self-contained (its random draws come
from ``seed`` alone), so cells can run in worker processes and still merge
into the same records and CSV bytes as a serial sweep.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .di import recover_di
from .io import ingest_measured_rfi
from .metrics import nre
from .model import CpiConfig, build_dictionaries, build_threshold_schedule, quantize_ctbv
from .scene import (PulseWaveform, SceneSpec, default_targets, scale_to_levels, synth_echo,
                    synth_noise, synth_pulse_band, synth_rfi)
from .spice_1b import SolverOptions, solve

log = logging.getLogger(__name__)

METHODS = ("DI", "1bSPICE", "1bLIKES", "1bIAA")
CSV_HEADER = ("method", "sinr_db", "inr_db", "seed", "nre_db", "iterations", "converged",
              "runtime_ms")
DESK = (128, 1024)
FULL_SCALE = (512, 8192)


@dataclass(frozen=True)
class ExperimentConfig:
    cpi: CpiConfig = field(default_factory=lambda: CpiConfig(*DESK))
    scene: SceneSpec = field(default_factory=SceneSpec)
    methods: tuple = METHODS
    sinr_grid_db: tuple = (-30.0,)
    inr_db: float | None = 10.0
    seeds: tuple = (0, 1, 2, 3, 4)
    solver: SolverOptions = field(default_factory=SolverOptions)
    rfi_source: str = "simulated"  # or a path to a measured-RFI file
    pulse_band_hz: tuple = (300e6, 1100e6)
    workers: int = 1
    emit_timing: bool = False

    def __post_init__(self):
        for name in ("methods", "sinr_grid_db", "seeds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        object.__setattr__(self, "sinr_grid_db", tuple(float(v) for v in self.sinr_grid_db))
        object.__setattr__(self, "seeds", tuple(int(v) for v in self.seeds))
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def ingested(self) -> bool:
        return self.rfi_source != "simulated"

    def pulse(self) -> PulseWaveform:
        return synth_pulse_band(self.cpi.fs_hz, *self.pulse_band_hz)

    def scene_for(self, seed: int) -> SceneSpec:
        targets = self.scene.targets or default_targets(self.cpi.n_fast)
        return replace(self.scene, targets=targets, seed=seed)


@dataclass
class RunRecord:
    method: str
    sinr_db: float
    inr_db: float | None
    seed: int
    nre_db: float
    iterations: int
    converged: bool
    runtime_ms: float
    error: str = ""  # diagnostic for failed cells, not part of the CSV


@dataclass
class SimulatedCpi:
    y: np.ndarray
    s_true: np.ndarray
    cpi: object  # SignedCpi
    achieved: tuple


def synthesize(config: ExperimentConfig, sinr_db: float, seed: int,
               rfi_matrix: np.ndarray | None = None) -> SimulatedCpi:
    """Scene for one sweep cell. Measured RFI already carries its noise, so none is added."""
    cfg = config.cpi
    scene = config.scene_for(seed)
    pulse = config.pulse()
    rng = np.random.default_rng(seed)
    s = synth_echo(scene, pulse, cfg)
    if config.ingested:
        if rfi_matrix is None:
            rfi_matrix = load_rfi(config)
        y, achieved = scale_to_levels(s, rfi_matrix, None, sinr_db)
    else:
        f = synth_rfi(scene, cfg, rng)
        e = synth_noise(scene, cfg, rng) if config.inr_db is not None else None
        y, achieved = scale_to_levels(s, f, e, sinr_db, config.inr_db)
    cpi = quantize_ctbv(y, build_threshold_schedule(cfg), cfg)
    return SimulatedCpi(y=y, s_true=s, cpi=cpi, achieved=achieved)


def load_rfi(config: ExperimentConfig) -> np.ndarray:
    """Leading N x M block of the measured record."""
    rfi = ingest_measured_rfi(config.rfi_source)
    n, m = config.cpi.n_fast, config.cpi.m_slow
    if rfi.shape[0] < n or rfi.shape[1] < m:
        raise ValueError(f"measured RFI is {rfi.shape}, need at least {(n, m)}")
    return rfi[:n, :m]


def recover(method: str, cpi, dicts, opts: SolverOptions):
    """Echo estimate and (iterations, converged) for one method."""
    if method == "DI":
        return recover_di(cpi), 0, True
    kind = method[2:]
    res = solve(cpi, dicts, replace(opts, kind=kind))
    if res.diagnostic:
        raise RuntimeError(res.diagnostic)
    return res.s_hat, res.iterations, res.converged


def cells(config: ExperimentConfig) -> list:
    return [(m, s, seed) for m in config.methods for s in config.sinr_grid_db
            for seed in config.seeds]


def _run_cell(config: ExperimentConfig, cell, dicts=None, rfi_matrix=None) -> RunRecord:
    method, sinr, seed = cell
    inr = None if config.ingested else config.inr_db
    t0 = time.perf_counter()
    try:
        sim = synthesize(config, sinr, seed, rfi_matrix)
        if dicts is None and method != "DI":
            dicts = build_dictionaries(config.pulse(), config.cpi)
        s_hat, iters, conv = recover(method, sim.cpi, dicts, config.solver)
        score = nre(sim.s_true, s_hat)
        err = ""
    except Exception as exc:  # one failed cell must not stop the sweep
        log.warning("cell %s failed: %s", cell, exc)
        score, iters, conv, err = math.nan, 0, False, f"{type(exc).__name__}: {exc}"
    runtime = max((time.perf_counter() - t0) * 1e3, 1e-6)
    return RunRecord(method, sinr, inr, seed, score, iters, conv, runtime, err)


def _run_chunk(config: ExperimentConfig, chunk) -> list:
    dicts = build_dictionaries(config.pulse(), config.cpi)
    rfi = load_rfi(config) if config.ingested else None
    return [_run_cell(config, c, dicts, rfi) for c in chunk]


def run_experiment(config: ExperimentConfig, csv_path=None) -> list:
    """All cells in (method, sinr, seed) order; optionally written as CSV."""
    todo = cells(config)
    if config.workers == 1:
        records = _run_chunk(config, todo)
    else:
        # fork is unsafe once an OpenMP runtime (numba, BLAS) has started threads
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=config.workers, mp_context=ctx) as pool:
            futures = [pool.submit(_run_chunk, config, [c]) for c in todo]
            records = [r for fut in futures for r in fut.result()]
    if csv_path is not None:
        Path(csv_path).write_text(records_to_csv(records, config.emit_timing))
    return records


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records, emit_timing: bool = False) -> str:
    """CSV text with the fixed header. ``runtime_ms`` stays empty unless
    ``emit_timing`` is set, since wall time would break byte-identical reruns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.method, _fmt(r.sinr_db), _fmt(r.inr_db), r.seed, _fmt(r.nre_db),
                    r.iterations, _fmt(r.converged),
                    _fmt(r.runtime_ms) if emit_timing else ""])
    return buf.getvalue()


def median_nre(records) -> dict:
    """Median NRE per (method, sinr) over seeds, ignoring failed cells."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.method, r.sinr_db), []).append(r.nre_db)
    out = {}
    for key, vals in groups.items():
        vals = [v for v in vals if np.isfinite(v)]
        out[key] = float(np.median(vals)) if vals else math.nan
    return out


# -- config files ---------------------------------------------------------

def _build(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ValueError(f"unknown keys in {where}: {sorted(extra)}")
    return cls(**data)


def config_from_dict(data: dict, base_dir=None, full_scale: bool = False) -> ExperimentConfig:
    data = dict(data)
    cpi = dict(data.pop("cpi", {}))
    if full_scale:
        cpi["n_fast"], cpi["m_slow"] = FULL_SCALE
    cpi.setdefault("n_fast", DESK[0])
    cpi.setdefault("m_slow", DESK[1])
    scene = dict(data.pop("scene", {}))
    if "targets" in scene:
        scene["targets"] = tuple(tuple(t) for t in scene["targets"])
    if "rfi_tones" in scene:
        scene["rfi_tones"] = tuple(tuple(t) for t in scene["rfi_tones"])
    solver = data.pop("solver", {})
    src = data.pop("rfi_source", "simulated")
    if isinstance(src, dict):
        if set(src) != {"ingested"}:
            raise ValueError("rfi_source must be 'simulated' or {\"ingested\": path}")
        path = Path(src["ingested"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        src = str(path)
    elif src != "simulated":
        raise ValueError("rfi_source must be 'simulated' or {\"ingested\": path}")
    if "pulse_band_hz" in data:
        data["pulse_band_hz"] = tuple(data["pulse_band_hz"])
    return _build(ExperimentConfig, dict(
        data,
        cpi=_build(CpiConfig, cpi, "cpi"),
        scene=_build(SceneSpec, scene, "scene"),
        solver=_build(SolverOptions, solver, "solver"),
        rfi_source=src,
    ), "config")


def load_config(path, full_scale: bool = False) -> ExperimentConfig:
    path = Path(path)
    return config_from_dict(json.loads(path.read_text()), base_dir=path.parent,
                            full_scale=full_scale)


def config_to_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    if config.ingested:
        d["rfi_source"] = {"ingested": config.rfi_source}
    return d
