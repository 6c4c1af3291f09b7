"""Command-line entry point: simulate, recover, sweep, ingest-check, spectrum."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace

import numpy as np

from . import experiment as ex
from .io import IngestError, ingest_measured_rfi, read_sidecar, write_matrix_csv
from .metrics import nre, spectrum_freqs_hz, spectrum_map
from .model import CpiConfig, SignedCpi, build_dictionaries, build_threshold_schedule


def _base_config(args) -> ex.ExperimentConfig:
    if getattr(args, "config", None):
        return ex.load_config(args.config, full_scale=args.full_scale)
    n, m = ex.FULL_SCALE if args.full_scale else ex.DESK
    return ex.ExperimentConfig(cpi=CpiConfig(n, m))


def cmd_simulate(args) -> int:
    config = _base_config(args)
    if args.rfi is not None:
        config = replace(config, rfi_source=args.rfi)
    if args.inr is not None:
        config = replace(config, inr_db=args.inr)
    sim = ex.synthesize(config, args.sinr, args.seed)
    meta = {"cpi": asdict(config.cpi), "pulse_band_hz": list(config.pulse_band_hz),
            "sinr_db": sim.achieved[0], "inr_db": sim.achieved[1], "seed": args.seed,
            "rfi_source": config.rfi_source}
    np.savez(args.out, y=sim.y, z=sim.cpi.z.astype(np.int8),
             levels=sim.cpi.schedule.per_pri_levels, s_true=sim.s_true,
             meta=json.dumps(meta))
    print(f"wrote {args.out}: N={config.cpi.n_fast} M={config.cpi.m_slow} "
          f"SINR={sim.achieved[0]:.3f} dB")
    return 0


def _load_cpi(path):
    data = np.load(path)
    meta = json.loads(str(data["meta"]))
    cfg = CpiConfig(**meta["cpi"])
    sched = build_threshold_schedule(cfg)
    if not np.array_equal(sched.per_pri_levels, data["levels"]):
        raise ValueError(f"{path}: stored thresholds do not match the stored CPI config")
    cpi = SignedCpi(z=data["z"].astype(float), schedule=sched, config=cfg)
    return data, meta, cpi


def cmd_recover(args) -> int:
    data, meta, cpi = _load_cpi(args.input)
    band = tuple(meta.get("pulse_band_hz", (300e6, 1100e6)))
    base = ex.ExperimentConfig(cpi=cpi.config, pulse_band_hz=band, methods=(args.method,))
    opts = replace(base.solver, max_iter=args.max_iter, tol=args.tol, xi=args.xi)
    dicts = None
    if args.method != "DI":
        dicts = build_dictionaries(base.pulse(), cpi.config)
    s_hat, iters, conv = ex.recover(args.method, cpi, dicts, opts)
    msg = f"{args.method}: iterations={iters} converged={conv}"
    if "s_true" in data.files:
        msg += f" NRE={nre(data['s_true'], s_hat):.3f} dB"
    print(msg)
    if args.out:
        write_matrix_csv(args.out, s_hat[:, None], header=["s_hat"])
    return 0


def cmd_sweep(args) -> int:
    config = _base_config(args)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    if args.emit_timing:
        config = replace(config, emit_timing=True)
    records = ex.run_experiment(config, csv_path=args.out)
    failed = [r for r in records if r.error]
    for r in failed:
        print(f"failed: {r.method} sinr={r.sinr_db} seed={r.seed}: {r.error}", file=sys.stderr)
    for (method, sinr), med in sorted(ex.median_nre(records).items(), key=lambda kv: kv[0][1]):
        print(f"{method:8s} SINR={sinr:7.2f} dB  median NRE={med:8.3f} dB")
    if args.out:
        print(f"wrote {args.out} ({len(records)} records)")
    return 1 if failed and args.strict else 0


def cmd_ingest_check(args) -> int:
    try:
        meta = read_sidecar(args.path)
        rfi = ingest_measured_rfi(args.path)
    except IngestError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    finite = bool(np.all(np.isfinite(rfi)))
    print(f"ok: {rfi.shape[0]} x {rfi.shape[1]} fs={meta['fs_hz']:.6g} Hz "
          f"rms={np.sqrt(np.mean(rfi**2)):.6g} finite={finite}")
    return 0 if finite else 2


def cmd_spectrum(args) -> int:
    if args.rfi:
        y = ingest_measured_rfi(args.rfi)
        fs = float(read_sidecar(args.rfi)["fs_hz"])
    else:
        data = np.load(args.input)
        y = data["y"]
        fs = json.loads(str(data["meta"]))["cpi"]["fs_hz"]
    n_bins = args.bins or 4 * y.shape[0]
    spec = spectrum_map(y, n_bins)
    freqs = spectrum_freqs_hz(n_bins, fs)
    # one row per frequency bin: frequency, then one column per PRI
    table = np.column_stack([freqs, spec])
    header = ["freq_hz"] + [f"pri_{m}" for m in range(spec.shape[1])]
    write_matrix_csv(args.out, table, header=header)
    print(f"wrote {args.out}: {spec.shape[0]} bins x {spec.shape[1]} PRIs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onebit-spice",
                                description="One-bit weighted SPICE echo recovery tools")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize one CPI and write Y, Z and ground truth (.npz)")
    s.add_argument("--config", help="JSON experiment config (cpi, scene, pulse band)")
    s.add_argument("--full-scale", action="store_true", help="N=512, M=8192")
    s.add_argument("--sinr", type=float, default=-30.0)
    s.add_argument("--inr", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rfi", help="measured-RFI file to use instead of simulated tones")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("recover", help="run one method on a simulated CPI")
    r.add_argument("input", help=".npz written by simulate")
    r.add_argument("--method", choices=ex.METHODS, default="1bLIKES")
    r.add_argument("--max-iter", type=int, default=100)
    r.add_argument("--tol", type=float, default=1e-6)
    r.add_argument("--xi", type=float, default=None, help="default 0.4 M")
    r.add_argument("--out", help="CSV file for the recovered echo")
    r.set_defaults(func=cmd_recover)

    w = sub.add_parser("sweep", help="run a full experiment config and write the records CSV")
    w.add_argument("--config", help="JSON experiment config; desk defaults when omitted")
    w.add_argument("--full-scale", action="store_true", help="N=512, M=8192")
    w.add_argument("--workers", type=int, default=None)
    w.add_argument("--emit-timing", action="store_true",
                   help="fill runtime_ms (CSV is then no longer byte-reproducible)")
    w.add_argument("--strict", action="store_true", help="exit 1 if any cell failed")
    w.add_argument("--out", help="records CSV")
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("ingest-check", help="validate a measured-RFI file and its sidecar")
    c.add_argument("path")
    c.set_defaults(func=cmd_ingest_check)

    m = sub.add_parser("spectrum", help="write the per-PRI fast-time spectrum as CSV")
    src = m.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help=".npz written by simulate")
    src.add_argument("--rfi", help="measured-RFI file")
    m.add_argument("--bins", type=int, default=None, help="FFT length (default 4N)")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
