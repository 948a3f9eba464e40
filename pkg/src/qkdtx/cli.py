"""Command-line interface.

Subcommands: simulate (one loss point), sweep (loss scan to CSV/JSON),
qrng (raw bytes plus statistics report), constellation (M-ary demodulation
report), compare (sweep table vs reference points). Exit codes: 0 success,
1 validation error, 2 reference-comparison failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import harness, optics, randomness
from .harness import ConfigError


def _write_or_print(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_experiment(args):
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.points is not None:
        if args.points < 1_000:
            raise ConfigError("--points must be >= 1e3")
        cfg.pulses_per_point = args.points
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load_experiment(args)
    session = harness.run_single_point(cfg, loss_db=args.loss_db)
    payload = {"config": cfg.to_dict(), "result": session.to_dict()}
    _write_or_print(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_experiment(args)
    table = harness.run_sweep(cfg, workers=args.workers)
    if args.format == "csv":
        _write_or_print(table.to_csv(), args.out)
    else:
        _write_or_print(json.dumps(table.to_dict(), indent=2) + "\n", args.out)
    return 0


def _cmd_qrng(args) -> int:
    n = args.points if args.points is not None else args.n
    if n < 1:
        raise ConfigError("qrng needs at least one sample")
    rng = np.random.Generator(np.random.PCG64(args.seed))
    samples = randomness.sample_interference(n, args.intensity, rng)
    samples = randomness.quantize(samples)
    report = randomness.analyze(samples, max_lag=args.lags)
    if args.out_bytes:
        Path(args.out_bytes).write_bytes(samples.bytes.tobytes())
    _write_or_print(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return 0


def _cmd_constellation(args) -> int:
    rng = np.random.Generator(np.random.PCG64(args.seed))
    report = optics.constellation_eye(args.levels, args.sigma, args.symbols, rng)
    payload = {
        "modulation_levels": report.modulation_levels,
        "n_symbols": len(report.points),
        "eye_levels": report.eye_levels.tolist(),
        "points": [{"radius": p.radius, "angle": p.angle} for p in report.points],
    }
    _write_or_print(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def _cmd_compare(args) -> int:
    table = harness.SweepTable.from_csv(Path(args.table).read_text())
    if args.references:
        refs = harness.load_reference_points(args.references)
    else:
        with resources.files("qkdtx.data").joinpath("reference_points.json").open() as f:
            refs = [harness.ReferencePoint(**e) for e in json.load(f)["references"]]
    if args.select:
        refs = [r for r in refs if args.select in r.label]
        if not refs:
            raise ConfigError(f"no reference labels match {args.select!r}")
    report = harness.compare_to_reference(table, refs)
    _write_or_print(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return 0 if report.all_passed else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qkdtx",
        description="Simulator for a modulator-free injection-locked QKD transmitter")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one loss point")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, default=None, help="override config seed")
    sim.add_argument("--points", type=int, default=None,
                     help="override pulses/pairs per point")
    sim.add_argument("--loss-db", type=float, default=None)
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=_cmd_simulate)

    sw = sub.add_parser("sweep", help="run the configured loss sweep")
    sw.add_argument("--config", required=True)
    sw.add_argument("--seed", type=int, default=None)
    sw.add_argument("--points", type=int, default=None,
                    help="override pulses/pairs per point")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--format", choices=("csv", "json"), default="csv")
    sw.add_argument("--out", default=None)
    sw.set_defaults(func=_cmd_sweep)

    q = sub.add_parser("qrng", help="generate and validate quantum random bytes")
    q.add_argument("--n", type=int, default=1_025_000,
                   help="number of interference events")
    q.add_argument("--points", type=int, default=None, help="alias for --n")
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--intensity", type=float, default=1.0)
    q.add_argument("--lags", type=int, default=50)
    q.add_argument("--out-bytes", default=None, help="raw byte stream output path")
    q.add_argument("--out", default=None, help="JSON report output path")
    q.set_defaults(func=_cmd_qrng)

    c = sub.add_parser("constellation", help="M-ary phase constellation and eye")
    c.add_argument("--levels", type=int, default=8)
    c.add_argument("--sigma", type=float, default=0.0)
    c.add_argument("--symbols", type=int, default=4096)
    c.add_argument("--seed", type=int, required=True)
    c.add_argument("--out", default=None)
    c.set_defaults(func=_cmd_constellation)

    cmp_ = sub.add_parser("compare", help="compare a sweep table to references")
    cmp_.add_argument("--table", required=True, help="sweep CSV path")
    cmp_.add_argument("--references", default=None,
                      help="reference JSON (bundled defaults if omitted)")
    cmp_.add_argument("--select", default=None,
                      help="only references whose label contains this string "
                           "(e.g. 'dps-snspd')")
    cmp_.add_argument("--out", default=None)
    cmp_.set_defaults(func=_cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
