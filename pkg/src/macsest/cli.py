"""Command-line entry point: ``macsest {coherence,estimate,sweep,snr-map}``.

Exit codes: 0 success, 2 invalid configuration, 3 some sweep trials failed.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .harness import ExperimentConfig, child_seed
from .measure import Setup
from .metrics import SampleGrid, fpa_snr, max_snr, snr_map

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--region", type=float, default=2.0, help="region side R in wavelengths")
    p.add_argument("--grid-n", type=int, default=None, help="grid points per angle axis")
    p.add_argument("--paths", type=int, default=3)
    p.add_argument("--snr-db", type=float, default=20.0, help="p_t/noise in dB; 'inf' for noiseless")
    p.add_argument("--epsilon0", type=float, default=0.1)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--setup", choices=[s.value for s in Setup if s is not Setup.CUSTOM], default="random")
    p.add_argument("--spacing", type=float, default=None, help="deterministic-setup spacing")
    p.add_argument("--step", type=float, default=0.5, help="random-walk step")
    p.add_argument("--measurements", type=int, default=144)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metric-d", type=int, default=None)
    p.add_argument("--on-grid", action="store_true", help="draw path angles on the grid")
    p.add_argument("--full-scale", action="store_true", help="N=24, D=51, 1000 trials")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macsest",
        description="Compressed-sensing channel estimation for movable antennas.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coherence", help="mutual-coherence column of a setup")
    _common(p)
    p.add_argument("--n-ref", type=int, default=1)
    p.add_argument("--coherence-trials", type=int, default=1)

    p = sub.add_parser("estimate", help="run one trial and print its error report")
    _common(p)
    p.add_argument("--trial", type=int, default=0)

    p = sub.add_parser("sweep", help="Monte Carlo sweep over one axis")
    _common(p)
    p.add_argument("--axis", choices=harness.AXES, required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--timing", action="store_true", help="fill wall_ms (breaks reproducibility)")

    p = sub.add_parser("snr-map", help="SNR over all sample-position pairs")
    _common(p)
    p.add_argument("--trial", type=int, default=0)
    return parser


def config_from_args(args) -> ExperimentConfig:
    scale = dict(grid_n=24, metric_d=51, trials=1000) if args.full_scale else dict(
        grid_n=12, metric_d=11, trials=50
    )
    for name in ("grid_n", "metric_d", "trials"):
        if getattr(args, name) is not None:
            scale[name] = getattr(args, name)
    return ExperimentConfig(
        region=args.region,
        paths=args.paths,
        snr_db=args.snr_db,
        epsilon0=args.epsilon0,
        master_seed=args.seed,
        setup=Setup(args.setup),
        measurements=args.measurements,
        spacing=args.spacing,
        step=args.step,
        k_max=args.k_max,
        ridge=args.ridge,
        on_grid=args.on_grid,
        record_timing=getattr(args, "timing", False),
        **scale,
    )


def _emit(text: str, out: Path | None, suffix: str = "") -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = out if not suffix else out.with_name(out.stem + suffix + out.suffix)
    path.write_text(text)


def _stamp() -> str:
    return "generated " + datetime.datetime.now(datetime.timezone.utc).isoformat()


def cmd_coherence(args, cfg) -> int:
    rep = harness.coherence_report(cfg, args.n_ref, args.coherence_trials)
    if (args.format or "csv") == "json":
        doc = {
            "n_ref": rep.n_ref,
            "grid_n": rep.grid_n,
            "M": rep.M,
            "max_off_diagonal": rep.max_off_diagonal(),
            "abs_coherence": rep.abs_coherence.tolist(),
            "ideal_sinc": [{"p": p, "n": n, "value": s} for p, n, s in rep.sinc],
        }
        _emit(json.dumps(doc) + "\n", args.out)
    else:
        _emit(rep.to_csv(), args.out)
        if args.out:
            _emit(rep.sinc_csv(), args.out, "_sinc")
    return EXIT_OK


def cmd_estimate(args, cfg) -> int:
    seed = child_seed(cfg.master_seed, 0, args.trial)
    truth, plan, est, ec = harness._simulate(cfg, seed)
    sg = SampleGrid(cfg.metric_d, cfg.region)
    report = harness.error_report(truth, ec, sg)
    doc = report.as_dict()
    doc.update(
        seed=seed,
        M=plan.M,
        omp_iters=est.iterations,
        estimate=json.loads(est.to_json()),
        channel=json.loads(truth.to_json()),
    )
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args, cfg) -> int:
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    values = [float(v) if args.axis == "SNR" else int(v) for v in values]
    results = harness.sweep_records(cfg, args.axis, values, args.workers)
    failed = sum(r.failed for _, r in results)
    if (args.format or "csv") == "json":
        doc = {
            "trials": [dict(value=v, **r.__dict__) for v, r in results],
            "aggregate": harness.aggregate(args.axis, results),
        }
        _emit(json.dumps(doc) + "\n", args.out)
    else:
        _emit(harness.sweep_csv(args.axis, results, _stamp()), args.out)
        if args.out:
            agg = harness.aggregate(args.axis, results)
            _emit(harness.aggregate_csv(agg, _stamp()), args.out, "_aggregate")
    if failed:
        print(f"{failed} of {len(results)} trials failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_snr_map(args, cfg) -> int:
    seed = child_seed(cfg.master_seed, 0, args.trial)
    truth, plan, est, ec = harness._simulate(cfg, seed)
    sg = SampleGrid(cfg.metric_d, cfg.region)
    noise = cfg.noise()
    best, t, r = max_snr(truth, sg, noise)
    achieved, te, re_ = max_snr(ec, sg, noise, truth=truth)
    summary = {
        "seed": seed,
        "max_snr": best,
        "max_snr_tx": [t.x, t.y],
        "max_snr_rx": [r.x, r.y],
        "achieved_snr": achieved,
        "achieved_tx": [te.x, te.y],
        "achieved_rx": [re_.x, re_.y],
        "fpa_snr": fpa_snr(truth, noise),
    }
    if (args.format or "csv") == "json":
        _emit(json.dumps(summary) + "\n", args.out)
        return EXIT_OK
    pts = sg.points
    perfect = snr_map(truth, sg, noise)
    estimated = snr_map(ec, sg, noise) if len(ec) else np.zeros_like(perfect)
    lines = ["tx_x,tx_y,rx_x,rx_y,snr_perfect,snr_estimated"]
    for i, tp in enumerate(pts):
        for k, rp in enumerate(pts):
            lines.append(
                ",".join(
                    harness.fmt(x)
                    for x in (tp[0], tp[1], rp[0], rp[1], perfect[i, k], estimated[i, k])
                )
            )
    _emit("\n".join(lines) + "\n", args.out)
    print(json.dumps(summary), file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "coherence": cmd_coherence,
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "snr-map": cmd_snr_map,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](args, cfg)
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
