"""Seeded Monte Carlo trials and parameter sweeps.

Every trial owns a child seed derived from ``(master_seed, value_index,
trial_index)`` through :class:`numpy.random.SeedSequence`, so trials can run
in any order or in parallel and still produce identical rows.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .channel import NoiseModel, measure_many, random_channel, random_on_grid_channel
from .estimate import OmpConfig, extract_paths, omp
from .grid import AngleGrid
from .measure import (
    MeasurementOperator,
    MeasurementPlan,
    Setup,
    gen_cross,
    gen_edge,
    gen_random,
    gen_random_walk,
    gen_upa,
    ideal_sinc_coherence,
    mutual_coherence_column,
    spacing_for_measurements,
)
from .metrics import SampleGrid, error_report, fpa_snr, max_snr

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "axis",
    "value",
    "trial",
    "seed",
    "nmse",
    "angle_error",
    "coeff_error",
    "achieved_snr",
    "max_snr",
    "fpa_snr",
    "omp_iters",
    "wall_ms",
)
AGGREGATE_COLUMNS = (
    "axis",
    "value",
    "trials",
    "failed",
    "nmse_mean",
    "nmse_se",
    "nmse_mean_nonempty",
    "angle_error_mean",
    "coeff_error_mean",
    "achieved_snr_mean",
    "max_snr_mean",
    "fpa_snr_mean",
)
AXES = ("M", "N", "SNR")
DETERMINISTIC = (Setup.UPA, Setup.EDGE, Setup.CROSS)


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation scenario. Field defaults are the full-scale values."""

    region: float = 2.0
    grid_n: int = 24
    paths: int = 3
    snr_db: float = 20.0
    epsilon0: float = 0.1
    trials: int = 1000
    master_seed: int = 0
    setup: Setup = Setup.RANDOM
    measurements: int = 144
    spacing: float | None = None
    step: float = 0.5
    metric_d: int = 51
    k_max: int | None = None
    ridge: float = 0.0
    on_grid: bool = False
    record_timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "setup", Setup(self.setup))
        if self.setup is Setup.CUSTOM:
            raise ValueError("the harness cannot generate custom plans")
        if self.region <= 0:
            raise ValueError("region must be positive")
        if self.paths < 1 or self.trials < 1 or self.measurements < 1:
            raise ValueError("paths, trials and measurements must be >= 1")
        AngleGrid(self.grid_n)
        SampleGrid(self.metric_d, self.region)
        self.omp_config()

    @classmethod
    def desk(cls, **overrides) -> "ExperimentConfig":
        base = dict(grid_n=12, metric_d=11, trials=50)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def noise(self) -> NoiseModel:
        return NoiseModel.from_snr_db(self.snr_db)

    def omp_config(self) -> OmpConfig:
        return OmpConfig(epsilon0=self.epsilon0, k_max=self.k_max, ridge=self.ridge)

    def resolved_spacing(self) -> float:
        if self.spacing is not None:
            return self.spacing
        return spacing_for_measurements(self.setup, self.region, self.measurements)


@dataclass
class TrialRecord:
    trial: int
    seed: int
    M: int
    N: int
    snr_db: float
    setup: str
    nmse: float = math.nan
    angle_error: float = math.nan
    coeff_error: float = math.nan
    achieved_snr_est_csi: float = math.nan
    max_snr_perfect_csi: float = math.nan
    fpa_snr: float = math.nan
    omp_iterations: int = 0
    wall_time_ms: float | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def child_seed(master_seed: int, value_index: int, trial_index: int) -> int:
    """64-bit seed from SeedSequence entropy ``[master, value_index, trial]``."""
    ss = np.random.SeedSequence([master_seed, value_index, trial_index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@lru_cache(maxsize=32)
def _deterministic_plan(setup: Setup, region: float, spacing: float) -> MeasurementPlan:
    builder = {Setup.UPA: gen_upa, Setup.EDGE: gen_edge, Setup.CROSS: gen_cross}[setup]
    return builder(region, spacing)


def make_plan(cfg: ExperimentConfig, rng: np.random.Generator) -> MeasurementPlan:
    if cfg.setup in DETERMINISTIC:
        return _deterministic_plan(cfg.setup, cfg.region, cfg.resolved_spacing())
    if cfg.setup is Setup.RANDOM:
        return gen_random(cfg.region, cfg.measurements, rng)
    return gen_random_walk(cfg.region, cfg.measurements, cfg.step, rng)


def _simulate(cfg: ExperimentConfig, seed: int):
    rng = np.random.default_rng(seed)
    grid = AngleGrid(cfg.grid_n)
    if cfg.on_grid:
        truth = random_on_grid_channel(cfg.paths, grid, rng, seed)
    else:
        truth = random_channel(cfg.paths, rng, seed)
    plan = make_plan(cfg, rng)
    noise = cfg.noise()
    v = measure_many(truth, plan.tx, plan.rx, noise, rng)
    op = MeasurementOperator(plan, grid)
    est = omp(op, v, noise.transmit_power, cfg.omp_config())
    return truth, plan, est, extract_paths(est, grid)


def run_trial(
    cfg: ExperimentConfig, trial_idx: int, value_idx: int = 0
) -> TrialRecord:
    """Run one seeded trial; module errors become a failed record."""
    seed = child_seed(cfg.master_seed, value_idx, trial_idx)
    rec = TrialRecord(
        trial=trial_idx,
        seed=seed,
        M=cfg.measurements,
        N=cfg.grid_n,
        snr_db=cfg.snr_db,
        setup=cfg.setup.value,
    )
    start = time.perf_counter()
    try:
        truth, plan, est, ec = _simulate(cfg, seed)
        rec.M = plan.M
        sg = SampleGrid(cfg.metric_d, cfg.region)
        noise = cfg.noise()
        report = error_report(truth, ec, sg)
        rec.nmse = report.nmse
        rec.angle_error = report.angle_error
        rec.coeff_error = report.coeff_error
        rec.omp_iterations = est.iterations
        if noise.noise_power > 0:
            rec.max_snr_perfect_csi = max_snr(truth, sg, noise)[0]
            rec.fpa_snr = fpa_snr(truth, noise)
            rec.achieved_snr_est_csi = (
                max_snr(ec, sg, noise, truth=truth)[0] if len(ec) else rec.fpa_snr
            )
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.warning("trial %d failed: %s", trial_idx, exc)
        rec.error = f"{type(exc).__name__}: {exc}"
    if cfg.record_timing:
        rec.wall_time_ms = (time.perf_counter() - start) * 1e3
    return rec


def axis_config(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "M":
        return cfg.replace(measurements=int(value), spacing=None)
    if axis == "N":
        return cfg.replace(grid_n=int(value))
    if axis == "SNR":
        return cfg.replace(snr_db=float(value))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


def _run_job(job):
    cfg, trial, vi = job
    return run_trial(cfg, trial, vi)


def sweep_records(
    cfg: ExperimentConfig, axis: str, values: Sequence, workers: int = 1
) -> list[tuple[object, TrialRecord]]:
    """All ``(value, record)`` pairs, ordered by value then trial."""
    if not len(values):
        raise ValueError("sweep needs at least one value")
    cfgs = [axis_config(cfg, axis, v) for v in values]
    jobs = [(c, t, vi) for vi, c in enumerate(cfgs) for t in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(_run_job, jobs, chunksize=4))
    else:
        recs = [_run_job(j) for j in jobs]
    return [(values[vi], r) for (_, _, vi), r in zip(jobs, recs)]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def sweep_rows(axis: str, results) -> list[list[str]]:
    rows = []
    for value, r in results:
        rows.append(
            [
                axis,
                fmt(value),
                str(r.trial),
                str(r.seed),
                fmt(r.nmse),
                fmt(r.angle_error),
                fmt(r.coeff_error),
                fmt(r.achieved_snr_est_csi),
                fmt(r.max_snr_perfect_csi),
                fmt(r.fpa_snr),
                str(r.omp_iterations),
                fmt(r.wall_time_ms),
            ]
        )
    return rows


def _mean(xs) -> float:
    xs = np.asarray([x for x in xs if np.isfinite(x)], dtype=float)
    return float(xs.mean()) if xs.size else math.nan


def _se(xs) -> float:
    xs = np.asarray([x for x in xs if np.isfinite(x)], dtype=float)
    return float(xs.std(ddof=1) / np.sqrt(xs.size)) if xs.size > 1 else math.nan


def aggregate(axis: str, results) -> list[dict]:
    """Per-value means; ``nmse_mean_nonempty`` drops trials with an empty estimate."""
    out = []
    values = []
    for v, _ in results:
        if v not in values:
            values.append(v)
    for v in values:
        recs = [r for vv, r in results if vv == v]
        ok = [r for r in recs if not r.failed]
        out.append(
            {
                "axis": axis,
                "value": v,
                "trials": len(recs),
                "failed": len(recs) - len(ok),
                "nmse_mean": _mean(r.nmse for r in ok),
                "nmse_se": _se(r.nmse for r in ok),
                "nmse_mean_nonempty": _mean(r.nmse for r in ok if r.omp_iterations > 0),
                "angle_error_mean": _mean(r.angle_error for r in ok),
                "coeff_error_mean": _mean(r.coeff_error for r in ok),
                "achieved_snr_mean": _mean(r.achieved_snr_est_csi for r in ok),
                "max_snr_mean": _mean(r.max_snr_perfect_csi for r in ok),
                "fpa_snr_mean": _mean(r.fpa_snr for r in ok),
            }
        )
    return out


def _csv(header, rows, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def sweep_csv(axis: str, results, comment: str | None = None) -> str:
    return _csv(SWEEP_COLUMNS, sweep_rows(axis, results), comment)


def aggregate_csv(agg: list[dict], comment: str | None = None) -> str:
    rows = [[fmt(a[c]) if c != "axis" else a[c] for c in AGGREGATE_COLUMNS] for a in agg]
    return _csv(AGGREGATE_COLUMNS, rows, comment)


def sweep(
    cfg: ExperimentConfig, axis: str, values: Sequence, workers: int = 1
) -> tuple[str, str]:
    """Trial CSV and aggregate CSV for a one-axis sweep (no header comment)."""
    results = sweep_records(cfg, axis, values, workers)
    return sweep_csv(axis, results), aggregate_csv(aggregate(axis, results))


# -- coherence ----------------------------------------------------------------


@dataclass
class CoherenceReport:
    abs_coherence: np.ndarray
    n_ref: int
    grid_n: int
    region: float
    M: int
    sinc: list[tuple[int, int, float]] = field(default_factory=list)

    def to_csv(self) -> str:
        rows = (
            [str(n), fmt(c)] for n, c in enumerate(self.abs_coherence, start=1)
        )
        return _csv(("n", "abs_coherence"), rows)

    def sinc_csv(self) -> str:
        return _csv(("p", "n", "ideal_sinc"), ([str(p), str(n), fmt(s)] for p, n, s in self.sinc))

    def max_off_diagonal(self) -> float:
        mags = np.delete(self.abs_coherence, self.n_ref - 1)
        return float(mags.max())


def coherence_report(
    cfg: ExperimentConfig, n_ref: int = 1, plans: int = 1
) -> CoherenceReport:
    """``|C[:, n_ref]|`` for the configured setup, plus the ideal sinc reference.

    Random setups draw ``plans`` independent plans (trial indices
    ``0..plans-1``) and average the magnitude.
    """
    if plans < 1:
        raise ValueError("plans must be >= 1")
    grid = AngleGrid(cfg.grid_n)
    acc = np.zeros(grid.size)
    count = 1 if cfg.setup in DETERMINISTIC else plans
    for k in range(count):
        rng = np.random.default_rng(child_seed(cfg.master_seed, 0, k))
        plan = make_plan(cfg, rng)
        acc += np.abs(mutual_coherence_column(MeasurementOperator(plan, grid), n_ref))
    n = grid.n
    sinc = [
        (p, p * n**3 + 1, ideal_sinc_coherence(cfg.region, grid, p)) for p in range(1, n)
    ]
    return CoherenceReport(acc / count, n_ref, n, cfg.region, plan.M, sinc)
