"""Estimation-quality metrics and SNR under position optimisation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channel import NoiseModel, PathSet, Position, response_matrix

# squared virtual-angle error charged per slot for a missed true path
MISS_PENALTY = 1.0
_STREAM_THRESHOLD = 512
_BLOCK = 256


class UndefinedMetricError(ValueError):
    pass


@dataclass(frozen=True)
class SampleGrid:
    """Uniform ``d x d`` lattice over ``[-R/2, R/2]**2``."""

    d: int = 51
    region: float = 2.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError("sample grid needs d >= 2 points per axis")

    @property
    def axis(self) -> np.ndarray:
        return -self.region / 2 + np.arange(self.d) * self.region / (self.d - 1)

    @property
    def points(self) -> np.ndarray:
        """``(d**2, 2)`` positions; index ``(ix) * d + iy`` so x is the major key."""
        xx, yy = np.meshgrid(self.axis, self.axis, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)


@dataclass(frozen=True)
class ErrorReport:
    nmse: float
    angle_error: float
    coeff_error: float
    matched_pairs: tuple[tuple[int, int], ...] = field(default=())

    def as_dict(self) -> dict:
        return {
            "nmse": self.nmse,
            "angle_error": self.angle_error,
            "coeff_error": self.coeff_error,
            "matched_pairs": [list(p) for p in self.matched_pairs],
        }


def _blocks(n: int, block: int):
    for start in range(0, n, block):
        yield slice(start, min(start + block, n))


def nmse(truth: PathSet, est: PathSet, sg: SampleGrid) -> float:
    """``||H - H_hat||_F^2 / ||H||_F^2`` over all sample-point pairs.

    The difference is evaluated as one combined path set (estimate with
    negated coefficients), in Tx row blocks once ``d**2`` exceeds 512.
    """
    pts = sg.points
    aod = np.vstack([truth.aod, est.aod])
    aoa = np.vstack([truth.aoa, est.aoa])
    diff_c = np.concatenate([truth.coeffs, -est.coeffs])
    block = len(pts) if len(pts) <= _STREAM_THRESHOLD else _BLOCK
    num = den = 0.0
    for sl in _blocks(len(pts), block):
        h = response_matrix(truth.aod, truth.aoa, truth.coeffs, pts[sl], pts)
        e = response_matrix(aod, aoa, diff_c, pts[sl], pts)
        den += float(np.vdot(h, h).real)
        num += float(np.vdot(e, e).real)
    if den == 0:
        raise UndefinedMetricError("true channel is identically zero on the sample grid")
    return num / den


def match_paths(truth: PathSet, est: PathSet) -> list[tuple[int, int]]:
    """Min-cost assignment of true to estimated paths by squared 4-angle distance."""
    if len(truth) == 0 or len(est) == 0:
        return []
    t = np.hstack([truth.aod, truth.aoa])
    e = np.hstack([est.aod, est.aoa])
    cost = ((t[:, None, :] - e[None, :, :]) ** 2).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    return sorted(zip(rows.tolist(), cols.tolist()))


def angle_error(truth: PathSet, est: PathSet, pairs=None) -> float:
    """Mean squared virtual-angle error over the four angles of each true path.

    Unmatched true paths are charged ``MISS_PENALTY`` per angle; surplus
    estimated atoms do not enter.
    """
    L = len(truth)
    if L < 1:
        raise UndefinedMetricError("truth has no paths")
    pairs = match_paths(truth, est) if pairs is None else pairs
    t = np.hstack([truth.aod, truth.aoa])
    total = MISS_PENALTY * 4 * (L - len(pairs))
    if pairs:
        e = np.hstack([est.aod, est.aoa])
        ti, ei = map(list, zip(*pairs))
        total += float(((t[ti] - e[ei]) ** 2).sum())
    return total / (4 * L)


def coeff_error(truth: PathSet, est: PathSet, pairs=None) -> float:
    """Coefficient NMSE under the angle matching, surplus estimate energy included."""
    energy = float(np.sum(np.abs(truth.coeffs) ** 2))
    if energy == 0:
        raise UndefinedMetricError("truth has zero coefficient energy")
    pairs = match_paths(truth, est) if pairs is None else pairs
    sigma_hat = np.zeros(len(truth), dtype=complex)
    used = np.zeros(len(est), dtype=bool)
    for ti, ei in pairs:
        sigma_hat[ti] = est.coeffs[ei]
        used[ei] = True
    num = float(np.sum(np.abs(truth.coeffs - sigma_hat) ** 2))
    num += float(np.sum(np.abs(est.coeffs[~used]) ** 2))
    return num / energy


def error_report(truth: PathSet, est: PathSet, sg: SampleGrid) -> ErrorReport:
    pairs = match_paths(truth, est)
    return ErrorReport(
        nmse=nmse(truth, est, sg),
        angle_error=angle_error(truth, est, pairs),
        coeff_error=coeff_error(truth, est, pairs),
        matched_pairs=tuple(pairs),
    )


def _power_argmax(ch: PathSet, pts: np.ndarray, rel_tol: float = 1e-12):
    """First (tx, rx) sample pair reaching the max of ``|h|**2`` within ``rel_tol``."""
    best = -1.0
    block = len(pts) if len(pts) <= _STREAM_THRESHOLD else _BLOCK
    powers = []
    for sl in _blocks(len(pts), block):
        p = np.abs(response_matrix(ch.aod, ch.aoa, ch.coeffs, pts[sl], pts)) ** 2
        powers.append(p)
        best = max(best, float(p.max()))
    threshold = best * (1.0 - rel_tol)
    offset = 0
    for p in powers:
        hit = np.flatnonzero(p >= threshold)
        if hit.size:
            ti, ri = divmod(int(hit[0]), len(pts))
            return offset + ti, ri
        offset += p.shape[0]
    raise AssertionError("unreachable")


def snr_at(ch: PathSet, t: Position, r: Position, noise: NoiseModel) -> float:
    h = ch.response(t, r)
    if noise.noise_power == 0:
        return float("inf") if h != 0 else 0.0
    return abs(h) ** 2 * noise.transmit_power / noise.noise_power


def max_snr(
    ch: PathSet,
    sg: SampleGrid,
    noise: NoiseModel,
    truth: PathSet | None = None,
) -> tuple[float, Position, Position]:
    """Exhaustive position search on the sample lattice.

    The argmax is taken on ``ch``. If ``truth`` is given (``ch`` being an
    estimate), the chosen positions are scored under ``truth`` instead,
    i.e. the SNR actually achieved with estimated CSI.
    """
    pts = sg.points
    ti, ri = _power_argmax(ch, pts)
    t = Position(float(pts[ti, 0]), float(pts[ti, 1]))
    r = Position(float(pts[ri, 0]), float(pts[ri, 1]))
    scorer = truth if truth is not None else ch
    return snr_at(scorer, t, r, noise), t, r


def fpa_snr(ch: PathSet, noise: NoiseModel) -> float:
    """Fixed antennas at both reference points."""
    origin = Position(0.0, 0.0)
    return snr_at(ch, origin, origin, noise)


def snr_map(ch: PathSet, sg: SampleGrid, noise: NoiseModel) -> np.ndarray:
    """``(d**2, d**2)`` SNR over every (tx sample, rx sample) pair."""
    pts = sg.points
    h = response_matrix(ch.aod, ch.aoa, ch.coeffs, pts, pts)
    if noise.noise_power == 0:
        raise UndefinedMetricError("SNR map needs a positive noise power")
    return np.abs(h) ** 2 * noise.transmit_power / noise.noise_power
