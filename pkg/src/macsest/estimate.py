"""Orthogonal matching pursuit over the angular-grid dictionary."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import PathComponent, PathSet, Position, VirtualAngles
from .grid import AngleGrid, unflatten_array
from .measure import MeasurementOperator, MeasurementPlan, OperatorMode

logger = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    """The least-squares Gram matrix of the selected atoms is rank deficient."""


@dataclass(frozen=True)
class OmpConfig:
    """Stopping rule and regularisation for :func:`omp`.

    ``k_max`` defaults to ``4 * expected_paths``.
    """

    epsilon0: float = 0.1
    k_max: int | None = None
    ridge: float = 0.0
    expected_paths: int = 8

    def __post_init__(self):
        if not 0 < self.epsilon0 <= 1:
            raise ValueError("epsilon0 must lie in (0, 1]")
        if self.k_max is None:
            object.__setattr__(self, "k_max", 4 * self.expected_paths)
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")


@dataclass(frozen=True)
class SparseEstimate:
    support: tuple[int, ...]
    coeffs: tuple[complex, ...]
    residual_history: tuple[float, ...]
    grid_n: int

    def __post_init__(self):
        if len(self.support) != len(self.coeffs):
            raise ValueError("support and coefficients differ in length")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support indices must be distinct")

    @property
    def iterations(self) -> int:
        return len(self.residual_history)

    def dense(self) -> np.ndarray:
        """Full length ``N**4`` path-response vector."""
        u = np.zeros(self.grid_n**4, dtype=complex)
        if self.support:
            u[np.asarray(self.support) - 1] = self.coeffs
        return u

    def to_json(self) -> str:
        return json.dumps(
            {
                "support": [int(s) for s in self.support],
                "coeffs": [[complex(c).real, complex(c).imag] for c in self.coeffs],
                "residuals": [float(r) for r in self.residual_history],
                "grid_n": int(self.grid_n),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SparseEstimate":
        doc = json.loads(text)
        return cls(
            tuple(int(s) for s in doc["support"]),
            tuple(complex(re, im) for re, im in doc["coeffs"]),
            tuple(float(r) for r in doc["residuals"]),
            int(doc["grid_n"]),
        )


@dataclass(frozen=True)
class EstimatedChannel(PathSet):
    """Grid-locked paths recovered by :func:`omp`."""


def _solve_gram(gram: np.ndarray, rhs: np.ndarray, ridge: float) -> np.ndarray:
    k = len(gram)
    a = gram + ridge * np.eye(k)
    w, V = np.linalg.eigh(a)
    tol = max(k, 1) * np.finfo(float).eps * max(abs(w).max(), 1.0) * 1e3
    if w.min() <= tol:
        raise SingularSystemError(
            f"selected atoms are numerically collinear (min eigenvalue {w.min():.3e}); "
            "use a positive ridge"
        )
    return V @ ((V.conj().T @ rhs) / w)


def omp(
    op: MeasurementOperator,
    v,
    transmit_power: float = 1.0,
    cfg: OmpConfig | None = None,
) -> SparseEstimate:
    """Recover the sparse path-response vector from observations ``v``.

    Each iteration picks the unselected atom most correlated with the
    residual (ties to the smallest index), refits all selected coefficients
    by least squares and stops once ``||r|| / ||v|| < epsilon0`` or after
    ``k_max`` atoms.

    Parameters
    ----------
    op : MeasurementOperator
    v : array_like, shape (M,)
        Received pilots ``sqrt(p_t) Psi u + noise``.
    transmit_power : float
    cfg : OmpConfig, optional

    Returns
    -------
    SparseEstimate
        Coefficients are in channel units, i.e. already divided by
        ``sqrt(p_t)``.
    """
    cfg = cfg or OmpConfig()
    if not transmit_power > 0:
        raise ValueError("transmit power must be positive")
    v = np.asarray(v, dtype=complex)
    if v.shape != (op.M,):
        raise ValueError(f"expected {op.M} observations, got {v.shape}")
    v_norm = np.linalg.norm(v)
    if v_norm == 0:
        return SparseEstimate((), (), (), op.grid.n)

    k_max = min(cfg.k_max, op.grid.size, op.M if cfg.ridge == 0 else op.grid.size)
    selected = np.zeros(op.grid.size, dtype=bool)
    support: list[int] = []
    cols = np.empty((op.M, 0), dtype=complex)
    gram = np.empty((0, 0), dtype=complex)
    proj = np.empty(0, dtype=complex)
    history: list[float] = []
    residual = v
    x = np.empty(0, dtype=complex)

    for _ in range(k_max):
        corr = np.abs(op.adjoint_apply(residual))
        corr[selected] = -1.0
        j = int(np.argmax(corr)) + 1
        selected[j - 1] = True
        support.append(j)

        new = op.columns([j])
        cross = cols.conj().T @ new
        diag = new.conj().T @ new
        gram = np.block([[gram, cross], [cross.conj().T, diag]])
        cols = np.hstack([cols, new])
        proj = np.append(proj, new[:, 0].conj() @ v)

        x = _solve_gram(gram, proj, cfg.ridge)
        residual = v - cols @ x
        eps = float(np.linalg.norm(residual) / v_norm)
        history.append(eps)
        logger.debug("omp iter %d: atom %d, eps %.4g", len(support), j, eps)
        if eps < cfg.epsilon0:
            break

    coeffs = x / np.sqrt(transmit_power)
    return SparseEstimate(
        tuple(support), tuple(complex(c) for c in coeffs), tuple(history), op.grid.n
    )


def extract_paths(est: SparseEstimate, grid=None) -> EstimatedChannel:
    """Map support atoms back to grid angles paired with their coefficients."""
    grid = grid if grid is not None else AngleGrid(est.grid_n)
    if not isinstance(grid, AngleGrid):
        grid = AngleGrid(int(grid))
    if grid.n != est.grid_n:
        raise ValueError("grid does not match the estimate")
    if not est.support:
        return EstimatedChannel(())
    ntx, nty, nrx, nry = unflatten_array(np.asarray(est.support), grid.n)
    vals = grid.values
    paths = tuple(
        PathComponent(
            VirtualAngles(float(vals[ntx[i] - 1]), float(vals[nty[i] - 1])),
            VirtualAngles(float(vals[nrx[i] - 1]), float(vals[nry[i] - 1])),
            complex(est.coeffs[i]),
        )
        for i in range(len(est.support))
    )
    return EstimatedChannel(paths)


def reconstruct(ec: PathSet, t: Position, r: Position) -> complex:
    return ec.response(t, r)


def vectorization_consistency_check(
    n: int, trials: int = 10, rng: np.random.Generator | None = None, sparsity: int = 3
) -> bool:
    """Compare the explicit sensing matrix against direct discrete-channel sums.

    For random sparse path-response vectors and random position pairs,
    ``Psi @ u`` must equal the grid-channel response summed path by path
    over the unflattened support.
    """
    if n > 4:
        raise ValueError("consistency check is meant for small grids (n <= 4)")
    rng = rng or np.random.default_rng(0)
    grid = AngleGrid(n)
    for _ in range(trials):
        M = 6
        tx = rng.uniform(-1, 1, (M, 2))
        rx = rng.uniform(-1, 1, (M, 2))
        plan = MeasurementPlan(tx, rx)
        op = MeasurementOperator(plan, grid, OperatorMode.EXPLICIT)
        k = int(rng.integers(0, min(sparsity, grid.size) + 1))
        u = np.zeros(grid.size, dtype=complex)
        idx = rng.choice(grid.size, size=k, replace=False)
        u[idx] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        via_matrix = op.to_dense() @ u
        est = SparseEstimate(
            tuple(int(i) + 1 for i in idx), tuple(u[idx]), (), n
        )
        ec = extract_paths(est, grid)
        direct = np.array(
            [
                reconstruct(ec, Position(*tx[m]), Position(*rx[m]))
                for m in range(M)
            ]
        )
        if not np.allclose(via_matrix, direct, rtol=0, atol=1e-10):
            return False
    return True
