"""Uniform virtual-angle grid and the 4-D <-> flat index bijection.

All indices exposed here are 1-based to match the dictionary-column
numbering used throughout the package (``flat_index`` in ``[1, N**4]``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AngleGrid:
    """``n`` uniformly spaced virtual-angle points inside ``(-1, 1)``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid size must be an integer >= 2, got {self.n}")

    @property
    def spacing(self) -> float:
        return 2.0 / self.n

    @property
    def values(self) -> np.ndarray:
        """All grid values, index ``k-1`` holding ``grid_value(k)``."""
        k = np.arange(1, self.n + 1)
        return -1.0 + (2 * k - 1) / self.n

    @property
    def size(self) -> int:
        """Number of dictionary columns, ``N**4``."""
        return self.n**4


@dataclass(frozen=True)
class GridIndex4:
    ntx: int
    nty: int
    nrx: int
    nry: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.ntx, self.nty, self.nrx, self.nry)


def grid_value(grid: AngleGrid, k: int) -> float:
    """Virtual angle of 1-based grid point ``k``: ``-1 + (2k - 1)/N``."""
    if not 1 <= k <= grid.n:
        raise ValueError(f"grid index {k} outside [1, {grid.n}]")
    return -1.0 + (2 * k - 1) / grid.n


def quantize(grid: AngleGrid, v: float) -> int:
    """1-based index of the grid point nearest to ``v``.

    Exact midpoints resolve to the lower index.
    """
    if not np.isfinite(v) or abs(v) > 1.0:
        raise ValueError(f"virtual angle {v} outside [-1, 1]")
    # grid_value(k) = v  <=>  k = (N (v + 1) + 1) / 2
    pos = (grid.n * (v + 1.0) + 1.0) / 2.0
    k = int(np.ceil(pos - 0.5))
    return min(max(k, 1), grid.n)


def quantize_array(grid: AngleGrid, v) -> np.ndarray:
    """Vectorised :func:`quantize`; returns 1-based indices."""
    v = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(np.abs(v) > 1.0):
        raise ValueError("virtual angles must lie in [-1, 1]")
    k = np.ceil((grid.n * (v + 1.0) + 1.0) / 2.0 - 0.5).astype(int)
    return np.clip(k, 1, grid.n)


def flat_index(gi: GridIndex4, n: int) -> int:
    """Dictionary column of a 4-D grid coordinate.

    ``N^2 [N (nty - 1) + ntx - 1] + N (nry - 1) + nrx``
    """
    for name, val in zip(("ntx", "nty", "nrx", "nry"), gi.as_tuple()):
        if not 1 <= val <= n:
            raise ValueError(f"{name}={val} outside [1, {n}]")
    return n * n * (n * (gi.nty - 1) + gi.ntx - 1) + n * (gi.nry - 1) + gi.nrx


def unflatten(idx: int, n: int) -> GridIndex4:
    """Inverse of :func:`flat_index`."""
    if not 1 <= idx <= n**4:
        raise ValueError(f"flat index {idx} outside [1, {n ** 4}]")
    ntx, nty, nrx, nry = unflatten_array(np.array([idx]), n)
    return GridIndex4(int(ntx[0]), int(nty[0]), int(nrx[0]), int(nry[0]))


def unflatten_array(idx, n: int):
    """Vectorised :func:`unflatten`, returning ``(ntx, nty, nrx, nry)`` arrays."""
    z = np.asarray(idx, dtype=np.int64) - 1
    # column order, slowest to fastest: nty, ntx, nry, nrx
    nty, rem = np.divmod(z, n**3)
    ntx, rem = np.divmod(rem, n**2)
    nry, nrx = np.divmod(rem, n)
    return ntx + 1, nty + 1, nrx + 1, nry + 1
