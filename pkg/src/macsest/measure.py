"""Measurement-position setups, the sensing operator and its coherence.

Row ``m`` of the sensing matrix is ``kron(g(t_m), conj(f(r_m)))`` over the
grid dictionary, so every row factors into a Tx part and an Rx part of
length ``N**2`` each. :class:`MeasurementOperator` keeps only those two
``(M, N**2)`` factors and never forms the ``(M, N**4)`` matrix unless asked.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .channel import Position
from .grid import AngleGrid, unflatten

EXPLICIT_LIMIT = 2**26


class Setup(str, enum.Enum):
    UPA = "upa"
    EDGE = "edge"
    CROSS = "cross"
    RANDOM = "random"
    WALK = "walk"
    CUSTOM = "custom"


class OperatorMode(str, enum.Enum):
    EXPLICIT = "explicit"
    MATRIX_FREE = "matrix_free"


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float).reshape(-1, 2)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MeasurementPlan:
    """Ordered Tx/Rx position pairs, one per measurement slot.

    ``tx`` and ``rx`` are read-only ``(M, 2)`` arrays in wavelengths.
    """

    tx: np.ndarray
    rx: np.ndarray
    setup: Setup = Setup.CUSTOM
    region: float = 2.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        tx, rx = _readonly(self.tx), _readonly(self.rx)
        if len(tx) != len(rx):
            raise ValueError("tx and rx position lists differ in length")
        if len(tx) < 1:
            raise ValueError("a plan needs at least one measurement")
        half = self.region / 2.0 + 1e-9
        if np.any(np.abs(tx) > half) or np.any(np.abs(rx) > half):
            raise ValueError("plan positions leave the region")
        object.__setattr__(self, "tx", tx)
        object.__setattr__(self, "rx", rx)
        object.__setattr__(self, "setup", Setup(self.setup))

    def __len__(self) -> int:
        return len(self.tx)

    @property
    def M(self) -> int:
        return len(self.tx)

    @property
    def pairs(self) -> list[tuple[Position, Position]]:
        return [
            (Position(float(t[0]), float(t[1])), Position(float(r[0]), float(r[1])))
            for t, r in zip(self.tx, self.rx)
        ]

    def permuted(self, order) -> "MeasurementPlan":
        order = np.asarray(order)
        return MeasurementPlan(
            self.tx[order], self.rx[order], self.setup, self.region, dict(self.params)
        )

    def travel_distance(self) -> float:
        """Total Tx plus Rx path length when visiting pairs in plan order."""
        dt = np.linalg.norm(np.diff(self.tx, axis=0), axis=1).sum()
        dr = np.linalg.norm(np.diff(self.rx, axis=0), axis=1).sum()
        return float(dt + dr)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "tx_x", "tx_y", "rx_x", "rx_y"])
        for m, (t, r) in enumerate(zip(self.tx, self.rx), start=1):
            w.writerow([m] + [repr(float(v)) for v in (t[0], t[1], r[0], r[1])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, region: float = 2.0) -> "MeasurementPlan":
        rows = list(csv.DictReader(io.StringIO(text)))
        tx = [[float(r["tx_x"]), float(r["tx_y"])] for r in rows]
        rx = [[float(r["rx_x"]), float(r["rx_y"])] for r in rows]
        return cls(tx, rx, Setup.CUSTOM, region)

    def to_json(self) -> str:
        return json.dumps(
            {
                "setup": self.setup.value,
                "region": self.region,
                "params": self.params,
                "tx": self.tx.tolist(),
                "rx": self.rx.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MeasurementPlan":
        doc = json.loads(text)
        return cls(doc["tx"], doc["rx"], Setup(doc["setup"]), doc["region"], doc["params"])


# -- deterministic setups -----------------------------------------------------


def _lattice(region: float, spacing: float, span_steps: float) -> np.ndarray:
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    k = span_steps / spacing
    if abs(k - round(k)) > 1e-9 or round(k) < 1:
        raise ValueError(
            f"spacing {spacing} does not divide {span_steps} an integer number of times"
        )
    k = int(round(k))
    w = region * (np.arange(k + 1) / k - 0.5)
    w[np.abs(w) < 1e-12] = 0.0
    return w


def _product_plan(points: np.ndarray, setup: Setup, region: float, params) -> MeasurementPlan:
    """Rx visits every point for each Tx point (Tx-major ordering)."""
    n = len(points)
    tx = np.repeat(points, n, axis=0)
    rx = np.tile(points, (n, 1))
    return MeasurementPlan(tx, rx, setup, region, params)


def upa_points(region: float, spacing: float) -> np.ndarray:
    w = _lattice(region, spacing, region)
    xx, yy = np.meshgrid(w, w, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def edge_points(region: float, spacing: float) -> np.ndarray:
    """Uniform lattice along the square boundary, corners once, counter-clockwise."""
    perimeter = 4.0 * region
    count = perimeter / spacing if spacing > 0 else 0
    if not spacing > 0 or abs(count - round(count)) > 1e-9 or round(count) < 4:
        raise ValueError(f"spacing {spacing} does not tile the perimeter {perimeter}")
    count = int(round(count))
    half = region / 2.0
    s = np.arange(count) * (perimeter / count)
    side, off = np.divmod(s, region)
    # snap arc-length rounding onto the next corner
    wrap = np.isclose(off, region, atol=1e-9)
    side[wrap] += 1
    off[wrap] = 0.0
    off[np.isclose(off, 0.0, atol=1e-9)] = 0.0
    pts = np.empty((count, 2))
    for i, (sd, o) in enumerate(zip(side.astype(int), off)):
        if sd == 0:
            pts[i] = (-half + o, -half)
        elif sd == 1:
            pts[i] = (half, -half + o)
        elif sd == 2:
            pts[i] = (half - o, half)
        else:
            pts[i] = (-half, half - o)
    pts[np.abs(pts) < 1e-12] = 0.0
    return pts


def cross_points(region: float, spacing: float) -> np.ndarray:
    """Lattice points on both coordinate axes; the origin, if on the lattice, once."""
    w = _lattice(region, spacing, region)
    pts = [(x, 0.0) for x in w] + [(0.0, y) for y in w if y != 0.0]
    return np.array(pts, dtype=float)


def gen_upa(region: float, spacing: float) -> MeasurementPlan:
    return _product_plan(
        upa_points(region, spacing), Setup.UPA, region, {"spacing": spacing}
    )


def gen_edge(region: float, spacing: float) -> MeasurementPlan:
    return _product_plan(
        edge_points(region, spacing), Setup.EDGE, region, {"spacing": spacing}
    )


def gen_cross(region: float, spacing: float) -> MeasurementPlan:
    return _product_plan(
        cross_points(region, spacing), Setup.CROSS, region, {"spacing": spacing}
    )


def spacing_for_measurements(setup, region: float, M: int) -> float:
    """Deterministic-setup spacing that yields exactly ``M`` measurements."""
    setup = Setup(setup)
    if setup is Setup.UPA:
        side = round(M**0.25)
        if side**4 != M or side < 2:
            raise ValueError(f"UPA setup needs M = k**4 with k >= 2, got {M}")
        return region / (side - 1)
    root = round(M**0.5)
    if root * root != M:
        raise ValueError(f"{setup.value} setup needs a square M, got {M}")
    if setup is Setup.EDGE:
        if root < 4:
            raise ValueError("edge setup needs M >= 16")
        return 4.0 * region / root
    if setup is Setup.CROSS:
        # an even number of points per axis keeps the origin off the lattice
        if root < 4 or root % 4 != 0:
            raise ValueError(f"cross setup needs sqrt(M) divisible by 4, got M={M}")
        return 2.0 * region / (root - 2)
    raise ValueError(f"{setup.value} is not a deterministic setup")


# -- random setups ------------------------------------------------------------


def gen_random(region: float, M: int, rng: np.random.Generator) -> MeasurementPlan:
    if int(M) != M or M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    half = region / 2.0
    coords = rng.uniform(-half, half, size=(M, 4))
    return MeasurementPlan(coords[:, :2], coords[:, 2:], Setup.RANDOM, region, {"M": M})


def _bounce(x: float, half: float) -> float:
    while x > half or x < -half:
        x = 2 * half - x if x > half else -2 * half - x
    return x


def gen_random_walk(
    region: float, M: int, step: float, rng: np.random.Generator
) -> MeasurementPlan:
    """Fixed-length random steps from the origin, reflected at the boundary.

    Tx and Rx walk independently; reflection acts per coordinate.
    """
    if int(M) != M or M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if not 0 < step <= region:
        raise ValueError(f"step must lie in (0, {region}], got {step}")
    half = region / 2.0
    alpha = rng.uniform(0.0, 2 * np.pi, size=(M - 1, 2))
    pos = np.zeros((M, 2, 2))  # [m, antenna(tx, rx), coord]
    dirs = np.stack([np.cos(alpha), np.sin(alpha)], axis=-1) * step
    for m in range(1, M):
        raw = pos[m - 1] + dirs[m - 1]
        for a in range(2):
            for c in range(2):
                pos[m, a, c] = _bounce(raw[a, c], half)
    return MeasurementPlan(
        pos[:, 0], pos[:, 1], Setup.WALK, region, {"M": M, "step": step}
    )


# -- sensing operator ---------------------------------------------------------


def _check_grid(grid) -> AngleGrid:
    return grid if isinstance(grid, AngleGrid) else AngleGrid(int(grid))


def _planar_factor(xy: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """``(M, N**2)`` factor with column ``N*(ny-1) + nx-1`` = ``exp(j2pi(x phi_nx + y phi_ny))``."""
    gx = np.exp(2j * np.pi * np.outer(xy[:, 0], vals))
    gy = np.exp(2j * np.pi * np.outer(xy[:, 1], vals))
    return (gy[:, :, None] * gx[:, None, :]).reshape(len(xy), -1)


class MeasurementOperator:
    """Sensing matrix over the grid dictionary for one measurement plan.

    Parameters
    ----------
    plan : MeasurementPlan
    grid : AngleGrid or int
    mode : OperatorMode
        ``MATRIX_FREE`` (default) keeps only the Tx and Rx factors;
        ``EXPLICIT`` materialises the full matrix and is refused above
        ``2**26`` entries.
    """

    def __init__(self, plan: MeasurementPlan, grid, mode=OperatorMode.MATRIX_FREE):
        self.plan = plan
        self.grid = _check_grid(grid)
        self.mode = OperatorMode(mode)
        vals = self.grid.values
        self._tx = _planar_factor(plan.tx, vals)
        self._rx = _planar_factor(plan.rx, vals).conj()
        self._tx.setflags(write=False)
        self._rx.setflags(write=False)
        self._dense = None
        if self.mode is OperatorMode.EXPLICIT:
            if self.M * self.grid.size > EXPLICIT_LIMIT:
                raise ValueError(
                    f"explicit operator of {self.M} x {self.grid.size} exceeds {EXPLICIT_LIMIT} entries"
                )
            self._dense = self.to_dense()
            self._dense.setflags(write=False)

    @property
    def M(self) -> int:
        return self.plan.M

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M, self.grid.size)

    def to_dense(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense
        return (self._tx[:, :, None] * self._rx[:, None, :]).reshape(self.M, -1)

    def row(self, m: int) -> np.ndarray:
        """0-based row ``m`` as a length ``N**4`` vector."""
        return np.kron(self._tx[m], self._rx[m])

    def columns(self, idx) -> np.ndarray:
        """Columns for 1-based flat indices ``idx``, shape ``(M, len(idx))``."""
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        if np.any(idx < 1) or np.any(idx > self.grid.size):
            raise ValueError("column index out of range")
        tx_col, rx_col = np.divmod(idx - 1, self.grid.n**2)
        return self._tx[:, tx_col] * self._rx[:, rx_col]

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=complex)
        if u.shape != (self.grid.size,):
            raise ValueError(f"expected vector of length {self.grid.size}, got {u.shape}")
        if self._dense is not None:
            return self._dense @ u
        n2 = self.grid.n**2
        return np.einsum("mc,mc->m", self._tx @ u.reshape(n2, n2), self._rx)

    def adjoint_apply(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        if y.shape != (self.M,):
            raise ValueError(f"expected vector of length {self.M}, got {y.shape}")
        if self._dense is not None:
            return self._dense.conj().T @ y
        return ((self._tx.conj() * y[:, None]).T @ self._rx.conj()).ravel()


def apply(op: MeasurementOperator, u) -> np.ndarray:
    return op.apply(u)


def adjoint_apply(op: MeasurementOperator, y) -> np.ndarray:
    return op.adjoint_apply(y)


# -- coherence ----------------------------------------------------------------


def mutual_coherence_column(op: MeasurementOperator, n_ref: int) -> np.ndarray:
    """Column ``n_ref`` (1-based) of ``C = Psi^H Psi / M``.

    Phases are differenced before exponentiation, so the reference entry
    is a sum of exact ones and equals 1 without roundoff.
    """
    if not 1 <= n_ref <= op.grid.size:
        raise ValueError(f"reference column {n_ref} outside [1, {op.grid.size}]")
    ntx, nty, nrx, nry = unflatten(n_ref, op.grid.n).as_tuple()
    vals = op.grid.values
    tx, rx = op.plan.tx, op.plan.rx
    gx = np.exp(2j * np.pi * np.outer(tx[:, 0], vals[ntx - 1] - vals))
    gy = np.exp(2j * np.pi * np.outer(tx[:, 1], vals[nty - 1] - vals))
    tdiff = (gy[:, :, None] * gx[:, None, :]).reshape(op.M, -1)
    gx = np.exp(2j * np.pi * np.outer(rx[:, 0], vals - vals[nrx - 1]))
    gy = np.exp(2j * np.pi * np.outer(rx[:, 1], vals - vals[nry - 1]))
    rdiff = (gy[:, :, None] * gx[:, None, :]).reshape(op.M, -1)
    return (tdiff.T @ rdiff).ravel() / op.M


def effective_coherence_1d(positions, grid) -> np.ndarray:
    """``C[k, k'] = mean_m exp(j 2 pi x_m (phi_k' - phi_k))`` along one axis."""
    grid = _check_grid(grid)
    x = np.asarray(positions, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("positions must be non-empty")
    vals = grid.values
    offsets = vals[None, :] - vals[:, None]
    return np.exp(2j * np.pi * x[:, None, None] * offsets).mean(axis=0)


def sinc(x):
    """Unnormalised ``sin(x)/x`` with ``sinc(0) = 1``."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def ideal_sinc_coherence(region: float, grid, p: int) -> float:
    """Continuous-aperture coherence ``sinc(2 pi R p / N)`` at ``p`` grid steps."""
    grid = _check_grid(grid)
    if not 1 <= p <= grid.n - 1:
        raise ValueError(f"offset {p} outside [1, {grid.n - 1}]")
    return float(sinc(2 * np.pi * region * p / grid.n))


def main_lobe_halfwidth(row: np.ndarray, level: float = 0.5) -> int:
    """Grid steps from index 0 until ``|row|**2`` first drops below ``level``."""
    power = np.abs(np.asarray(row)) ** 2
    below = np.nonzero(power < level * power[0])[0]
    return int(below[0]) if below.size else len(power)


def first_null(row: np.ndarray) -> int:
    """Offset of the first local minimum of ``|row|`` after index 0."""
    mag = np.abs(np.asarray(row))
    for k in range(1, len(mag) - 1):
        if mag[k] <= mag[k - 1] and mag[k] <= mag[k + 1]:
            return k
    return len(mag) - 1
