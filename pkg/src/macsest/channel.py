"""Far-field field-response channel between two planar movable-antenna regions.

Lengths are in wavelengths throughout, so a phase is simply
``2*pi*(x*phi + y*theta)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Position:
    """Antenna location inside a square region, in wavelengths."""

    x: float
    y: float

    def in_region(self, region: float, tol: float = 1e-12) -> bool:
        half = region / 2.0
        return abs(self.x) <= half + tol and abs(self.y) <= half + tol

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class VirtualAngles:
    """Virtual azimuth ``cos(theta) sin(phi)`` and elevation ``sin(theta)``."""

    phi: float
    theta: float

    def __post_init__(self):
        for name in ("phi", "theta"):
            val = getattr(self, name)
            if not np.isfinite(val) or abs(val) > 1.0 + 1e-12:
                raise ValueError(f"virtual angle {name}={val} outside [-1, 1]")

    @classmethod
    def from_physical(cls, elevation: float, azimuth: float) -> "VirtualAngles":
        return cls(
            float(np.cos(elevation) * np.sin(azimuth)), float(np.sin(elevation))
        )


@dataclass(frozen=True)
class PathComponent:
    aod: VirtualAngles
    aoa: VirtualAngles
    coeff: complex

    def __post_init__(self):
        if not np.isfinite(self.coeff):
            raise ValueError("path coefficient must be finite")


@dataclass(frozen=True)
class PathSet:
    """A finite set of paths with a diagonal path-response matrix.

    Base of both the true channel and the grid-locked estimate; every
    consumer that needs ``h(t, r)`` only relies on this interface.
    """

    paths: tuple[PathComponent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def aod(self) -> np.ndarray:
        """``(L, 2)`` array of virtual AoDs."""
        return np.array([[p.aod.phi, p.aod.theta] for p in self.paths]).reshape(-1, 2)

    @property
    def aoa(self) -> np.ndarray:
        return np.array([[p.aoa.phi, p.aoa.theta] for p in self.paths]).reshape(-1, 2)

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([p.coeff for p in self.paths], dtype=complex)

    def response(self, t: Position, r: Position) -> complex:
        return channel_response(self, t, r)

    def response_matrix(self, tx_xy, rx_xy) -> np.ndarray:
        """Responses for every pair, shape ``(len(tx_xy), len(rx_xy))``."""
        return response_matrix(self.aod, self.aoa, self.coeffs, tx_xy, rx_xy)

    def scaled(self, alpha: complex) -> "PathSet":
        return type(self)(
            paths=tuple(PathComponent(p.aod, p.aoa, alpha * p.coeff) for p in self.paths)
        )


@dataclass(frozen=True)
class ChannelRealization(PathSet):
    rng_seed: int = 0

    def __post_init__(self):
        super().__post_init__()
        if len(self.paths) < 1:
            raise ValueError("a channel realization needs at least one path")

    def scaled(self, alpha: complex) -> "ChannelRealization":
        return ChannelRealization(
            tuple(PathComponent(p.aod, p.aoa, alpha * p.coeff) for p in self.paths),
            self.rng_seed,
        )

    def to_json(self) -> str:
        doc = {
            "seed": int(self.rng_seed),
            "paths": [
                {
                    "aod": [p.aod.phi, p.aod.theta],
                    "aoa": [p.aoa.phi, p.aoa.theta],
                    "coeff": [complex(p.coeff).real, complex(p.coeff).imag],
                }
                for p in self.paths
            ],
        }
        # json emits repr() floats, which round-trip exactly
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        doc = json.loads(text)
        paths = tuple(
            PathComponent(
                VirtualAngles(*p["aod"]),
                VirtualAngles(*p["aoa"]),
                complex(p["coeff"][0], p["coeff"][1]),
            )
            for p in doc["paths"]
        )
        return cls(paths, int(doc["seed"]))


@dataclass(frozen=True)
class NoiseModel:
    transmit_power: float = 1.0
    noise_power: float = 0.01

    def __post_init__(self):
        if not self.transmit_power > 0:
            raise ValueError("transmit power must be positive")
        if not self.noise_power >= 0:
            raise ValueError("noise power must be non-negative")

    @classmethod
    def from_snr_db(cls, snr_db: float, transmit_power: float = 1.0) -> "NoiseModel":
        return cls(transmit_power, transmit_power / 10.0 ** (snr_db / 10.0))

    @property
    def snr(self) -> float:
        if self.noise_power == 0:
            return float("inf")
        return self.transmit_power / self.noise_power


def field_response_phase(pos: Position, angles: VirtualAngles) -> complex:
    """Unit-modulus phase ``exp(j 2 pi (x phi + y theta))``."""
    return complex(np.exp(2j * np.pi * (pos.x * angles.phi + pos.y * angles.theta)))


def steering(xy, angles) -> np.ndarray:
    """Phase terms for positions ``xy (P, 2)`` and angles ``(L, 2)`` -> ``(P, L)``."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    return np.exp(2j * np.pi * (xy @ angles.T))


def response_matrix(aod, aoa, coeffs, tx_xy, rx_xy) -> np.ndarray:
    """``H[i, k] = sum_l conj(f_l(r_k)) * c_l * g_l(t_i)`` for all tx ``i``, rx ``k``."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.size == 0:
        return np.zeros((len(np.atleast_2d(tx_xy)), len(np.atleast_2d(rx_xy))), complex)
    g = steering(tx_xy, aod)
    f = steering(rx_xy, aoa)
    return (g * coeffs) @ f.conj().T


def channel_response(ch: PathSet, t: Position, r: Position) -> complex:
    """``f(r)^H diag(coeffs) g(t)`` for a single position pair."""
    total = 0j
    for p in ch.paths:
        total += (
            field_response_phase(r, p.aoa).conjugate()
            * p.coeff
            * field_response_phase(t, p.aod)
        )
    return total


def complex_normal(rng: np.random.Generator, size, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples of the given variance."""
    g = rng.standard_normal((2,) + tuple(np.atleast_1d(size)))
    return (g[0] + 1j * g[1]) * np.sqrt(variance / 2.0)


def measure(
    ch: PathSet,
    t: Position,
    r: Position,
    noise: NoiseModel,
    rng: np.random.Generator,
) -> complex:
    """One noisy pilot observation, ``sqrt(p_t) h(t, r) + z`` with pilot ``s = 1``."""
    clean = np.sqrt(noise.transmit_power) * channel_response(ch, t, r)
    if noise.noise_power == 0:
        return clean
    return clean + complex(complex_normal(rng, 1, noise.noise_power)[0])


def measure_many(
    ch: PathSet,
    tx_xy,
    rx_xy,
    noise: NoiseModel,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorised observations at paired positions ``tx_xy[m], rx_xy[m]``.

    Noise for all ``M`` slots comes from one batched draw, so the stream
    differs from ``M`` calls to :func:`measure` but is equally reproducible.
    """
    tx_xy = np.atleast_2d(np.asarray(tx_xy, dtype=float))
    rx_xy = np.atleast_2d(np.asarray(rx_xy, dtype=float))
    g = steering(tx_xy, ch.aod)
    f = steering(rx_xy, ch.aoa)
    h = np.sum(g * ch.coeffs * f.conj(), axis=1)
    v = np.sqrt(noise.transmit_power) * h
    if noise.noise_power > 0:
        v = v + complex_normal(rng, len(v), noise.noise_power)
    return v


def sample_half_space(rng: np.random.Generator, size) -> tuple[np.ndarray, np.ndarray]:
    """Elevation/azimuth pairs with joint density ``cos(theta) / (2 pi)``.

    Elevation via the inverse CDF ``arcsin(2u - 1)``; azimuth uniform on
    ``[-pi/2, pi/2]``.
    """
    elevation = np.arcsin(2.0 * rng.random(size) - 1.0)
    azimuth = rng.uniform(-np.pi / 2, np.pi / 2, size)
    return elevation, azimuth


def to_virtual(elevation, azimuth) -> np.ndarray:
    """Physical angles to ``(..., 2)`` virtual angles ``(cos el sin az, sin el)``."""
    elevation = np.asarray(elevation, dtype=float)
    azimuth = np.asarray(azimuth, dtype=float)
    return np.stack([np.cos(elevation) * np.sin(azimuth), np.sin(elevation)], axis=-1)


def _build(aod, aoa, coeffs, seed) -> ChannelRealization:
    paths = tuple(
        PathComponent(
            VirtualAngles(float(aod[i, 0]), float(aod[i, 1])),
            VirtualAngles(float(aoa[i, 0]), float(aoa[i, 1])),
            complex(coeffs[i]),
        )
        for i in range(len(coeffs))
    )
    return ChannelRealization(paths, seed)


def random_channel(L: int, rng: np.random.Generator, seed: int = 0) -> ChannelRealization:
    """Geometry-model channel with ``L`` paths uniformly spread over the half-space.

    AoD and AoA of each path are drawn independently; coefficients are
    i.i.d. ``CN(0, 1/L)``. ``seed`` is stored for provenance only.
    """
    if int(L) != L or L < 1:
        raise ValueError(f"number of paths must be >= 1, got {L}")
    el_t, az_t = sample_half_space(rng, L)
    el_r, az_r = sample_half_space(rng, L)
    coeffs = complex_normal(rng, L, 1.0 / L)
    return _build(to_virtual(el_t, az_t), to_virtual(el_r, az_r), coeffs, seed)


def random_on_grid_channel(
    L: int, grid, rng: np.random.Generator, seed: int = 0
) -> ChannelRealization:
    """Channel whose ``L`` paths sit exactly on distinct dictionary atoms."""
    from .grid import unflatten_array

    if int(L) != L or L < 1:
        raise ValueError(f"number of paths must be >= 1, got {L}")
    if L > grid.size:
        raise ValueError("more paths than dictionary atoms")
    idx = rng.choice(grid.size, size=L, replace=False) + 1
    ntx, nty, nrx, nry = unflatten_array(idx, grid.n)
    vals = grid.values
    aod = np.stack([vals[ntx - 1], vals[nty - 1]], axis=1)
    aoa = np.stack([vals[nrx - 1], vals[nry - 1]], axis=1)
    coeffs = complex_normal(rng, L, 1.0 / L)
    return _build(aod, aoa, coeffs, seed)


def channel_from_arrays(aod, aoa, coeffs, seed: int = 0) -> ChannelRealization:
    aod = np.atleast_2d(np.asarray(aod, dtype=float))
    aoa = np.atleast_2d(np.asarray(aoa, dtype=float))
    return _build(aod, aoa, np.atleast_1d(np.asarray(coeffs, dtype=complex)), seed)


def positions_array(positions: Sequence[Position]) -> np.ndarray:
    return np.array([[p.x, p.y] for p in positions], dtype=float).reshape(-1, 2)
