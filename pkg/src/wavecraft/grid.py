"""Discretised single-mode Hilbert space on a uniform quadrature grid.

Conventions (hbar = 1)::

    x = (a + a^dagger) / sqrt(2),   p = (a - a^dagger) / (i sqrt(2)),   [x, p] = i

Wave functions are sampled on a symmetric, uniform grid.  Every operator
returns a new :class:`WaveFunction`; nothing is mutated in place.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

#: Weight below which a state is treated as the null vector.
NULL_WEIGHT = 1e-12

DEFAULT_POINTS = 1024
DEFAULT_EXTENT = 12.0


class GridError(ValueError):
    """Raised for invalid grids or states that do not fit on a grid."""


class NullStateError(ArithmeticError):
    """Raised when an operation needs a non-null state and got the zero vector."""


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform sampling of one quadrature axis."""

    n_points: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.n_points < 2:
            raise GridError(f"need at least 2 grid points, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise GridError("x_max must exceed x_min")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def extent(self) -> float:
        return max(abs(self.x_min), abs(self.x_max))

    @property
    def p_nyquist(self) -> float:
        """Largest momentum resolved by the sampling, pi / spacing."""
        return np.pi / self.spacing

    @property
    def is_symmetric(self) -> bool:
        return np.isclose(self.x_min, -self.x_max)

    @cached_property
    def x(self) -> np.ndarray:
        i = np.arange(self.n_points)
        if self.is_symmetric:
            # odd integers times one float keep x[i] == -x[-1-i] exactly
            return (2 * i - (self.n_points - 1)) * (self.x_max / (self.n_points - 1))
        return self.x_min + i * self.spacing

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the FFT bins, Nyquist bin zeroed."""
        k = 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)
        if self.n_points % 2 == 0:
            k[self.n_points // 2] = 0.0
        return k


def make_grid(n_points: int = DEFAULT_POINTS, extent: float = DEFAULT_EXTENT,
              p_extent: float | None = None) -> QuadratureGrid:
    """Symmetric grid on ``[-extent, extent]``.

    If ``p_extent`` is given, the grid must resolve momenta up to it.
    """
    if not extent > 0:
        raise GridError(f"extent must be positive, got {extent}")
    if n_points < 2:
        raise GridError(f"need at least 2 grid points, got {n_points}")
    grid = QuadratureGrid(int(n_points), -float(extent), float(extent))
    if p_extent is not None and grid.p_nyquist <= p_extent:
        raise GridError(
            f"Nyquist momentum {grid.p_nyquist:.3g} does not exceed requested "
            f"momentum extent {p_extent:.3g}; use more points")
    return grid


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex amplitudes on a grid plus the accumulated raw squared norm.

    ``weight`` is tracked multiplicatively: an operator applied to a state of
    weight ``w`` yields weight ``w * |out|^2 / |in|^2``.  Normalising rescales
    the amplitudes but keeps ``weight``, so heralding probabilities survive.
    """

    grid: QuadratureGrid
    amplitudes: np.ndarray
    weight: float

    @classmethod
    def from_amplitudes(cls, grid: QuadratureGrid, amplitudes) -> "WaveFunction":
        amps = np.asarray(amplitudes, dtype=complex)
        if amps.shape != (grid.n_points,):
            raise GridError(f"expected {grid.n_points} amplitudes, got shape {amps.shape}")
        return cls(grid, amps, _norm2(amps, grid.spacing))

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def norm2(self) -> float:
        return _norm2(self.amplitudes, self.grid.spacing)

    @property
    def is_null(self) -> bool:
        return self.weight < NULL_WEIGHT or self.norm2 < NULL_WEIGHT

    def normalize(self) -> "WaveFunction":
        n2 = self.norm2
        if n2 < NULL_WEIGHT:
            raise NullStateError("cannot normalise a null state")
        return WaveFunction(self.grid, self.amplitudes / np.sqrt(n2), self.weight)

    def with_amplitudes(self, amplitudes: np.ndarray) -> "WaveFunction":
        """New state on the same grid; weight scales by the change in norm."""
        amps = np.asarray(amplitudes, dtype=complex)
        old = self.norm2
        new = _norm2(amps, self.grid.spacing)
        weight = self.weight * new / old if old > 0 else 0.0
        return WaveFunction(self.grid, amps, weight)

    def __mul__(self, c):
        return self.with_amplitudes(self.amplitudes * c)

    __rmul__ = __mul__

    def __add__(self, other: "WaveFunction") -> "WaveFunction":
        _check_same_grid(self, other)
        return WaveFunction.from_amplitudes(self.grid, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "WaveFunction") -> "WaveFunction":
        _check_same_grid(self, other)
        return WaveFunction.from_amplitudes(self.grid, self.amplitudes - other.amplitudes)


def _norm2(amps: np.ndarray, h: float) -> float:
    return float(np.sum(np.abs(amps) ** 2) * h)


def _check_same_grid(a: WaveFunction, b: WaveFunction):
    if a.grid != b.grid:
        raise GridError("wave functions live on different grids")


def inner_product(a: WaveFunction, b: WaveFunction) -> complex:
    """<a|b> by the rectangle rule (spectrally accurate for decaying states)."""
    _check_same_grid(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.grid.spacing)


def overlap(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 / (<a|a><b|b>) for raw amplitude arrays on a common grid."""
    num = abs(np.vdot(a, b)) ** 2
    den = np.vdot(a, a).real * np.vdot(b, b).real
    if den <= 0:
        raise NullStateError("fidelity of a null state is undefined")
    return float(min(num / den, 1.0))


def fidelity(a: WaveFunction, b: WaveFunction) -> float:
    """Pure-state fidelity |<a|b>|^2 after normalising both arguments."""
    _check_same_grid(a, b)
    if a.is_null or b.is_null:
        raise NullStateError("fidelity of a null state is undefined")
    return overlap(a.amplitudes, b.amplitudes)


# -- operators ---------------------------------------------------------------
#
# The array-level helpers act along the last axis so that batches of states
# (shape (..., N)) can be pushed through the same code path.

def momentum_array(amps: np.ndarray, grid: QuadratureGrid) -> np.ndarray:
    """-i d/dx by FFT spectral differentiation along the last axis."""
    return np.fft.ifft(grid.wavenumbers * np.fft.fft(amps, axis=-1), axis=-1)


def annihilate_array(amps: np.ndarray, grid: QuadratureGrid, shift: complex = 0.0) -> np.ndarray:
    """(a - shift) applied along the last axis."""
    return (grid.x * amps + 1j * momentum_array(amps, grid)) / np.sqrt(2) - shift * amps


def create_array(amps: np.ndarray, grid: QuadratureGrid, shift: complex = 0.0) -> np.ndarray:
    """(a^dagger - conj(shift)) applied along the last axis."""
    return (grid.x * amps - 1j * momentum_array(amps, grid)) / np.sqrt(2) - np.conj(shift) * amps


def apply_position(psi: WaveFunction) -> WaveFunction:
    return psi.with_amplitudes(psi.x * psi.amplitudes)


def apply_momentum(psi: WaveFunction) -> WaveFunction:
    return psi.with_amplitudes(momentum_array(psi.amplitudes, psi.grid))


def apply_annihilation(psi: WaveFunction) -> WaveFunction:
    return psi.with_amplitudes(annihilate_array(psi.amplitudes, psi.grid))


def apply_creation(psi: WaveFunction) -> WaveFunction:
    return psi.with_amplitudes(create_array(psi.amplitudes, psi.grid))


def shift_array(amps: np.ndarray, grid: QuadratureGrid, dx: float) -> np.ndarray:
    """Band-limited translation psi(x) -> psi(x - dx) along the last axis."""
    phase = np.exp(-1j * grid.wavenumbers * dx)
    return np.fft.ifft(phase * np.fft.fft(amps, axis=-1), axis=-1)


def displace(psi: WaveFunction, dx: float, dp: float) -> WaveFunction:
    """Phase-space displacement: translate by ``dx``, then kick momentum by ``dp``."""
    amps = shift_array(psi.amplitudes, psi.grid, dx) * np.exp(1j * dp * psi.x)
    return psi.with_amplitudes(amps)


@lru_cache(maxsize=8)
def _fourier_matrix(grid: QuadratureGrid) -> np.ndarray:
    x = grid.x
    return np.exp(-1j * np.outer(x, x)) * (grid.spacing / np.sqrt(2 * np.pi))


def spectral_tail(amps: np.ndarray, fraction: float = 0.1) -> float:
    """Fraction of spectral power in the outermost ``fraction`` of FFT bins."""
    power = np.abs(np.fft.fftshift(np.fft.fft(amps))) ** 2
    n = len(power)
    edge = max(1, int(n * fraction / 2))
    total = power.sum()
    return float((power[:edge].sum() + power[-edge:].sum()) / total) if total > 0 else 0.0


def fourier_rotate(psi: WaveFunction, tail_tol: float = 1e-10) -> WaveFunction:
    """Momentum wave function sampled on the same grid, i.e. a 90 degree rotation.

    psi~(p) = (2 pi)^(-1/2) int psi(x) exp(-i p x) dx, evaluated by direct
    quadrature because the grid is not generally FFT-conjugate to itself.
    """
    if spectral_tail(psi.amplitudes) > tail_tol:
        raise GridError("state is not band limited on this grid (aliasing risk)")
    amps = _fourier_matrix(psi.grid) @ psi.amplitudes
    return psi.with_amplitudes(amps)
