"""Analytic input and target states evaluated on a quadrature grid."""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Literal, Sequence

import numpy as np
from scipy.special import airy

from .grid import GridError, QuadratureGrid, WaveFunction

MAX_SQUEEZE = 5.0
MAX_HERMITE = 64


def hermite(n: int, y) -> np.ndarray:
    """Physicists' Hermite polynomial H_n(y) by the three-term recurrence."""
    if n < 0 or n > MAX_HERMITE:
        raise ValueError(f"Hermite order must be in [0, {MAX_HERMITE}], got {n}")
    y = np.asarray(y)
    h_prev = np.ones_like(y, dtype=np.result_type(y, float))
    if n == 0:
        return h_prev
    h = 2 * y
    for m in range(1, n):
        h_prev, h = h, 2 * y * h - 2 * m * h_prev
    return h


def hermite_coeffs(n: int) -> np.ndarray:
    """Power-series coefficients of H_n, lowest order first (exact integers)."""
    prev = np.array([1], dtype=object)
    if n == 0:
        return prev.astype(float)
    cur = np.array([0, 2], dtype=object)
    for m in range(1, n):
        nxt = np.zeros(m + 2, dtype=object)
        nxt[1:] += 2 * cur
        nxt[: m] -= 2 * m * prev
        prev, cur = cur, nxt
    return cur.astype(float)


def hermite_function(n: int, x) -> np.ndarray:
    """Normalised harmonic-oscillator eigenfunction <x|n>.

    Uses the stable normalised recurrence instead of H_n * n! to avoid overflow.
    """
    x = np.asarray(x, dtype=float)
    phi_prev = np.pi ** -0.25 * np.exp(-x**2 / 2)
    if n == 0:
        return phi_prev
    phi = np.sqrt(2) * x * phi_prev
    for m in range(1, n):
        phi_prev, phi = phi, np.sqrt(2 / (m + 1)) * x * phi - np.sqrt(m / (m + 1)) * phi_prev
    return phi


def _normalized(grid: QuadratureGrid, amps) -> WaveFunction:
    psi = WaveFunction.from_amplitudes(grid, amps)
    if psi.is_null:
        raise GridError("state vanishes on this grid")
    psi = psi.normalize()
    return WaveFunction(grid, psi.amplitudes, 1.0)


def _check_support(grid: QuadratureGrid, width: float, what: str):
    # 6 standard deviations of |psi|^2 leaves an edge density below ~1e-8
    if 6 * width > grid.extent:
        raise GridError(f"{what} (width {width:.3g}) does not fit on a grid of extent {grid.extent}")
    if 7 / width > grid.p_nyquist:
        raise GridError(f"{what} is too narrow for grid spacing {grid.spacing:.3g}")


def _check_squeeze(r: float):
    if abs(r) > MAX_SQUEEZE:
        raise ValueError(f"|r| must be <= {MAX_SQUEEZE}, got {r}")


def squeezed_vacuum(r: float, grid: QuadratureGrid) -> WaveFunction:
    """S(r)|0>; r > 0 squeezes x so that Var(x) = exp(-2r)/2."""
    _check_squeeze(r)
    _check_support(grid, np.exp(-r) / np.sqrt(2), "squeezed vacuum")
    return _normalized(grid, np.exp(-grid.x**2 / (2 * np.exp(-2 * r))))


def vacuum(grid: QuadratureGrid) -> WaveFunction:
    return squeezed_vacuum(0.0, grid)


def fock_state(n: int, grid: QuadratureGrid) -> WaveFunction:
    if n < 0:
        raise ValueError("photon number must be nonnegative")
    turning = np.sqrt(2 * n + 1)
    if turning + 7 / np.sqrt(2) > grid.extent or turning > grid.p_nyquist / 2:
        raise GridError(f"|{n}> does not fit on a grid of extent {grid.extent}")
    return _normalized(grid, hermite_function(n, grid.x))


def squeezed_fock(n: int, r: float, grid: QuadratureGrid) -> WaveFunction:
    """S(r)|n>, a coordinate rescale of the Fock wave function."""
    _check_squeeze(r)
    s = np.exp(r)
    return _normalized(grid, hermite_function(n, grid.x * s))


def coherent_wave(beta: complex, x) -> np.ndarray:
    """<x|beta> consistent with x = (a + a^dagger)/sqrt(2)."""
    re, im = beta.real, beta.imag
    return np.pi ** -0.25 * np.exp(-(x - np.sqrt(2) * re) ** 2 / 2
                                   + 1j * np.sqrt(2) * im * x - 1j * re * im)


@dataclass(frozen=True)
class CatSpec:
    alpha: float
    parity: Literal["plus", "minus"] = "plus"
    squeeze: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("cat amplitude must be nonnegative")
        if self.parity not in ("plus", "minus"):
            raise ValueError(f"parity must be 'plus' or 'minus', got {self.parity!r}")
        _check_squeeze(self.squeeze)


def cat_wave(alpha, sign: int, xi: float, x) -> np.ndarray:
    """Unnormalised S(xi)(|alpha> + sign|-alpha>) for real alpha.

    Always returns shape (len(alpha), len(x)); a scalar alpha gives one row.
    """
    s = np.exp(xi)
    xs = np.asarray(x) * s
    shift = np.sqrt(2) * np.atleast_1d(np.asarray(alpha, dtype=float))[:, None]
    return np.exp(-(xs - shift) ** 2 / 2) + sign * np.exp(-(xs + shift) ** 2 / 2)


def cat_state(spec: CatSpec, grid: QuadratureGrid) -> WaveFunction:
    """Squeezed Schroedinger cat S(xi) N(|alpha> +/- |-alpha>)."""
    sign = 1 if spec.parity == "plus" else -1
    if sign < 0 and spec.alpha == 0:
        raise GridError("minus cat with alpha = 0 is the null vector")
    amps = cat_wave(spec.alpha, sign, spec.squeeze, grid.x)[0]
    return _normalized(grid, amps)


FOUR_CAT_PHASE = np.exp(1j * np.pi / 4)


def four_cat_wave(beta_mag, m: int, x) -> np.ndarray:
    """Unnormalised |b> + (-1)^m|-b> + i^m|ib> + (-i)^m|-ib>, b = |beta| e^{i pi/4}.

    One row per entry of ``beta_mag``.
    """
    if m not in (0, 1, 2, 3):
        raise ValueError(f"four-cat type m must be 0..3, got {m}")
    beta = np.atleast_1d(np.asarray(beta_mag, dtype=float))[:, None] * FOUR_CAT_PHASE
    out = 0
    for q in range(4):
        b = beta * 1j**q
        re, im = b.real, b.imag
        out = out + (1j**q) ** m * np.exp(-(x - np.sqrt(2) * re) ** 2 / 2
                                          + 1j * np.sqrt(2) * im * x - 1j * re * im)
    return out


def four_cat_state(beta_mag: float, m: int, grid: QuadratureGrid) -> WaveFunction:
    if beta_mag < 0:
        raise ValueError("|beta| must be nonnegative")
    return _normalized(grid, four_cat_wave(beta_mag, m, grid.x)[0])


def fock_superposition(coeffs: Sequence[float], grid: QuadratureGrid) -> WaveFunction:
    """Normalised sum_n c_n |n>."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if not np.any(coeffs != 0):
        raise ValueError("at least one coefficient must be nonzero")
    amps = np.zeros(grid.n_points, dtype=complex)
    for n, c in enumerate(coeffs):
        if c != 0:
            amps += c * fock_state(n, grid).amplitudes
    return _normalized(grid, amps)


def parse_fock_label(label: str) -> list[float]:
    """'0+3' -> [1, 0, 0, 1]; equal-weight superposition of the listed numbers."""
    try:
        ns = [int(tok) for tok in label.replace(" ", "").split("+")]
    except ValueError:
        raise ValueError(f"cannot parse Fock superposition {label!r}") from None
    if not ns or min(ns) < 0:
        raise ValueError(f"cannot parse Fock superposition {label!r}")
    coeffs = [0.0] * (max(ns) + 1)
    for n in ns:
        coeffs[n] += 1.0
    return coeffs


@dataclass(frozen=True)
class CpsSpec:
    """Cubic-phase-state target.

    ``variant='hermite'`` uses the series truncated at ``order`` with squeeze
    ``xi``; ``variant='airy'`` uses a Gaussian envelope of width exp(xi) over
    Ai(-(p + p0) / (3 gamma)^(1/3)).
    """

    gamma: float
    variant: Literal["hermite", "airy"] = "hermite"
    order: int = 1
    xi: float = 0.0
    p0: float = 0.0

    def __post_init__(self):
        if self.variant not in ("hermite", "airy"):
            raise ValueError(f"unknown cubic phase variant {self.variant!r}")
        if self.variant == "hermite" and self.order not in (0, 1, 2):
            raise ValueError("Hermite-series order must be 0, 1 or 2")
        if self.variant == "airy" and self.gamma == 0:
            raise ValueError("Airy target needs nonzero gamma")


def cps_momentum_wave(spec: CpsSpec, p) -> np.ndarray:
    """Unnormalised target as a function of the momentum quadrature."""
    p = np.asarray(p, dtype=float)
    if spec.variant == "airy":
        scale = np.cbrt(3 * spec.gamma)
        ai, _, _, _ = airy(-(p + spec.p0) / scale)
        return np.exp(-p**2 / (2 * np.exp(2 * spec.xi))) * ai
    g = spec.gamma / (np.sqrt(2) * np.exp(-2 * spec.xi)) ** 3
    q = p / np.exp(-spec.xi)
    series = np.ones_like(q)
    for m in range(1, spec.order + 1):
        series = series + g**m / factorial(m) * hermite(3 * m, q / np.sqrt(2))
    return series * np.exp(-q**2 / 2)


def cps_target(spec: CpsSpec, grid: QuadratureGrid) -> WaveFunction:
    """Cubic-phase target sampled on ``grid`` read as the momentum axis.

    A generated x-space wave function is compared against this directly; the
    90 degree rotation that turns it into a momentum wave function is a
    relabelling of the axis.
    """
    return _normalized(grid, cps_momentum_wave(spec, grid.x))
