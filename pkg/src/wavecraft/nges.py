"""Operator algebra of the photon-subtracted entangled resource.

Subtracting ``k`` photons from the x-wide and ``l`` photons from the x-narrow
squeezed input of the resource beamsplitter is equivalent to acting on one
mode of the two-mode squeezed state with::

    f_kl(eta) = 2^(-(k+l)/2) sum_j c_j a^(k+l-j) (eta a^dagger)^j

where ``c_j`` is the coefficient of ``u^j v^(k+l-j)`` in ``(u+v)^k (u-v)^l``.
After the Bell measurement the displacement corrections conjugate this into
``h_kl``, which is ``f_kl`` with ``a -> a - (m_x + i m_p)/sqrt(2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np

from .grid import (NullStateError, QuadratureGrid, WaveFunction, annihilate_array,
                   create_array)
from .states import hermite_coeffs

MAX_ORDER = 8


@dataclass(frozen=True)
class SubtractionSpec:
    k: int = 1
    l: int = 0

    def __post_init__(self):
        if self.k < 0 or self.l < 0:
            raise ValueError("subtraction counts must be nonnegative")
        if self.k + self.l > MAX_ORDER:
            raise ValueError(f"k + l must not exceed {MAX_ORDER}")

    @property
    def order(self) -> int:
        return self.k + self.l


def expand_coeffs(spec: SubtractionSpec) -> np.ndarray:
    """Integer coefficients c_j of (u+v)^k (u-v)^l = sum_j c_j u^j v^(k+l-j)."""
    plus = [comb(spec.k, i) for i in range(spec.k + 1)]
    minus = [comb(spec.l, i) * (-1) ** (spec.l - i) for i in range(spec.l + 1)]
    return np.convolve(plus, minus).astype(np.int64)


@dataclass(frozen=True)
class OperatorPoly:
    spec: SubtractionSpec
    eta: float

    def __post_init__(self):
        if not 0 <= self.eta < 1:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")

    @cached_property
    def coeffs(self) -> np.ndarray:
        return expand_coeffs(self.spec)

    def terms(self):
        """(weight, n_create, n_annihilate) for each nonzero term."""
        n = self.spec.order
        scale = 2.0 ** (-n / 2)
        for j, c in enumerate(self.coeffs):
            if c:
                yield scale * c * self.eta**j, j, n - j


def _apply_terms(poly: OperatorPoly, amps: np.ndarray, grid: QuadratureGrid,
                 shift: complex = 0.0) -> np.ndarray:
    # Terms share their leading creation powers, so build (a^dag)^j psi once.
    out = np.zeros_like(amps, dtype=complex)
    created = amps.astype(complex)
    done = 0
    for weight, n_create, n_annih in poly.terms():
        while done < n_create:
            created = create_array(created, grid, shift)
            done += 1
        term = created
        for _ in range(n_annih):
            term = annihilate_array(term, grid, shift)
        out += weight * term
    return out


def _finish(psi: WaveFunction, amps: np.ndarray) -> WaveFunction:
    out = psi.with_amplitudes(amps)
    if out.is_null and not psi.is_null:
        # keep the null result visible; callers that need a state will refuse it
        return WaveFunction(out.grid, out.amplitudes, 0.0)
    return out


def apply_f(poly: OperatorPoly, psi: WaveFunction) -> WaveFunction:
    """f_kl(eta) psi, term by term in anti-normal order (unnormalised)."""
    return _finish(psi, _apply_terms(poly, psi.amplitudes, psi.grid))


def apply_f_array(poly: OperatorPoly, amps: np.ndarray, grid: QuadratureGrid,
                  shift: complex = 0.0) -> np.ndarray:
    """Array version of :func:`apply_h` acting along the last axis (batched)."""
    return _apply_terms(poly, amps, grid, shift)


def apply_f_recursive(spec: SubtractionSpec, eta: float, psi: WaveFunction) -> WaveFunction:
    """f_kl(eta) psi via f_kl = (+/- a f + eta f a^dagger)/sqrt(2).

    Independent of :func:`apply_f`; kept for cross-checking.
    """
    grid = psi.grid

    def rec(k, l, amps):
        if k > 0:
            left = annihilate_array(rec(k - 1, l, amps), grid)
            right = rec(k - 1, l, create_array(amps, grid))
            return (left + eta * right) / np.sqrt(2)
        if l > 0:
            left = annihilate_array(rec(k, l - 1, amps), grid)
            right = rec(k, l - 1, create_array(amps, grid))
            return (-left + eta * right) / np.sqrt(2)
        return amps

    return _finish(psi, rec(spec.k, spec.l, psi.amplitudes.astype(complex)))


def displacement_shift(m_x: float, m_p: float) -> complex:
    return (m_x + 1j * m_p) / np.sqrt(2)


def apply_h(poly: OperatorPoly, m_x: float, m_p: float, psi: WaveFunction) -> WaveFunction:
    """D f D^dagger psi: f with x -> x - m_x and p -> p - m_p."""
    shift = displacement_shift(m_x, m_p)
    return _finish(psi, _apply_terms(poly, psi.amplitudes, psi.grid, shift))


# -- infinite-squeezing limits ----------------------------------------------

@dataclass(frozen=True)
class QuadraturePoly:
    """Polynomial in a single quadrature; ``coeffs[n]`` multiplies q^n."""

    variable: str  # "x" or "p"
    coeffs: np.ndarray

    def __call__(self, q):
        return np.polynomial.polynomial.polyval(q, self.coeffs)


def g_limit_poly(spec: SubtractionSpec) -> QuadraturePoly:
    """lim_{eta -> 1} f_kl for pure cases.

    g_k0 = H_k(i x) / (2i)^k and g_0l = H_l(i p) / (-2)^l.
    """
    if spec.k and spec.l:
        raise ValueError("the eta -> 1 limit is only available for k = 0 or l = 0")
    if spec.l == 0:
        n, var, denom = spec.k, "x", (2j) ** spec.k
    else:
        n, var, denom = spec.l, "p", (-2.0) ** spec.l
    h = hermite_coeffs(n)
    coeffs = np.array([h[m] * 1j**m for m in range(n + 1)], dtype=complex) / denom
    if np.allclose(coeffs.imag, 0):
        coeffs = coeffs.real
    return QuadraturePoly(var, coeffs)


def apply_g(spec: SubtractionSpec, psi: WaveFunction) -> WaveFunction:
    """g_kl psi for pure cases (polynomial in x, or in p via the spectral p)."""
    poly = g_limit_poly(spec)
    if poly.variable == "x":
        return psi.with_amplitudes(poly(psi.x) * psi.amplitudes)
    k = psi.grid.wavenumbers
    amps = np.fft.ifft(poly(k) * np.fft.fft(psi.amplitudes))
    return psi.with_amplitudes(amps)


def require_nonnull(psi: WaveFunction, what: str = "state") -> WaveFunction:
    if psi.is_null:
        raise NullStateError(f"{what} is null")
    return psi
