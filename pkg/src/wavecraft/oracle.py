"""Brute-force reference path for the teleportation engine.

The resource is built explicitly on a two-mode grid and the Bell projection is
carried out by direct quadrature, with no use of the operator algebra in
:mod:`wavecraft.nges`.  Fock-space checks use dense truncated matrices.

Beamsplitter convention: the two squeezed inputs (x-wide in mode 1, x-narrow in
mode 2) are mixed by the substitution::

    Psi'(x1, x2) = Psi((x1 + x2)/sqrt(2), (x2 - x1)/sqrt(2))

which turns the pair into the two-mode squeezed state with correlated x.  On a
uniform grid both rotated coordinates land on a finer lattice of spacing
h/sqrt(2), so the substitution is exact sampling rather than interpolation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridError, QuadratureGrid, WaveFunction, annihilate_array, create_array, shift_array
from .nges import SubtractionSpec
from .teleport import BellOutcome

ORACLE_POINTS = 256
ORACLE_EXTENT = 10.0
#: Largest edge magnitude of the resource relative to its peak.
EDGE_TOL = 1e-4
#: Largest acceptable eta^n_max in the truncated Fock checks.
FOCK_TAIL = 1e-6


@dataclass(frozen=True, eq=False)
class TwoModeWave:
    grid: QuadratureGrid
    amplitudes: np.ndarray  # indexed [i_x1, i_x2]

    def __post_init__(self):
        n = self.grid.n_points
        if self.amplitudes.shape != (n, n):
            raise GridError(f"expected a {n}x{n} array, got {self.amplitudes.shape}")
        if not self.grid.is_symmetric:
            raise GridError("two-mode waves need a symmetric grid")

    @property
    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.spacing**2)

    def normalize(self) -> "TwoModeWave":
        return TwoModeWave(self.grid, self.amplitudes / np.sqrt(self.norm2))

    def apply(self, op, axis: int) -> "TwoModeWave":
        """Apply an array operator (acting on the last axis) to mode ``axis`` (0 or 1)."""
        amps = np.moveaxis(self.amplitudes, axis, -1)
        out = op(np.ascontiguousarray(amps), self.grid)
        return TwoModeWave(self.grid, np.moveaxis(out, -1, axis))

    def overlap(self, other: "TwoModeWave") -> float:
        num = abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2
        den = np.vdot(self.amplitudes, self.amplitudes).real * np.vdot(other.amplitudes, other.amplitudes).real
        return float(num / den)


def _fine_axis(grid: QuadratureGrid) -> QuadratureGrid:
    n = grid.n_points
    return QuadratureGrid(2 * n - 1, np.sqrt(2) * grid.x_min, np.sqrt(2) * grid.x_max)


def _subtracted(width2: float, count: int, fine: QuadratureGrid) -> np.ndarray:
    amps = np.exp(-fine.x**2 / (2 * width2)).astype(complex)
    for _ in range(count):
        amps = annihilate_array(amps, fine)
    return amps


def beamsplitter(mode1: np.ndarray, mode2: np.ndarray, grid: QuadratureGrid) -> TwoModeWave:
    """Mix product state mode1(y1) mode2(y2), both sampled on the fine rotated axis."""
    n = grid.n_points
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    # (x1 + x2)/sqrt(2) and (x2 - x1)/sqrt(2) in units of the fine spacing
    return TwoModeWave(grid, mode1[i + j] * mode2[j - i + n - 1])


def build_nges_2d(spec: SubtractionSpec, r_tele: float, grid: QuadratureGrid) -> TwoModeWave:
    """B a1^k a2^l S1(-r) S2(r)|0>|0> on the two-mode grid, normalised."""
    if not grid.is_symmetric:
        raise GridError("the oracle needs a symmetric grid")
    fine = _fine_axis(grid)
    if np.exp(-r_tele) * fine.p_nyquist < 7:
        raise GridError("squeezed input is not resolved by the grid")
    wide = _subtracted(np.exp(2 * r_tele), spec.k, fine)
    narrow = _subtracted(np.exp(-2 * r_tele), spec.l, fine)
    wave = beamsplitter(wide, narrow, grid)
    mag = np.abs(wave.amplitudes)
    edge = max(mag[0].max(), mag[-1].max(), mag[:, 0].max(), mag[:, -1].max())
    if edge > EDGE_TOL * mag.max():
        raise GridError("resource does not decay inside the grid; enlarge the extent")
    return wave.normalize()


def teleport_brute(psi_in: WaveFunction, nges: TwoModeWave, outcome: BellOutcome) -> WaveFunction:
    """Project modes (in, 1) onto the displaced EPR bra and correct mode 2.

    The EPR delta sets x_in = x1 + m_x, leaving one quadrature sum.  The output
    is then displaced by (m_x, m_p).  The weight is the raw squared norm for a
    normalised input and resource.
    """
    grid = psi_in.grid
    if grid != nges.grid:
        raise GridError("input state and resource use different grids")
    x, h = grid.x, grid.spacing
    psi = psi_in.normalize()
    shifted = shift_array(psi.amplitudes, grid, -outcome.m_x)  # psi_in(x1 + m_x)
    bra = np.exp(-1j * outcome.m_p * x) * shifted
    bare = (bra @ nges.amplitudes) * h
    out = shift_array(bare, grid, outcome.m_x) * np.exp(1j * outcome.m_p * x)
    return WaveFunction(grid, out, float(np.sum(np.abs(out) ** 2) * h))


# -- truncated Fock space ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class FockVector2:
    n_max: int
    coeffs: np.ndarray  # indexed [n1, n2]

    def __post_init__(self):
        d = self.n_max + 1
        if self.coeffs.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} coefficient array")

    def tail(self) -> float:
        """Relative weight on the truncation edge n1 = n_max or n2 = n_max."""
        w = np.abs(self.coeffs) ** 2
        total = w.sum()
        edge = w[-1, :].sum() + w[:-1, -1].sum()
        return float(edge / total) if total > 0 else 0.0


def _check_truncation(eta: float, n_max: int):
    if not 0 <= eta < 1:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    if eta**n_max >= FOCK_TAIL:
        raise ValueError(f"n_max = {n_max} is too small for eta = {eta}")


def tmss_fock(eta: float, n_max: int) -> FockVector2:
    """sqrt(1 - eta^2) sum_n eta^n |n>|n>, truncated at n_max."""
    _check_truncation(eta, n_max)
    n = np.arange(n_max + 1)
    return FockVector2(n_max, np.diag(np.sqrt(1 - eta**2) * eta**n).astype(complex))


def _ladder(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def subtraction_identity_check(eta: float, n_max: int, k: int = 1) -> float:
    """||a1^k T - (eta a2^dagger)^k T|| / ||a1^k T|| in the truncated space.

    Both sides are built in a space padded by ``k`` levels so that the creation
    operator is not clipped.  Returns 0 when both sides vanish (eta = 0).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    tm = tmss_fock(eta, n_max)
    dim = n_max + 1 + k
    c = np.zeros((dim, dim), dtype=complex)
    c[: n_max + 1, : n_max + 1] = tm.coeffs
    a = _ladder(dim)
    ak = np.linalg.matrix_power(a, k)
    adk = np.linalg.matrix_power(a.T, k)
    left = ak @ c                     # acts on mode 1 (rows)
    right = eta**k * c @ adk.T        # acts on mode 2 (columns)
    norm = np.linalg.norm(left)
    if norm == 0:
        if np.linalg.norm(right) != 0:
            raise ArithmeticError("left side is null but the right side is not")
        return 0.0
    return float(np.linalg.norm(left - right) / norm)

