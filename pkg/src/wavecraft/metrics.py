"""Wigner functions, fidelity fits and extrema of generated states."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .grid import GridError, NullStateError, WaveFunction, shift_array
from .states import cat_wave, four_cat_wave

#: Stall tolerance in fidelity for the simplex refinement.
STALL_TOL = 1e-8


@dataclass
class WignerMap:
    x: np.ndarray
    p: np.ndarray
    values: np.ndarray  # indexed [i_x, i_p]

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    def total(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)

    def purity(self) -> float:
        """int W^2 dx dp, equal to 1/(2 pi) for pure states."""
        return float((self.values**2).sum() * self.dx * self.dp)

    def marginal_x(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.dp

    def marginal_p(self) -> np.ndarray:
        return self.values.sum(axis=0) * self.dx


def wigner(psi: WaveFunction, p_extent: float = 8.0, p_points: int = 161,
           x_stride: int = 1, support_tol: float = 1e-10) -> WignerMap:
    """W(x, p) = (1/pi) int conj(psi(x + y)) psi(x - y) exp(2ipy) dy.

    Rows are evaluated on every ``x_stride``-th grid point; y runs over grid
    multiples so no interpolation is needed.
    """
    grid = psi.grid
    h = grid.spacing
    if p_extent >= np.pi / (2 * h):
        raise GridError(f"p_extent {p_extent} exceeds the Wigner Nyquist limit {np.pi / (2 * h):.3g}")
    psi = psi.normalize()
    amps = psi.amplitudes
    p = np.linspace(-p_extent, p_extent, p_points)
    rows = np.arange(0, grid.n_points, x_stride)
    values = np.zeros((rows.size, p_points))

    mag = np.abs(amps)
    live = np.nonzero(mag > support_tol * mag.max())[0]
    lo, hi = live[0], live[-1]
    span = hi - lo
    j = np.arange(-span, span + 1)
    phase = np.exp(2j * np.outer(j * h, p)) * (h / np.pi)
    padded = np.zeros(grid.n_points + 2 * span + 2, dtype=complex)
    padded[span + 1: span + 1 + grid.n_points] = amps
    sel = (rows >= lo) & (rows <= hi)
    idx = rows[sel] + span + 1
    corr = np.conj(padded[idx[:, None] + j[None, :]]) * padded[idx[:, None] - j[None, :]]
    values[sel] = (corr @ phase).real
    return WignerMap(grid.x[rows], p, values)


# -- fitting -----------------------------------------------------------------

@dataclass
class FitResult:
    params: dict
    fidelity: float
    converged: bool
    scan_best: float = field(default=0.0, repr=False)


def _unit_rows(rows: np.ndarray, h: float) -> np.ndarray:
    norms = np.sqrt(np.sum(np.abs(rows) ** 2, axis=-1, keepdims=True) * h)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(norms > 0, rows / norms, 0)
    return out


def _fids(rows: np.ndarray, unit_psi: np.ndarray, h: float) -> np.ndarray:
    return np.abs(_unit_rows(rows, h).conj() @ unit_psi * h) ** 2


def parity_sign(psi: WaveFunction, tol: float = 0.1) -> int:
    """+1 for even, -1 for odd states; raises if neither parity dominates."""
    if psi.is_null:
        raise NullStateError("cannot fit a null state")
    if not psi.grid.is_symmetric:
        raise GridError("parity needs a symmetric grid")
    a = psi.amplitudes
    even = np.sum(np.abs(a + a[::-1]) ** 2)
    odd = np.sum(np.abs(a - a[::-1]) ** 2)
    if min(even, odd) > tol * (even + odd):
        raise ValueError("state has no definite parity")
    return 1 if even >= odd else -1


def _refine(objective, start, scan_best, bounds):
    res = minimize(objective, start, method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": STALL_TOL, "maxiter": 2000})
    x = np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])
    val = -objective(x)
    if val < scan_best:
        return np.asarray(start, dtype=float), scan_best, bool(res.success)
    return x, val, bool(res.success)


def fit_squeezed_cat(psi: WaveFunction, xi_range=(-1.5, 1.5), alpha_range=(0.0, 4.0),
                     step: float = 0.05) -> FitResult:
    """Closest S(xi)|CAT, alpha, +/-> by grid scan plus simplex refinement."""
    sign = parity_sign(psi)
    unit = psi.normalize().amplitudes
    x, h = psi.x, psi.grid.spacing
    xis = np.arange(xi_range[0], xi_range[1] + step / 2, step)
    alphas = np.arange(alpha_range[0], alpha_range[1] + step / 2, step)
    scan = np.array([_fids(cat_wave(alphas, sign, xi, x), unit, h) for xi in xis])
    i, j = np.unravel_index(np.argmax(scan), scan.shape)
    best = min(float(scan[i, j]), 1.0)

    def objective(v):
        xi, alpha = v
        if not xi_range[0] - 0.5 <= xi <= xi_range[1] + 0.5:
            return 0.0
        return -float(_fids(cat_wave(abs(alpha), sign, xi, x), unit, h)[0])

    v, f, ok = _refine(objective, [xis[i], alphas[j]], best,
                       [(xi_range[0] - 0.5, xi_range[1] + 0.5), (-np.inf, np.inf)])
    params = {"xi": float(v[0]), "alpha": float(abs(v[1])),
              "parity": "plus" if sign > 0 else "minus"}
    return FitResult(params, min(f, 1.0), ok, best)


def fit_four_cat(psi: WaveFunction, beta_range=(0.0, 4.0), step: float = 0.05) -> FitResult:
    """Closest four-component cat over |beta| and type m in 0..3."""
    if psi.is_null:
        raise NullStateError("cannot fit a null state")
    unit = psi.normalize().amplitudes
    x, h = psi.x, psi.grid.spacing
    mags = np.arange(beta_range[0], beta_range[1] + step / 2, step)
    scan = np.array([_fids(four_cat_wave(mags, m, x), unit, h) for m in range(4)])
    m, j = np.unravel_index(np.argmax(scan), scan.shape)
    best = min(float(scan[m, j]), 1.0)

    def objective(v):
        return -float(_fids(four_cat_wave(abs(v[0]), int(m), x), unit, h)[0])

    v, f, ok = _refine(objective, [mags[j]], best, [(-np.inf, np.inf)])
    return FitResult({"beta": float(abs(v[0])), "m": int(m)}, min(f, 1.0), ok, best)


def displaced_array(amps: np.ndarray, grid, dx: float, dp: float) -> np.ndarray:
    return shift_array(amps, grid, dx) * np.exp(1j * dp * grid.x)


def fit_displacement(psi: WaveFunction, target: WaveFunction, span: float = 1.5,
                     step: float = 0.05) -> FitResult:
    """Displacement D(dx, dp) maximising F(D psi, target)."""
    if psi.grid != target.grid:
        raise GridError("states live on different grids")
    grid = psi.grid
    x, h = grid.x, grid.spacing
    unit = psi.normalize().amplitudes
    tgt = target.normalize().amplitudes
    d = np.arange(-span, span + step / 2, step)
    spectrum = np.fft.fft(unit)
    shifted = np.fft.ifft(spectrum[None, :] * np.exp(-1j * np.outer(d, grid.wavenumbers)), axis=1)
    kicks = np.exp(1j * np.outer(x, d)) * np.conj(tgt)[:, None]
    scan = np.abs(shifted @ kicks * h) ** 2  # [i_dx, i_dp]
    i, j = np.unravel_index(np.argmax(scan), scan.shape)
    best = min(float(scan[i, j]), 1.0)

    def objective(v):
        out = displaced_array(unit, grid, v[0], v[1])
        return -float(np.abs(np.vdot(tgt, out) * h) ** 2)

    v, f, ok = _refine(objective, [d[i], d[j]], best, [(-np.inf, np.inf)] * 2)
    return FitResult({"dx": float(v[0]), "dp": float(v[1])}, min(f, 1.0), ok, best)


def extrema_report(psi: WaveFunction, rel_threshold: float = 1e-3) -> list[tuple[float, float]]:
    """Local maxima of |psi| as (x, |psi|), refined by a parabola through 3 points."""
    psi = psi.normalize()
    mag = np.abs(psi.amplitudes)
    x, h = psi.x, psi.grid.spacing
    floor = rel_threshold * mag.max()
    out = []
    for i in range(1, len(mag) - 1):
        if mag[i] >= floor and mag[i] > mag[i - 1] and mag[i] >= mag[i + 1]:
            y0, y1, y2 = mag[i - 1], mag[i], mag[i + 1]
            den = y0 - 2 * y1 + y2
            off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
            peak = y1 - 0.25 * (y0 - y2) * off
            out.append((float(x[i] + off * h), float(peak)))
    return out
