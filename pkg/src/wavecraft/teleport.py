"""Conditional teleportation through the non-Gaussian resource.

A single step maps an input wave function to::

    psi_out(z) = h_kl(eta, m_x, m_p) psi_cond(z)
    psi_cond(z) = int dx exp(-i m_p (x - z)) psi_in(x) Psi_TMSS(x - m_x, z - m_x)

The Bell outcomes (m_x, m_p) are the projector parameters, i.e. the homodyne
readings divided by sqrt(2).  The raw squared norm of ``psi_out`` for a
normalised input is the heralding weight, proportional to the outcome density.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .grid import NullStateError, QuadratureGrid, WaveFunction, fidelity, fourier_rotate
from .nges import OperatorPoly, SubtractionSpec, apply_f_array, apply_h, displacement_shift


MAX_R_TELE = 8.0
#: Default outcome lattice for density calibration and success sweeps.
DEFAULT_REGION = (-13.0, 13.0)
DEFAULT_RESOLUTION = 81
#: Smallest acceptable fraction of the outcome mass inside a sweep region.
MIN_COVERAGE = 0.5
_CHUNK = 256


@dataclass(frozen=True)
class TeleportConfig:
    r_tele: float
    spec: SubtractionSpec
    grid: QuadratureGrid

    def __post_init__(self):
        if not 0 < self.r_tele <= MAX_R_TELE:
            raise ValueError(f"r_tele must lie in (0, {MAX_R_TELE}], got {self.r_tele}")

    @property
    def eta(self) -> float:
        return float(np.tanh(self.r_tele))

    @cached_property
    def poly(self) -> OperatorPoly:
        return OperatorPoly(self.spec, self.eta)


@dataclass(frozen=True)
class BellOutcome:
    m_x: float = 0.0
    m_p: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.m_x) and np.isfinite(self.m_p)):
            raise ValueError("Bell outcomes must be finite")


@dataclass(frozen=True)
class PlanStep:
    outcome: BellOutcome
    rotate_after: bool = False


@dataclass(frozen=True)
class IterationPlan:
    steps: tuple[PlanStep, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("an iteration plan needs at least one step")

    @classmethod
    def from_vectors(cls, m_x: Sequence[float], m_p: Sequence[float] | None = None,
                     rotate_after: Sequence[bool] | bool = False) -> "IterationPlan":
        m_p = [0.0] * len(m_x) if m_p is None else list(m_p)
        if isinstance(rotate_after, bool):
            rotate_after = [rotate_after] * len(m_x)
        if not len(m_x) == len(m_p) == len(rotate_after):
            raise ValueError("m_x, m_p and rotate_after must have equal lengths")
        return cls(tuple(PlanStep(BellOutcome(float(a), float(b)), bool(r))
                         for a, b, r in zip(m_x, m_p, rotate_after)))

    @classmethod
    def zeros(cls, n: int, rotate_after: bool = False) -> "IterationPlan":
        return cls.from_vectors([0.0] * n, rotate_after=rotate_after)

    @property
    def m_x(self) -> list[float]:
        return [s.outcome.m_x for s in self.steps]

    @property
    def m_p(self) -> list[float]:
        return [s.outcome.m_p for s in self.steps]

    def __len__(self):
        return len(self.steps)


class PlanError(NullStateError):
    """A step of an iteration plan produced the null state."""

    def __init__(self, step: int, message: str = ""):
        super().__init__(message or f"step {step} produced a null state")
        self.step = step


def tmss_wave(r_tele: float, x1, x2):
    """Unnormalised two-mode squeezed wave function Psi_TMSS(x1, x2)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return (np.exp(-np.exp(2 * r_tele) / 2 * ((x1 - x2) / np.sqrt(2)) ** 2)
            * np.exp(-np.exp(-2 * r_tele) / 2 * ((x1 + x2) / np.sqrt(2)) ** 2))


@lru_cache(maxsize=4)
def _tmss_kernel(grid: QuadratureGrid, r_tele: float) -> np.ndarray:
    # Psi_TMSS(x - m, z - m) = K0(z, x) exp(4 b m (x + z) - 4 b m^2) with
    # b = exp(-2 r)/4, so the m-independent part is factored out once.
    x = grid.x
    a = np.exp(2 * r_tele) / 4
    b = np.exp(-2 * r_tele) / 4
    diff = x[:, None] - x[None, :]
    tot = x[:, None] + x[None, :]
    return np.exp(-a * diff**2 - b * tot**2) * grid.spacing


def conditional_array(amps: np.ndarray, config: TeleportConfig,
                      m_x, m_p) -> np.ndarray:
    """psi_cond for one input and many outcomes; returns shape (len(m_x), N)."""
    grid = config.grid
    x = grid.x
    m_x = np.atleast_1d(np.asarray(m_x, dtype=float))[:, None]
    m_p = np.atleast_1d(np.asarray(m_p, dtype=float))[:, None]
    b4 = np.exp(-2 * config.r_tele)
    modulated = amps[None, :] * np.exp(-1j * m_p * x + b4 * m_x * x)
    kernel = _tmss_kernel(grid, config.r_tele)
    # real GEMMs on contiguous copies; strided .real views miss the BLAS path
    cond = (np.ascontiguousarray(modulated.real) @ kernel
            + 1j * (np.ascontiguousarray(modulated.imag) @ kernel))
    return cond * np.exp(1j * m_p * x + b4 * m_x * x - b4 * m_x**2)


def conditional_wave(psi_in: WaveFunction, config: TeleportConfig,
                     outcome: BellOutcome) -> WaveFunction:
    """The conditioned (pre-operator) wave function, unnormalised."""
    _check_grid(psi_in, config)
    amps = conditional_array(psi_in.amplitudes, config, outcome.m_x, outcome.m_p)[0]
    return psi_in.with_amplitudes(amps)


def teleport_step(psi_in: WaveFunction, config: TeleportConfig,
                  outcome: BellOutcome) -> WaveFunction:
    """One heralded step; ``weight`` of the result is the heralding weight."""
    cond = conditional_wave(psi_in, config, outcome)
    return apply_h(config.poly, outcome.m_x, outcome.m_p, cond)


def _check_grid(psi: WaveFunction, config: TeleportConfig):
    if psi.grid != config.grid:
        raise ValueError("input state and teleport config use different grids")


@dataclass
class PlanResult:
    final: WaveFunction
    step_weights: list[float]
    states: list[WaveFunction] = field(default_factory=list, repr=False)


def run_plan(psi_in: WaveFunction, config: TeleportConfig, plan: IterationPlan,
             keep_states: bool = False) -> PlanResult:
    """Fold :func:`teleport_step` over a plan, normalising between steps.

    ``step_weights[i]`` is the raw squared norm produced by step ``i`` from a
    normalised input.
    """
    psi = psi_in.normalize()
    psi = WaveFunction(psi.grid, psi.amplitudes, 1.0)
    weights, states = [], []
    for i, step in enumerate(plan.steps):
        out = teleport_step(psi, config, step.outcome)
        if out.is_null:
            raise PlanError(i)
        weights.append(out.weight)
        psi = out.normalize()
        psi = WaveFunction(psi.grid, psi.amplitudes, 1.0)
        if step.rotate_after:
            psi = fourier_rotate(psi).normalize()
            psi = WaveFunction(psi.grid, psi.amplitudes, 1.0)
        if keep_states:
            states.append(psi)
    return PlanResult(psi, weights, states)


# -- outcome statistics ------------------------------------------------------

def outputs_array(amps: np.ndarray, config: TeleportConfig, m_x, m_p) -> np.ndarray:
    """Raw step outputs for a batch of outcomes, shape (len(m_x), N)."""
    cond = conditional_array(amps, config, m_x, m_p)
    m_x = np.asarray(m_x, dtype=float)
    m_p = np.asarray(m_p, dtype=float)
    out = np.empty_like(cond)
    # the displaced operator differs per outcome; group by shift value
    for i, (a, b) in enumerate(zip(m_x, m_p)):
        out[i] = apply_f_array(config.poly, cond[i], config.grid, displacement_shift(a, b))
    return out


def outcome_density(psi_in: WaveFunction, config: TeleportConfig,
                    outcome: BellOutcome) -> float:
    """Unnormalised outcome density: the heralding weight of a normalised input."""
    psi = psi_in.normalize()
    psi = WaveFunction(psi.grid, psi.amplitudes, 1.0)
    return teleport_step(psi, config, outcome).weight


def fock_operator_matrix(poly: OperatorPoly, dim: int) -> np.ndarray:
    """Matrix of f_kl(eta) in a truncated Fock basis of size ``dim``."""
    n = np.arange(1, dim)
    a = np.diag(np.sqrt(n), 1).astype(complex)
    ad = a.T.copy()
    out = np.zeros((dim, dim), dtype=complex)
    for weight, n_create, n_annih in poly.terms():
        out += weight * (np.linalg.matrix_power(a, n_annih) @ np.linalg.matrix_power(ad, n_create))
    return out


def density_normalization(config: TeleportConfig) -> float:
    """Exact integral of the unnormalised density over all outcomes.

    The displaced-EPR projectors integrate to 2 pi times the identity, the
    unnormalised TMSS wave function has squared norm pi, and the operator
    contributes <TMSS| f^dag f |TMSS> = (1 - eta^2) sum_n eta^(2n) |f|n>|^2.
    """
    eta = config.eta
    order = config.spec.order
    n_max = int(np.ceil(np.log(1e-18) / (2 * np.log(eta)))) if eta > 0 else 1
    n_max = max(n_max, 8)
    dim = n_max + order + 1
    f = fock_operator_matrix(config.poly, dim)
    col_norms = np.sum(np.abs(f[:, : n_max + 1]) ** 2, axis=0)
    thermal = (1 - eta**2) * eta ** (2 * np.arange(n_max + 1))
    return float(2 * np.pi * np.pi * np.sum(thermal * col_norms))


@dataclass
class DensityMap:
    m_x: np.ndarray
    m_p: np.ndarray
    raw: np.ndarray  # unnormalised density on the lattice, indexed [i_x, i_p]
    z_region: float
    z_exact: float

    @property
    def cell(self) -> float:
        return float((self.m_x[1] - self.m_x[0]) * (self.m_p[1] - self.m_p[0]))

    @property
    def density(self) -> np.ndarray:
        return self.raw / self.z_region

    @property
    def residual(self) -> float:
        """|integral of the true density over the region - 1|."""
        return abs(self.z_region / self.z_exact - 1)


@dataclass
class SweepResult:
    thresholds: np.ndarray
    probabilities: np.ndarray
    fidelities: np.ndarray  # on the acceptance lattice, indexed [i_x, i_p]
    m_x: np.ndarray
    m_p: np.ndarray
    calibration: DensityMap
    #: per threshold, whether the accepted set reaches the lattice boundary
    touches_edge: np.ndarray
    #: per threshold, number of accepted lattice points
    accepted_points: np.ndarray

    def under_resolved(self, min_points: int = 9) -> np.ndarray:
        """Thresholds whose acceptance set spans too few lattice points to integrate."""
        return (self.accepted_points < min_points) & (self.thresholds > 0)


def _lattice(region, resolution):
    if len(region) == 2:
        lo_x, hi_x = lo_p, hi_p = region
    else:
        lo_x, hi_x, lo_p, hi_p = region
    if resolution < 2:
        raise ValueError("sweep resolution must be at least 2")
    if not (hi_x > lo_x and hi_p > lo_p):
        raise ValueError(f"empty sweep region {tuple(region)}")
    return np.linspace(lo_x, hi_x, resolution), np.linspace(lo_p, hi_p, resolution)


def _evaluate(psi: WaveFunction, config: TeleportConfig, mx: np.ndarray, mp: np.ndarray,
              target: WaveFunction | None = None):
    MX, MP = np.meshgrid(mx, mp, indexing="ij")
    flat_x, flat_p = MX.ravel(), MP.ravel()
    h = config.grid.spacing
    raw = np.empty(flat_x.size)
    fids = np.empty(flat_x.size) if target is not None else None
    # fixed chunk order keeps the reduction deterministic
    for start in range(0, flat_x.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        out = outputs_array(psi.amplitudes, config, flat_x[sl], flat_p[sl])
        norms = np.sum(np.abs(out) ** 2, axis=1) * h
        raw[sl] = norms
        if target is not None:
            ov = np.abs(out.conj() @ target.amplitudes) ** 2 * h**2
            with np.errstate(invalid="ignore", divide="ignore"):
                fids[sl] = np.where(norms > 0, ov / (norms * target.norm2), 0.0)
    raw = raw.reshape(MX.shape)
    if fids is not None:
        fids = np.clip(fids, 0, 1).reshape(MX.shape)
    return raw, fids


def _unit_input(psi_in: WaveFunction, config: TeleportConfig) -> WaveFunction:
    _check_grid(psi_in, config)
    psi = psi_in.normalize()
    return WaveFunction(psi.grid, psi.amplitudes, 1.0)


def density_map(psi_in: WaveFunction, config: TeleportConfig,
                region=DEFAULT_REGION, resolution: int = DEFAULT_RESOLUTION) -> DensityMap:
    """Outcome density on a uniform (m_x, m_p) lattice, calibrated over it.

    Raises if the region holds less than ``MIN_COVERAGE`` of the exact mass.
    """
    psi = _unit_input(psi_in, config)
    mx, mp = _lattice(region, resolution)
    raw, _ = _evaluate(psi, config, mx, mp)
    return _calibrated(raw, mx, mp, config)


def _calibrated(raw, mx, mp, config) -> DensityMap:
    z_region = float(raw.sum() * (mx[1] - mx[0]) * (mp[1] - mp[0]))
    z_exact = density_normalization(config)
    if z_region < MIN_COVERAGE * z_exact:
        raise ValueError(
            f"sweep region captures only {z_region / z_exact:.3f} of the outcome "
            "probability; enlarge the region")
    return DensityMap(mx, mp, raw, z_region, z_exact)


def success_sweep(psi_in: WaveFunction, config: TeleportConfig, target: WaveFunction,
                  thresholds: Sequence[float], region=None,
                  resolution: int = DEFAULT_RESOLUTION,
                  calibration: DensityMap | None = None) -> SweepResult:
    """Probability that a single step lands at fidelity >= each threshold.

    The density is normalised by ``calibration`` (computed over
    ``DEFAULT_REGION`` when not given).  Acceptance is integrated on the
    ``region``/``resolution`` lattice, which defaults to the calibration
    lattice; a smaller region with the same resolution refines the level sets
    of high thresholds, whose acceptance windows can be narrower than a
    calibration cell.
    """
    if target.grid != config.grid:
        raise ValueError("target and teleport config use different grids")
    psi = _unit_input(psi_in, config)
    tgt = target.normalize()
    if region is None and calibration is None:
        # one pass over the default lattice serves both purposes
        mx, mp = _lattice(DEFAULT_REGION, resolution)
        raw, fids = _evaluate(psi, config, mx, mp, tgt)
        calibration = _calibrated(raw, mx, mp, config)
    else:
        if calibration is None:
            calibration = density_map(psi, config)
        if region is None:
            mx, mp = calibration.m_x, calibration.m_p
        else:
            mx, mp = _lattice(region, resolution)
        raw, fids = _evaluate(psi, config, mx, mp, tgt)
    p = raw / calibration.z_region * (mx[1] - mx[0]) * (mp[1] - mp[0])
    thresholds = np.asarray(thresholds, dtype=float)
    probs = np.array([p[fids >= t].sum() for t in thresholds])
    edge = np.zeros_like(fids, dtype=bool)
    edge[[0, -1], :] = True
    edge[:, [0, -1]] = True
    touches = np.array([bool(np.any((fids >= t) & edge)) for t in thresholds])
    counts = np.array([int(np.count_nonzero(fids >= t)) for t in thresholds])
    return SweepResult(thresholds, probs, fids, mx, mp, calibration, touches, counts)


def two_step_correlated_sweep(psi_in: WaveFunction, config: TeleportConfig,
                              target: WaveFunction, m_values: Sequence[float]):
    """Two steps conditioned on (m, -m) with m_p = 0.

    Returns ``(joint_weights, fidelities)`` over ``m_values``: the product of
    the two step weights and the fidelity of the final state to ``target``.
    Full joint sweeps over all step outcomes are deliberately not offered.
    """
    weights, fids = [], []
    for m in m_values:
        plan = IterationPlan.from_vectors([m, -m])
        try:
            res = run_plan(psi_in, config, plan)
        except PlanError:
            weights.append(0.0)
            fids.append(0.0)
            continue
        weights.append(float(np.prod(res.step_weights)))
        fids.append(fidelity(res.final, target))
    return np.array(weights), np.array(fids)


__all__ = [
    "TeleportConfig", "BellOutcome", "PlanStep", "IterationPlan", "PlanError",
    "tmss_wave", "conditional_wave", "teleport_step", "run_plan", "PlanResult",
    "outcome_density", "density_map", "density_normalization", "success_sweep",
    "two_step_correlated_sweep", "DensityMap", "SweepResult",
]
