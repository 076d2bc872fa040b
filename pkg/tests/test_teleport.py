import numpy as np
import pytest
from scipy.integrate import quad

from wavecraft.grid import fidelity, make_grid
from wavecraft.nges import SubtractionSpec
from wavecraft.states import fock_state, fock_superposition, squeezed_fock, squeezed_vacuum, vacuum
from wavecraft.teleport import (BellOutcome, IterationPlan, PlanError, TeleportConfig,
                                conditional_wave, density_map, density_normalization,
                                outcome_density, run_plan, success_sweep, teleport_step,
                                tmss_wave, two_step_correlated_sweep)

GRID = make_grid()
X = GRID.x
SMALL = make_grid(256, 10.0)


def config(r=1.0, k=1, l=0, grid=GRID):
    return TeleportConfig(r, SubtractionSpec(k, l), grid)


# -- kernel ------------------------------------------------------------------

def test_tmss_examples():
    assert tmss_wave(1.7, 0.0, 0.0) == 1.0
    assert tmss_wave(1.0, 1.0, -1.0) == pytest.approx(np.exp(-np.e**2), rel=1e-14)
    assert tmss_wave(1.0, 1.0, -1.0) == pytest.approx(6.18e-4, rel=1e-3)
    pts = np.random.default_rng(0).normal(size=(2, 20))
    np.testing.assert_array_equal(tmss_wave(0.8, pts[0], pts[1]), tmss_wave(0.8, pts[1], pts[0]))


def test_config_validation():
    with pytest.raises(ValueError):
        config(r=0.0)
    with pytest.raises(ValueError):
        config(r=9.0)
    assert config(r=1.0).eta == pytest.approx(np.tanh(1.0))


def test_plan_validation():
    with pytest.raises(ValueError):
        IterationPlan(())
    with pytest.raises(ValueError):
        IterationPlan.from_vectors([0.0, 1.0], [0.0])
    with pytest.raises(ValueError):
        BellOutcome(np.nan, 0.0)
    plan = IterationPlan.from_vectors([0.1, -0.2], [0.3, 0.0], [True, False])
    assert plan.m_x == [0.1, -0.2]
    assert plan.m_p == [0.3, 0.0]
    assert len(IterationPlan.zeros(4)) == 4


# -- conditional wave function ----------------------------------------------

def test_conditional_vacuum_closed_form():
    # Gaussian integral of exp(-x^2/2 - a (x - z)^2 - b (x + z)^2) over x
    r = 1.0
    a, b = np.exp(2 * r) / 4, np.exp(-2 * r) / 4
    big_a = 0.5 + a + b
    c = a + b - (a - b) ** 2 / big_a
    expected = np.pi**-0.25 * np.sqrt(np.pi / big_a) * np.exp(-c * X**2)
    cond = conditional_wave(vacuum(GRID), config(r, 0, 0), BellOutcome())
    np.testing.assert_allclose(cond.amplitudes, expected, atol=1e-12)


@pytest.mark.parametrize("m_x, m_p", [(0.0, 0.0), (0.7, 0.0), (-0.4, 1.1), (1.3, -0.6)])
def test_conditional_matches_direct_quadrature(m_x, m_p):
    r = 0.8
    psi = squeezed_fock(1, -0.3, GRID)
    cfg = config(r, 0, 0)
    cond = conditional_wave(psi, cfg, BellOutcome(m_x, m_p)).amplitudes

    def integrand(x, z, part):
        # exact input: S(-0.3)|1>, evaluated off the grid
        s = np.exp(0.3)
        amp = s**-0.5 * np.sqrt(2) * np.pi**-0.25 * (x / s) * np.exp(-(x / s) ** 2 / 2)
        val = np.exp(-1j * m_p * (x - z)) * amp * tmss_wave(r, x - m_x, z - m_x)
        return val.real if part == 0 else val.imag

    for i in (300, 480, 512, 600, 700):
        z = X[i]
        ref = (quad(integrand, -30, 30, args=(z, 0), limit=200)[0]
               + 1j * quad(integrand, -30, 30, args=(z, 1), limit=200)[0])
        assert abs(cond[i] - ref) < 1e-9


def test_conditional_weak_mp_dependence():
    cfg = config(1.0, 0, 0)
    c0 = conditional_wave(vacuum(GRID), cfg, BellOutcome(0.0, 0.0))
    c2 = conditional_wave(vacuum(GRID), cfg, BellOutcome(0.0, 0.2))
    assert fidelity(c0, c2) > 0.99


@pytest.mark.parametrize("state", [vacuum(GRID), fock_state(1, GRID), fock_state(2, GRID),
                                   fock_superposition([1, 0, 1], GRID)])
def test_ideal_limit(state):
    out = teleport_step(state, config(3.0, 0, 0), BellOutcome())
    assert fidelity(out, state) > 0.999


def test_plain_teleportation_without_subtraction():
    psi = squeezed_vacuum(0.4, GRID)
    cfg = config(1.0, 0, 0)
    out = teleport_step(psi, cfg, BellOutcome(0.3, -0.2))
    cond = conditional_wave(psi, cfg, BellOutcome(0.3, -0.2))
    np.testing.assert_array_equal(out.amplitudes, cond.amplitudes)


def test_single_cat_step_is_odd():
    out = teleport_step(squeezed_vacuum(-1.0, GRID), config(), BellOutcome()).amplitudes
    np.testing.assert_allclose(out, -out[::-1], atol=1e-12 * np.max(np.abs(out)))


def test_weights_invariant_under_global_phase():
    psi = squeezed_fock(1, 0.5, GRID)
    cfg = config(1.0, 1, 1)
    outcome = BellOutcome(0.4, -0.3)
    w = teleport_step(psi, cfg, outcome).weight
    assert teleport_step(psi * np.exp(1.3j), cfg, outcome).weight == pytest.approx(w, rel=1e-12)


# -- plans -------------------------------------------------------------------

def test_root_structure_near_infinite_squeezing():
    m = [-1.0, 0.5, 1.5]
    res = run_plan(squeezed_vacuum(-1.0, GRID), config(6.0), IterationPlan.from_vectors(m))
    amps = res.final.amplitudes
    amps = (amps * np.conj(amps[np.argmax(np.abs(amps))])).real
    window = np.abs(X) < 4
    s = np.sign(amps[window])
    crossings = X[window][:-1][s[:-1] * s[1:] < 0]
    assert len(crossings) == 3
    np.testing.assert_allclose(np.sort(crossings), m, atol=GRID.spacing)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_cat_extrema_at_large_squeezing(n):
    r = 1.0
    res = run_plan(squeezed_vacuum(-r, GRID), config(6.0), IterationPlan.zeros(n))
    peak = abs(X[np.argmax(np.abs(res.final.amplitudes))])
    assert abs(peak - np.sqrt(n) * np.exp(r)) < 0.01 * np.exp(r)


@pytest.mark.parametrize("n", [
    1, 2, 3,
    pytest.param(4, marks=pytest.mark.xfail(
        strict=True, reason="finite-squeezing envelope pulls the n=4 peak in by 13% at r_tele=3")),
])
def test_cat_extrema_at_moderate_squeezing(n):
    r = 1.0
    res = run_plan(squeezed_vacuum(-r, GRID), config(3.0), IterationPlan.zeros(n))
    peak = abs(X[np.argmax(np.abs(res.final.amplitudes))])
    assert abs(peak - np.sqrt(n) * np.exp(r)) < 0.1 * np.exp(r)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_cat_extrema_with_envelope_correction(n):
    # each m=0 step maps the Gaussian envelope exp(-c x^2) to
    # c' = a + b - (a - b)^2 / (c + a + b); x^n exp(-c x^2) peaks at sqrt(n / 2c)
    r, r_tele = 1.0, 3.0
    a, b = np.exp(2 * r_tele) / 4, np.exp(-2 * r_tele) / 4
    c = np.exp(-2 * r) / 2
    for _ in range(n):
        c = a + b - (a - b) ** 2 / (c + a + b)
    res = run_plan(squeezed_vacuum(-r, GRID), config(r_tele), IterationPlan.zeros(n))
    peak = abs(X[np.argmax(np.abs(res.final.amplitudes))])
    assert abs(peak - np.sqrt(n / (2 * c))) < GRID.spacing


def test_plan_records_weights_and_states():
    res = run_plan(vacuum(GRID), config(), IterationPlan.zeros(3, rotate_after=True), keep_states=True)
    assert len(res.step_weights) == 3
    assert len(res.states) == 3
    assert all(w > 0 for w in res.step_weights)
    assert res.final.norm2 == pytest.approx(1, abs=1e-12)


def test_plan_error_reports_step():
    # an outcome deep in the tail has a heralding weight of order exp(-84)
    plan = IterationPlan.from_vectors([0.0, 20.0])
    with pytest.raises(PlanError) as err:
        run_plan(vacuum(GRID), config(), plan)
    assert err.value.step == 1


def test_unentangled_resource_nulls_first_step():
    # eta ~ 0: the conditioned state is a displaced vacuum and h_10 ~ a - shift annihilates it
    with pytest.raises(PlanError) as err:
        run_plan(vacuum(GRID), config(r=1e-7), IterationPlan.from_vectors([0.5, 0.0]))
    assert err.value.step == 0


def test_two_step_correlated_sweep_is_mirror_symmetric():
    target = run_plan(vacuum(GRID), config(), IterationPlan.zeros(2)).final
    w, f = two_step_correlated_sweep(vacuum(GRID), config(), target, [-0.5, 0.0, 0.5])
    assert f[1] == pytest.approx(1, abs=1e-12)
    assert w[0] == pytest.approx(w[2], rel=1e-9)
    assert f[0] == pytest.approx(f[2], abs=1e-9)


# -- outcome statistics ------------------------------------------------------

@pytest.mark.parametrize("r", [0.5, 1.0])
def test_gaussian_outcome_density(r):
    # vacuum input, no subtraction: m_x = x_in - x_1 and m_p = p_in + p_1 each
    # have variance 1/2 + cosh(2r)/2 = cosh(r)^2; the total mass is 2 pi^2
    s2 = np.cosh(r) ** 2
    for m_x, m_p in [(0.0, 0.0), (1.0, 0.0), (0.5, -1.2), (2.0, 2.0)]:
        d = outcome_density(vacuum(GRID), config(r, 0, 0), BellOutcome(m_x, m_p))
        assert d == pytest.approx(np.pi / s2 * np.exp(-(m_x**2 + m_p**2) / (2 * s2)), rel=1e-10)


def test_density_normalization_gaussian():
    assert density_normalization(config(1.0, 0, 0)) == pytest.approx(2 * np.pi**2, rel=1e-12)


def test_density_normalization_subtracted():
    # f_10 = (a + eta a^dag)/sqrt(2) on one TMSS mode: <a^dag a> = sinh(r)^2 = n,
    # <a a^dag> = n + 1 and <a a> = 0, so <f^dag f> = (n + eta^2 (n + 1)) / 2
    r = 1.0
    eta, n = np.tanh(r), np.sinh(r) ** 2
    expected = 2 * np.pi**2 * (n + eta**2 * (n + 1)) / 2
    assert density_normalization(config(r, 1, 0)) == pytest.approx(expected, rel=1e-12)


def test_density_map_residual():
    dmap = density_map(vacuum(SMALL), config(1.0, 1, 0, SMALL), resolution=61)
    assert dmap.residual < 1e-3
    assert np.sum(dmap.density) * dmap.cell == pytest.approx(1, abs=1e-12)


def test_density_map_rejects_small_region():
    with pytest.raises(ValueError):
        density_map(vacuum(SMALL), config(1.0, 1, 0, SMALL), region=(-0.5, 0.5), resolution=5)


def test_single_photon_raises_density_at_origin():
    cfg = config(1.0, 1, 0)
    ones = outcome_density(squeezed_fock(1, 1.0, GRID), cfg, BellOutcome())
    zeros = outcome_density(squeezed_vacuum(1.0, GRID), cfg, BellOutcome())
    assert ones > 1.5 * zeros


def test_success_sweep_properties():
    cfg = config(1.0, 1, 0, SMALL)
    psi = squeezed_fock(1, 1.0, SMALL)
    target = teleport_step(psi, cfg, BellOutcome()).normalize()
    thresholds = [0.0, 0.5, 0.9, 0.99]
    sweep = success_sweep(psi, cfg, target, thresholds, resolution=41)
    assert sweep.probabilities[0] == pytest.approx(1, abs=1e-3)
    assert np.all(np.diff(sweep.probabilities) <= 0)
    assert sweep.calibration.residual < 1e-3
    assert sweep.accepted_points[0] == 41 * 41
    # refining the acceptance lattice keeps the calibration
    fine = success_sweep(psi, cfg, target, thresholds, region=(-2, 2), resolution=41,
                         calibration=sweep.calibration)
    assert fine.calibration is sweep.calibration
    assert np.all(np.diff(fine.probabilities) <= 0)
    assert fine.probabilities[-1] > 0


def test_success_sweep_is_deterministic():
    cfg = config(1.0, 1, 0, SMALL)
    psi = squeezed_vacuum(-0.4, SMALL)
    target = teleport_step(psi, cfg, BellOutcome()).normalize()
    a = success_sweep(psi, cfg, target, [0.5, 0.9], resolution=21)
    b = success_sweep(psi, cfg, target, [0.5, 0.9], resolution=21)
    np.testing.assert_array_equal(a.probabilities, b.probabilities)
    np.testing.assert_array_equal(a.fidelities, b.fidelities)
