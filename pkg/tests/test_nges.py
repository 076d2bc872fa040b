import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavecraft.grid import WaveFunction, displace, make_grid, momentum_array
from wavecraft.nges import (OperatorPoly, SubtractionSpec, apply_f, apply_f_recursive, apply_g,
                            apply_h, expand_coeffs, g_limit_poly)
from wavecraft.states import fock_state, hermite_function, vacuum

GRID = make_grid()
X = GRID.x


def smooth_state(seed, parity=None):
    rng = np.random.default_rng(seed)
    ns = range(6) if parity is None else range(parity, 6, 2)
    amps = sum((rng.normal() + 1j * rng.normal()) * hermite_function(n, X) for n in ns)
    return WaveFunction.from_amplitudes(GRID, amps).normalize()


def xop(amps):
    return X * amps


def pop(amps):
    return momentum_array(amps, GRID)


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# -- coefficients ------------------------------------------------------------

def test_coeffs_examples():
    np.testing.assert_array_equal(expand_coeffs(SubtractionSpec(1, 0)), [1, 1])
    np.testing.assert_array_equal(expand_coeffs(SubtractionSpec(0, 1)), [-1, 1])
    np.testing.assert_array_equal(expand_coeffs(SubtractionSpec(1, 1)), [-1, 0, 1])
    np.testing.assert_array_equal(expand_coeffs(SubtractionSpec(0, 0)), [1])


def test_coeffs_two_one():
    # (u+v)^2 (u-v) = u^3 + u^2 v - u v^2 - v^3, c_j multiplies u^j v^(3-j)
    np.testing.assert_array_equal(expand_coeffs(SubtractionSpec(2, 1)), [-1, -1, 1, 1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 8), st.integers(0, 8), st.floats(-2, 2), st.floats(-2, 2))
def test_coeffs_reproduce_polynomial(k, l, u, v):
    if k + l > 8:
        return
    c = expand_coeffs(SubtractionSpec(k, l))
    n = k + l
    value = sum(cj * u**j * v ** (n - j) for j, cj in enumerate(c))
    assert value == pytest.approx((u + v) ** k * (u - v) ** l, abs=1e-9)
    assert np.abs(c).sum() <= 2**n
    assert c.dtype.kind == "i"


def test_spec_bounds():
    with pytest.raises(ValueError):
        SubtractionSpec(-1, 0)
    with pytest.raises(ValueError):
        SubtractionSpec(5, 4)
    with pytest.raises(ValueError):
        OperatorPoly(SubtractionSpec(1, 0), 1.0)


# -- closed forms ------------------------------------------------------------

def test_f00_is_identity():
    psi = smooth_state(0)
    out = apply_f(OperatorPoly(SubtractionSpec(0, 0), 0.5), psi)
    np.testing.assert_array_equal(out.amplitudes, psi.amplitudes)


@pytest.mark.parametrize("eta", [0.0, 0.3, 0.76])
def test_f10_and_f01_closed_forms(eta):
    psi = smooth_state(1).amplitudes
    f10 = ((1 + eta) * xop(psi) + 1j * (1 - eta) * pop(psi)) / 2
    f01 = -(1 - eta) / 2 * xop(psi) - 1j * (1 + eta) / 2 * pop(psi)
    state = WaveFunction.from_amplitudes(GRID, psi)
    assert rel_err(apply_f(OperatorPoly(SubtractionSpec(1, 0), eta), state).amplitudes, f10) < 1e-10
    assert rel_err(apply_f_recursive(SubtractionSpec(0, 1), eta, state).amplitudes, f01) < 1e-10


@pytest.mark.parametrize("eta", [0.2, 0.76])
def test_f11_closed_form(eta):
    psi = smooth_state(2).amplitudes
    x2 = xop(xop(psi))
    p2 = pop(pop(psi))
    sym = xop(pop(psi)) + pop(xop(psi))
    expected = -(1 - eta**2) / 4 * (x2 - p2) - 1j * (1 + eta**2) / 4 * sym
    state = WaveFunction.from_amplitudes(GRID, psi)
    got = apply_f_recursive(SubtractionSpec(1, 1), eta, state).amplitudes
    assert rel_err(got, expected) < 1e-8


@pytest.mark.parametrize("eta", [0.3, 0.76])
def test_f20_equals_f10_squared_plus_constant(eta):
    # (a + eta a^dag)^2 / 2 differs from f_20 = (a^2 + 2 eta a a^dag + eta^2 a^dag^2) / 2
    # by eta [a, a^dag] / 2
    psi = smooth_state(3)
    f10 = OperatorPoly(SubtractionSpec(1, 0), eta)
    twice = apply_f(f10, apply_f(f10, psi)).amplitudes
    f20 = apply_f(OperatorPoly(SubtractionSpec(2, 0), eta), psi).amplitudes
    assert rel_err(f20, twice + eta / 2 * psi.amplitudes) < 1e-8


def _f20_without_cross_term(eta, amps):
    return (((1 + eta) / 2) ** 2 * xop(xop(amps)) + (1j * (1 - eta) / 2) ** 2 * pop(pop(amps))
            + (eta**2 - 1 + 2 * eta) / 4 * amps)


@pytest.mark.parametrize("eta", [0.3, 0.76])
def test_f20_on_vacuum(eta):
    vac = vacuum(GRID)
    got = apply_f(OperatorPoly(SubtractionSpec(2, 0), eta), vac).amplitudes
    expected = eta * vac.amplitudes + eta**2 / np.sqrt(2) * fock_state(2, GRID).amplitudes
    assert np.max(np.abs(got - expected)) < 1e-8
    # the x^2, p^2 and constant terms alone are not enough: the p x cross term is needed
    partial = _f20_without_cross_term(eta, vac.amplitudes)
    cross = 1j * (1 - eta**2) / 2 * pop(xop(vac.amplitudes))
    assert np.max(np.abs(got - partial - cross)) < 1e-8
    assert np.max(np.abs(got - partial)) > 0.1 * (1 - eta**2)


# -- recursion cross-check ---------------------------------------------------

@pytest.mark.parametrize("k, l", [(k, l) for k in range(5) for l in range(5) if k + l <= 4])
def test_recursion_matches_expansion(k, l):
    psi = smooth_state(10 + 5 * k + l)
    for eta in (0.2, np.tanh(1.0)):
        direct = apply_f(OperatorPoly(SubtractionSpec(k, l), eta), psi)
        rec = apply_f_recursive(SubtractionSpec(k, l), eta, psi)
        assert rel_err(direct.amplitudes, rec.amplitudes) < 1e-8
        assert direct.weight == pytest.approx(rec.weight, rel=1e-8)


def test_null_result_is_flagged():
    out = apply_f(OperatorPoly(SubtractionSpec(1, 0), 0.0), vacuum(GRID))
    assert out.is_null


# -- infinite squeezing limit ------------------------------------------------

def test_g_examples():
    g10 = g_limit_poly(SubtractionSpec(1, 0))
    assert g10.variable == "x"
    np.testing.assert_allclose(g10.coeffs, [0, 1])
    g01 = g_limit_poly(SubtractionSpec(0, 1))
    assert g01.variable == "p"
    np.testing.assert_allclose(g01.coeffs, [0, -1j])
    np.testing.assert_allclose(g_limit_poly(SubtractionSpec(2, 0)).coeffs, [0.5, 0, 1])
    np.testing.assert_allclose(g_limit_poly(SubtractionSpec(3, 0)).coeffs, [0, 1.5, 0, 1])
    with pytest.raises(ValueError):
        g_limit_poly(SubtractionSpec(1, 1))


def test_f10_near_one_is_position():
    psi = smooth_state(4)
    out = apply_f(OperatorPoly(SubtractionSpec(1, 0), 0.9999), psi).amplitudes
    assert rel_err(out, xop(psi.amplitudes)) < 1e-3


@pytest.mark.parametrize("spec", [SubtractionSpec(1, 0), SubtractionSpec(2, 0), SubtractionSpec(3, 0),
                                  SubtractionSpec(0, 1), SubtractionSpec(0, 2)])
def test_limit_convergence_is_monotone(spec):
    psi = smooth_state(5)
    g = apply_g(spec, psi).amplitudes
    errs = [rel_err(apply_f(OperatorPoly(spec, eta), psi).amplitudes, g)
            for eta in (0.9, 0.99, 0.999, 0.9999)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_g01_is_minus_i_p():
    psi = smooth_state(6)
    out = apply_g(SubtractionSpec(0, 1), psi).amplitudes
    assert rel_err(out, -1j * pop(psi.amplitudes)) < 1e-12


# -- displaced conjugate -----------------------------------------------------

def test_h_without_displacement_is_f():
    psi = smooth_state(7)
    poly = OperatorPoly(SubtractionSpec(2, 1), 0.6)
    np.testing.assert_array_equal(apply_h(poly, 0.0, 0.0, psi).amplitudes, apply_f(poly, psi).amplitudes)


def test_h_special_case():
    out = apply_h(OperatorPoly(SubtractionSpec(1, 0), 0.9999), 2.0, 0.0, vacuum(GRID))
    expected = WaveFunction.from_amplitudes(GRID, (X - 2) * np.exp(-X**2 / 2)).normalize()
    assert rel_err(out.normalize().amplitudes, expected.amplitudes) < 1e-3


@pytest.mark.parametrize("k, l, m_x, m_p", [(1, 0, 2.0, 0.0), (1, 1, -0.63, 0.4), (2, 1, 0.5, -1.2),
                                             (0, 2, 1.1, 0.7)])
def test_h_equals_displacement_sandwich(k, l, m_x, m_p):
    psi = smooth_state(8)
    poly = OperatorPoly(SubtractionSpec(k, l), 0.7)
    # displace(-m_x, -m_p) is D^dagger up to the constant phase exp(-i m_x m_p)
    sandwich = displace(apply_f(poly, displace(psi, -m_x, -m_p)), m_x, m_p).amplitudes
    expected = np.exp(1j * m_x * m_p) * apply_h(poly, m_x, m_p, psi).amplitudes
    assert np.max(np.abs(sandwich - expected)) < 1e-6


# -- parity ------------------------------------------------------------------

@pytest.mark.parametrize("k, l", [(1, 0), (0, 1), (1, 1), (2, 1), (2, 2), (3, 0)])
@pytest.mark.parametrize("parity", [0, 1])
def test_parity_flips_iff_order_odd(k, l, parity):
    psi = smooth_state(9, parity=parity)
    out = apply_f(OperatorPoly(SubtractionSpec(k, l), 0.76), psi).amplitudes
    sign = (-1) ** (parity + k + l)
    # three spectral derivatives amplify FFT roundoff to ~1e-10 near the edges
    tol = 1e-12 if k + l <= 2 else 1e-9
    assert np.max(np.abs(out - sign * out[::-1])) < tol * np.max(np.abs(out))
