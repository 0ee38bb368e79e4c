import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from latticewaves.errors import DomainError, UnknownModel, UnsupportedSide
from latticewaves.potentials import (
    dual_slope,
    primal_flux,
    primal_potential,
    psi2,
    psi_q,
    psi_q_prime,
    registry,
    to_dual,
)


def quad_slope(model, q, zeta):
    """Independent oracle: adaptive quadrature of Ψ''(q+s) over [0, ζ]."""
    val, _ = integrate.quad(lambda s: float(model.psi2(np.array(q + s))), 0.0, zeta,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


@pytest.mark.parametrize("name, expected", [("ex1", 1.0), ("ex2", 1.0), ("ex3", 0.0)])
def test_curvature_at_origin(name, expected):
    assert psi2(registry(name), 0.0) == pytest.approx(expected, abs=1e-15)


def test_ex1_slope_value():
    m = registry("ex1")
    assert psi_q_prime(m, 0.0, 0.0) == 0.0
    closed = 0.5 + math.sqrt(math.pi) / 4 * math.erf(1.0)
    assert psi_q_prime(m, 0.0, 1.0) == pytest.approx(closed, abs=1e-14)
    assert psi_q_prime(m, 0.0, 1.0) == pytest.approx(0.873412, abs=1e-6)


@pytest.mark.parametrize("name", ["ex1", "ex2", "ex3", "expr:0.5 + 0.5*exp(-z^2)"])
@pytest.mark.parametrize("q", [0.0, -0.7, 1.3])
def test_slope_matches_adaptive_quadrature(name, q):
    m = registry(name)
    for z in (-3.0, -0.4, 0.9, 2.5):
        assert psi_q_prime(m, q, z) == pytest.approx(quad_slope(m, q, z), abs=1e-12)


def test_ex1_potential_matches_nested_quadrature():
    m = registry("ex1")
    val, _ = integrate.quad(lambda s: quad_slope(m, 0.0, s), 0.0, 1.0, epsabs=1e-14, epsrel=1e-14)
    assert psi_q(m, 0.0, 1.0) == pytest.approx(val, abs=1e-10)
    assert psi_q(m, 0.0, 1.0) > 0


def test_custom_expression_potential_matches_closed_form():
    closed, table = registry("ex1"), registry("expr:0.5 + 0.5*exp(-z^2)")
    z = np.linspace(-40, 40, 161)
    np.testing.assert_allclose(dual_slope(table, z), dual_slope(closed, z), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(psi_q(table, 0.3, z), psi_q(closed, 0.3, z), rtol=1e-11, atol=1e-10)


@pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
def test_linear_model(c):
    m = registry(f"linear:{c}")
    z = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(psi_q_prime(m, 0.8, z), c * z, atol=1e-14)
    np.testing.assert_allclose(psi_q(m, -1.1, z), 0.5 * c * z ** 2, atol=1e-13)
    assert primal_flux(m, 2.0 * c) == pytest.approx(2.0)


def test_primal_flux_direct_and_inverted():
    assert primal_flux(registry("quartic"), 1.0) == 2.0
    assert primal_flux(registry("linear:1"), 2.0) == pytest.approx(2.0, abs=1e-15)
    m = registry("ex1")
    for z in (-2.0, -1.0, 0.0, 1.0, 2.0):
        assert primal_flux(m, psi_q_prime(m, 0.0, z)) == pytest.approx(z, abs=1e-10)


def test_primal_potential_is_legendre_transform():
    m = registry("ex2")
    u = np.linspace(-3, 3, 13)
    z = primal_flux(m, u)
    # Φ(u) = sup_ζ (uζ - Ψ(ζ)) is attained at ζ = Φ'(u); nearby ζ give less
    for dz in (-1e-3, 1e-3):
        assert np.all(u * (z + dz) - psi_q(m, 0.0, z + dz) <= primal_potential(m, u) + 1e-15)


def test_registry_metadata():
    ex1 = registry("ex1")
    assert ex1.side == "dual" and ex1.bounds == (0.5, 1.0)
    quartic = registry("quartic")
    assert quartic.side == "primal" and quartic.phi1(1.0) == 2.0
    ex3 = registry("ex3")
    assert ex3.side == "dual" and ex3.nonuniform
    assert registry("linear(2)").bounds == (2.0, 2.0)
    with pytest.raises(UnknownModel):
        registry("ex9")


def test_primal_model_needs_conversion():
    quartic = registry("quartic")
    with pytest.raises(UnsupportedSide):
        psi2(quartic, 0.5)
    # Ψ' = (Φ')⁻¹: Φ'(1) = 2, so Ψ''(2) = 1/Φ''(1) = 1/4
    assert psi2(quartic, 2.0, convert=True) == pytest.approx(0.25, rel=1e-12)
    d = to_dual(quartic)
    assert dual_slope(d, 2.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(UnsupportedSide):
        to_dual(registry("kvm"))


def test_domain_cap():
    with pytest.raises(DomainError):
        psi_q_prime(registry("ex3"), 0.0, 60.0)


zetas = st.floats(-5, 5, allow_nan=False)
qs = st.floats(-2, 2, allow_nan=False)
uniform = st.sampled_from(["ex1", "ex2", "linear:1.5"])


@given(uniform, zetas)
def test_round_trip_property(name, z):
    m = registry(name)
    assert primal_flux(m, dual_slope(m, z)) == pytest.approx(z, abs=1e-10)


@given(st.sampled_from(["ex1", "ex2", "ex3"]), qs, zetas, zetas)
def test_monotone_slope_property(name, q, a, b):
    m = registry(name)
    lo, hi = sorted((a, b))
    if hi - lo > 1e-6:
        assert psi_q_prime(m, q, hi) > psi_q_prime(m, q, lo)


@given(st.sampled_from(["ex1", "ex2", "ex3"]), qs, zetas)
def test_shift_identity_property(name, q, z):
    m = registry(name)
    expected = psi_q_prime(m, 0.0, q + z) - psi_q_prime(m, 0.0, q)
    assert psi_q_prime(m, q, z) == pytest.approx(expected, abs=1e-12)


@given(uniform, qs, zetas)
def test_convexity_lower_bound_property(name, q, z):
    m = registry(name)
    lower = 0.5 * m.bounds[0] * z * z
    assert psi_q(m, q, z) >= lower - 1e-12
    assert psi_q(m, q, z) >= 0
