import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticewaves import grid as gr
from latticewaves.checks import discrete_cone_member, offgrid_errors, smooth_cone_member
from latticewaves.errors import GridMismatch, KOutOfRange, MeanNotZero, OddGrid

G = gr.PeriodicGrid(200)


def trig(g, a, b):
    """Random trigonometric polynomial without constant term."""
    n = np.arange(1, len(a) + 1)[:, None]
    return gr.Profile(g, (a[:, None] * np.cos(n * g.nodes) + b[:, None] * np.sin(n * g.nodes)).sum(0))


def test_grid_layout():
    g = gr.PeriodicGrid(8)
    np.testing.assert_array_equal(g.nodes, -np.pi + 2 * np.pi * np.arange(1, 9) / 8)
    assert g.nodes[-1] == np.pi and g.spacing == np.pi / 4
    with pytest.raises(OddGrid):
        gr.PeriodicGrid(7)


@pytest.mark.parametrize("M", [4, 6, 50, 200])
def test_means(M):
    g = gr.PeriodicGrid(M)
    assert gr.mean(g.sample(lambda p: 3.0 + 0 * p)) == pytest.approx(3.0, abs=1e-15)
    assert abs(gr.mean(g.sample(np.cos))) <= 1e-15
    assert gr.mean(g.sample(lambda p: np.cos(p) ** 2)) == pytest.approx(0.5, abs=1e-14)


def test_inner_products():
    cos, sin = G.sample(np.cos), G.sample(np.sin)
    assert gr.inner(cos, cos) == pytest.approx(0.5, abs=1e-15)
    assert abs(gr.inner(cos, sin)) <= 1e-14
    with pytest.raises(GridMismatch):
        gr.inner(cos, gr.PeriodicGrid(100).sample(np.cos))


def test_shift_pi():
    cos = G.sample(np.cos)
    np.testing.assert_allclose(gr.shift_pi(cos).values, -cos.values, atol=1e-15)
    P = gr.Profile(G, np.random.default_rng(0).standard_normal(200))
    assert np.array_equal(gr.shift_pi(gr.shift_pi(P)).values, P.values)
    c = G.sample(lambda p: 0 * p + 2.0)
    assert np.array_equal(gr.shift_pi(c).values, c.values)


def test_avg_op_on_grid_cos_exact():
    cos = G.sample(np.cos)
    for m in (1, 7, 25, 50, 99):
        k = m * G.spacing
        out = gr.avg_op(cos, k)
        assert np.max(np.abs(out.values - math.sin(k) * cos.values)) <= 1e-12


def test_avg_op_zero_and_range():
    np.testing.assert_array_equal(gr.avg_op(G.zeros(), 0.3).values, 0.0)
    for k in (0.0, -0.1, math.pi):
        with pytest.raises(KOutOfRange):
            gr.avg_op(G.sample(np.cos), k)


def test_avg_op_off_grid_second_order():
    e = offgrid_errors(2 * math.pi * (25 + 1 / 3) / 200)
    assert 3.5 < e[0] / e[1] < 4.5 and 3.5 < e[1] / e[2] < 4.5
    # the exact multiplier removes the interpolation error entirely
    k = 0.3
    out = gr.avg_op(G.sample(np.cos), k, offgrid="fourier")
    assert np.max(np.abs(out.values - math.sin(k) * np.cos(G.nodes))) <= 1e-13


def test_avg_op_preserves_mean_scaled():
    P = G.sample(lambda p: 1.5 + np.cos(p))
    assert gr.mean(gr.avg_op(P, 0.7)) == pytest.approx(1.5 * 0.7, abs=1e-14)


def test_b_hat_and_b_tilde_on_cos():
    cos = G.sample(np.cos)
    k = math.pi / 2
    np.testing.assert_allclose(gr.b_hat(cos, k).values, 2 / math.pi * cos.values, atol=1e-14)
    assert 2 / math.pi == pytest.approx(0.63662, abs=1e-5)
    for kappa in (math.pi / 4, math.pi / 2):
        ref = math.sin(kappa) / (2 * kappa)
        assert gr.inner(cos, gr.b_hat(cos, kappa)) == pytest.approx(ref, abs=1e-14)
        assert gr.inner(cos, gr.b_tilde(cos, kappa)) == pytest.approx(ref, abs=1e-14)
    assert gr.inner(cos, gr.b_hat(cos, k)) == pytest.approx(0.31831, abs=1e-5)


def test_pairing_pi_over_8_needs_finer_grid():
    g = gr.PeriodicGrid(400)
    cos = g.sample(np.cos)
    k = math.pi / 8
    assert gr.is_on_grid(g, k) and not gr.is_on_grid(G, k)
    assert gr.inner(cos, gr.b_hat(cos, k)) == pytest.approx(math.sin(k) / (2 * k), abs=1e-12)


def test_b_tilde_definition_and_mean_check():
    rng = np.random.default_rng(1)
    P = trig(G, rng.standard_normal(6), rng.standard_normal(6))
    neg_shift = P.with_values(-gr.shift_pi(P).values)
    np.testing.assert_allclose(gr.b_tilde(P, 0.9).values, gr.b_hat(neg_shift, 0.9).values,
                               rtol=0, atol=1e-14)
    with pytest.raises(MeanNotZero):
        gr.b_tilde(P.with_values(P.values + 1.0), 0.9)
    with pytest.raises(KOutOfRange):
        gr.b_hat(P, 2.0)


def test_nabla_k():
    cos = G.sample(np.cos)
    k = 30 * G.spacing
    np.testing.assert_allclose(gr.nabla_k(cos, k).values, -math.sin(k) * np.sin(G.nodes), atol=1e-14)
    np.testing.assert_allclose(gr.nabla_k(G.sample(lambda p: 0 * p + 4.0), k).values, 0.0, atol=1e-15)


def test_nabla_is_derivative_of_average():
    P = G.sample(lambda p: np.exp(np.cos(p)) + np.sin(2 * p))
    k = 40 * G.spacing
    lhs = gr.nabla_k(P, k).values
    rhs = gr.derivative(gr.avg_op(P, k), order=2).values
    assert np.max(np.abs(lhs - rhs)) <= 5 * G.spacing ** 2


def test_cone_distance_examples():
    assert gr.cone_distance(G.sample(np.cos)) <= 1e-15
    assert gr.cone_distance(G.sample(np.sin)) == pytest.approx(1.0, abs=1e-12)
    assert gr.cone_distance(G.sample(lambda p: np.cos(2 * p))) > 0.01


def test_align_maximum():
    P = G.sample(lambda p: np.cos(p - 1.0))
    i = int(np.argmax(gr.align_maximum(P).values))
    assert G.nodes[i] == pytest.approx(0.0, abs=1e-14)


def test_interpolation_reproduces_trig_polynomials():
    P = G.sample(lambda p: np.cos(3 * p) - 0.5 * np.sin(p))
    x = np.linspace(-4, 4, 17)
    np.testing.assert_allclose(gr.interpolate(P, x), np.cos(3 * x) - 0.5 * np.sin(x), atol=1e-13)


def test_profile_serialisation(tmp_path):
    P = G.sample(lambda p: np.exp(np.sin(p)))
    Q = gr.Profile.from_csv(P.to_csv())
    assert np.array_equal(Q.values, P.values) and Q.M == 200
    R = gr.Profile.from_json(P.to_json())
    assert np.array_equal(R.values, P.values)
    with pytest.raises(ValueError):
        gr.Profile(G, np.full(200, np.nan))


coef = st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=8)
k_index = st.integers(1, 99)


@given(coef, coef, k_index)
def test_avg_op_symmetric_property(a, b, m):
    a, b = np.array(a), np.array(b)
    P = trig(G, a, a[::-1])
    Q = trig(G, b, b[::-1])
    k = m * G.spacing
    assert abs(gr.inner(P, gr.avg_op(Q, k)) - gr.inner(gr.avg_op(P, k), Q)) <= 1e-12


@given(coef, k_index)
def test_reflection_identity_property(a, m):
    a = np.array(a)
    P = trig(G, a, np.roll(a, 1))
    k = m * G.spacing
    np.testing.assert_allclose(gr.avg_op(P, math.pi - k).values,
                               -gr.avg_op(gr.shift_pi(P), k).values, rtol=0, atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1), k_index)
def test_nabla_mean_zero_property(seed, m):
    P = gr.Profile(G, np.random.default_rng(seed).standard_normal(200))
    assert abs(gr.mean(gr.nabla_k(P, m * G.spacing + 0.003))) <= 1e-14


@settings(max_examples=100)
@given(st.integers(0, 2 ** 32 - 1), k_index)
def test_smooth_cone_invariance_property(seed, m):
    C = smooth_cone_member(np.random.default_rng(seed), G)
    assert gr.cone_distance(C) <= 1e-15
    assert gr.cone_distance(gr.avg_op(C, m * G.spacing)) <= 1e-9


@settings(max_examples=100)
@given(st.integers(0, 2 ** 32 - 1), k_index)
def test_discrete_cone_invariance_property(seed, m):
    # arbitrary (non-smooth) cone members need the cone-preserving trapezoid rule
    D = discrete_cone_member(np.random.default_rng(seed), G)
    assert gr.cone_distance(D) <= 1e-15
    assert gr.cone_distance(gr.avg_op(D, m * G.spacing, rule="trapezoid")) <= 1e-9
