import json
import math

import numpy as np
import pytest

from latticewaves import grid as gr
from latticewaves.checks import profile_difference
from latticewaves.errors import DegenerateWaveNumber, KOutOfRange, NotConverged
from latticewaves.flow import amplitude_to_gamma
from latticewaves.potentials import primal_flux, psi_q_prime, registry
from latticewaves.wavetrain import (
    branch_for,
    harmonic_solution,
    load_solution,
    ode_oracle_half_pi,
    save_solution,
    solve_wavetrain,
)


def test_branch_selection():
    assert branch_for(0.5) == (0.5, "hat")
    assert branch_for(math.pi / 2) == (math.pi / 2, "hat")
    kappa, branch = branch_for(2.5)
    assert branch == "tilde" and kappa == pytest.approx(math.pi - 2.5)
    for k in (0.0, math.pi):
        with pytest.raises(DegenerateWaveNumber):
            branch_for(k)
    with pytest.raises(KOutOfRange):
        branch_for(4.0)


def test_linear_model_dispersion():
    sol = solve_wavetrain(registry("linear:1"), math.pi / 3, alpha=1.0)
    assert sol.omega == pytest.approx(math.sin(math.pi / 3), abs=1e-12)
    assert sol.omega == pytest.approx(0.86603, abs=1e-5)
    amp = np.max(np.abs(sol.V.values))
    np.testing.assert_allclose(sol.V.values, amp * np.cos(sol.V.grid.nodes), atol=1e-12)


def test_solution_fields(ex1_quarter):
    s = ex1_quarter
    assert s.omega == pytest.approx(s.kappa * s.sigma, rel=1e-15) and s.sigma > 0
    assert abs(gr.mean(s.V)) <= 1e-10 * np.max(np.abs(s.V.values))
    np.testing.assert_allclose(s.V.values, psi_q_prime(s.model, s.q, s.Q.values) - s.eta,
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(s.U.values, s.v + s.V.values, rtol=0, atol=0)
    assert s.cone_distance <= 1e-6
    assert s.primal_residual <= 1e-4


def test_dual_round_trip(ex1_quarter):
    s = ex1_quarter
    f = primal_flux(s.model, s.v + s.V.values)
    lhs = f - f.mean()
    assert np.max(np.abs(lhs - s.Q.values)) <= 1e-8 * np.max(np.abs(s.Q.values))


def test_ex1_k_and_pi_minus_k_agree(ex1, ex1_quarter):
    mirror = solve_wavetrain(ex1, 3 * math.pi / 4, alpha=5.0)
    assert mirror.branch == "tilde" and mirror.gamma == pytest.approx(ex1_quarter.gamma, rel=1e-14)
    assert profile_difference(ex1_quarter.Q, mirror.Q) <= 1e-6
    assert mirror.omega == pytest.approx(ex1_quarter.omega, rel=1e-8)


def test_ex1_half_shift_symmetry(ex1_quarter):
    Q = ex1_quarter.Q
    assert np.max(np.abs(Q.values + gr.shift_pi(Q).values)) <= 1e-6 * np.max(np.abs(Q.values))


def test_ex2_k_and_pi_minus_k_differ():
    m = registry("ex2")
    a = solve_wavetrain(m, math.pi / 4, alpha=5.0)
    b = solve_wavetrain(m, 3 * math.pi / 4, alpha=5.0)
    assert profile_difference(a.Q, b.Q) > 1e-3


@pytest.mark.parametrize("model", ["ex1", "ex2", "ex3", "linear:2"])
def test_half_pi_antisymmetry_of_V(model):
    # at k = pi/2 the operator only keeps odd Fourier modes, so V = -TV for every model
    s = solve_wavetrain(registry(model), math.pi / 2, alpha=3.0)
    V = s.V.values
    assert np.max(np.abs(V + gr.shift_pi(s.V).values)) <= 1e-6 * np.max(np.abs(V))


@pytest.mark.parametrize("model", ["ex1", "linear:2"])
def test_half_pi_antisymmetry_of_Q_for_even_potentials(model):
    s = solve_wavetrain(registry(model), math.pi / 2, alpha=3.0)
    Q = s.Q.values
    assert np.max(np.abs(Q + gr.shift_pi(s.Q).values)) <= 1e-6 * np.max(np.abs(Q))


def test_omega_positive_across_k():
    m = registry("ex2")
    for k in (0.3, 1.2, 2.0, 2.9):
        assert solve_wavetrain(m, k, alpha=2.0).omega > 0


def test_harmonic_solution_examples():
    lin = registry("linear:1")
    s = harmonic_solution(lin, math.pi / 2, alpha=1.0)
    assert s.omega == pytest.approx(1.0, abs=1e-15)
    assert s.sigma == pytest.approx(2 / math.pi, abs=1e-15)
    flat = harmonic_solution(lin, 1.0, alpha=0.0)
    np.testing.assert_array_equal(flat.V.values, 0.0)
    c = 2.5
    lin_c = registry(f"linear:{c}")
    for k in (0.4, 1.1):
        a, b = harmonic_solution(lin_c, k, 1.0), harmonic_solution(lin_c, math.pi - k, 1.0)
        assert a.sigma * a.kappa == pytest.approx(math.sin(k) / c, abs=1e-15)
        assert b.sigma * b.kappa == pytest.approx(math.sin(k) / c, abs=1e-15)


def test_harmonic_solution_matches_flow():
    lin = registry("linear:2")
    ref = harmonic_solution(lin, 1.0, alpha=1.0)
    sol = solve_wavetrain(lin, 1.0, alpha=ref.alpha)
    assert sol.omega == pytest.approx(ref.omega, abs=1e-12)
    np.testing.assert_allclose(sol.Q.values, ref.Q.values, atol=1e-12)
    np.testing.assert_allclose(sol.V.values, ref.V.values, atol=1e-12)


def test_ode_oracle_harmonic_oscillator():
    res = ode_oracle_half_pi(registry("linear:1"), 0.0, 0.8)
    assert res.omega == pytest.approx(1.0, abs=1e-10)
    assert res.period == pytest.approx(2 * math.pi, abs=1e-9)
    np.testing.assert_allclose(res.V.values, 0.8 * np.cos(res.V.grid.nodes), atol=1e-9)
    assert res.energy_drift <= 1e-10


def test_ode_oracle_matches_flow(ex1, ex1_half):
    V = gr.align_maximum(ex1_half.V)
    res = ode_oracle_half_pi(ex1, ex1_half.v, float(np.max(V.values)), M=V.M)
    assert res.energy_drift <= 1e-10
    assert profile_difference(V, res.V) <= 1e-3
    assert res.omega == pytest.approx(ex1_half.omega, rel=1e-3)


def test_ex3_converges():
    m = registry("ex3")
    for k in (math.pi / 4, math.pi / 2, 3 * math.pi / 4):
        assert solve_wavetrain(m, k, alpha=2.0).residual <= 1e-5


def test_amplitude_to_gamma_monotone():
    m = registry("ex1")
    vals = [amplitude_to_gamma(m, 0.0, a) for a in (0.0, 1.0, 2.0, 5.0)]
    assert vals[0] == 0.0 and all(np.diff(vals) > 0)
    assert 3.125 <= vals[-1] <= 6.25


def test_gamma_and_snap_options(ex1):
    s = solve_wavetrain(ex1, 0.8, gamma=2.0, snap_k=True)
    assert s.gamma == 2.0
    assert s.meta["on_grid"] and s.k == pytest.approx(gr.PeriodicGrid(200).snap(0.8))


def test_unconverged_assembly(ex1):
    with pytest.raises(NotConverged):
        solve_wavetrain(ex1, 1.0, alpha=5.0, max_iters=2)
    s = solve_wavetrain(ex1, 1.0, alpha=5.0, max_iters=2, allow_unconverged=True)
    assert not s.converged and s.iterations == 2


def test_save_and_load(tmp_path, ex1_quarter):
    path = save_solution(ex1_quarter, tmp_path, "sol")
    rec = json.loads(path.read_text())
    assert rec["profile_csv"] == "sol_profile.csv" and rec["model"] == "ex1"
    header = (tmp_path / "sol_profile.csv").read_text().splitlines()[0]
    assert header == "phi,Q,V,U"
    back = load_solution(path)
    assert np.array_equal(back.U.values, ex1_quarter.U.values)
    assert back.omega == ex1_quarter.omega and back.model.name == "ex1"
