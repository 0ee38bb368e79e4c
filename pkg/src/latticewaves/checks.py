"""Numerical acceptance checks shared by ``latticewaves validate`` and the test suite.

Each check returns a :class:`CheckResult`; none of them raise on a failed
tolerance.  Runtime limits are part of the verdict.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import grid as gr
from . import lattice as lat
from .flow import FlowParams, solve_flow
from .potentials import registry
from .wavetrain import ode_oracle_half_pi, solve_wavetrain


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0
    limit: float = math.inf

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] {self.key} {self.title} ({self.seconds:.2f}s / {self.limit:g}s) {vals}"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.3e}"
    return str(v)


def _timed(key, title, limit):
    def wrap(fn: Callable[..., tuple]):
        def runner(seed: int = 0) -> CheckResult:
            t0 = time.perf_counter()
            ok, measured = fn(seed)
            dt = time.perf_counter() - t0
            return CheckResult(key, title, bool(ok) and dt < limit, measured, dt, limit)
        runner.key = key
        runner.title = title
        return runner
    return wrap


# ---------------------------------------------------------------------------
# operators


def offgrid_errors(k: float, Ms=(200, 400, 800)):
    errs = []
    for M in Ms:
        g = gr.PeriodicGrid(M)
        out = gr.avg_op(g.sample(np.cos), k)
        errs.append(float(np.max(np.abs(out.values - math.sin(k) * np.cos(g.nodes)))))
    return errs


@_timed("C1", "averaging operator on cos", 1.0)
def check_operator_oracle(seed=0):
    g = gr.PeriodicGrid(200)
    cos = g.sample(np.cos)
    on = 0.0
    for m in (1, 13, 25, 50, 77, 99):
        k = m * g.spacing
        err = np.max(np.abs(gr.avg_op(cos, k).values - math.sin(k) * cos.values))
        on = max(on, float(err))
    # θ = k/Δφ - K stays in {1/3, 2/3} for M = 200, 400, 800
    e = offgrid_errors(2 * math.pi * (25 + 1 / 3) / 200)
    r1, r2 = e[0] / e[1], e[1] / e[2]
    ok = on <= 1e-12 and all(3.5 <= r <= 4.5 for r in (r1, r2))
    return ok, {"on_grid_err": on, "ratio_200_400": r1, "ratio_400_800": r2}


@_timed("C2", "pairing <cos, B_hat cos> at M=400", 1.0)
def check_pairing(seed=0):
    g = gr.PeriodicGrid(400)
    cos = g.sample(np.cos)
    worst = 0.0
    for kappa in (math.pi / 8, math.pi / 4, math.pi / 2):
        val = gr.inner(cos, gr.b_hat(cos, kappa))
        worst = max(worst, abs(val - math.sin(kappa) / (2 * kappa)))
    return worst <= 1e-12, {"max_err": worst}


# ---------------------------------------------------------------------------
# flow


@_timed("C3", "harmonic fixed point", 1.0)
def check_harmonic(seed=0):
    worst_s, worst_p, iters = 0.0, 0.0, 0
    for c in (0.5, 1.0, 2.5):
        model = registry(f"linear:{c}")
        for kappa in (0.3, math.pi / 4, 1.2, math.pi / 2):
            st = solve_flow(FlowParams(model, kappa, alpha=1.7, tol=1e-12, max_iters=10))
            s_ref = math.sin(kappa) / (kappa * c)
            worst_s = max(worst_s, abs(st.sigma - s_ref))
            g = st.Q.grid
            amp = math.sqrt(2 * gr.norm(st.Q) ** 2)
            worst_p = max(worst_p, float(np.max(np.abs(st.Q.values - amp * np.cos(g.nodes)))))
            iters = max(iters, st.iteration)
    ok = worst_s <= 1e-10 and worst_p <= 1e-10 and iters <= 10
    return ok, {"sigma_err": worst_s, "profile_err": worst_p, "max_iters": iters}


def flow_invariants(model="ex1", kappa=math.pi / 4, branch="hat", alpha=5.0, M=200):
    params = FlowParams(registry(model), kappa, branch, alpha=alpha, M=M, tau=0.1,
                        tol=1e-8, record_history=True)
    st = solve_flow(params)
    h = st.history
    F = np.asarray(h["F"])
    dF = float(np.min(np.diff(F))) if F.size > 1 else 0.0
    W = np.asarray(h["W"])
    return st, {
        "min_dF": dF,
        "W_dev": float(np.max(np.abs(W - st.gamma)) / st.gamma),
        "max_mean": float(np.max(np.abs(h["mean"]))),
        "max_cone": float(np.max(h["cone"])),
        "residual": st.residual,
        "sigma": st.sigma,
        "iters": st.iteration,
    }


@_timed("C4", "flow invariants, ex1 k=pi/4", 30.0)
def check_flow_invariants(seed=0):
    st, m = flow_invariants()
    ok = (m["min_dF"] >= -1e-12 and m["W_dev"] <= 1e-8 and m["max_mean"] <= 1e-12
          and m["max_cone"] <= 1e-6 and m["residual"] <= 1e-8 and m["sigma"] > 0)
    return ok, m


# ---------------------------------------------------------------------------
# wavetrains


def profile_difference(a: gr.Profile, b: gr.Profile) -> float:
    a, b = gr.align_maximum(a), gr.align_maximum(b)
    return float(np.max(np.abs(a.values - b.values)) / np.max(np.abs(a.values)))


@_timed("C5", "k vs pi-k symmetry (ex1) and asymmetry (ex2)", 120.0)
def check_symmetries(seed=0):
    m1 = registry("ex1")
    k = math.pi / 4
    a = solve_wavetrain(m1, k, alpha=5.0)
    b = solve_wavetrain(m1, math.pi - k, alpha=5.0)
    sym = profile_difference(a.Q, b.Q)
    shift = float(np.max(np.abs(a.Q.values + gr.shift_pi(a.Q).values)) / np.max(np.abs(a.Q.values)))
    m2 = registry("ex2")
    c = solve_wavetrain(m2, k, alpha=5.0)
    d = solve_wavetrain(m2, math.pi - k, alpha=5.0)
    asym = profile_difference(c.Q, d.Q)
    gamma_gap = abs(a.gamma - b.gamma) / a.gamma
    ok = sym <= 1e-6 and shift <= 1e-6 and asym > 1e-3 and gamma_gap <= 1e-12
    return ok, {"ex1_diff": sym, "ex1_shift_defect": shift, "ex2_diff": asym}


@_timed("C6", "k=pi/2 ODE oracle (ex1)", 30.0)
def check_ode_oracle(seed=0):
    model = registry("ex1")
    sol = solve_wavetrain(model, math.pi / 2, alpha=5.0)
    V = gr.align_maximum(sol.V)
    ode = ode_oracle_half_pi(model, sol.v, float(np.max(V.values)), M=V.M)
    sup = profile_difference(V, ode.V)
    dw = abs(sol.omega - ode.omega) / ode.omega
    return sup <= 1e-3 and dw <= 1e-3, {"sup_rel": sup, "omega_rel": dw,
                                        "omega": sol.omega}


@_timed("C10", "degenerate ex3 converges", 120.0)
def check_ex3(seed=0):
    model = registry("ex3")
    res = {}
    for name, k in (("pi/4", math.pi / 4), ("pi/2", math.pi / 2), ("3pi/4", 3 * math.pi / 4)):
        sol = solve_wavetrain(model, k, alpha=2.0, tol=1e-8)
        res[name] = sol.residual
    return max(res.values()) <= 1e-5, {f"res_{k}": v for k, v in res.items()}


# ---------------------------------------------------------------------------
# lattice


def advection_run(J=200, p=25, h=1e-3, periods=10.0):
    sol = solve_wavetrain(registry("ex1"), 2 * math.pi * p / J, alpha=5.0)
    u0 = lat.wavetrain_ic(sol, J, p, strict=True)
    state = lat.bootstrap(u0, h, registry("ex1"))
    steps = int(round(periods / sol.omega / h)) - 1
    rec = lat.run(state, steps, diagnostics_every=0)
    return sol, rec


@_timed("C7", "wavetrain advection on the lattice", 60.0)
def check_advection(seed=0):
    sol, rec = advection_run()
    err = lat.advection_error(sol, rec.final)
    return err <= 1e-3, {"rel_l2": err, "t": rec.final.t, "10/omega": 10 / sol.omega}


def structure_run(model="quartic", h=0.01, J=200, steps=100_000):
    m = registry(model)
    u0 = lat.longwave_ic(J, "1 + 0.3*sin(2*pi*x) + 0.1*cos(4*pi*x)")
    rec = lat.run(lat.bootstrap(u0, h, m), steps, diagnostics_every=7)
    s, par, H = rec.series("sum_u"), rec.series("parity"), rec.series("H")
    scale = J * float(np.max(np.abs(u0)))
    parity = max(float(np.max(np.abs(s[par == p] - s[par == p][0]))) for p in (0, 1)) / scale
    band = float((H.max() - H.min()) / abs(H.mean()))
    n = max(H.size // 10, 1)
    drift = float(abs(H[-n:].mean() - H[:n].mean()) / abs(H.mean()))
    return {"parity_rel": parity, "H_band": band, "H_drift": drift}


@_timed("C8", "leapfrog parity sums and energy band, 1e5 steps", 60.0)
def check_structure(seed=0):
    out, ok = {}, True
    for model, h in (("linear:1", 0.05), ("quartic", 0.01)):
        m = structure_run(model, h)
        ok &= (m["parity_rel"] <= 1e-9 and m["H_band"] <= 1e-3
               and m["H_drift"] <= max(0.1 * m["H_band"], 1e-12))
        out.update({f"{model.split(':')[0]}_{k}": v for k, v in m.items()})
    return ok, out


SHOCK_DATA = "1 - 0.65*sin(2*pi*x)"


def shock_run(N, h=0.01, taus=(0.02, 0.08)):
    m = registry("quartic")
    u0 = lat.longwave_ic(N, SHOCK_DATA)
    targets = [lat.steps_for_tau(t, N, h) for t in taus]
    rec = lat.run(lat.bootstrap(u0, h, m), max(targets) - 1, snapshot_steps=targets,
                  diagnostics_every=0)
    snaps = {step: u for step, _, u in rec.snapshots}
    return u0, [snaps[s] for s in targets]


@_timed("C9", "dispersive shock onset at N=400", 300.0)
def check_shock(seed=0):
    u0, (a, b) = shock_run(400)
    ratio = lat.oscillation_indicator(b) / lat.oscillation_indicator(a)
    tv = abs(lat.total_variation(a) / lat.total_variation(u0) - 1)
    _, (c, _) = shock_run(200)
    conv = float(np.linalg.norm(lat.downsample(a, 2) - c) / np.linalg.norm(c))
    return ratio >= 10 and conv <= 0.02 and tv <= 0.05, {
        "osc_ratio": ratio, "N200_vs_N400": conv, "tv_change": tv}


# ---------------------------------------------------------------------------
# seeded randomized checks


def smooth_cone_member(rng, g):
    """f(cos φ) with f increasing (odd powers, positive weights) lies in the cone."""
    c = rng.uniform(0.0, 1.0, size=3)
    x = np.cos(g.nodes)
    vals = c[0] * x + c[1] * x ** 3 + c[2] * x ** 5
    return gr.Profile(g, vals - vals.mean())


def discrete_cone_member(rng, g):
    """Arbitrary even samples, non-decreasing from φ = -π to φ = 0."""
    half = g.M // 2
    left = np.sort(rng.standard_normal(half + 1))  # values at -π, -π+h, ..., 0
    v = np.empty(g.M)
    v[-1] = left[0]
    v[:half] = left[1:]
    i = np.arange(half, g.M - 1)
    v[i] = v[g.M - i - 2]
    return gr.Profile(g, v - v.mean())


@_timed("P1", "random operator symmetry and cone invariance", 10.0)
def check_random_operators(seed=0):
    rng = np.random.default_rng(seed)
    g = gr.PeriodicGrid(200)
    sym, cone, cone_d = 0.0, 0.0, 0.0
    for _ in range(20):
        k = int(rng.integers(1, 100)) * g.spacing
        P = gr.Profile(g, rng.standard_normal(g.M))
        Q = gr.Profile(g, rng.standard_normal(g.M))
        sym = max(sym, abs(gr.inner(P, gr.avg_op(Q, k)) - gr.inner(gr.avg_op(P, k), Q)))
        cone = max(cone, gr.cone_distance(gr.avg_op(smooth_cone_member(rng, g), k)))
        D = discrete_cone_member(rng, g)
        cone_d = max(cone_d, gr.cone_distance(gr.avg_op(D, k, rule="trapezoid")))
    ok = sym <= 1e-12 and cone <= 1e-9 and cone_d <= 1e-9
    return ok, {"symmetry": sym, "cone_smooth": cone, "cone_discrete": cone_d}


@_timed("P2", "random lattice telescoping and time reversal", 10.0)
def check_random_lattice(seed=0):
    rng = np.random.default_rng(seed)
    m = registry("quartic")
    worst_sum, worst_rev = 0.0, 0.0
    for _ in range(5):
        J = int(rng.integers(8, 64))
        u = 1 + 0.3 * rng.standard_normal(J)
        worst_sum = max(worst_sum, abs(float(lat.rhs(u, m).sum())) / J)
        n = 200
        rec = lat.run(lat.bootstrap(u, 0.01, m), n, diagnostics_every=0)
        back = lat.run(lat.reverse(rec.final), n, diagnostics_every=0)
        worst_rev = max(worst_rev, float(np.max(np.abs(back.final.u_curr - u))) / (n + 1))
    return worst_sum <= 1e-13 and worst_rev <= 1e-10, {"rhs_sum": worst_sum,
                                                        "reversal_per_step": worst_rev}


SUITES = {
    "operators": [check_operator_oracle, check_pairing, check_random_operators],
    "flow": [check_harmonic, check_flow_invariants],
    "wavetrain": [check_symmetries, check_ode_oracle, check_ex3],
    "lattice": [check_advection, check_structure, check_shock, check_random_lattice],
}
ACCEPTANCE = [check_operator_oracle, check_pairing, check_harmonic, check_flow_invariants,
              check_symmetries, check_ode_oracle, check_advection, check_structure,
              check_shock, check_ex3]


def run_suite(name: str = "all", seed: int = 0):
    if name == "all":
        checks = [c for suite in SUITES.values() for c in suite]
    elif name == "acceptance":
        checks = ACCEPTANCE
    elif name in SUITES:
        checks = SUITES[name]
    else:
        raise KeyError(f"unknown suite {name!r}; choose from all, acceptance, {', '.join(SUITES)}")
    return [c(seed) for c in checks]
