"""Wavetrain assembly from converged dual profiles, plus two analytic oracles.

A wavetrain ``u_j(t) = U(kj - ωt)`` with ``U = v + V`` is recovered from the
dual profile ``Q`` through ``V = Ψ_q'(Q) - η``, ``v = η + Ψ'(q)`` and
``ω = κσ``.  Wave numbers ``k ≤ π/2`` use the hat branch with ``κ = k``,
larger ones the tilde branch with ``κ = π - k``.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import grid as gr
from .errors import DegenerateWaveNumber, KOutOfRange, NoClosedOrbit, NotConverged
from .flow import FlowParams, FlowState, amplitude_to_gamma, solve_flow  # noqa: F401
from .potentials import (
    PotentialModel,
    dual_slope,
    primal_flux,
    primal_potential,
    psi_q_prime,
    registry,
    to_dual,
)


@dataclass
class WavetrainSolution:
    k: float
    kappa: float
    branch: str
    q: float
    gamma: float
    Q: gr.Profile
    sigma: float
    omega: float
    eta: float
    v: float
    V: gr.Profile
    U: gr.Profile
    residual: float
    cone_distance: float
    iterations: int
    converged: bool = True
    alpha: Optional[float] = None
    primal_residual: Optional[float] = None
    model: Optional[PotentialModel] = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def carrier(self, phase) -> np.ndarray:
        """U evaluated at arbitrary phases by trigonometric interpolation."""
        return gr.interpolate(self.U, np.asarray(phase, dtype=float))

    def summary(self) -> dict:
        return {
            "k": self.k, "kappa": self.kappa, "branch": self.branch, "q": self.q,
            "gamma": self.gamma, "alpha": self.alpha, "sigma": self.sigma,
            "omega": self.omega, "eta": self.eta, "v": self.v,
            "residual": self.residual, "primal_residual": self.primal_residual,
            "cone_distance": self.cone_distance, "iterations": self.iterations,
            "converged": self.converged,
        }


def branch_for(k: float):
    """(κ, branch) for a wave number in (0, π)."""
    if abs(k) < 1e-14 or abs(k - math.pi) < 1e-14:
        raise DegenerateWaveNumber(
            f"k = {k!r}: wavetrains degenerate at k = 0 (constant) and k = pi "
            "(stationary binary oscillation)"
        )
    if not 0 < k < math.pi:
        raise KOutOfRange(f"k = {k!r} outside (0, pi)")
    if k <= math.pi / 2:
        return k, "hat"
    return math.pi - k, "tilde"


def primal_equation_residual(model, V: gr.Profile, v: float, omega: float, k: float) -> float:
    """‖ω V' - ∇ₖΦ'(v+V)‖ / ‖∇ₖΦ'(v+V)‖ with a 4th-order derivative."""
    flux = V.with_values(np.asarray(primal_flux(model, v + V.values), dtype=float))
    rhs = gr.nabla_k(flux, k).values
    lhs = omega * gr.derivative(V, order=4).values
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))


def assemble(state: FlowState, params: FlowParams, k: float) -> WavetrainSolution:
    """Build the wavetrain fields from a flow state."""
    model = params.model
    Q = state.Q
    V = Q.with_values(psi_q_prime(model, params.q, Q.values) - state.eta)
    v = state.eta + float(dual_slope(model, params.q))
    U = V.with_values(v + V.values)
    omega = params.kappa * state.sigma
    sol = WavetrainSolution(
        k=k, kappa=params.kappa, branch=params.branch, q=params.q, gamma=state.gamma,
        alpha=state.alpha, Q=Q, sigma=state.sigma, omega=omega, eta=state.eta, v=v,
        V=V, U=U, residual=state.residual, cone_distance=gr.cone_distance(Q),
        iterations=state.iteration, converged=state.converged, model=model,
    )
    sol.primal_residual = primal_equation_residual(model, V, v, omega, k)
    sol.meta = {
        "model": model.metadata(), "M": params.M, "tau": params.tau, "tol": params.tol,
        "single_newton": params.single_newton, "offgrid": params.offgrid,
        "on_grid": gr.is_on_grid(params.grid, params.kappa),
        "newton_extra_steps": state.newton_extra_steps, "rejections": state.rejections,
    }
    return sol


def solve_wavetrain(model: PotentialModel, k: float, q: float = 0.0, *,
                    alpha: Optional[float] = None, gamma: Optional[float] = None,
                    M: int = 200, tau: float = 0.1, tol: float = 1e-8,
                    max_iters: int = 500_000, single_newton: bool = False,
                    snap_k: bool = False, offgrid: str = "fourier",
                    allow_unconverged: bool = False) -> WavetrainSolution:
    """Compute the wavetrain with wave number k, dual mean q and level γ (or α).

    ``NotConverged`` propagates unless ``allow_unconverged`` is set, in which
    case the last iterate is assembled with ``converged = False``.
    """
    if snap_k:
        k = gr.PeriodicGrid(M).snap(k)
    kappa, branch = branch_for(k)
    if model.side == "primal":
        model = to_dual(model)
    params = FlowParams(model, kappa, branch, q=q, gamma=gamma, alpha=alpha, M=M,
                        tau=tau, tol=tol, max_iters=max_iters,
                        single_newton=single_newton, offgrid=offgrid)
    try:
        state = solve_flow(params)
    except NotConverged as exc:
        if not allow_unconverged:
            raise
        state = exc.state
    return assemble(state, params, k)


def harmonic_solution(model: PotentialModel, k: float, alpha: float, q: float = 0.0,
                      M: int = 200) -> WavetrainSolution:
    """Closed-form wavetrain for Ψ'' ≡ c: V = α cos φ, ω = sin(k)/c."""
    c = float(model.psi2(np.array(0.0)))
    if not np.allclose(model.psi2(np.linspace(-5, 5, 11)), c, rtol=0, atol=1e-14):
        raise ValueError(f"{model.name!r} is not a linear (constant Ψ'') model")
    kappa, branch = branch_for(k)
    g = gr.PeriodicGrid(M)
    V = g.sample(lambda p: alpha * np.cos(p))
    Q = V.with_values(V.values / c)
    omega = math.sin(k) / c
    v = c * q
    return WavetrainSolution(
        k=k, kappa=kappa, branch=branch, q=q, gamma=0.25 * alpha ** 2 / c,
        alpha=alpha / c, Q=Q, sigma=omega / kappa, omega=omega, eta=0.0, v=v, V=V,
        U=V.with_values(v + V.values), residual=0.0, cone_distance=gr.cone_distance(Q),
        iterations=0, model=model, primal_residual=None,
    )


# ---------------------------------------------------------------------------
# k = π/2 planar ODE


@dataclass
class OdeOracleResult:
    V: gr.Profile
    omega: float
    period: float
    energy_drift: float


def ode_oracle_half_pi(model: PotentialModel, v: float, V0: float, M: int = 200,
                       rtol: float = 1e-12, atol: float = 1e-13,
                       t_max: float = 1e4) -> OdeOracleResult:
    """Profile of the k = π/2 wavetrain with V(0) = V0 from its planar ODE.

    Integrates ``X' = Φ'_sym(Y), Y' = -Φ'_sym(X)`` (unit frequency) from
    ``(V0, 0)`` with an 8th-order Dormand-Prince method until the orbit closes
    (``Y`` crossing zero downward after a full turn).  The orbit period ``T``
    fixes ``ω = 2π/T`` and the profile is ``V(φ) = X(φ/ω)``.
    """
    if not V0 > 0:
        raise ValueError("V0 must be positive")

    def sym_flux(x):
        x = np.asarray(x, dtype=float)
        f = primal_flux(model, np.concatenate([v + x, v - x]))
        return 0.5 * (f[: x.size] - f[x.size:])

    def sym_pot(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (primal_potential(model, v + x) + primal_potential(model, v - x))

    def rhs(t, y):
        f = sym_flux(y)
        return [f[1], -f[0]]

    def v_up(t, y):
        return y[0]
    v_up.terminal = True
    v_up.direction = 1

    def y_down(t, y):
        return y[1]
    y_down.terminal = True
    y_down.direction = -1

    opts = dict(method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    first = solve_ivp(rhs, (0.0, t_max), [V0, 0.0], events=v_up, **opts)
    if first.status != 1 or not len(first.t_events[0]):
        raise NoClosedOrbit("orbit never re-crossed V = 0 upward (non-convex potential?)")
    t1 = float(first.t_events[0][0])
    y1 = first.y_events[0][0]
    second = solve_ivp(rhs, (t1, t1 + t_max), y1, events=y_down, **opts)
    if second.status != 1 or not len(second.t_events[0]):
        raise NoClosedOrbit("orbit did not return to the start point")
    T = float(second.t_events[0][0])
    y_end = second.y_events[0][0]

    h0 = float(sym_pot(np.array([V0])).sum() + sym_pot(np.array([0.0])).sum())
    h1 = float(sym_pot(np.array([y_end[0]])).sum() + sym_pot(np.array([y_end[1]])).sum())
    drift = abs(h1 - h0) / max(abs(h0), 1e-300)

    omega = 2 * math.pi / T
    g = gr.PeriodicGrid(M)
    s = np.mod(g.nodes, 2 * math.pi) / omega
    X = np.where(s <= t1, first.sol(np.minimum(s, t1))[0], second.sol(np.maximum(s, t1))[0])
    return OdeOracleResult(V=gr.Profile(g, X), omega=omega, period=T, energy_drift=drift)


# ---------------------------------------------------------------------------
# files


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def save_solution(sol: WavetrainSolution, outdir, stem: str = "wavetrain") -> Path:
    """Write ``<stem>.json`` and ``<stem>_profile.csv`` (phi, Q, V, U)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{stem}_profile.csv"
    rows = ["phi,Q,V,U"]
    for phi, a, b, c in zip(sol.Q.grid.nodes, sol.Q.values, sol.V.values, sol.U.values):
        rows.append(",".join(repr(float(x)) for x in (phi, a, b, c)))
    _atomic_write(csv_path, "\n".join(rows) + "\n")
    record = dict(sol.summary())
    record["M"] = sol.Q.M
    record["model"] = sol.model.spec if sol.model is not None else None
    record["profile_csv"] = csv_path.name
    record["meta"] = sol.meta
    json_path = outdir / f"{stem}.json"
    _atomic_write(json_path, json.dumps(record, indent=2, default=float) + "\n")
    return json_path


def load_solution(json_path) -> WavetrainSolution:
    json_path = Path(json_path)
    rec = json.loads(json_path.read_text())
    with open(json_path.parent / rec["profile_csv"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    g = gr.PeriodicGrid(len(rows))
    phi = np.array([float(r["phi"]) for r in rows])
    if not np.allclose(phi, g.nodes, rtol=0, atol=1e-12):
        raise gr.GridMismatch("profile CSV nodes do not match the grid convention")
    col = {c: gr.Profile(g, np.array([float(r[c]) for r in rows])) for c in ("Q", "V", "U")}
    model = registry(rec["model"]) if rec.get("model") else None
    return WavetrainSolution(
        k=rec["k"], kappa=rec["kappa"], branch=rec["branch"], q=rec["q"],
        gamma=rec["gamma"], alpha=rec.get("alpha"), Q=col["Q"], sigma=rec["sigma"],
        omega=rec["omega"], eta=rec["eta"], v=rec["v"], V=col["V"], U=col["U"],
        residual=rec["residual"], cone_distance=rec["cone_distance"],
        iterations=rec["iterations"], converged=rec["converged"],
        primal_residual=rec.get("primal_residual"), model=model, meta=rec.get("meta", {}),
    )
