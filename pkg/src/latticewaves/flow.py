"""Constrained gradient flow for the dual wavetrain profile.

The flow maximizes ``F(Q) = ½⟨Q, BQ⟩`` over mean-zero profiles with
``W(Q) = mean(Ψ_q(Q)) = γ``.  One iteration is the explicit Euler map

    Q ↦ (1-τ)Q + τBQ - τσ(Q)P(Q),   P(Q) = Ψ_q'(Q) - η(Q),

followed by removal of the mean drift and a Newton rescaling ``Q ↦ λQ``
back onto ``W = γ``.  ``B`` is ``B̂_κ = κ⁻¹A_κ`` on the ``hat`` branch and
``B̃_κ = -κ⁻¹A_κ𝓣`` on the ``tilde`` branch.  A stationary point solves
``σ(Ψ_q'(Q) - η) = BQ``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import grid as gr
from .errors import DegenerateNewton, NotConverged, StalledFlow, ZeroProfile
from .potentials import PotentialModel, psi2, psi_q, psi_q_prime, to_dual

log = logging.getLogger(__name__)

BRANCHES = ("hat", "tilde")


class BranchOperator:
    """``B̂_κ`` or ``B̃_κ`` on raw node arrays."""

    def __init__(self, grid: gr.PeriodicGrid, kappa: float, branch: str = "hat",
                 rule: str = "spectral", offgrid: str = "fourier"):
        if branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
        gr._check_k(kappa, math.pi / 2, closed=True)
        self.grid = grid
        self.kappa = float(kappa)
        self.branch = branch
        self.avg = gr.AveragingOperator(grid, kappa, rule, offgrid)
        self._half = grid.M // 2

    def __call__(self, values: np.ndarray) -> np.ndarray:
        if self.branch == "hat":
            return self.avg.apply(values) / self.kappa
        return -self.avg.apply(np.roll(values, -self._half)) / self.kappa

    @property
    def wave_number(self) -> float:
        return self.kappa if self.branch == "hat" else math.pi - self.kappa


@dataclass
class FlowParams:
    model: PotentialModel
    kappa: float
    branch: str = "hat"
    q: float = 0.0
    gamma: Optional[float] = None
    alpha: Optional[float] = None
    M: int = 200
    tau: float = 0.1
    tol: float = 1e-8
    max_iters: int = 500_000
    single_newton: bool = False
    newton_tol: float = 1e-12
    rule: str = "spectral"
    offgrid: str = "fourier"
    record_history: bool = False

    def __post_init__(self):
        if self.model.side == "primal":
            self.model = to_dual(self.model)
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}")
        if not 0 < self.kappa <= math.pi / 2:
            raise ValueError(f"kappa = {self.kappa} outside (0, pi/2]")
        if not 0 < self.tau < 1:
            raise ValueError(f"tau = {self.tau} outside (0, 1)")
        if (self.gamma is None) == (self.alpha is None):
            raise ValueError("give exactly one of gamma and alpha")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        gr.PeriodicGrid(self.M)

    @property
    def grid(self) -> gr.PeriodicGrid:
        return gr.PeriodicGrid(self.M)


@dataclass
class FlowState:
    Q: gr.Profile
    iteration: int
    F: float
    W: float
    sigma: float
    eta: float
    residual: float
    gamma: float
    alpha: Optional[float] = None
    converged: bool = False
    rejections: int = 0
    newton_extra_steps: int = 0
    history: Optional[dict] = field(default=None, repr=False)

    @property
    def mu(self) -> float:
        """Multiplier of the mean constraint, -σ·η."""
        return -self.sigma * self.eta


# ---------------------------------------------------------------------------
# functionals and multipliers on Profiles


def _operator(Q: gr.Profile, kappa, branch, **opts) -> BranchOperator:
    return BranchOperator(Q.grid, kappa, branch, **opts)


def functional_F(Q: gr.Profile, kappa: float, branch: str = "hat", **opts) -> float:
    """F(Q) = ½⟨Q, BQ⟩."""
    BQ = _operator(Q, kappa, branch, **opts)(Q.values)
    return 0.5 * float(np.dot(Q.values, BQ)) / Q.M


def functional_W(Q: gr.Profile, model: PotentialModel, q: float = 0.0) -> float:
    """W(Q) = mean Ψ_q(Q)."""
    return float(np.mean(psi_q(model, q, Q.values)))


def eta_of(Q: gr.Profile, model: PotentialModel, q: float = 0.0) -> float:
    return float(np.mean(psi_q_prime(model, q, Q.values)))


def p_of(Q: gr.Profile, model: PotentialModel, q: float = 0.0) -> gr.Profile:
    d = psi_q_prime(model, q, Q.values)
    return Q.with_values(d - d.mean())


def _sigma(P, BQ, Q):
    pp = float(np.dot(P, P))
    qq = float(np.dot(Q, Q))
    if math.sqrt(pp) <= 1e-14 * (1 + math.sqrt(qq)) * math.sqrt(P.size) or pp == 0.0:
        raise ZeroProfile("P(Q) vanishes; the flow is undefined at Q = 0")
    return float(np.dot(P, BQ)) / pp


def sigma_of(Q: gr.Profile, model: PotentialModel, q: float, kappa: float,
             branch: str = "hat", **opts) -> float:
    """σ(Q) = ⟨P(Q), BQ⟩ / ‖P(Q)‖²."""
    BQ = _operator(Q, kappa, branch, **opts)(Q.values)
    return _sigma(p_of(Q, model, q).values, BQ, Q.values)


def residual(Q: gr.Profile, sigma: float, eta: float, model: PotentialModel, q: float,
             kappa: float, branch: str = "hat", **opts) -> float:
    """‖σ(Ψ_q'(Q) - η) - BQ‖ / ‖BQ‖."""
    BQ = _operator(Q, kappa, branch, **opts)(Q.values)
    d = sigma * (psi_q_prime(model, q, Q.values) - eta) - BQ
    return float(np.linalg.norm(d) / max(np.linalg.norm(BQ), 1e-300))


# ---------------------------------------------------------------------------
# constraint handling


def amplitude_to_gamma(model: PotentialModel, q: float, alpha: float, M: int = 200) -> float:
    """γ = mean over the grid of Ψ_q(α cos φ)."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    g = gr.PeriodicGrid(M)
    return float(np.mean(psi_q(model, q, alpha * np.cos(g.nodes))))


def gamma_to_amplitude(model: PotentialModel, q: float, gamma: float, M: int = 200) -> float:
    """Invert :func:`amplitude_to_gamma` by bracketing root search."""
    c = float(psi2(model, q))
    guess = math.sqrt(4 * gamma / c) if c > 0 else math.sqrt(4 * gamma)
    hi = 10 * guess
    for _ in range(60):
        if amplitude_to_gamma(model, q, hi, M) >= gamma:
            break
        hi *= 2
    return brentq(lambda a: amplitude_to_gamma(model, q, a, M) - gamma, 0.0, hi,
                  xtol=1e-15, rtol=1e-15)


def newton_scale(Q: np.ndarray, gamma: float, model: PotentialModel, q: float,
                 single: bool = False, tol: float = 1e-12, max_steps: int = 50):
    """Factor λ with mean Ψ_q(λQ) ≈ γ, starting Newton at λ = 1.

    Returns ``(λ, extra_steps)`` where ``extra_steps`` counts Newton steps
    beyond the first.
    """
    lam = 1.0
    for step in range(max_steps):
        x = lam * Q
        g = float(np.mean(psi_q(model, q, x))) - gamma
        if step > 0 and (single or abs(g) <= tol * gamma):
            return lam, step - 1
        slope = float(np.mean(psi_q_prime(model, q, x) * Q))
        if not slope > 0:
            if not model.nonuniform:
                raise DegenerateNewton(f"<Psi_q'(Q), Q> = {slope:.3e} <= 0")
            warnings.warn("degenerate Newton slope; falling back to bisection",
                          RuntimeWarning, stacklevel=2)
            return _bisect_scale(Q, gamma, model, q), step
        lam -= g / slope
    return lam, max_steps - 1


def _bisect_scale(Q, gamma, model, q):
    hi = 2.0
    while np.mean(psi_q(model, q, hi * Q)) < gamma:
        hi *= 2
    return brentq(lambda s: float(np.mean(psi_q(model, q, s * Q))) - gamma, 0.0, hi,
                  xtol=1e-15)


def renormalize(Q: gr.Profile, gamma: float, model: PotentialModel, q: float = 0.0,
                single: bool = False) -> gr.Profile:
    """Rescale Q onto the level set W = γ (one Newton step, then polish)."""
    if not np.any(Q.values):
        raise ZeroProfile("cannot rescale the zero profile")
    lam, _ = newton_scale(Q.values, gamma, model, q, single=single)
    return Q.with_values(lam * Q.values)


# ---------------------------------------------------------------------------
# iteration


def euler_map(Q, BQ, P, sigma, tau):
    """I_τ(Q) = (1-τ)Q + τBQ - τσP, before any renormalization."""
    return (1 - tau) * Q + tau * BQ - tau * sigma * P


PIN_TOL = 1e-8


class _Stepper:
    """Array-level flow machinery shared by euler_step and solve_flow."""

    def __init__(self, params: FlowParams, gamma: float):
        self.p = params
        self.gamma = gamma
        self.B = BranchOperator(params.grid, params.kappa, params.branch,
                                params.rule, params.offgrid)
        self.M = params.M

    def diagnostics(self, Q, BQ):
        p = self.p
        d = psi_q_prime(p.model, p.q, Q)
        eta = float(d.mean())
        P = d - eta
        sigma = _sigma(P, BQ, Q)
        res = float(np.linalg.norm(sigma * P - BQ) / max(np.linalg.norm(BQ), 1e-300))
        F = 0.5 * float(np.dot(Q, BQ)) / self.M
        return P, eta, sigma, res, F

    def pinned(self, Q) -> bool:
        W = float(np.mean(psi_q(self.p.model, self.p.q, Q)))
        return abs(W - self.gamma) <= PIN_TOL * self.gamma

    def step(self, Q, BQ, P, sigma, F, tau):
        """Returns (Q_new, BQ_new, F_new, tau_used, rejections, newton_extra).

        F is only comparable between iterates on the same level set, so the
        monotonicity guard is skipped when either end misses W = γ (which can
        happen with a single Newton step).
        """
        rejections = 0
        guard = not self.p.single_newton or self.pinned(Q)
        while True:
            new = euler_map(Q, BQ, P, sigma, tau)
            new -= new.mean()
            lam, extra = newton_scale(new, self.gamma, self.p.model, self.p.q,
                                      single=self.p.single_newton, tol=self.p.newton_tol)
            new *= lam
            new -= new.mean()
            BQ_new = self.B(new)
            F_new = 0.5 * float(np.dot(new, BQ_new)) / self.M
            if F_new >= F - 1e-12 or not (guard and (not self.p.single_newton or self.pinned(new))):
                return new, BQ_new, F_new, tau, rejections, extra
            rejections += 1
            tau *= 0.5
            if tau < 1e-8:
                raise StalledFlow(f"step size underflow while F kept decreasing (F = {F})")


def _make_state(Q, grid, F, W, sigma, eta, res, gamma, **kw) -> FlowState:
    return FlowState(gr.Profile(grid, Q.copy()), F=F, W=W, sigma=sigma, eta=eta,
                     residual=res, gamma=gamma, **kw)


def euler_step(state: FlowState, params: FlowParams) -> FlowState:
    """One guarded Euler step followed by renormalization onto W = γ."""
    stepper = _Stepper(params, state.gamma)
    Q = state.Q.values
    BQ = stepper.B(Q)
    P, eta, sigma, res, F = stepper.diagnostics(Q, BQ)
    new, BQ_new, F_new, _, rej, extra = stepper.step(Q, BQ, P, sigma, F, params.tau)
    P2, eta2, sigma2, res2, _ = stepper.diagnostics(new, BQ_new)
    W = float(np.mean(psi_q(params.model, params.q, new)))
    return _make_state(new, state.Q.grid, F_new, W, sigma2, eta2, res2, state.gamma,
                       iteration=state.iteration + 1, alpha=state.alpha,
                       rejections=state.rejections + rej,
                       newton_extra_steps=state.newton_extra_steps + extra)


def initial_state(params: FlowParams) -> FlowState:
    g = params.grid
    if params.alpha is not None:
        alpha = params.alpha
        gamma = amplitude_to_gamma(params.model, params.q, alpha, params.M)
    else:
        gamma = params.gamma
        alpha = gamma_to_amplitude(params.model, params.q, gamma, params.M)
    Q = alpha * np.cos(g.nodes)
    Q -= Q.mean()
    stepper = _Stepper(params, gamma)
    BQ = stepper.B(Q)
    P, eta, sigma, res, F = stepper.diagnostics(Q, BQ)
    W = float(np.mean(psi_q(params.model, params.q, Q)))
    return _make_state(Q, g, F, W, sigma, eta, res, gamma, iteration=0, alpha=alpha)


def solve_flow(params: FlowParams, state: Optional[FlowState] = None) -> FlowState:
    """Iterate the renormalized Euler map until the relative residual ≤ tol.

    Raises :class:`NotConverged` (carrying the last state) when the iteration
    budget runs out.
    """
    if state is None:
        state = initial_state(params)
    gamma = state.gamma
    stepper = _Stepper(params, gamma)
    Q = state.Q.values.copy()
    BQ = stepper.B(Q)
    hist = None
    if params.record_history:
        hist = {k: [] for k in ("F", "W", "mean", "cone", "residual", "sigma", "tau")}
    rejections = state.rejections
    extra_total = state.newton_extra_steps
    it = state.iteration
    g = params.grid

    while True:
        P, eta, sigma, res, F = stepper.diagnostics(Q, BQ)
        if hist is not None:
            hist["F"].append(F)
            hist["W"].append(float(np.mean(psi_q(params.model, params.q, Q))))
            hist["mean"].append(float(Q.mean()))
            hist["cone"].append(gr.cone_distance(gr.Profile(g, Q)))
            hist["residual"].append(res)
            hist["sigma"].append(sigma)
        done = res <= params.tol
        if done or it >= params.max_iters:
            W = float(np.mean(psi_q(params.model, params.q, Q)))
            out = _make_state(Q, g, F, W, sigma, eta, res, gamma, iteration=it,
                              alpha=state.alpha, converged=done, rejections=rejections,
                              newton_extra_steps=extra_total, history=hist)
            if not done:
                raise NotConverged(
                    f"residual {res:.3e} > tol {params.tol:.1e} after {it} iterations",
                    state=out,
                )
            log.debug("flow converged after %d iterations (residual %.2e)", it, res)
            return out
        Q, BQ, F, tau_used, rej, extra = stepper.step(Q, BQ, P, sigma, F, params.tau)
        rejections += rej
        extra_total += extra
        if hist is not None:
            hist["tau"].append(tau_used)
        it += 1
