"""Periodic lattice ``2u̇_j + Φ'(u_{j+1}) - Φ'(u_{j-1}) = 0`` and its leapfrog integrator.

The two-step scheme

    u_{n+1,j} = u_{n-1,j} - h Φ'(u_{n,j+1}) + h Φ'(u_{n,j-1})

comes from a discrete action principle.  Summing over a periodic ring
telescopes the flux terms, so ``Σ_j u`` is conserved separately on even and
odd time levels.  The second starting slice is produced by one classical
Runge-Kutta step.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import grid as gr
from .errors import BlowUp, IncommensurateK
from .expr import compile_expr
from .potentials import PotentialModel, primal_curvature, primal_flux, primal_potential

log = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e6


def flux(model: PotentialModel, u):
    return np.asarray(primal_flux(model, u), dtype=float)


def rhs(u: np.ndarray, model: PotentialModel) -> np.ndarray:
    """u̇_j = -½(Φ'(u_{j+1}) - Φ'(u_{j-1})), periodic in j."""
    u = np.asarray(u, dtype=float)
    if u.size < 3:
        raise ValueError("lattice needs at least 3 sites")
    f = flux(model, u)
    return -0.5 * (np.roll(f, -1) - np.roll(f, 1))


@dataclass
class LatticeState:
    u_prev: np.ndarray
    u_curr: np.ndarray
    h: float
    model: PotentialModel
    t: float = 0.0
    step: int = 0

    @property
    def J(self) -> int:
        return self.u_curr.size


def bootstrap(u0, h: float, model: PotentialModel) -> LatticeState:
    """Two starting slices: ``u0`` and one RK4 step of size h."""
    u0 = np.array(u0, dtype=float)
    k1 = rhs(u0, model)
    k2 = rhs(u0 + 0.5 * h * k1, model)
    k3 = rhs(u0 + 0.5 * h * k2, model)
    k4 = rhs(u0 + h * k3, model)
    u1 = u0 + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return LatticeState(u_prev=u0, u_curr=u1, h=h, model=model, t=h, step=1)


def leapfrog_step(state: LatticeState) -> LatticeState:
    f = flux(state.model, state.u_curr)
    new = state.u_prev - state.h * (np.roll(f, -1) - np.roll(f, 1))
    if not np.all(np.abs(new) <= BLOWUP_LIMIT):
        raise BlowUp(f"|u| exceeded {BLOWUP_LIMIT:g} at t = {state.t + state.h:.6g}")
    return LatticeState(u_prev=state.u_curr, u_curr=new, h=state.h, model=state.model,
                        t=state.t + state.h, step=state.step + 1)


def reverse(state: LatticeState) -> LatticeState:
    """Swap the slices and negate h: the scheme then runs backward in time."""
    return replace(state, u_prev=state.u_curr, u_curr=state.u_prev, h=-state.h)


# ---------------------------------------------------------------------------
# diagnostics


def hamiltonian(u, model) -> float:
    return float(np.sum(primal_potential(model, u)))


def total_variation(u) -> float:
    return float(np.abs(np.roll(u, -1) - u).sum())


def oscillation_indicator(u) -> float:
    """Mean squared second difference."""
    return float(np.mean((np.roll(u, -1) - 2 * u + np.roll(u, 1)) ** 2))


def cfl_number(u, h, model) -> float:
    return float(abs(h) * np.max(np.abs(primal_curvature(model, u))))


DIAGNOSTIC_COLUMNS = ("step", "t", "sum_u", "parity", "H", "TV", "osc")


@dataclass
class RunRecord:
    J: int
    h: float
    model: str
    snapshots: list = field(default_factory=list)  # (step, t, u)
    diagnostics: dict = field(default_factory=lambda: {c: [] for c in DIAGNOSTIC_COLUMNS})
    final: Optional[LatticeState] = None
    cfl_max: float = 0.0

    @property
    def eps(self) -> float:
        return 1.0 / self.J

    def series(self, name) -> np.ndarray:
        return np.asarray(self.diagnostics[name])


def _record(rec: RunRecord, state: LatticeState, model):
    u = state.u_curr
    d = rec.diagnostics
    d["step"].append(state.step)
    d["t"].append(state.t)
    d["sum_u"].append(float(u.sum()))
    d["parity"].append(state.step % 2)
    d["H"].append(hamiltonian(u, model))
    d["TV"].append(total_variation(u))
    d["osc"].append(oscillation_indicator(u))


def run(initial: LatticeState, steps: int, snapshot_every: Optional[int] = None,
        snapshot_steps=None, diagnostics_every: int = 1, cfl_cap: float = 0.2) -> RunRecord:
    """Advance ``steps`` leapfrog steps from ``initial``.

    Snapshots are taken every ``snapshot_every`` steps and/or at the step
    indices in ``snapshot_steps``; the initial slice is always stored.
    """
    model = initial.model
    rec = RunRecord(J=initial.J, h=initial.h, model=model.spec or model.name)
    cfl = cfl_number(initial.u_curr, initial.h, model)
    rec.cfl_max = cfl
    if cfl > cfl_cap:
        log.warning("h*max|Phi''| = %.3g exceeds the cap %.3g", cfl, cfl_cap)
    wanted = set(int(s) for s in (snapshot_steps or ()))
    state = initial
    rec.snapshots.append((state.step, state.t, state.u_curr.copy()))
    _record(rec, state, model)
    start = state.step
    for n in range(1, steps + 1):
        try:
            state = leapfrog_step(state)
        except BlowUp as exc:
            rec.final = state
            exc.record = rec
            raise
        rel = state.step - start
        if (snapshot_every and rel % snapshot_every == 0) or state.step in wanted:
            rec.snapshots.append((state.step, state.t, state.u_curr.copy()))
            c = cfl_number(state.u_curr, state.h, model)
            rec.cfl_max = max(rec.cfl_max, c)
            if c > cfl_cap:
                log.warning("CFL %.3g above cap at t = %.4g", c, state.t)
        if diagnostics_every and rel % diagnostics_every == 0:
            _record(rec, state, model)
    rec.final = state
    return rec


# ---------------------------------------------------------------------------
# initial data


def longwave_ic(N: int, profile_expr) -> np.ndarray:
    """u_j = ū(j/N), j = 0..N-1, for a 1-periodic macroscopic profile ū."""
    if N < 16:
        raise ValueError("long-wave data need N >= 16")
    fn = compile_expr(profile_expr, var=("x", "xi")) if isinstance(profile_expr, str) else profile_expr
    return np.asarray(fn(np.arange(N) / N), dtype=float)


def wavetrain_ic(sol, J: int, p: int, strict: bool = False) -> np.ndarray:
    """u_j = U(k j) with k = 2πp/J; off-grid phases use trigonometric interpolation."""
    k_lat = 2 * math.pi * p / J
    k = sol.k
    if abs(k_lat - k) > 1e-12:
        if strict:
            raise IncommensurateK(f"k = {k:.15g} is not 2*pi*{p}/{J} = {k_lat:.15g}")
        log.warning("k = %.6g not commensurate with J = %d, p = %d; data not J-periodic", k, J, p)
    return travelling_wave(sol, J, 0.0)


def travelling_wave(sol, J: int, t: float) -> np.ndarray:
    """Exact travelling-wave values U(kj - ωt) on J sites."""
    j = np.arange(J)
    phase = np.mod(sol.k * j - sol.omega * t + math.pi, 2 * math.pi) - math.pi
    return sol.carrier(phase)


def advection_error(sol, state_or_u, t: Optional[float] = None) -> float:
    """Relative ℓ² distance between lattice values and U(kj - ωt)."""
    if isinstance(state_or_u, LatticeState):
        u, t = state_or_u.u_curr, state_or_u.t
    else:
        u = np.asarray(state_or_u)
    ref = travelling_wave(sol, u.size, t)
    return float(np.linalg.norm(u - ref) / np.linalg.norm(ref))


def downsample(u: np.ndarray, factor: int) -> np.ndarray:
    """Sites j = factor*i, which share macroscopic positions with a coarser lattice."""
    return np.asarray(u)[::factor]


def steps_for_tau(tau: float, N: int, h: float) -> int:
    """Number of steps reaching macroscopic time τ = t/N."""
    return int(round(tau * N / h))


# ---------------------------------------------------------------------------
# files


def write_run(rec: RunRecord, outdir, manifest_extra: Optional[dict] = None,
              reference=None) -> Path:
    """Snapshots ``snap_XXXX.csv`` (j, u), ``diagnostics.csv`` and ``manifest.json``.

    ``reference`` (a WavetrainSolution) adds a per-snapshot comparison error.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    snaps = []
    for idx, (step, t, u) in enumerate(rec.snapshots):
        name = f"snap_{idx:04d}.csv"
        lines = ["j,u"] + [f"{j},{float(val)!r}" for j, val in enumerate(u)]
        _atomic_write(outdir / name, "\n".join(lines) + "\n")
        entry = {"file": name, "step": step, "t": t, "tau": t * rec.eps}
        if reference is not None:
            entry["advection_error"] = advection_error(reference, u, t)
        snaps.append(entry)
    d = rec.diagnostics
    rows = [",".join(DIAGNOSTIC_COLUMNS + ("tau",))]
    for i in range(len(d["step"])):
        vals = [repr(d[c][i]) if c in ("step", "parity") else repr(float(d[c][i]))
                for c in DIAGNOSTIC_COLUMNS]
        rows.append(",".join(vals + [repr(float(d["t"][i]) * rec.eps)]))
    _atomic_write(outdir / "diagnostics.csv", "\n".join(rows) + "\n")
    manifest = {
        "model": rec.model, "N": rec.J, "h": rec.h, "eps": rec.eps,
        "snapshots": snaps, "cfl_max": rec.cfl_max,
        "oscillation_indicator": "mean squared second difference of u_j",
        "columns": {
            "sum_u": "sum of u_j on the current time level (conserved per parity)",
            "H": "sum of Phi(u_j)", "TV": "sum |u_{j+1} - u_j|",
            "osc": "mean (u_{j+1} - 2u_j + u_{j-1})^2", "tau": "macroscopic time eps*t",
        },
    }
    if manifest_extra:
        manifest.update(manifest_extra)
    path = outdir / "manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=2) + "\n")
    return path


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
