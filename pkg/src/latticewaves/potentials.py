"""Convex flux potentials and their Legendre duals.

A :class:`PotentialModel` is defined either on the *dual* side, through the
curvature ``psi2(z) = Ψ''(z)`` of the dual potential, or on the *primal* side
through ``Φ, Φ', Φ''``.  For dual-side models the antiderivatives are fixed by
``Ψ'(0) = Ψ(0) = 0``; the primal potential is then the Legendre transform of
that normalized ``Ψ`` (so ``Φ(0) = 0`` as well).

Everything here is vectorised over numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import erf

from .errors import (
    DomainError,
    QuadratureFailure,
    RootBracketFailure,
    UnknownModel,
    UnsupportedSide,
)
from .expr import compile_expr

#: Dual-side potentials are only evaluated for |argument| <= ZETA_CAP.
ZETA_CAP = 50.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_GL5_NODES, _GL5_WEIGHTS = np.polynomial.legendre.leggauss(7)


def _scalarize(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def _check_window(z):
    z = np.asarray(z, dtype=float)
    if z.size and not np.all(np.abs(z) <= ZETA_CAP):
        worst = float(np.max(np.abs(z[np.isfinite(z)]), initial=np.inf))
        raise DomainError(
            f"dual potential evaluated at |zeta| = {worst:.3g} > {ZETA_CAP}"
        )
    return z


class AntiderivativeTable:
    """Cached ``Ψ'`` and ``Ψ`` on a dense node set, plus local Gauss correction.

    Nodes are ``z_i = i*h`` for ``|z_i| <= cap``.  Values are accumulated outward
    from ``z = 0`` so the normalization ``Ψ'(0) = Ψ(0) = 0`` holds exactly.
    Between nodes the Taylor formula with integral remainder is evaluated by
    10-point Gauss-Legendre on ``[z_i, z]``.
    """

    def __init__(self, psi2: Callable, cap: float = ZETA_CAP, h: float = 1 / 16,
                 tol: float = 1e-12):
        self.psi2 = psi2
        self.h = h
        n = int(round(cap / h))
        self.n = n
        self.nodes = h * np.arange(-n, n + 1)
        d1 = np.zeros(2 * n + 1)
        d0 = np.zeros(2 * n + 1)
        mid = n

        a = self.nodes[mid:-1]
        b = self.nodes[mid + 1:]
        i1, i2 = self._remainders(a, b)
        c1, c2 = self._remainders(a, b, _GL5_NODES, _GL5_WEIGHTS)
        self._check(i1, c1, i2, c2, tol)
        a_l = self.nodes[mid:0:-1]
        b_l = self.nodes[mid - 1::-1]
        j1, j2 = self._remainders(a_l, b_l)
        e1, e2 = self._remainders(a_l, b_l, _GL5_NODES, _GL5_WEIGHTS)
        self._check(j1, e1, j2, e2, tol)

        for step, (s1, s2, idx) in enumerate(
            ((i1, i2, range(mid, 2 * n)), (j1, j2, range(mid, 0, -1)))
        ):
            direction = 1 if step == 0 else -1
            for cell, i in enumerate(idx):
                d1[i + direction] = d1[i] + s1[cell]
                d0[i + direction] = d0[i] + d1[i] * direction * h + s2[cell]
        self.d1 = d1
        self.d0 = d0

    @staticmethod
    def _check(i1, c1, i2, c2, tol):
        scale = 1.0 + np.abs(i1)
        bad = ~np.isfinite(i1) | ~np.isfinite(i2)
        bad |= np.abs(i1 - c1) > tol * scale
        bad |= np.abs(i2 - c2) > tol * (1.0 + np.abs(i2))
        if np.any(bad):
            raise QuadratureFailure(
                f"antiderivative table: {int(bad.sum())} cells miss tolerance {tol}"
            )

    def _remainders(self, a, b, nodes=_GL_NODES, weights=_GL_WEIGHTS):
        """Return ``∫_a^b Ψ''`` and ``∫_a^b (b-s) Ψ''(s) ds`` (signed)."""
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        half = 0.5 * (b - a)
        s = 0.5 * (a + b) + half * nodes
        f = self.psi2(s) * weights * half
        return f.sum(axis=-1), ((b - s) * f).sum(axis=-1)

    def _locate(self, z):
        i = np.clip(np.rint(z / self.h).astype(int) + self.n, 0, 2 * self.n)
        return i, self.nodes[i]

    def dpsi(self, z):
        z = np.asarray(z, dtype=float)
        i, a = self._locate(z)
        r1, _ = self._remainders(a, z)
        return self.d1[i] + r1

    def psi(self, z):
        z = np.asarray(z, dtype=float)
        i, a = self._locate(z)
        _, r2 = self._remainders(a, z)
        return self.d0[i] + self.d1[i] * (z - a) + r2


@dataclass(frozen=True)
class PotentialModel:
    """Convex potential pair.  Immutable; any lookup table is built eagerly."""

    name: str
    side: str  # "dual" or "primal"
    psi2: Optional[Callable] = None
    phi: Optional[Callable] = None
    phi1: Optional[Callable] = None
    phi2: Optional[Callable] = None
    bounds: Optional[tuple] = None
    nonuniform: bool = False
    dpsi: Optional[Callable] = field(default=None, repr=False)
    psi: Optional[Callable] = field(default=None, repr=False)
    spec: str = ""
    table: Optional[AntiderivativeTable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.side not in ("dual", "primal"):
            raise ValueError(f"side must be 'dual' or 'primal', got {self.side!r}")
        if self.side == "dual":
            if self.psi2 is None:
                raise ValueError("dual-side model needs psi2")
            if self.dpsi is None and self.table is None:
                object.__setattr__(self, "table", AntiderivativeTable(self.psi2))
        elif self.phi1 is None:
            raise ValueError("primal-side model needs phi1")

    @property
    def has_dual(self):
        return self.side == "dual"

    def metadata(self):
        return {
            "name": self.name,
            "spec": self.spec or self.name,
            "side": self.side,
            "bounds": list(self.bounds) if self.bounds else None,
            "nonuniform": self.nonuniform,
            "dual_reference": "Psi'(0) = Psi(0) = 0" if self.side == "dual"
            and self.phi1 is None else "exact Legendre transform of Phi",
        }


# ---------------------------------------------------------------------------
# dual side


def _require_dual(model):
    if model.side != "dual":
        raise UnsupportedSide(
            f"model {model.name!r} is primal-side; convert it with to_dual() first"
        )


def psi2(model: PotentialModel, zeta, convert: bool = False):
    """Curvature Ψ''(ζ) of the dual potential."""
    if model.side == "primal":
        if not convert:
            raise UnsupportedSide(
                f"psi2 undefined for primal-side model {model.name!r} "
                "(pass convert=True to go through the Legendre inversion)"
            )
        return psi2(to_dual(model), zeta)
    z = _check_window(zeta)
    return _scalarize(model.psi2(z))


def dual_slope(model: PotentialModel, zeta):
    """Ψ'(ζ), with Ψ'(0) = 0 for models given on the dual side."""
    _require_dual(model)
    z = _check_window(zeta)
    if model.dpsi is not None:
        return _scalarize(model.dpsi(z))
    return _scalarize(model.table.dpsi(z))


def dual_potential(model: PotentialModel, zeta):
    """Ψ(ζ), with Ψ(0) = 0 for models given on the dual side."""
    _require_dual(model)
    z = _check_window(zeta)
    if model.psi is not None:
        return _scalarize(model.psi(z))
    return _scalarize(model.table.psi(z))


def psi_q_prime(model: PotentialModel, q, zeta):
    """Ψ_q'(ζ) = Ψ'(q+ζ) - Ψ'(q)."""
    zeta = np.asarray(zeta, dtype=float)
    return _scalarize(dual_slope(model, q + zeta) - dual_slope(model, q))


def psi_q(model: PotentialModel, q, zeta):
    """Ψ_q(ζ) = Ψ(q+ζ) - Ψ'(q)ζ - Ψ(q); non-negative for convex Ψ."""
    zeta = np.asarray(zeta, dtype=float)
    if q == 0:
        return dual_potential(model, zeta)
    return _scalarize(
        dual_potential(model, q + zeta)
        - dual_slope(model, q) * zeta
        - dual_potential(model, q)
    )


# ---------------------------------------------------------------------------
# Legendre inversion


def invert_increasing(f, df, w, lo=-1.0, hi=1.0, cap=ZETA_CAP, tol=1e-12,
                      max_iter=200):
    """Solve ``f(x) = w`` elementwise for increasing ``f`` by guarded Newton.

    The bracket ``[lo, hi]`` is doubled until it encloses the root or hits
    ``±cap``; Newton steps leaving the bracket fall back to bisection.
    """
    w = np.asarray(w, dtype=float)
    shape = w.shape
    w = w.ravel()
    lo = np.full_like(w, lo)
    hi = np.full_like(w, hi)
    for _ in range(64):
        need = f(lo) > w
        if not need.any():
            break
        lo = np.where(need, np.maximum(2 * lo, -cap), lo)
        if np.any(need & (lo <= -cap) & (f(lo) > w)):
            raise RootBracketFailure(f"no bracket below {-cap} for some targets")
    for _ in range(64):
        need = f(hi) < w
        if not need.any():
            break
        hi = np.where(need, np.minimum(2 * hi, cap), hi)
        if np.any(need & (hi >= cap) & (f(hi) < w)):
            raise RootBracketFailure(f"no bracket above {cap} for some targets")
    if np.any(f(lo) > w) or np.any(f(hi) < w):
        raise RootBracketFailure("monotone bracket could not be established")

    x = 0.5 * (lo + hi)
    done = np.zeros(w.shape, dtype=bool)
    for _ in range(max_iter):
        fx = f(x) - w
        lo = np.where(fx < 0, x, lo)
        hi = np.where(fx > 0, x, hi)
        d = df(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = fx / d
        newton = x - step
        ok = np.isfinite(newton) & (d > 0) & (newton > lo) & (newton < hi)
        x_new = np.where(ok, newton, 0.5 * (lo + hi))
        width = hi - lo
        done = (fx == 0) | (width <= 4e-16 * (1 + np.abs(x)))
        done |= (np.abs(fx) <= tol) & (np.abs(x_new - x) <= 1e-15 * (1 + np.abs(x)))
        x = np.where(done, x, x_new)
        if done.all():
            break
    fx = f(x) - w
    if not np.all(np.abs(fx) <= max(tol, 1e-12) * (1 + np.abs(w))):
        raise RootBracketFailure("Legendre inversion did not reach tolerance")
    return x.reshape(shape)


def primal_flux(model: PotentialModel, w):
    """Φ'(w); for dual-side models the root ζ of Ψ'(ζ) = w."""
    if model.phi1 is not None:
        return _scalarize(model.phi1(np.asarray(w, dtype=float)))
    z = invert_increasing(
        lambda x: dual_slope(model, x),
        lambda x: psi2(model, x),
        w,
    )
    return _scalarize(z)


def primal_potential(model: PotentialModel, u):
    """Φ(u); for dual-side models via Φ(u) = u Φ'(u) - Ψ(Φ'(u))."""
    if model.phi is not None:
        return _scalarize(model.phi(np.asarray(u, dtype=float)))
    u = np.asarray(u, dtype=float)
    z = primal_flux(model, u)
    return _scalarize(u * z - dual_potential(model, z))


def primal_curvature(model: PotentialModel, u):
    """Φ''(u) = 1/Ψ''(Φ'(u))."""
    if model.phi2 is not None:
        return _scalarize(model.phi2(np.asarray(u, dtype=float)))
    if model.side == "primal":
        # central difference of phi1 as last resort
        u = np.asarray(u, dtype=float)
        eps = 1e-6 * (1 + np.abs(u))
        return _scalarize((model.phi1(u + eps) - model.phi1(u - eps)) / (2 * eps))
    return _scalarize(1.0 / psi2(model, primal_flux(model, u)))


def to_dual(model: PotentialModel) -> PotentialModel:
    """Dual-side view of a primal model with Φ' mapping onto the real line.

    Ψ' = (Φ')⁻¹ and Ψ(ζ) = ζΨ'(ζ) - Φ(Ψ'(ζ)) exactly (no renormalization).
    """
    if model.side == "dual":
        return model
    if model.phi is None or model.phi2 is None:
        raise UnsupportedSide(f"{model.name!r}: need Φ and Φ'' for Legendre conversion")
    with np.errstate(over="ignore"):
        probe = model.phi1(np.array([-1e3, 1e3]))
    if not (np.isfinite(probe).all() and probe[0] < -ZETA_CAP and probe[1] > ZETA_CAP):
        raise UnsupportedSide(
            f"{model.name!r}: Φ' does not cover the dual window; no global Legendre dual"
        )
    phi1, phi2, phi = model.phi1, model.phi2, model.phi

    def inv(z):
        return invert_increasing(phi1, phi2, z, cap=1e3)

    def dual_psi2(z):
        return 1.0 / phi2(inv(z))

    def dual_psi(z):
        u = inv(z)
        return z * u - phi(u)

    return replace(model, side="dual", psi2=dual_psi2, dpsi=inv, psi=dual_psi,
                   name=model.name)


# ---------------------------------------------------------------------------
# built-in models

_SQRT_PI_4 = math.sqrt(math.pi) / 4


def _ex1():
    return PotentialModel(
        name="ex1", side="dual",
        psi2=lambda z: 0.5 + 0.5 * np.exp(-z * z),
        dpsi=lambda z: 0.5 * z + _SQRT_PI_4 * erf(z),
        psi=lambda z: 0.25 * z * z + _SQRT_PI_4 * z * erf(z) + 0.25 * np.expm1(-z * z),
        bounds=(0.5, 1.0), spec="ex1",
    )


def _ex2():
    def dpsi(z):
        return z - (z * np.arctan(2 * z) - 0.25 * np.log1p(4 * z * z)) / math.pi

    def psi(z):
        at = np.arctan(2 * z)
        lg = np.log1p(4 * z * z)
        return 0.5 * z * z - ((0.5 * z * z - 0.125) * at + 0.25 * z - 0.25 * z * lg) / math.pi

    return PotentialModel(
        name="ex2", side="dual",
        psi2=lambda z: 1.0 - np.arctan(2 * z) / math.pi,
        dpsi=dpsi, psi=psi, bounds=(0.5, 1.5), spec="ex2",
    )


def _ex3():
    # Ψ''(0) = 0: convex, but no uniform lower bound
    return PotentialModel(
        name="ex3", side="dual",
        psi2=lambda z: 0.25 * (np.expm1(2 * z) - 2 * z),
        dpsi=lambda z: np.expm1(2 * z) / 8 - 0.25 * z * z - 0.25 * z,
        psi=lambda z: np.expm1(2 * z) / 16 - z / 8 - z * z / 8 - z ** 3 / 12,
        bounds=None, nonuniform=True, spec="ex3",
    )


def _linear(c):
    if not c > 0:
        raise UnknownModel(f"linear model needs c > 0, got {c}")
    return PotentialModel(
        name=f"linear:{c:g}", side="dual",
        psi2=lambda z: np.full_like(np.asarray(z, dtype=float), c),
        dpsi=lambda z: c * np.asarray(z, dtype=float),
        psi=lambda z: 0.5 * c * np.asarray(z, dtype=float) ** 2,
        bounds=(c, c), spec=f"linear:{c!r}",
        # Φ(u) = u²/(2c) in closed form
        phi=lambda u: 0.5 * np.asarray(u, dtype=float) ** 2 / c,
        phi1=lambda u: np.asarray(u, dtype=float) / c,
        phi2=lambda u: np.full_like(np.asarray(u, dtype=float), 1.0 / c),
    )


def _quartic():
    return PotentialModel(
        name="quartic", side="primal",
        phi=lambda u: 0.5 * u * u + 0.25 * u ** 4,
        phi1=lambda u: u + u ** 3,
        phi2=lambda u: 1.0 + 3.0 * u * u,
        nonuniform=True, spec="quartic",
    )


def _kvm():
    return PotentialModel(
        name="kvm", side="primal",
        phi=np.exp, phi1=np.exp, phi2=np.exp,
        nonuniform=True, spec="kvm",
    )


def _custom(text):
    fn = compile_expr(text, var=("z", "zeta"))
    return PotentialModel(name=f"expr:{text}", side="dual", psi2=fn, spec=f"expr:{text}")


_BUILTIN = {"ex1": _ex1, "ex2": _ex2, "ex3": _ex3, "quartic": _quartic, "kvm": _kvm}
_LINEAR_RE = re.compile(r"^linear\s*(?:[:(]\s*([^)]*?)\s*\)?)?$")


def registry(name: str) -> PotentialModel:
    """Build a model from its name.

    Accepted: ``ex1``, ``ex2``, ``ex3``, ``quartic``, ``kvm``, ``linear:<c>``
    (also ``linear(c)``; plain ``linear`` means c = 1) and ``expr:<Ψ'' formula>``.
    """
    key = name.strip()
    if key.lower() in _BUILTIN:
        return _BUILTIN[key.lower()]()
    m = _LINEAR_RE.match(key)
    if m:
        try:
            return _linear(float(m.group(1)) if m.group(1) else 1.0)
        except ValueError:
            raise UnknownModel(f"bad linear coefficient in {name!r}") from None
    if key.startswith("expr:"):
        return _custom(key[len("expr:"):])
    raise UnknownModel(f"unknown model {name!r}")
