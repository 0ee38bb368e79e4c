"""Uniform periodic grid on [-π, π] and the averaging operators acting on it.

Nodes are ``φ_m = -π + 2πm/M`` for ``m = 1..M`` (so the last node is ``π``);
array index ``i`` holds node ``m = i + 1``.  Means and pairings are
normalized Riemann sums, i.e. ``mean(P) = sum(P)/M``.

The moving average ``(A_k P)(φ) = ½∫_{φ-k}^{φ+k} P`` is evaluated as
``½(S(φ+k) - S(φ-k))`` from an antiderivative ``S`` of ``P``.  ``S`` is
computed at the nodes from the discrete Fourier series of ``P`` (exact for
trigonometric polynomials resolved by the grid).  If ``k`` is a multiple of
the spacing, ``S(φ±k)`` is an exact table lookup; otherwise ``S`` is
interpolated linearly between nodes (second-order accurate).  Passing
``rule="trapezoid"`` swaps the Fourier antiderivative for cumulative
trapezoid sums, which map discrete unimodal sequences to discrete unimodal
sequences exactly but are only second-order accurate even on the grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridMismatch, KOutOfRange, MeanNotZero, OddGrid

# k within this many grid spacings of a node counts as on-grid
_ON_GRID_TOL = 1e-9


@dataclass(frozen=True)
class PeriodicGrid:
    M: int

    def __post_init__(self):
        if not isinstance(self.M, (int, np.integer)) or self.M < 2:
            raise ValueError(f"M must be an integer >= 2, got {self.M!r}")
        if self.M % 2:
            raise OddGrid(f"M must be even (got {self.M})")

    @property
    def spacing(self) -> float:
        return 2 * math.pi / self.M

    @property
    def nodes(self) -> np.ndarray:
        return -math.pi + 2 * math.pi * np.arange(1, self.M + 1) / self.M

    def sample(self, fn) -> "Profile":
        return Profile(self, np.asarray(fn(self.nodes), dtype=float))

    def zeros(self) -> "Profile":
        return Profile(self, np.zeros(self.M))

    def snap(self, k: float) -> float:
        """Nearest positive multiple of the spacing."""
        return max(1, round(k / self.spacing)) * self.spacing

    def mirror_index(self) -> np.ndarray:
        """Index of the node at ``-φ_i`` for each node ``φ_i``."""
        return (self.M - np.arange(self.M) - 2) % self.M


@dataclass(frozen=True, eq=False)
class Profile:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.M,):
            raise GridMismatch(f"expected {self.grid.M} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def M(self):
        return self.grid.M

    def with_values(self, values) -> "Profile":
        return Profile(self.grid, values)

    def is_mean_zero(self) -> bool:
        v = self.values
        return abs(v.mean()) <= 1e-12 * (1 + np.abs(v).max())

    # serialization -------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phi", "value"])
        for phi, val in zip(self.grid.nodes, self.values):
            w.writerow([repr(float(phi)), repr(float(val))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"M": self.M, "values": self.values.tolist()})

    @classmethod
    def from_csv(cls, text: str) -> "Profile":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0][:2]] != ["phi", "value"]:
            raise ValueError("profile CSV must start with header 'phi,value'")
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
        grid = PeriodicGrid(len(data))
        if not np.allclose(data[:, 0], grid.nodes, rtol=0, atol=1e-12):
            raise GridMismatch("phi column does not match nodes -pi + 2*pi*m/M, m=1..M")
        return cls(grid, data[:, 1])

    @classmethod
    def from_json(cls, text: str) -> "Profile":
        obj = json.loads(text)
        values = np.asarray(obj["values"], dtype=float)
        if int(obj["M"]) != values.size:
            raise GridMismatch(f"M = {obj['M']} but {values.size} values")
        return cls(PeriodicGrid(int(obj["M"])), values)


def _same_grid(p1: Profile, p2: Profile):
    if p1.grid.M != p2.grid.M:
        raise GridMismatch(f"grids differ: M={p1.grid.M} vs M={p2.grid.M}")


def mean(P: Profile) -> float:
    return float(P.values.mean())


def inner(P1: Profile, P2: Profile) -> float:
    _same_grid(P1, P2)
    return float(np.dot(P1.values, P2.values) / P1.M)


def norm(P: Profile) -> float:
    return math.sqrt(inner(P, P))


def shift_pi(P: Profile) -> Profile:
    """(𝓣P)(φ) = P(φ + π)."""
    if P.M % 2:
        raise OddGrid("shift by pi needs an even number of nodes")
    return P.with_values(np.roll(P.values, -P.M // 2))


# ---------------------------------------------------------------------------
# antiderivative and window lookups


@lru_cache(maxsize=64)
def _antiderivative_multiplier(M):
    n = np.fft.rfftfreq(M, d=1.0 / M)
    mult = np.zeros(n.size, dtype=complex)
    mult[1:] = 1.0 / (1j * n[1:])
    if M % 2 == 0:
        mult[-1] = 0.0  # Nyquist: sin(Mφ/2) vanishes on the nodes
    return mult


def periodic_antiderivative(values: np.ndarray, rule: str = "spectral") -> np.ndarray:
    """Periodic antiderivative of the mean-free part of ``values`` at the nodes."""
    v = np.asarray(values, dtype=float)
    M = v.size
    if rule == "spectral":
        return np.fft.irfft(np.fft.rfft(v) * _antiderivative_multiplier(M), n=M)
    if rule == "trapezoid":
        w = v - v.mean()
        h = 2 * math.pi / M
        s = np.concatenate(([0.0], np.cumsum(0.5 * h * (w[:-1] + w[1:]))))
        return s
    raise ValueError(f"unknown quadrature rule {rule!r}")


def _split_offset(k: float, h: float):
    """Write k = (K + θ)h with integer K and θ in [0, 1)."""
    x = k / h
    K = round(x)
    if abs(x - K) <= _ON_GRID_TOL:
        return int(K), 0.0
    K = math.floor(x)
    return int(K), x - K


def _window_difference(s: np.ndarray, K: int, theta: float) -> np.ndarray:
    """½(s(φ + k) - s(φ - k)) for periodic node data s, k = (K+θ)h."""
    if theta == 0.0:
        return 0.5 * (np.roll(s, -K) - np.roll(s, K))
    plus = (1 - theta) * np.roll(s, -K) + theta * np.roll(s, -K - 1)
    minus = (1 - theta) * np.roll(s, K) + theta * np.roll(s, K + 1)
    return 0.5 * (plus - minus)


def _check_k(k, upper=math.pi, closed=False):
    ok = 0 < k <= upper if closed else 0 < k < upper
    if not ok:
        bracket = "]" if closed else ")"
        raise KOutOfRange(f"k = {k!r} outside (0, {upper:.6g}{bracket}")


def is_on_grid(grid: PeriodicGrid, k: float) -> bool:
    return _split_offset(k, grid.spacing)[1] == 0.0


class AveragingOperator:
    """Precomputed ``A_k`` on one grid; ``apply`` works on raw arrays.

    ``offgrid="fourier"`` evaluates off-grid windows with the exact Fourier
    multiplier ``sin(nk)/n`` instead of interpolating the antiderivative.
    """

    def __init__(self, grid: PeriodicGrid, k: float, rule: str = "spectral",
                 offgrid: str = "linear"):
        _check_k(k)
        if offgrid not in ("linear", "fourier"):
            raise ValueError(f"offgrid must be 'linear' or 'fourier', got {offgrid!r}")
        self.grid = grid
        self.k = float(k)
        self.rule = rule
        self.K, self.theta = _split_offset(k, grid.spacing)
        self.on_grid = self.theta == 0.0
        self._multiplier = None
        if not self.on_grid and offgrid == "fourier" and rule == "spectral":
            n = np.fft.rfftfreq(grid.M, d=1.0 / grid.M)
            mult = np.empty(n.size)
            mult[0] = 0.0
            mult[1:] = np.sin(n[1:] * k) / n[1:]
            mult[-1] = 0.0  # Nyquist mode is not resolved
            self._multiplier = mult

    def apply(self, values: np.ndarray) -> np.ndarray:
        m = values.mean()
        if self._multiplier is not None:
            out = np.fft.irfft(np.fft.rfft(values) * self._multiplier, n=values.size)
            return out + m * self.k
        s = periodic_antiderivative(values, self.rule)
        out = _window_difference(s, self.K, self.theta)
        out -= out.mean()  # interpolation may leave a residual mean
        return out + m * self.k


def avg_op(P: Profile, k: float, rule: str = "spectral", offgrid: str = "linear") -> Profile:
    """(𝓐ₖP)(φ) = ½∫_{φ-k}^{φ+k} P, 0 < k < π."""
    return P.with_values(AveragingOperator(P.grid, k, rule, offgrid).apply(P.values))


def b_hat(P: Profile, kappa: float, rule: str = "spectral", offgrid: str = "linear") -> Profile:
    """B̂_κ P = κ⁻¹ 𝓐_κ P."""
    _check_k(kappa, math.pi / 2, closed=True)
    op = AveragingOperator(P.grid, kappa, rule, offgrid)
    return P.with_values(op.apply(P.values) / kappa)


def b_tilde(P: Profile, kappa: float, rule: str = "spectral", offgrid: str = "linear") -> Profile:
    """B̃_κ P = -κ⁻¹ 𝓐_κ 𝓣P; P must have zero mean."""
    _check_k(kappa, math.pi / 2, closed=True)
    if abs(mean(P)) > 1e-10:
        raise MeanNotZero(f"b_tilde needs a mean-zero profile (mean = {mean(P):.3e})")
    op = AveragingOperator(P.grid, kappa, rule, offgrid)
    return P.with_values(-op.apply(shift_pi(P).values) / kappa)


def nabla_k(P: Profile, k: float) -> Profile:
    """(∇ₖP)(φ) = ½(P(φ+k) - P(φ-k)), linear interpolation for off-grid k."""
    _check_k(k)
    K, theta = _split_offset(k, P.grid.spacing)
    out = _window_difference(P.values, K, theta)
    return P.with_values(out - out.mean())


def derivative(P: Profile, order: int = 4) -> Profile:
    """Central finite-difference derivative (order 2 or 4)."""
    v, h = P.values, P.grid.spacing
    if order == 2:
        d = (np.roll(v, -1) - np.roll(v, 1)) / (2 * h)
    elif order == 4:
        d = (8 * (np.roll(v, -1) - np.roll(v, 1)) - (np.roll(v, -2) - np.roll(v, 2))) / (12 * h)
    else:
        raise ValueError("order must be 2 or 4")
    return P.with_values(d)


def interpolate(P: Profile, phi) -> np.ndarray:
    """Trigonometric interpolant of P evaluated at arbitrary phases."""
    phi = np.asarray(phi, dtype=float)
    M = P.M
    c = np.fft.rfft(P.values) / M
    n = np.arange(c.size)
    if M % 2 == 0:
        c = c.copy()
        c[-1] *= 0.5  # split Nyquist symmetrically
    # node i sits at φ = -π + (i+1)h, so shift the phase origin
    x = (phi + math.pi - P.grid.spacing)[..., None]
    terms = c * np.exp(1j * n * x)
    out = terms.real.sum(axis=-1) * 2 - c[0].real
    return out


def cone_distance(P: Profile) -> float:
    """Largest normalized defect from being mean-zero, even and unimodal.

    Unimodal means non-decreasing on [-π, 0] (maximum at φ = 0, minimum at ±π).
    """
    v = P.values
    scale = 1.0 + np.abs(v).max()
    mean_defect = abs(v.mean())
    even_defect = np.abs(v - v[P.grid.mirror_index()]).max()
    half = P.M // 2
    # nodes -π (stored last), -π+h, ..., 0
    left = np.concatenate(([v[-1]], v[:half]))
    drops = left[:-1] - left[1:]
    mono_defect = max(0.0, float(drops.max()))
    return float(max(mean_defect, even_defect, mono_defect) / scale)


def align_maximum(P: Profile) -> Profile:
    """Circular shift moving the largest sample to the node φ = 0."""
    i = int(np.argmax(P.values))
    return P.with_values(np.roll(P.values, P.M // 2 - 1 - i))
