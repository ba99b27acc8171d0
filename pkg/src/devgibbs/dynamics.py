"""Map-evaluation kernel: orbits, Birkhoff sums, derivative cocycles.

All operations are pure functions of immutable inputs, so map systems can
be shared freely across worker threads.  Evaluation is vectorized: a
"point" argument may be a scalar (1D domains) or an array of points, in
which case every operation broadcasts elementwise.  Cylinder points put
their coordinates on the last axis.

Orbits that come within ``NEAR_CRITICAL_TOL`` of the critical set raise
``SingularityError`` instead of propagating non-finite derivative data;
exact critical hits are floating-point artifacts of measure zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError, EvaluationError, SingularityError

NEAR_CRITICAL_TOL = 1e-14
BRANCH_VERIFY_TOL = 1e-9


@dataclass(frozen=True)
class MapSystem:
    """A dynamical system handle.

    ``step`` is the raw point update (already clamped into the domain),
    ``deriv`` returns |f'(x)| data as a scalar for 1D maps or a (..., 2, 2)
    Jacobian for cylinder maps, and ``crit_dist`` is the distance to the
    critical/singular set (``inf`` when the set is empty).
    ``branch_preimages`` enumerates the full solution set of f(x) = y for
    full-branch families and is ``None`` when unavailable.
    ``branches`` carries the piecewise-monotone structure used for
    interval-image propagation and is optional in the same way.
    """

    label: str
    domain: object
    params: dict
    step: Callable
    deriv: Callable
    crit_dist: Callable
    branch_preimages: Optional[Callable] = None
    branches: Optional[object] = None

    def __call__(self, x):
        return evaluate(self, x)


@dataclass(frozen=True)
class Observable:
    """A real-valued function on the domain, vectorized over points."""

    fn: Callable
    label: str
    modulus: Optional[float] = None

    def __call__(self, x):
        return self.fn(x)


@dataclass(frozen=True)
class PotentialModel:
    """A potential together with its pressure normalization.

    The conformal Jacobian convention is J = lam * exp(-phi) with
    lam = exp(pressure), and psi = phi - pressure is the normalized
    potential entering the measure-control estimates.
    """

    phi: Callable
    pressure: float
    label: str = "potential"

    @property
    def lam(self):
        return math.exp(self.pressure)

    def psi(self, x):
        return np.asarray(self.phi(x), dtype=float) - self.pressure


def evaluate(m: MapSystem, x):
    """Apply the map once, validating the input point."""
    x = m.domain.require(x)
    return m.domain.clamp(m.step(x))


def orbit(m: MapSystem, x, n: int):
    """Return the n+1 orbit points x, f(x), ..., f^n(x).

    The leading axis of the result indexes time.  Works for single points
    and for batches (extra axes are preserved).
    """
    if n < 0:
        raise ValueError("orbit length must be >= 0")
    x = m.domain.require(x)
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = x
    cur = x
    for j in range(n):
        cur = m.domain.clamp(m.step(cur))
        out[j + 1] = cur
    return out


def birkhoff_sum(m: MapSystem, g, x, n: int):
    """Sum of g over the first n orbit points of x.

    Raises ``EvaluationError`` carrying the orbit index if g produces a
    non-finite value on an in-domain point.
    """
    if n < 1:
        raise ValueError("birkhoff_sum needs n >= 1")
    x = m.domain.require(x)
    cur = np.asarray(x, dtype=float)
    total = None
    for j in range(n):
        val = np.asarray(g(cur), dtype=float)
        if not np.all(np.isfinite(val)):
            raise EvaluationError(f"observable non-finite at orbit index {j}", index=j)
        total = val if total is None else total + val
        if j + 1 < n:
            cur = m.domain.clamp(m.step(cur))
    return total


def _inverse_norm(m: MapSystem, pts):
    """||Df(x)^{-1}|| at each point: 1/|f'| in 1D, 1/sigma_min in 2D."""
    d = np.asarray(m.deriv(pts), dtype=float)
    if m.domain.ndim == 1:
        return 1.0 / np.abs(d)
    a, b = d[..., 0, 0], d[..., 0, 1]
    c, e = d[..., 1, 0], d[..., 1, 1]
    sq = a * a + b * b + c * c + e * e
    det = a * e - b * c
    disc = np.sqrt(np.maximum(sq * sq - 4.0 * det * det, 0.0))
    smin = np.sqrt(np.maximum((sq - disc) / 2.0, 0.0))
    return 1.0 / smin


def expansion_cocycle(m: MapSystem, x, n: int):
    """The n values ||Df(f^j(x))^{-1}|| for j = 0..n-1.

    Raises ``SingularityError`` (with the offending index) if the orbit
    passes within ``NEAR_CRITICAL_TOL`` of the critical set.
    """
    if n < 1:
        raise ValueError("expansion_cocycle needs n >= 1")
    x = m.domain.require(x)
    cur = np.asarray(x, dtype=float)
    batch_shape = cur.shape[:-1] if m.domain.ndim == 2 else cur.shape
    out = np.empty((n,) + batch_shape)
    for j in range(n):
        dist = np.asarray(m.crit_dist(cur), dtype=float)
        if np.any(dist < NEAR_CRITICAL_TOL):
            raise SingularityError(f"orbit hit the critical set at index {j}", index=j)
        out[j] = _inverse_norm(m, cur)
        if j + 1 < n:
            cur = m.domain.clamp(m.step(cur))
    return out


def truncated_distance(m: MapSystem, x, delta: float):
    """Distance to the critical set below ``delta``, and 1 otherwise."""
    if delta <= 0:
        raise ValueError("truncation radius must be positive")
    dist = np.asarray(m.crit_dist(np.asarray(x, dtype=float)), dtype=float)
    return np.where(dist < delta, dist, 1.0)


def inverse_branches(m: MapSystem, y):
    """All solutions of f(x) = y, each verified to re-evaluate onto y."""
    if m.branch_preimages is None:
        raise CapabilityError(f"{m.label}: inverse branches unavailable")
    y = m.domain.require(y)
    pre = m.branch_preimages(float(y))
    for p in pre:
        back = evaluate(m, p)
        if m.domain.distance(back, y) > BRANCH_VERIFY_TOL:
            raise CapabilityError(
                f"{m.label}: preimage {p} re-evaluates to {back}, not {y}")
    return sorted(pre)
