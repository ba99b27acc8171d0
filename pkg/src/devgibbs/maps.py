"""Constructors and condition checkers for the benchmark map families.

Four families are shipped:

* ``quadratic`` -- f(x) = 1 - a x^2 on [-1, 1], critical set {0}.  The
  textbook parabola needs the symmetric interval to be forward invariant,
  so that is the domain used here.
* ``manneville_pomeau`` -- the intermittent interval map with a neutral
  fixed point at 0 and a jump at 1/2.  Its critical set is empty: the
  obstruction to uniform expansion is the indifferent point, not a
  critical point, so only the derivative condition binds in the
  hyperbolic-time machinery.
* ``perturbed_expanding`` -- the degree-d circle map
  f(x) = d x - a sin(2 pi x) (mod 1), a local diffeomorphism for
  a < d / (2 pi).  With d = 4 and a between 3/(2 pi) and 4/(2 pi) the
  fixed point 0 becomes contracting, giving a concrete bifurcated region;
  d = 2, a = 0 is the doubling map used as the uniformly expanding
  benchmark.
* ``viana`` -- the cylinder skew product
  (theta, x) -> (d theta mod 1, 1 - a x^2 + alpha cos(2 pi theta)).
  For a = 2 no fiber interval is exactly forward invariant once
  alpha > 0; the fiber overflow (a band of width ~alpha near the fiber
  edges) is clamped to the boundary.  With alpha = 0 the fiber orbits
  reproduce the quadratic family bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .branching import CircleBranches, IntervalBranches, MonotonePiece
from .domain import Circle, Cylinder, Interval
from .dynamics import MapSystem
from .errors import CapabilityError, ConfigError, ParameterError
from .sampling import spawn_rng
from .stats import ols_fit

TWO_PI = 2.0 * math.pi


def make_quadratic(a: float) -> MapSystem:
    """The parabola family f(x) = 1 - a x^2 on [-1, 1]."""
    if not (0.0 < a <= 2.0):
        raise ParameterError(f"quadratic parameter a={a} outside (0, 2]")

    def step(x):
        return 1.0 - a * np.asarray(x, dtype=float) * np.asarray(x, dtype=float)

    def deriv(x):
        return -2.0 * a * np.asarray(x, dtype=float)

    def crit_dist(x):
        return np.abs(np.asarray(x, dtype=float))

    def preimages(y):
        s = (1.0 - y) / a
        if s < 0.0:
            return []
        if s == 0.0:
            return [0.0]
        r = math.sqrt(s)
        if r > 1.0:
            return []
        return [-r, r]

    fwd = lambda t: 1.0 - a * t * t
    pieces = (
        MonotonePiece(-1.0, 0.0, 1.0 - a, 1.0,
                      inv=lambda y: -math.sqrt(max((1.0 - y) / a, 0.0)), fwd=fwd),
        MonotonePiece(0.0, 1.0, 1.0, 1.0 - a,
                      inv=lambda y: math.sqrt(max((1.0 - y) / a, 0.0)), fwd=fwd),
    )
    return MapSystem(
        label=f"quadratic(a={a})",
        domain=Interval(-1.0, 1.0),
        params={"a": a},
        step=step,
        deriv=deriv,
        crit_dist=crit_dist,
        branch_preimages=preimages,
        branches=IntervalBranches(pieces),
    )


def make_mp(alpha: float) -> MapSystem:
    """The intermittent map x(1 + (2x)^alpha) / 2x - 1 on [0, 1]."""
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"intermittency exponent alpha={alpha} outside (0, 1)")

    def step(x):
        x = np.asarray(x, dtype=float)
        left = x * (1.0 + np.power(2.0 * x, alpha))
        return np.where(x <= 0.5, left, 2.0 * x - 1.0)

    def deriv(x):
        x = np.asarray(x, dtype=float)
        left = 1.0 + (1.0 + alpha) * np.power(2.0 * x, alpha)
        return np.where(x <= 0.5, left, 2.0)

    def crit_dist(x):
        return np.full(np.shape(x), np.inf)

    def left_fwd(t):
        return t * (1.0 + (2.0 * t) ** alpha)

    def left_inv(y):
        if y <= 0.0:
            return 0.0
        if y >= 1.0:
            return 0.5
        return brentq(lambda t: left_fwd(t) - y, 0.0, 0.5, xtol=1e-15)

    def preimages(y):
        out = [left_inv(y)] if 0.0 <= y <= 1.0 else []
        if y > 0.0:
            out.append((y + 1.0) / 2.0)
        return out

    pieces = (
        MonotonePiece(0.0, 0.5, 0.0, 1.0, inv=left_inv, fwd=left_fwd),
        MonotonePiece(0.5, 1.0, 0.0, 1.0,
                      inv=lambda y: (y + 1.0) / 2.0, fwd=lambda t: 2.0 * t - 1.0),
    )
    return MapSystem(
        label=f"manneville_pomeau(alpha={alpha})",
        domain=Interval(0.0, 1.0),
        params={"alpha": alpha},
        step=step,
        deriv=deriv,
        crit_dist=crit_dist,
        branch_preimages=preimages,
        branches=IntervalBranches(pieces),
    )


def _saddle_node_threshold(d: int, a: float) -> float:
    """Largest rotation offset at which dx - a sin(2 pi x) still has a
    fixed point in the slow channel near 0."""
    x_plus = math.acos((d - 1) / (TWO_PI * a)) / TWO_PI
    return (1 - d) * x_plus + a * math.sin(TWO_PI * x_plus)


def make_perturbed_expanding(d: int, a: float) -> MapSystem:
    """The circle map f(x) = d x + omega - a sin(2 pi x) mod 1.

    For a < (d-1)/(2 pi) the map is expanding everywhere and omega = 0.
    Past that threshold the derivative dips below 1 near 0; a fixed point
    there would be attracting and would break non-uniform expansion and
    topological exactness, so the rotation offset omega is set just past
    the saddle-node value: the contracting zone survives as a slow
    channel that orbits traverse in finitely many steps, which is the
    bifurcated-but-still-expanding regime the family is meant to probe.
    """
    if d < 2 or int(d) != d:
        raise ParameterError(f"degree d={d} must be an integer >= 2")
    d = int(d)
    if not (0.0 <= a < d / TWO_PI):
        raise ParameterError(
            f"perturbation a={a} outside [0, d/(2 pi)) = [0, {d / TWO_PI:.6f})")

    omega = 0.0
    if a > 0.0 and (d - TWO_PI * a) < 1.0:
        omega = 2.0 * _saddle_node_threshold(d, a)

    if a == 0.0:

        def step(x):
            return (d * np.asarray(x, dtype=float)) % 1.0

        def lift(x):
            return d * np.asarray(x, dtype=float)

        def inv_lift(v):
            return v / d

    else:

        def step(x):
            x = np.asarray(x, dtype=float)
            return (d * x + omega - a * np.sin(TWO_PI * x)) % 1.0

        def lift(x):
            x = np.asarray(x, dtype=float)
            return d * x + omega - a * np.sin(TWO_PI * x)

        def inv_lift(v):
            return brentq(
                lambda t: d * t + omega - a * math.sin(TWO_PI * t) - v,
                0.0, 1.0, xtol=1e-15)

    def deriv(x):
        x = np.asarray(x, dtype=float)
        return d - TWO_PI * a * np.cos(TWO_PI * x)

    def crit_dist(x):
        return np.full(np.shape(x), np.inf)

    def preimages(y):
        out = []
        k = math.floor(omega - y)
        while y + k <= d + omega:
            if omega <= y + k <= d + omega:
                out.append(float(inv_lift(y + k)) % 1.0)
            k += 1
        uniq = []
        for p in sorted(out):
            if not uniq or abs(p - uniq[-1]) > 1e-13:
                uniq.append(p)
        return uniq[:d] if len(uniq) > d else uniq

    label = "doubling" if (d == 2 and a == 0.0) else f"perturbed_expanding(d={d}, a={a})"
    return MapSystem(
        label=label,
        domain=Circle(),
        params={"d": float(d), "a": a, "omega": omega},
        step=step,
        deriv=deriv,
        crit_dist=crit_dist,
        branch_preimages=preimages,
        branches=CircleBranches(degree=d, lift=lift, inv_lift=inv_lift,
                                base=omega),
    )


def make_doubling() -> MapSystem:
    """The doubling map: the uniformly expanding benchmark."""
    return make_perturbed_expanding(2, 0.0)


def make_viana(d: int = 16, a: float = 2.0, alpha: float = 0.01) -> MapSystem:
    """The cylinder skew product over theta -> d theta mod 1."""
    if d < 16 or int(d) != d:
        raise ParameterError(f"base degree d={d} must be an integer >= 16")
    d = int(d)
    if not (0.0 < a <= 2.0):
        raise ParameterError(f"fiber parameter a={a} outside (0, 2]")
    if not (0.0 <= alpha < 0.5):
        raise ParameterError(f"coupling alpha={alpha} outside [0, 0.5)")
    fiber = 1.0 + alpha
    dom = Cylinder(-fiber, fiber)

    if alpha == 0.0:

        def step(p):
            p = np.asarray(p, dtype=float)
            out = np.empty_like(p)
            out[..., 0] = (d * p[..., 0]) % 1.0
            x = p[..., 1]
            out[..., 1] = 1.0 - a * x * x
            return out

    else:

        def step(p):
            p = np.asarray(p, dtype=float)
            out = np.empty_like(p)
            out[..., 0] = (d * p[..., 0]) % 1.0
            x = p[..., 1]
            out[..., 1] = 1.0 - a * x * x + alpha * np.cos(TWO_PI * p[..., 0])
            return out

    def deriv(p):
        p = np.asarray(p, dtype=float)
        J = np.zeros(p.shape[:-1] + (2, 2))
        J[..., 0, 0] = d
        J[..., 1, 0] = -TWO_PI * alpha * np.sin(TWO_PI * p[..., 0])
        J[..., 1, 1] = -2.0 * a * p[..., 1]
        return J

    def crit_dist(p):
        p = np.asarray(p, dtype=float)
        return np.abs(p[..., 1])

    return MapSystem(
        label=f"viana(d={d}, a={a}, alpha={alpha})",
        domain=dom,
        params={"d": float(d), "a": a, "alpha": alpha},
        step=step,
        deriv=deriv,
        crit_dist=crit_dist,
        branch_preimages=None,
        branches=None,
    )


FAMILIES = {
    "doubling": {
        "make": lambda params: make_doubling(),
        "defaults": {},
        "doc": "doubling map on the circle (uniformly expanding benchmark)",
    },
    "quadratic": {
        "make": lambda params: make_quadratic(params.get("a", 2.0)),
        "defaults": {"a": 2.0},
        "doc": "f(x) = 1 - a x^2 on [-1, 1], a in (0, 2]",
    },
    "manneville_pomeau": {
        "make": lambda params: make_mp(params.get("alpha", 0.5)),
        "defaults": {"alpha": 0.5},
        "doc": "intermittent interval map, indifferent fixed point at 0",
    },
    "perturbed_expanding": {
        "make": lambda params: make_perturbed_expanding(
            int(params.get("d", 4)), params.get("a", 0.55)),
        "defaults": {"d": 4, "a": 0.55},
        "doc": "circle map d x + omega - a sin(2 pi x) mod 1, a < d/(2 pi)",
    },
    "viana": {
        "make": lambda params: make_viana(
            int(params.get("d", 16)), params.get("a", 2.0),
            params.get("alpha", 0.01)),
        "defaults": {"d": 16, "a": 2.0, "alpha": 0.01},
        "doc": "cylinder skew product over theta -> d theta mod 1",
    },
}


def make_family(name: str, params: Optional[dict] = None) -> MapSystem:
    if name == "mp":
        name = "manneville_pomeau"
    if name not in FAMILIES:
        raise ParameterError(f"unknown family {name!r}; see list-families")
    return FAMILIES[name]["make"](params or {})


# --- condition checkers -----------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    """Result of fitting distance-power bounds near the critical set."""

    ok: bool
    B: float
    beta: float
    worst_ratio: float
    vacuous: bool = False
    witness: Optional[tuple] = None
    table: tuple = ()


def _singular_range(m, pts):
    """(smallest, largest) singular value of Df at each point."""
    d = np.asarray(m.deriv(pts), dtype=float)
    if m.domain.ndim == 1:
        mag = np.abs(d)
        return mag, mag
    a, b = d[..., 0, 0], d[..., 0, 1]
    c, e = d[..., 1, 0], d[..., 1, 1]
    sq = a * a + b * b + c * c + e * e
    det = a * e - b * c
    disc = np.sqrt(np.maximum(sq * sq - 4.0 * det * det, 0.0))
    smin = np.sqrt(np.maximum((sq - disc) / 2.0, 0.0))
    smax = np.sqrt((sq + disc) / 2.0)
    return smin, smax


def _nearby_pairs(m, xs, rng):
    """Partners y with d(x, y) < dist(x, C)/2, staying in the domain."""
    r = np.asarray(m.crit_dist(xs), dtype=float) * 0.5 * 0.999
    u = (2.0 * rng.random(len(xs)) - 1.0)
    if m.domain.ndim == 1:
        ys = m.domain.clamp(xs + u * r)
    else:
        ys = xs.copy()
        v = (2.0 * rng.random(len(xs)) - 1.0)
        ys[:, 0] = (ys[:, 0] + u * np.minimum(r, 0.49)) % 1.0
        ys[:, 1] = ys[:, 1] + v * r
        ys = m.domain.clamp(ys)
    keep = (m.domain.distance(xs, ys) < np.asarray(m.crit_dist(xs)) * 0.5) \
        & (m.domain.distance(xs, ys) > 0)
    return ys, keep


def verify_H(m: MapSystem, samples: int = 4000, seed: int = 0,
             beta_grid=None) -> PowerLawFit:
    """Fit the smallest (B, beta) making the distance-power bounds hold.

    Checks, on sampled pairs with d(x, y) < dist(x, C)/2:
    (a) B^-1 dist^beta <= sigma_min(Df) and sigma_max(Df) <= B dist^-beta,
    (b) the log of ||Df^-1|| is B dist^-beta Lipschitz,
    (c) likewise for log |det Df|.
    Maps with empty critical set pass vacuously with B = 1.
    """
    probe = np.asarray(m.crit_dist(m.domain.sample(spawn_rng(seed, "verify_h"), 64)))
    if not np.any(np.isfinite(probe)):
        return PowerLawFit(ok=True, B=1.0, beta=1.0, worst_ratio=0.0, vacuous=True)

    rng = spawn_rng(seed, "verify_h")
    xs = m.domain.sample(rng, samples)
    dist = np.asarray(m.crit_dist(xs), dtype=float)
    keep = dist > 1e-9
    xs, dist = xs[keep], dist[keep]
    ys, ok_pair = _nearby_pairs(m, xs, rng)
    xs_p, ys_p, dist_p = xs[ok_pair], ys[ok_pair], dist[ok_pair]

    smin, smax = _singular_range(m, xs)
    smin_y, _ = _singular_range(m, ys_p)
    smin_x = smin[ok_pair]
    det_x = np.abs(_det(m, xs_p))
    det_y = np.abs(_det(m, ys_p))
    gap = np.asarray(m.domain.distance(xs_p, ys_p), dtype=float)
    dlog_inv = np.abs(np.log(smin_x) - np.log(smin_y))
    dlog_det = np.abs(np.log(det_x) - np.log(det_y))

    if beta_grid is None:
        beta_grid = np.linspace(0.05, 1.0, 20)
    table = []
    for beta in beta_grid:
        db = dist ** beta
        b_a = max(np.max(db / smin), np.max(smax * db))
        dbp = dist_p ** beta
        b_b = np.max(dlog_inv * dbp / gap) if len(gap) else 1.0
        b_c = np.max(dlog_det * dbp / gap) if len(gap) else 1.0
        B = max(1.0, b_a, b_b, b_c)
        table.append((float(beta), float(B)))
    finite = [(beta, B) for beta, B in table if np.isfinite(B)]
    if not finite:
        worst = int(np.argmax(dlog_inv * dist_p / gap))
        return PowerLawFit(ok=False, B=math.inf, beta=1.0, worst_ratio=math.inf,
                           witness=(float(xs_p[worst]), float(ys_p[worst])),
                           table=tuple(table))
    beta, B = min(finite, key=lambda t: t[1])
    return PowerLawFit(ok=True, B=B, beta=beta, worst_ratio=1.0, table=tuple(table))


def _det(m, pts):
    d = np.asarray(m.deriv(pts), dtype=float)
    if m.domain.ndim == 1:
        return d
    return d[..., 0, 0] * d[..., 1, 1] - d[..., 0, 1] * d[..., 1, 0]


@dataclass(frozen=True)
class PreimageContraction:
    """Log-log fit of preimage-component diameters against set diameter."""

    L: float
    gamma: float
    residual: float
    table: tuple


def verify_C(m: MapSystem, eps_grid, samples: int = 32, seed: int = 0,
             anchors=None) -> PreimageContraction:
    """Measure preimage-component diameters and fit diam <= L eps^gamma.

    For each eps, targets of diameter eps are placed at random (or at the
    given anchors) and the largest preimage component diameter is recorded;
    a log-log regression over the eps grid gives (L, gamma).
    """
    eps_grid = list(eps_grid)
    if len(eps_grid) < 3:
        raise ConfigError("preimage-contraction fit needs >= 3 grid points")
    if m.branches is None:
        raise CapabilityError(f"{m.label}: no branch structure for preimage sets")
    rng = spawn_rng(seed, "verify_c")
    rows = []
    for eps in eps_grid:
        if anchors is None:
            centers = m.domain.sample(rng, samples)
        else:
            centers = np.asarray(anchors, dtype=float)
        worst = 0.0
        for c in np.atleast_1d(centers):
            comps = _preimage_components(m, float(c), eps)
            for lo, hi in comps:
                worst = max(worst, hi - lo)
        rows.append((eps, worst))
    x = np.log([r[0] for r in rows])
    y = np.log([max(r[1], 1e-300) for r in rows])
    fit = ols_fit(x, y)
    return PreimageContraction(L=float(math.exp(fit.intercept)),
                               gamma=float(fit.slope),
                               residual=float(fit.residual),
                               table=tuple(rows))


def _preimage_components(m, center, eps):
    if isinstance(m.branches, CircleBranches):
        start = (center - eps / 2.0) % 1.0
        if start + eps <= 1.0:
            return [(a, a + ln) for a, ln in m.branches.preimages_of_arc(start, eps)]
        first = 1.0 - start
        out = m.branches.preimages_of_arc(start, first)
        out += m.branches.preimages_of_arc(0.0, eps - first)
        return [(a, a + ln) for a, ln in out]
    lo = max(center - eps / 2.0, m.domain.lo)
    hi = min(lo + eps, m.domain.hi)
    lo = hi - eps if hi - eps >= m.domain.lo else lo
    segs = m.branches.preimages_of(lo, hi)
    return _merge_touching(segs)


def _merge_touching(segs, tol=1e-12):
    if not segs:
        return []
    segs = sorted(segs)
    out = [list(segs[0])]
    for lo, hi in segs[1:]:
        if lo <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]
