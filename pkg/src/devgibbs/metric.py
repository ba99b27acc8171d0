"""Dynamical metric structures: balls, separated sets, covers, entropy.

Two index conventions coexist on purpose: the orbit metric d_n maximizes
step distances over j = 0..n-1 (separated sets, Katok counting), while
dynamical-ball membership quantifies over j = 0..n inclusive (n+1
comparisons).  Each is used where the corresponding statement uses it.

Covering numbers are greedy upper estimates: repeatedly center a ball at
the sample point covering the most residual weight.  The exact minimum
cover is NP-hard; the greedy count overshoots by at most a bounded factor
and the bias direction is fixed, which is all the entropy regression
needs.  For 1D maps the balls are extracted as intervals by vectorized
bisection on the membership predicate, making large instances tractable;
a direct orbit-matrix path is kept for cross-checks on small instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import MapSystem, birkhoff_sum, orbit
from .errors import ConfigError, ImpossibleCoverError, SamplingError
from .hyperbolic import HyperbolicParams, hyperbolic_times, is_hyperbolic_time
from .sampling import sample_chunks, spawn_rng
from .stats import ols_fit


@dataclass(frozen=True)
class BallSpec:
    center: object
    n: int
    eps: float

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("ball depth must be >= 0")
        if not self.eps > 0:
            raise ValueError("ball radius must be positive")


def dn_distance(m: MapSystem, x, y, n: int) -> float:
    """max_{0<=j<=n-1} d(f^j x, f^j y)."""
    if n < 1:
        raise ValueError("d_n needs n >= 1")
    ox = orbit(m, x, n - 1)
    oy = orbit(m, y, n - 1)
    return float(np.max(m.domain.distance(ox, oy)))


def in_dynamical_ball(m: MapSystem, y, spec: BallSpec) -> bool:
    """Membership with the inclusive convention j = 0..n; early exit."""
    cx = np.asarray(m.domain.require(spec.center), dtype=float)
    cy = np.asarray(m.domain.require(y), dtype=float)
    for _ in range(spec.n + 1):
        if float(m.domain.distance(cx, cy)) > spec.eps:
            return False
        cx = m.domain.clamp(m.step(cx))
        cy = m.domain.clamp(m.step(cy))
    return True


@dataclass
class SeparatedSet:
    n: int
    eps: float
    members: np.ndarray
    indices: np.ndarray
    maximal: bool


def maximal_separated_subset(m: MapSystem, candidates, n: int,
                             eps: float) -> SeparatedSet:
    """Greedy pass in candidate order; admits iff d_n > eps to all admitted.

    The result is maximal within the candidate list: no remaining candidate
    could still be added.
    """
    pts = np.asarray(candidates, dtype=float)
    if pts.size == 0:
        raise ValueError("need at least one candidate")
    orb = orbit(m, pts, n - 1)  # (n, N) or (n, N, 2)
    admitted = []
    for i in range(pts.shape[0]):
        ok = True
        for j in admitted:
            dij = float(np.max(m.domain.distance(orb[:, i], orb[:, j])))
            if dij <= eps:
                ok = False
                break
        if ok:
            admitted.append(i)
    idx = np.asarray(admitted, dtype=int)
    return SeparatedSet(n=n, eps=eps, members=pts[idx], indices=idx,
                        maximal=True)


def ball_intervals(m: MapSystem, centers, n: int, eps: float,
                   iters: int = 48):
    """Per-center one-sided radii (r_minus, r_plus) of B(x, n, eps).

    Bisection on the inclusive membership predicate, vectorized over
    centers.  Valid for 1D maps whose dynamical balls are intervals, which
    holds at the scales used here (expanding branches / hyperbolic times).
    """
    if m.domain.ndim != 1:
        raise ConfigError("interval extraction only applies to 1D maps")
    centers = np.asarray(centers, dtype=float)
    orb_c = orbit(m, centers, n)

    def max_dev(pts):
        o = orbit(m, pts, n)
        return np.max(m.domain.distance(o, orb_c), axis=0)

    out = []
    for sign in (-1.0, 1.0):
        lo = np.zeros_like(centers)
        if hasattr(m.domain, "lo"):
            room = (centers - m.domain.lo) if sign < 0 \
                else (m.domain.hi - centers)
            hi = np.minimum(eps, room)
        else:
            hi = np.full_like(centers, min(eps, 0.5))
        inside = max_dev(m.domain.clamp(centers + sign * hi)) <= eps
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            ok = max_dev(m.domain.clamp(centers + sign * mid)) <= eps
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        # if even the full radius stays inside, keep it
        r = np.where(inside, np.maximum(lo, hi), lo)
        out.append(r)
    return out[0], out[1]


def _greedy_interval_cover(pos, weights, lo_idx, hi_idx, target):
    """Greedy max-residual-weight cover of sorted points by index ranges.

    ``lo_idx``/``hi_idx`` give, per candidate ball, the covered contiguous
    range [lo, hi) in sorted order.  Returns the number of balls used.
    """
    npts = len(pos)
    residual = weights.copy()
    total_covered = 0.0
    count = 0
    for _ in range(npts):
        if total_covered >= target - 1e-12:
            break
        pref = np.concatenate([[0.0], np.cumsum(residual)])
        gain = pref[hi_idx] - pref[lo_idx]
        best = int(np.argmax(gain))
        g = float(gain[best])
        if g <= 0.0:
            raise ImpossibleCoverError(
                f"cover stalls at weight {total_covered:.6f} < {target:.6f}")
        residual[lo_idx[best]:hi_idx[best]] = 0.0
        total_covered += g
        count += 1
    return count


def covering_number(m: MapSystem, points, n: int, eps: float, delta: float,
                    weights=None, method: str = "auto") -> int:
    """Greedy count of (n, eps)-balls covering weight >= 1 - delta.

    An upper estimate of the true minimum (greedy, and ball centers are
    restricted to the sample points).
    """
    pts = np.asarray(points, dtype=float)
    if weights is None:
        weights = np.full(pts.shape[0], 1.0 / pts.shape[0])
    weights = np.asarray(weights, dtype=float)
    target = (1.0 - delta) * float(weights.sum())
    if target <= 0.0:
        return 0
    if method == "auto":
        method = "direct" if (m.domain.ndim == 2 or pts.shape[0] <= 1500) \
            else "arc"
    if method == "direct":
        return _covering_direct(m, pts, n, eps, weights, target)
    return _covering_arc(m, pts, n, eps, weights, target)


def _covering_direct(m, pts, n, eps, weights, target):
    orb = orbit(m, pts, n)  # inclusive ball convention
    npts = pts.shape[0]
    member = np.empty((npts, npts), dtype=bool)
    for i in range(npts):
        if m.domain.ndim == 1:
            dev = np.max(m.domain.distance(orb[:, i:i + 1], orb), axis=0)
        else:
            dev = np.max(m.domain.distance(orb[:, i:i + 1, :], orb), axis=0)
        member[i] = dev <= eps
    residual = weights.copy()
    total = 0.0
    count = 0
    for _ in range(npts):
        if total >= target - 1e-12:
            break
        gain = member @ residual
        best = int(np.argmax(gain))
        g = float(gain[best])
        if g <= 0.0:
            raise ImpossibleCoverError(
                f"cover stalls at weight {total:.6f} < {target:.6f}")
        residual[member[best]] = 0.0
        total += g
        count += 1
    return count


def _covering_arc(m, pts, n, eps, weights, target):
    r_lo, r_hi = ball_intervals(m, pts, n, eps)
    order = np.argsort(pts, kind="stable")
    pos = pts[order]
    w = weights[order]
    a = pts - r_lo
    b = pts + r_hi
    circular = not hasattr(m.domain, "lo")
    if circular:
        # wrapped arcs become ranges over a virtually doubled index space
        pos2 = np.concatenate([pos, pos + 1.0])
        a_mod = a[order] % 1.0
        length = (b - a)[order]
        lo_idx = np.searchsorted(pos2, a_mod - 1e-15, side="left")
        hi_idx = np.searchsorted(pos2, a_mod + length + 1e-15, side="right")
        return _greedy_circular_cover(w, lo_idx, hi_idx, len(pos), target)
    lo_idx = np.searchsorted(pos, a[order] - 1e-15, side="left")
    hi_idx = np.searchsorted(pos, b[order] + 1e-15, side="right")
    return _greedy_interval_cover(pos, w, lo_idx, hi_idx, target)


def _greedy_circular_cover(w, lo_idx, hi_idx, npts, target):
    """Greedy cover with arc index ranges over the doubled circle index."""
    residual = w.copy()
    total = 0.0
    count = 0
    for _ in range(npts):
        if total >= target - 1e-12:
            break
        pref = np.concatenate([[0.0], np.cumsum(residual)])
        full = pref[-1]
        # prefix over the doubled index space without materializing it
        lo_v = np.where(lo_idx <= npts, pref[np.minimum(lo_idx, npts)],
                        full + pref[lo_idx - npts])
        hi_v = np.where(hi_idx <= npts, pref[np.minimum(hi_idx, npts)],
                        full + pref[hi_idx - npts])
        gain = hi_v - lo_v
        best = int(np.argmax(gain))
        g = float(gain[best])
        if g <= 0.0:
            raise ImpossibleCoverError(
                f"cover stalls at weight {total:.6f} < {target:.6f}")
        lo, hi = int(lo_idx[best]), int(hi_idx[best])
        if hi <= npts:
            residual[lo:hi] = 0.0
        else:
            residual[lo:] = 0.0
            residual[: hi - npts] = 0.0
        total += g
        count += 1
    return count


@dataclass
class EntropyEstimate:
    entropy: float
    slope_stderr: float
    table: list  # rows (eps, n, count, log_count)
    slopes: dict  # eps -> slope


def katok_entropy(m: MapSystem, sampler, n_grid, eps_grid, delta: float,
                  samples: int, seed: int,
                  method: str = "auto") -> EntropyEstimate:
    """Covering-count growth rate: slope of log N(n, eps, delta) in n.

    Reports the slope at the smallest eps plus the full slope-vs-eps
    table.  Stated for invertible maps in the source formula; applied here
    to non-invertible ones as well, hypothesis mismatch noted.
    """
    n_grid = sorted(int(v) for v in n_grid)
    eps_grid = sorted(float(v) for v in eps_grid)
    if len(n_grid) < 3 or len(eps_grid) < 3:
        raise ConfigError("entropy estimation needs >= 3 grid values each")
    chunks = list(sample_chunks(sampler, samples, seed, "katok"))
    pts = np.concatenate([c for _, c in chunks])
    table = []
    slopes = {}
    stderr = 0.0
    for eps in eps_grid:
        logs = []
        for n in n_grid:
            sub = _cell_subset(m, pts, n, eps, delta, method)
            cnt = covering_number(m, sub, n, eps, delta, method=method)
            table.append((eps, n, cnt, float(np.log(max(cnt, 1)))))
            logs.append(np.log(max(cnt, 1)))
        fit = ols_fit(np.asarray(n_grid, dtype=float), np.asarray(logs))
        slopes[eps] = fit.slope
        if eps == eps_grid[0]:
            stderr = fit.stderr
    return EntropyEstimate(entropy=slopes[eps_grid[0]], slope_stderr=stderr,
                           table=table, slopes=slopes)


def _cell_subset(m, pts, n, eps, delta, method):
    """Deterministic per-cell sample budget: ~40 points per expected ball."""
    if method == "direct" or m.domain.ndim == 2 or len(pts) <= 4000:
        return pts
    pilot = pts[:2000]
    r_lo, r_hi = ball_intervals(m, pilot, n, eps, iters=24)
    mean_len = float(np.mean(r_lo + r_hi))
    if mean_len <= 0:
        return pts
    length = (m.domain.hi - m.domain.lo) if hasattr(m.domain, "lo") else 1.0
    est_count = (1.0 - delta) * length / mean_len
    budget = int(min(len(pts), max(4000, 40.0 * est_count)))
    return pts[:budget]


@dataclass
class ContractionReport:
    pass_fraction: float
    worst_ratio: float
    pairs_used: int
    delta1: float


def sample_ball_pairs(m: MapSystem, x, n: int, delta1: float, pairs: int,
                      seed: int, tag: str = "ballpairs"):
    """Pairs (y, z) uniform in the interval realizing B(x, n, delta1)."""
    r_lo, r_hi = ball_intervals(m, np.asarray([x], dtype=float), n, delta1)
    lo = float(x - r_lo[0])
    hi = float(x + r_hi[0])
    if not hi > lo:
        raise SamplingError("dynamical ball has empty interior")
    rng = spawn_rng(seed, tag)
    ys = lo + (hi - lo) * rng.random(pairs)
    zs = lo + (hi - lo) * rng.random(pairs)
    return ys, zs


def backward_contraction_check(m: MapSystem, x, n: int,
                               params: HyperbolicParams, pairs: int,
                               delta1: float, seed: int,
                               slack: float = 1.1) -> ContractionReport:
    """Check d(f^{n-j}y, f^{n-j}z) <= slack * sigma^{-j/2} d(f^n y, f^n z).

    ``n`` must be a verified hyperbolic time for x; pairs are sampled
    inside B(x, n, delta1).
    """
    if not is_hyperbolic_time(m, x, n, params):
        raise ValueError(f"n={n} is not a hyperbolic time for x={x}")
    ys, zs = sample_ball_pairs(m, x, n, delta1, pairs, seed)
    oy = orbit(m, ys, n)
    oz = orbit(m, zs, n)
    d = m.domain.distance(oy, oz)  # (n+1, pairs)
    end = d[n]
    good = end > 0
    if not np.any(good):
        raise SamplingError("all sampled pairs collapse at time n")
    d = d[:, good]
    end = end[good]
    js = np.arange(n + 1)
    bound = np.power(params.sigma, -js / 2.0)[:, None] * end[None, :]
    ratio = d[::-1] / bound
    passed = ratio <= slack
    return ContractionReport(
        pass_fraction=float(np.mean(passed)),
        worst_ratio=float(np.max(ratio)),
        pairs_used=int(end.shape[0]),
        delta1=delta1,
    )


def distortion_estimate(m: MapSystem, potential, x, n: int, pairs: int,
                        delta1: float, seed: int) -> float:
    """K-hat: max over pairs of the n-step Jacobian ratio (and inverse).

    ``delta1`` should stay well inside the recurrence clearance so the
    pair orbits keep clear of the critical set.
    """
    ys, zs = sample_ball_pairs(m, x, n, delta1, pairs, seed, tag="distortion")
    sy = birkhoff_sum(m, potential.phi, ys, n)
    sz = birkhoff_sum(m, potential.phi, zs, n)
    r = np.exp(sz - sy)
    return float(np.max(np.maximum(r, 1.0 / r)))


def calibrate_delta1(m: MapSystem, params: HyperbolicParams, seed: int,
                     instances: int = 5, pairs: int = 200,
                     threshold: float = 0.99) -> float:
    """Largest radius in {2^-3 .. 2^-10} passing a pilot contraction check.

    The backward-contraction statement guarantees such a radius exists but
    not its value; this pins one per family and reports it.
    """
    rng = spawn_rng(seed, "delta1")
    anchors = []
    guard = 0
    # modest depths: the ball width shrinks like e^(-lambda n) and falls
    # under float spacing past n ~ 45, where pair sampling degenerates
    while len(anchors) < instances and guard < 50 * instances:
        guard += 1
        x = m.domain.sample(rng, 1)[0]
        rec = hyperbolic_times(m, x, params)
        mid = [t for t in rec.times if 10 <= t <= 24]
        if mid:
            anchors.append((float(x), int(mid[len(mid) // 2])))
    if not anchors:
        raise SamplingError("no hyperbolic times found for calibration")
    for k in range(3, 11):
        delta1 = 2.0 ** -k
        ok = True
        for x, n in anchors:
            try:
                rep = backward_contraction_check(m, x, n, params, pairs,
                                                 delta1, seed)
            except SamplingError:
                ok = False
                break
            if rep.pass_fraction < threshold:
                ok = False
                break
        if ok:
            return delta1
    return 2.0 ** -10
