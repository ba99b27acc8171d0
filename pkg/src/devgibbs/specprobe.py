"""Specification probes: exactness times, shadowing search, gap statistics.

The exactness time of a radius is the number of iterates after which the
image of every probe ball covers the whole space, computed by exact
interval-image propagation through the branch structure.  Shadowing
points for chains of orbit pieces are found by backward cylinder
refinement: realize the last piece's constraint set as an interval
union, pull it back through the gap iterates along every branch,
intersect with the previous piece's stepwise ball constraints, and
recurse; any returned point is forward-verified before being handed out.

Gap estimates compose two measured quantities: the exactness time at the
radius and the wait until the next hyperbolic time strictly beyond the
piece length.  Their ratio to the piece length is the statistic whose
smallness is the non-uniform specification property's numerical face.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .branching import CircleBranches
from .dynamics import MapSystem, orbit
from .errors import CapabilityError, ConfigError, HorizonError
from .hyperbolic import HyperbolicParams, HyperbolicTimeRecord, hyperbolic_times
from .metric import BallSpec, in_dynamical_ball
from .sampling import spawn_rng

MERGE_TOL = 1e-12
MAX_COMPONENTS = 10_000
COVER_TOL = 1e-9


class IntervalUnion:
    """Sorted disjoint closed intervals inside a chart [lo, hi].

    Circle sets live in the chart [0, 1); wrapped arcs are stored split.
    """

    def __init__(self, segments, lo: float, hi: float):
        self.lo = lo
        self.hi = hi
        segs = []
        for a, b in segments:
            a, b = max(a, lo), min(b, hi)
            if b >= a:
                segs.append((a, b))
        segs.sort()
        merged: List[List[float]] = []
        for a, b in segs:
            if merged and a <= merged[-1][1] + MERGE_TOL:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        if len(merged) > MAX_COMPONENTS:
            raise ConfigError(
                f"interval union exceeded {MAX_COMPONENTS} components")
        self.segments = [(a, b) for a, b in merged]

    @property
    def total_length(self) -> float:
        return sum(b - a for a, b in self.segments)

    @property
    def empty(self) -> bool:
        return not self.segments

    def covers_chart(self, tol: float = COVER_TOL) -> bool:
        return self.total_length >= (self.hi - self.lo) - tol

    def intersect(self, a: float, b: float) -> "IntervalUnion":
        out = []
        for s, e in self.segments:
            ss, ee = max(s, a), min(e, b)
            if ee >= ss:
                out.append((ss, ee))
        return IntervalUnion(out, self.lo, self.hi)

    def largest_component(self) -> Tuple[float, float]:
        return max(self.segments, key=lambda seg: seg[1] - seg[0])


def _ball_union(m: MapSystem, center: float, eps: float) -> IntervalUnion:
    if hasattr(m.domain, "lo"):
        return IntervalUnion([(center - eps, center + eps)],
                             m.domain.lo, m.domain.hi)
    segs = []
    a = (center - eps) % 1.0
    ln = min(2.0 * eps, 1.0)
    if a + ln <= 1.0:
        segs.append((a, a + ln))
    else:
        segs.append((a, 1.0))
        segs.append((0.0, a + ln - 1.0))
    return IntervalUnion(segs, 0.0, 1.0)


def _image_union(m: MapSystem, u: IntervalUnion) -> IntervalUnion:
    if m.branches is None:
        raise CapabilityError(f"{m.label}: no branch structure")
    segs = []
    if isinstance(m.branches, CircleBranches):
        for a, b in u.segments:
            s, ln = m.branches.image_of_arc(a, b - a)
            if ln >= 1.0:
                return IntervalUnion([(0.0, 1.0)], 0.0, 1.0)
            if s + ln <= 1.0:
                segs.append((s, s + ln))
            else:
                segs.append((s, 1.0))
                segs.append((0.0, s + ln - 1.0))
        return IntervalUnion(segs, 0.0, 1.0)
    for a, b in u.segments:
        segs.extend(m.branches.image_of(a, b))
    return IntervalUnion(segs, m.domain.lo, m.domain.hi)


def _preimage_union(m: MapSystem, u: IntervalUnion) -> IntervalUnion:
    if m.branches is None:
        raise CapabilityError(f"{m.label}: no branch structure")
    segs = []
    if isinstance(m.branches, CircleBranches):
        for a, b in u.segments:
            for s, ln in m.branches.preimages_of_arc(a, b - a):
                if s + ln <= 1.0 + MERGE_TOL:
                    segs.append((s, min(s + ln, 1.0)))
                else:
                    segs.append((s, 1.0))
                    segs.append((0.0, s + ln - 1.0))
        return IntervalUnion(segs, 0.0, 1.0)
    for a, b in u.segments:
        segs.extend(m.branches.preimages_of(a, b))
    return IntervalUnion(segs, m.domain.lo, m.domain.hi)


@dataclass
class ExactnessResult:
    found: bool
    n: Optional[int]
    residual: float  # uncovered length at the cap when not found
    per_probe: list  # (probe point, cover depth or None)


def exactness_time(m: MapSystem, eps: float, probe_points: Sequence[float],
                   cap: int = 60) -> ExactnessResult:
    """Smallest N with f^N(ball) covering the space, maximized over probes."""
    worst: Optional[int] = 0
    per = []
    residual = 0.0
    for x in probe_points:
        u = _ball_union(m, float(x), eps)
        depth = None
        for n in range(cap + 1):
            if u.covers_chart():
                depth = n
                break
            u = _image_union(m, u)
        per.append((float(x), depth))
        if depth is None:
            worst = None
            residual = max(residual,
                           (u.hi - u.lo) - u.total_length)
        elif worst is not None:
            worst = max(worst, depth)
    if worst is None:
        return ExactnessResult(found=False, n=None, residual=residual,
                               per_probe=per)
    return ExactnessResult(found=True, n=worst, residual=0.0, per_probe=per)


@dataclass(frozen=True)
class OrbitPiece:
    x: object
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("orbit pieces need length >= 1")


@dataclass
class ShadowResult:
    found: bool
    z: Optional[float]
    verified: bool
    failed_stage: Optional[int]  # piece index whose refinement emptied


def shadow_search(m: MapSystem, pieces: Sequence[OrbitPiece], eps: float,
                  gaps: Sequence[int]) -> ShadowResult:
    """Backward cylinder refinement for a point shadowing all pieces.

    ``gaps[i]`` iterates separate piece i from piece i+1.  Limited to
    full-branch 1D maps; at most 8 pieces and total length + gaps <= 1000.
    """
    if m.branches is None:
        raise CapabilityError(f"{m.label}: shadowing needs inverse branches")
    pieces = list(pieces)
    gaps = list(gaps)
    if len(pieces) > 8:
        raise ConfigError("at most 8 orbit pieces")
    if len(gaps) != len(pieces) - 1:
        raise ConfigError("need exactly one gap per consecutive piece pair")
    budget = sum(p.n for p in pieces) + sum(gaps)
    if budget > 1000:
        raise ConfigError("total piece length plus gaps exceeds 1000")

    future: Optional[IntervalUnion] = None
    for i in range(len(pieces) - 1, -1, -1):
        piece = pieces[i]
        pts = orbit(m, piece.x, piece.n)
        cur = _ball_union(m, float(pts[piece.n]), eps)
        if future is not None:
            pulled = future
            for _ in range(gaps[i]):
                pulled = _preimage_union(m, pulled)
            cur = IntervalUnion(
                [seg for a, b in cur.segments
                 for seg in pulled.intersect(a, b).segments],
                cur.lo, cur.hi)
        for j in range(piece.n - 1, -1, -1):
            cur = _preimage_union(m, cur)
            ball = _ball_union(m, float(pts[j]), eps)
            cur = IntervalUnion(
                [seg for a, b in ball.segments
                 for seg in cur.intersect(a, b).segments],
                cur.lo, cur.hi)
        if cur.empty:
            return ShadowResult(found=False, z=None, verified=False,
                                failed_stage=i)
        future = cur

    a, b = future.largest_component()
    z = 0.5 * (a + b)
    t = 0
    ok = True
    for i, piece in enumerate(pieces):
        w = z
        for _ in range(t):
            w = float(m.domain.clamp(m.step(w)))
        if not in_dynamical_ball(m, w, BallSpec(piece.x, piece.n, eps)):
            ok = False
            break
        t += piece.n + (gaps[i] if i < len(gaps) else 0)
    if not ok:
        return ShadowResult(found=False, z=None, verified=False,
                            failed_stage=i)
    return ShadowResult(found=True, z=z, verified=True, failed_stage=None)


@dataclass
class GapEstimate:
    p_hat: int
    next_time: int
    exactness: int
    lag: int
    verified_fraction: Optional[float] = None


def next_time_after(record: HyperbolicTimeRecord, n: int) -> Optional[int]:
    """Smallest detected time strictly greater than n (next-strict rule)."""
    after = record.times[record.times > n]
    return int(after[0]) if len(after) else None


def gap_estimate(m: MapSystem, x, n: int, eps: float,
                 params: HyperbolicParams, exactness: int,
                 record: Optional[HyperbolicTimeRecord] = None,
                 verify: int = 0, seed: int = 0) -> GapEstimate:
    """p-hat(x, n, eps) = exactness time + wait to the next hyperbolic time.

    With ``verify`` > 0 the estimate is cross-checked by shadowing searches
    toward that many sampled continuations with gap p-hat; the fraction of
    forward-verified successes is reported.
    """
    if record is None:
        horizon = max(params.n_max, 2 * n + 50)
        record = hyperbolic_times(
            m, x, HyperbolicParams(params.sigma, params.delta, params.b,
                                   horizon))
    nxt = next_time_after(record, n)
    if nxt is None:
        raise HorizonError(
            f"no hyperbolic time beyond n={n} within horizon {record.n_max}")
    p_hat = exactness + (nxt - n)
    verified = None
    if verify > 0:
        if m.branches is None:
            raise CapabilityError(
                f"{m.label}: shadow verification needs inverse branches")
        rng = spawn_rng(seed, "gapverify")
        ok = 0
        for _ in range(verify):
            y = float(m.domain.sample(rng, 1)[0])
            piece_len = min(max(n // 4, 2), 8)
            res = shadow_search(m, [OrbitPiece(x, min(n, 8)),
                                    OrbitPiece(y, piece_len)], eps, [p_hat])
            ok += int(res.found and res.verified)
        verified = ok / verify
    return GapEstimate(p_hat=p_hat, next_time=nxt, exactness=exactness,
                       lag=nxt - n, verified_fraction=verified)


@dataclass
class GapReport:
    eps_grid: list
    n_grid: list
    sup_table: dict  # (eps, n) -> sup over samples of p_hat / n
    headline: float  # smallest eps, largest n cell
    censored_fraction: float
    sampling: str


def nonuniform_spec_statistic(m: MapSystem, sampler, eps_grid, n_grid,
                              params: HyperbolicParams, samples: int,
                              seed: int, probe_count: int = 12,
                              cap: int = 60) -> GapReport:
    """sup over sampled points of p-hat/n per grid cell.

    Horizon failures are counted as censored, not silently dropped.
    """
    eps_grid = sorted(float(e) for e in eps_grid)
    n_grid = sorted(int(n) for n in n_grid)
    rng = spawn_rng(seed, "gapstat")
    probes = m.domain.sample(rng, probe_count)
    exact = {}
    for eps in eps_grid:
        res = exactness_time(m, eps, probes, cap=cap)
        if not res.found:
            raise HorizonError(f"exactness cap {cap} exceeded at eps={eps}")
        exact[eps] = res.n
    horizon = int(n_grid[-1] * 1.5) + 50
    scan_params = HyperbolicParams(params.sigma, params.delta, params.b,
                                   horizon)
    pts = sampler.sample(spawn_rng(seed, "gapstat-pts"), samples)
    sup_table = {(eps, n): 0.0 for eps in eps_grid for n in n_grid}
    censored = 0
    for i in range(samples):
        x = pts[i] if m.domain.ndim == 1 else pts[i, :]
        record = hyperbolic_times(m, x, scan_params)
        bad = False
        for n in n_grid:
            nxt = next_time_after(record, n)
            if nxt is None:
                bad = True
                continue
            for eps in eps_grid:
                val = (exact[eps] + (nxt - n)) / n
                key = (eps, n)
                if val > sup_table[key]:
                    sup_table[key] = val
        if bad:
            censored += 1
    return GapReport(eps_grid=eps_grid, n_grid=n_grid, sup_table=sup_table,
                     headline=sup_table[(eps_grid[0], n_grid[-1])],
                     censored_fraction=censored / samples,
                     sampling=getattr(sampler, "label", "unknown"))


def gap_statistic_from_times(times, n_grid, exactness: int):
    """The same aggregation applied to a synthetic record of times."""
    rec = HyperbolicTimeRecord(x=None, times=np.asarray(times, dtype=int),
                               n_max=int(np.max(times)), none_found=len(times) == 0)
    out = {}
    for n in sorted(int(v) for v in n_grid):
        nxt = next_time_after(rec, n)
        out[n] = math.inf if nxt is None else (exactness + (nxt - n)) / n
    return out
