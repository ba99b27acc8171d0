"""Dynamical-ball masses and the sandwich constants around them.

The sandwich constant at (x, n, eps) compares the measured ball mass with
exp(-P n + S_n phi(x)): K-hat is the larger of the ratio and its inverse,
so K-hat >= 1 by construction.  Ball masses come from direct hit counting
(not nested sampling) so the variance accounting stays transparent; a
feasibility guard flags estimates whose expected hit count is starved.

The Delta_n machinery replaces per-sample constant estimation (quadratic
cost) with its hyperbolic-time surrogate: the constant at n is controlled
by the current gap between consecutive hyperbolic times, so the
exceptional set is {gap > c_beta * n} with c_beta = beta / (|P| + sup|phi|).
For unbounded potentials sup|phi| is read at the 99.9th percentile of
sampled values and flagged as clipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import MapSystem, PotentialModel, birkhoff_sum, orbit
from .errors import ConfigError
from .hyperbolic import HyperbolicParams, _Scanner
from .metric import BallSpec
from .sampling import parallel_chunk_map, sample_chunks, spawn_rng
from .stats import ols_fit, wilson_ci

STARVED_HITS = 10


@dataclass
class BallMass:
    mass: float
    ci_low: float
    ci_high: float
    hits: int
    samples: int
    starved: bool


def ball_measure(m: MapSystem, sampler, spec: BallSpec, samples: int,
                 seed: int, workers: int = 1) -> BallMass:
    """Hit-count estimate of the sampler mass of a dynamical ball."""
    center_orbit = orbit(m, spec.center, spec.n)

    def job(idx, pts):
        cur = np.asarray(pts, dtype=float)
        total = cur.shape[0]
        for j in range(spec.n + 1):
            ok = m.domain.distance(cur, center_orbit[j]) <= spec.eps
            cur = cur[ok] if m.domain.ndim == 1 else cur[ok, :]
            if cur.size == 0:
                break
            if j < spec.n:
                cur = m.domain.clamp(m.step(cur))
        return cur.shape[0], total

    parts = parallel_chunk_map(job, sample_chunks(sampler, samples, seed, "ball"),
                               workers=workers)
    hits = sum(h for h, _ in parts)
    total = sum(t for _, t in parts)
    lo, hi = wilson_ci(hits, total)
    return BallMass(mass=hits / total, ci_low=lo, ci_high=hi, hits=hits,
                    samples=total, starved=hits < STARVED_HITS)


@dataclass
class GibbsConstant:
    k_hat: float
    ratio: float  # mass * exp(P n - S_n phi(x))
    snphi: float
    undefined: bool
    delta0: float  # containment radius the estimate is valid under


def gibbs_constant(m: MapSystem, potential: PotentialModel, x, n: int,
                   eps: float, mass: float, delta0: float = None
                   ) -> GibbsConstant:
    """Sandwich constant from a measured ball mass, centered at x.

    The measure-control estimates presuppose the ball sits inside a
    reference ball of some radius delta0; no canonical value exists, so
    eps <= delta0 / 4 is enforced and the delta0 used is recorded
    (default 4 eps, the loosest admissible).
    """
    if delta0 is None:
        delta0 = 4.0 * eps
    if eps > delta0 / 4.0 + 1e-15:
        raise ConfigError(f"ball radius {eps} exceeds delta0/4 = {delta0 / 4}")
    snphi = float(birkhoff_sum(m, potential.phi, x, n)) if n >= 1 else 0.0
    if mass <= 0.0:
        return GibbsConstant(k_hat=math.inf, ratio=0.0, snphi=snphi,
                             undefined=True, delta0=delta0)
    ratio = mass * math.exp(potential.pressure * n - snphi)
    return GibbsConstant(k_hat=max(ratio, 1.0 / ratio), ratio=ratio,
                         snphi=snphi, undefined=False, delta0=delta0)


@dataclass
class SubexpReport:
    statistic: float  # max over points of (log K_nmax - log K_nmin) / nmax
    per_point: list  # (point_id, stat) for usable points
    rows: list  # (point_id, n, mass, ci_low, ci_high, snphi, k_hat, log_k_over_n)
    flagged: int


def subexp_check(m: MapSystem, potential: PotentialModel, sampler, n_grid,
                 eps: float, samples: int, seed: int, n_points: int = 16,
                 workers: int = 1) -> SubexpReport:
    """Growth statistic of the sandwich constants between grid ends.

    A vanishing statistic is the numerical face of subexponential growth;
    the full per-(x, n) table is reported alongside.
    """
    n_grid = sorted(int(v) for v in n_grid)
    if len(n_grid) < 2:
        raise ConfigError("subexponential check needs >= 2 depths")
    pts = sampler.sample(spawn_rng(seed, "subexp-centers"), n_points)
    rows = []
    per_point = []
    flagged = 0
    for pid in range(n_points):
        x = pts[pid] if m.domain.ndim == 1 else pts[pid, :]
        ks = {}
        bad = False
        for n in n_grid:
            est = ball_measure(m, sampler, BallSpec(x, n, eps), samples,
                               seed + 7919 * pid + n, workers=workers)
            gc = gibbs_constant(m, potential, x, n, eps, est.mass)
            rows.append((pid, n, est.mass, est.ci_low, est.ci_high,
                         gc.snphi, gc.k_hat,
                         (math.log(gc.k_hat) / n) if not gc.undefined else math.inf))
            ks[n] = gc
            bad = bad or gc.undefined or est.starved
        if bad:
            flagged += 1
            continue
        n0, n1 = n_grid[0], n_grid[-1]
        stat = (math.log(ks[n1].k_hat) - math.log(ks[n0].k_hat)) / n1
        per_point.append((pid, stat))
    if not per_point:
        raise ConfigError("all sampled centers starved in the subexp check")
    return SubexpReport(statistic=float(max(s for _, s in per_point)),
                        per_point=per_point, rows=rows, flagged=flagged)


@dataclass
class GibbsProbeReport:
    """Aggregate of the sandwich-constant probes on one map.

    ``rows`` carries the per-(x, n) entries (mass with CI, Birkhoff sum of
    the potential, K-hat); ``growth_statistic`` the subexponential-growth
    proxy between the grid ends; the Delta machinery fields are present
    when the exceptional-set rate was measured.
    """

    rows: list
    growth_statistic: float
    flagged: int
    delta_hat: "float | None" = None
    delta_rows: "list | None" = None
    c_beta: "float | None" = None


def probe_report(subexp: "SubexpReport", delta: "DeltaSetRate" = None
                 ) -> GibbsProbeReport:
    return GibbsProbeReport(
        rows=subexp.rows, growth_statistic=subexp.statistic,
        flagged=subexp.flagged,
        delta_hat=None if delta is None else delta.delta_hat,
        delta_rows=None if delta is None else delta.rows,
        c_beta=None if delta is None else delta.c_beta)


@dataclass
class DeltaSetRate:
    delta_hat: float  # semilog slope of the violation fraction; -inf sentinel
    c_beta: float
    sup_phi: float
    clipped: bool
    rows: list  # (n, violations, samples, fraction)
    censored: int  # samples whose next time stayed beyond the scan horizon


def _estimate_sup_phi(potential: PotentialModel, sampler, seed: int,
                      probes: int = 20000):
    vals = np.abs(potential.phi(sampler.sample(spawn_rng(seed, "supphi"),
                                               probes)))
    finite = vals[np.isfinite(vals)]
    p999 = float(np.percentile(finite, 99.9))
    raw_max = float(np.max(finite)) if finite.size else math.inf
    clipped = (finite.size < vals.size) or (raw_max > 1.01 * p999)
    return (p999 if clipped else raw_max), clipped


def delta_set_rate(m: MapSystem, params: HyperbolicParams, sampler,
                   beta: float, n_grid, samples: int, seed: int,
                   potential: PotentialModel, workers: int = 1) -> DeltaSetRate:
    """Decay rate of the exceptional set via the hyperbolic-time surrogate.

    A sample violates at n when the gap between the consecutive hyperbolic
    times straddling n exceeds c_beta * n (no time at all counts as a
    violation); the semilog slope of the violation fraction over the grid
    is the reported rate, with a -inf sentinel when violations vanish.
    """
    n_grid = sorted(int(v) for v in n_grid)
    sup_phi, clipped = _estimate_sup_phi(potential, sampler, seed)
    c_beta = beta / (abs(potential.pressure) + sup_phi)
    horizon = int(n_grid[-1] * 1.5) + 50

    def job(idx, pts):
        scan = _Scanner(m, np.asarray(pts, dtype=float), params)
        npts = len(pts)
        last = np.zeros(npts, dtype=np.int64)
        snap_last = np.zeros((len(n_grid), npts), dtype=np.int64)
        snap_next = np.zeros((len(n_grid), npts), dtype=np.int64)
        for n in range(1, horizon + 1):
            ok = scan.advance()
            if np.any(ok):
                for gi, gn in enumerate(n_grid):
                    if n > gn:  # next hyperbolic time strictly beyond gn
                        fill = ok & (snap_next[gi] == 0)
                        snap_next[gi, fill] = n
                last[ok] = n
            for gi, gn in enumerate(n_grid):
                if n == gn:
                    snap_last[gi] = last.copy()
        viol = np.zeros(len(n_grid), dtype=np.int64)
        cens = 0
        for gi, gn in enumerate(n_grid):
            gap_known = snap_next[gi] > 0
            never = snap_last[gi] == 0
            gap = np.where(gap_known, snap_next[gi] - snap_last[gi], horizon)
            v = never | (gap > c_beta * gn)
            cens += int(np.sum(~gap_known & ~never & ~(gap > c_beta * gn)))
            viol[gi] = int(np.sum(v))
        return viol, len(pts), cens

    parts = parallel_chunk_map(job, sample_chunks(sampler, samples, seed,
                                                  "delta"),
                               workers=workers)
    viol = np.sum([p[0] for p in parts], axis=0)
    total = sum(p[1] for p in parts)
    censored = sum(p[2] for p in parts)
    frac = viol / total
    rows = [(int(n), int(v), total, float(f))
            for n, v, f in zip(n_grid, viol, frac)]
    pos = frac > 0
    if int(pos.sum()) < 2:
        return DeltaSetRate(delta_hat=float("-inf"), c_beta=c_beta,
                            sup_phi=sup_phi, clipped=clipped, rows=rows,
                            censored=censored)
    fit = ols_fit(np.asarray(n_grid, dtype=float)[pos], np.log(frac[pos]))
    return DeltaSetRate(delta_hat=fit.slope, c_beta=c_beta, sup_phi=sup_phi,
                        clipped=clipped, rows=rows, censored=censored)
