"""Piecewise-monotone branch structure for 1D map families.

Two flavours: interval maps carry explicit monotone pieces with one-sided
limit values at the breakpoints (so discontinuities like the gap at 1/2 in
the intermittent family are represented exactly), and degree-d circle maps
carry a strictly increasing lift with its inverse.  Both support the two
operations the orbit-piece machinery needs: forward images of intervals
and complete preimage enumeration of intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple


@dataclass(frozen=True)
class MonotonePiece:
    """f restricted to [lo, hi], continuous and strictly monotone there.

    ``f_lo`` / ``f_hi`` are one-sided limits at the endpoints; ``inv``
    inverts f on the piece and is only called with values between them.
    """

    lo: float
    hi: float
    f_lo: float
    f_hi: float
    inv: Callable[[float], float]
    fwd: Callable[[float], float]

    @property
    def increasing(self):
        return self.f_hi >= self.f_lo

    def value_at(self, t):
        if t == self.lo:
            return self.f_lo
        if t == self.hi:
            return self.f_hi
        return float(self.fwd(t))

    def value_range(self):
        return (min(self.f_lo, self.f_hi), max(self.f_lo, self.f_hi))


@dataclass(frozen=True)
class IntervalBranches:
    pieces: Tuple[MonotonePiece, ...]

    def image_of(self, lo, hi):
        """Image of [lo, hi] as a list of closed intervals, one per piece met."""
        segs = []
        for p in self.pieces:
            a, b = max(lo, p.lo), min(hi, p.hi)
            if a > b:
                continue
            fa, fb = p.value_at(a), p.value_at(b)
            segs.append((min(fa, fb), max(fa, fb)))
        return segs

    def preimages_of(self, ylo, yhi):
        """All components of f^{-1}([ylo, yhi]) as closed intervals."""
        segs = []
        for p in self.pieces:
            vlo, vhi = p.value_range()
            a, b = max(ylo, vlo), min(yhi, vhi)
            if a > b:
                continue
            xa, xb = p.inv(a), p.inv(b)
            segs.append((min(xa, xb), max(xa, xb)))
        return segs


@dataclass(frozen=True)
class CircleBranches:
    """Degree-d covering map of the circle via a strictly increasing lift.

    ``lift`` maps [0, 1] onto [base, base + d] where base = lift(0) (a
    possibly nonzero rotation offset); ``inv_lift`` inverts it on that
    range.  Arcs are (start, length) pairs with start in [0, 1) and length
    in (0, 1]; callers split wrapped arcs before asking for preimages.
    """

    degree: int
    lift: Callable[[float], float]
    inv_lift: Callable[[float], float]
    base: float = 0.0

    def image_of_arc(self, start, length):
        """Image arc (start, length); length saturates at 1 (full cover)."""
        s = start % 1.0
        g0 = float(self.lift(s))
        hi = s + length
        if hi <= 1.0:
            g1 = float(self.lift(hi))
        else:
            g1 = float(self.lift(hi - 1.0)) + self.degree
        new_len = g1 - g0
        if new_len >= 1.0:
            return (0.0, 1.0)
        return (g0 % 1.0, new_len)

    def preimages_of_arc(self, start, length):
        """The d preimage arcs of a non-wrapping arc [start, start+length].

        Preimage pieces that straddle the chart seam come back as separate
        intervals, so the total piece count can exceed the degree.
        """
        if start + length > 1.0 + 1e-12:
            raise ValueError("split wrapped arcs before taking preimages")
        lo_rng = self.base
        hi_rng = self.base + self.degree
        out = []
        k = math.floor(lo_rng - start - length)
        while start + k <= hi_rng:
            lo_v = max(start + k, lo_rng)
            hi_v = min(start + length + k, hi_rng)
            if hi_v > lo_v or (hi_v == lo_v and length == 0.0):
                a = float(self.inv_lift(lo_v))
                b = float(self.inv_lift(hi_v))
                out.append((a % 1.0, b - a))
            k += 1
        return out
