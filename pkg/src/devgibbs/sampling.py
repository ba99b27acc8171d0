"""Deterministic, scheduling-independent Monte Carlo plumbing.

Every random draw comes from a counter-based Philox generator keyed by
(seed, tag, chunk index), so results are byte-identical however chunks
are scheduled across workers.  Chunk size is a fixed constant; reductions
always combine per-chunk results in chunk-index order.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Tuple

import numpy as np

CHUNK = 1 << 16


def _philox_key(seed: int, tag: str, chunk: int) -> int:
    payload = f"{seed}:{tag}:{chunk}".encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=16).digest(), "little")


def spawn_rng(seed: int, tag: str, chunk: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=_philox_key(seed, tag, chunk)))


@dataclass(frozen=True)
class UniformSampler:
    """Lebesgue (uniform) sampling of a domain."""

    domain: object
    label: str = "lebesgue"

    def sample(self, rng, n):
        return self.domain.sample(rng, n)


@dataclass(frozen=True)
class EmpiricalSampler:
    """Resampling with replacement from a fixed cloud of points."""

    points: np.ndarray
    label: str = "empirical"

    def sample(self, rng, n):
        idx = rng.integers(0, len(self.points), size=n)
        return np.asarray(self.points)[idx]


def load_empirical(path: str) -> "EmpiricalSampler":
    """Empirical sampler from a text file of points, one per line.

    Cylinder points use two comma- or whitespace-separated coordinates.
    """
    pts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(v) for v in line.replace(",", " ").split()]
            pts.append(vals[0] if len(vals) == 1 else vals)
    return EmpiricalSampler(points=np.asarray(pts), label=f"file:{path}")


@dataclass(frozen=True)
class OrbitSampler:
    """Points along long typical orbits started from uniform seeds.

    A stand-in for sampling an a.c. invariant measure: each chunk starts
    a fresh orbit, discards ``burn_in`` iterates and returns the next n.
    """

    map: object
    burn_in: int = 1000
    label: str = "orbit"

    def sample(self, rng, n):
        x = self.map.domain.sample(rng, 1)
        x = x[0] if self.map.domain.ndim == 1 else x[0, :]
        for _ in range(self.burn_in):
            x = self.map.domain.clamp(self.map.step(x))
        if self.map.domain.ndim == 1:
            out = np.empty(n)
        else:
            out = np.empty((n, 2))
        for j in range(n):
            out[j] = x
            x = self.map.domain.clamp(self.map.step(x))
        return out


def chunk_slices(total: int) -> Iterator[Tuple[int, int]]:
    """(chunk_index, size) pairs covering ``total`` draws."""
    idx = 0
    left = total
    while left > 0:
        size = min(CHUNK, left)
        yield idx, size
        idx += 1
        left -= size


def sample_chunks(sampler, total: int, seed: int, tag: str):
    """Yield (chunk_index, points) with the per-chunk keyed generator."""
    for idx, size in chunk_slices(total):
        yield idx, sampler.sample(spawn_rng(seed, tag, idx), size)


def parallel_chunk_map(fn: Callable, jobs: Iterable, workers: int = 1) -> list:
    """Apply fn over (index, payload) jobs; results returned in index order.

    The combination order never depends on worker scheduling, which is
    what makes the output byte-deterministic under any worker count.
    """
    jobs = list(jobs)
    if workers <= 1:
        results = [(idx, fn(idx, payload)) for idx, payload in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(idx, pool.submit(fn, idx, payload)) for idx, payload in jobs]
            results = [(idx, fut.result()) for idx, fut in futures]
    results.sort(key=lambda t: t[0])
    return [r for _, r in results]
