"""Counter-based random streams and chunked replica execution.

Every Monte Carlo stage draws from ``Philox`` generators keyed by
``(seed, stage, *indices)``.  Replicas are cut into fixed-size chunks, each with
its own stream, so results depend only on the seed and the chunk size, never on
the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

DEFAULT_CHUNK = 16384

# Fixed stage ids; new stages get new numbers so existing streams never move.
STAGES = {
    "analyze": 1,
    "constants": 2,
    "simulate": 3,
    "tail": 4,
    "fit": 5,
    "verify": 6,
    "garch": 7,
    "diagnostics": 8,
    "moments": 9,
}


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream addressed by ``key`` under the master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(n_reps: int, chunk_size: int = DEFAULT_CHUNK) -> list[int]:
    if n_reps <= 0:
        raise ValueError("n_reps must be positive")
    full, rest = divmod(n_reps, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunked(
    fn: Callable[[np.random.Generator, int], T],
    n_reps: int,
    seed: int,
    key: Sequence[int],
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> list[T]:
    """Evaluate ``fn(rng, size)`` on every chunk; results come back in chunk order."""
    sizes = chunk_sizes(n_reps, chunk_size)
    jobs = [(stream(seed, *key, i), size) for i, size in enumerate(sizes)]
    if workers <= 1 or len(jobs) == 1:
        return [fn(g, size) for g, size in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def fsum_columns(parts: Sequence[Sequence[float]]) -> list[float]:
    """Compensated column sums of per-chunk partial sums."""
    return [math.fsum(col) for col in zip(*parts)]


def resolve_seed(rng) -> int:
    """Master seed from an int, a Generator (one draw) or None (fresh entropy)."""
    if rng is None:
        return int(np.random.SeedSequence().entropy % (1 << 63))
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 1 << 63))
    seed = int(rng)
    if seed < 0 or seed >= 1 << 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed


def moment_sums(x: np.ndarray) -> np.ndarray:
    """Per-chunk ``(count, sum, sum of squares, centered sum of squares)`` along the first axis."""
    x = np.asarray(x, float)
    m2 = ((x - x.mean(axis=0)) ** 2).sum(axis=0) if x.shape[0] else np.zeros(x.shape[1:])
    return np.stack([np.full(x.shape[1:], x.shape[0], float), x.sum(axis=0), (x * x).sum(axis=0), m2])


def pooled_mean(parts: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error from per-chunk :func:`moment_sums`.

    Sums are compensated across chunks and the centered second moments are
    merged pairwise, so large offsets do not cancel.
    """
    stacked = np.stack([np.asarray(p, float) for p in parts])  # chunks x 4 x ...
    flat = stacked.reshape(stacked.shape[0], 4, -1)
    n = np.array([math.fsum(flat[:, 0, j]) for j in range(flat.shape[2])])
    s = np.array([math.fsum(flat[:, 1, j]) for j in range(flat.shape[2])])
    mean = s / n
    # M2 = sum_k M2_k + sum_k n_k (mean_k - mean)^2
    with np.errstate(invalid="ignore", divide="ignore"):
        mk = np.where(flat[:, 0] > 0, flat[:, 1] / flat[:, 0], 0.0)
    between = flat[:, 0] * (mk - mean) ** 2
    m2 = np.array([math.fsum(flat[:, 3, j]) + math.fsum(between[:, j]) for j in range(flat.shape[2])])
    var = m2 / np.maximum(n - 1, 1)
    se = np.sqrt(var / n)
    shape = stacked.shape[2:]
    return mean.reshape(shape), se.reshape(shape)
