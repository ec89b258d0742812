"""Seeded trial streams, confidence intervals and chunked (optionally parallel) trial execution."""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import stats


class Hypothesis(enum.IntEnum):
    H0 = 0
    H1 = 1


def trial_rng(seed: int, hypothesis: int, index: int) -> np.random.Generator:
    """Independent stream for one trial, a pure function of (seed, hypothesis, index)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(hypothesis), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def derived_rng(seed: int, *key: int) -> np.random.Generator:
    """Stream for a non-trial purpose (codebook draws, solver restarts)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(1000,) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95):
    if trials == 0:
        return (0.0, 1.0)
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return (float(ci.low), float(ci.high))


def empirical_exponent(beta_hat: float, trials: int, n: int) -> float:
    """-log2(beta)/n with beta floored at 1/trials so zero counts stay finite."""
    return -math.log2(max(beta_hat, 1.0 / trials)) / n


def run_chunks(fn, jobs, workers: int = 1):
    """Map ``fn`` over ``jobs`` serially or on a process pool; output order follows ``jobs``."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def chunk_ranges(total: int, pieces: int):
    pieces = max(1, min(pieces, total))
    edges = np.linspace(0, total, pieces + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
