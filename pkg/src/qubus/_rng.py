"""Reproducible random streams for Monte Carlo trials.

Trials are cut into fixed blocks of ``BLOCK`` consecutive trial indices. Block
``b`` draws from a Philox stream keyed by ``(seed, tag, b)``, so any trial's
randomness depends only on the seed and its index, never on how blocks are
spread over workers. Results are folded in block order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 1 << 16
SEED_MASK = (1 << 64) - 1


def stream(seed, tag, block=0):
    """Counter-based generator for one block of trials."""
    ss = np.random.SeedSequence([int(seed) & SEED_MASK, _tag_id(tag), int(block)])
    return np.random.Generator(np.random.Philox(ss))


def _tag_id(tag):
    # stable across processes, unlike hash()
    return int.from_bytes(tag.encode("utf-8")[:8].ljust(8, b"\0"), "little")


def blocks(trials):
    """(block index, trials in block) pairs covering ``trials``."""
    return [(b, min(BLOCK, trials - b * BLOCK)) for b in range(-(-trials // BLOCK))]


def map_blocks(fn, trials, seed, tag, workers=1):
    """Run ``fn(rng, count)`` once per block; return the results in block order."""
    jobs = blocks(trials)

    def run(job):
        b, count = job
        return fn(stream(seed, tag, b), count)

    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))
