"""Replicate fan-out over a process pool.

Replicate ``i`` of a job labelled ``label`` always draws from the stream
``RngStream(seed).child(label, i)``, and results are collected in index
order, so the output does not depend on the number of workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from .numerics import RngStream

WORKERS_ENV = "DPPLAB_WORKERS"


def worker_count(workers=None):
    if workers is None:
        workers = os.environ.get(WORKERS_ENV, "1")
    try:
        w = int(workers)
    except ValueError:
        raise ValueError("%s must be an integer, got %r" % (WORKERS_ENV, workers))
    return max(1, w)


def _run_chunk(task, params, seed, label, lo, hi):
    root = RngStream(seed)
    return [task(params, root.child(label, i)) for i in range(lo, hi)]


def map_replicates(task, params, seed, label, replicates, workers=None, chunk=None):
    """``[task(params, stream_i) for i in range(replicates)]``, possibly in parallel.

    ``task`` must be a module-level function so that it pickles.
    """
    replicates = int(replicates)
    w = min(worker_count(workers), max(replicates, 1))
    if w == 1 or replicates < 2:
        return _run_chunk(task, params, seed, label, 0, replicates)
    size = chunk or max(1, -(-replicates // (4 * w)))
    bounds = [(lo, min(lo + size, replicates)) for lo in range(0, replicates, size)]
    out = []
    with ProcessPoolExecutor(max_workers=w) as ex:
        futs = [ex.submit(_run_chunk, task, params, seed, label, lo, hi) for lo, hi in bounds]
        for f in futs:
            out.extend(f.result())
    return out
