"""Worker-pool plumbing with a deterministic reduction contract.

Parallelism never changes results: work is split into fixed chunks whose
partial results are combined in chunk order, so outputs are bit-identical
for any thread count.
"""

import math
from concurrent.futures import ThreadPoolExecutor

_THREADS = 1


def set_threads(n):
    """Set the global worker-pool width (1 disables pooling)."""
    global _THREADS
    n = int(n)
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _THREADS = n


def get_threads():
    return _THREADS


def ordered_map(func, items, threads=None):
    """Map ``func`` over ``items``, returning results in input order.

    With ``threads > 1`` the calls may run concurrently (useful because the
    heavy work is in numpy, which releases the GIL), but the returned list
    order never depends on scheduling.
    """
    items = list(items)
    nthreads = _THREADS if threads is None else int(threads)
    if nthreads <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(nthreads, len(items))) as pool:
        return list(pool.map(func, items))


def fixed_chunk_sum(values, chunk=4096, threads=None):
    """Sum a 1-D float array by fixed-size chunks, combining partials with fsum.

    The chunk boundaries depend only on ``chunk``, never on the thread count,
    so the result is reproducible bit-for-bit.
    """
    nchunks = max(1, -(-len(values) // chunk))
    slices = [values[i * chunk:(i + 1) * chunk] for i in range(nchunks)]
    partials = ordered_map(lambda s: float(s.sum()), slices, threads=threads)
    return math.fsum(partials)
