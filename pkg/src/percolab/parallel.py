"""Deterministic chunked map over replicate ranges."""
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def chunk_ranges(n, chunk):
    return [(a, min(n, a + chunk)) for a in range(0, n, chunk)]


def map_replicates(fn, n, threads=1, chunk=4096):
    """Run ``fn(start, stop) -> ndarray`` over fixed chunks and concatenate in order.

    Chunk boundaries do not depend on ``threads``, and every replicate draws
    its own keyed stream, so the result is identical for any thread count.
    Kernels called from ``fn`` should release the GIL (numba ``nogil``).
    """
    ranges = chunk_ranges(int(n), int(chunk))
    if not ranges:
        return np.empty(0)
    if threads is None or threads <= 1 or len(ranges) == 1:
        parts = [fn(a, b) for a, b in ranges]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            parts = list(ex.map(lambda ab: fn(*ab), ranges))
    return np.concatenate(parts)
