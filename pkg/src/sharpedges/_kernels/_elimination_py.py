"""Pure-Python weighted sample elimination (reference and fallback)."""

import heapq
import math

import numpy as np


def _priority(s, lw):
    return math.log(s) - lw if s > 0.0 else -math.inf


def eliminate(indptr, indices, contrib, log_weight, n_keep):
    """Greedily remove the highest-priority sample until ``n_keep`` remain.

    ``priority = log(density) - log_weight`` where density is the sum of
    ``contrib`` over live neighbors. Ties go to the lower index. Returns the
    removal order as an int64 array.
    """
    indptr = np.asarray(indptr, np.int64)
    indices = np.asarray(indices, np.int64)
    contrib = np.asarray(contrib, np.float64)
    lw = np.asarray(log_weight, np.float64).tolist()
    m = len(indptr) - 1
    n_remove = m - int(n_keep)
    if n_remove <= 0:
        return np.empty(0, np.int64)
    ptr = indptr.tolist()
    nbr = indices.tolist()
    cw = contrib.tolist()
    dens = [0.0] * m
    for i in range(m):
        s = 0.0
        for k in range(ptr[i], ptr[i + 1]):
            s += cw[k]
        dens[i] = s
    prio = [_priority(dens[i], lw[i]) for i in range(m)]
    heap = [(-prio[i], i) for i in range(m)]
    heapq.heapify(heap)
    removed = [False] * m
    order = []
    while len(order) < n_remove:
        negp, i = heapq.heappop(heap)
        if removed[i] or -negp != prio[i]:
            continue
        removed[i] = True
        order.append(i)
        for k in range(ptr[i], ptr[i + 1]):
            j = nbr[k]
            if removed[j]:
                continue
            dens[j] = dens[j] - cw[k]
            p = _priority(dens[j], lw[j])
            if p != prio[j]:
                prio[j] = p
                heapq.heappush(heap, (-p, j))
    return np.asarray(order, np.int64)
