# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled weighted sample elimination with an indexed binary max-heap."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY

cnp.import_array()


cdef inline double _priority(double s, double lw) nogil:
    if s > 0.0:
        return log(s) - lw
    return -INFINITY


cdef inline bint _above(double[::1] prio, Py_ssize_t a, Py_ssize_t b) nogil:
    return prio[a] > prio[b] or (prio[a] == prio[b] and a < b)


cdef void _sift_down(Py_ssize_t[::1] heap, Py_ssize_t[::1] where, double[::1] prio,
                     Py_ssize_t pos, Py_ssize_t size) nogil:
    cdef Py_ssize_t item = heap[pos], child, right
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        right = child + 1
        if right < size and _above(prio, heap[right], heap[child]):
            child = right
        if not _above(prio, heap[child], item):
            break
        heap[pos] = heap[child]
        where[heap[pos]] = pos
        pos = child
    heap[pos] = item
    where[item] = pos


def eliminate(indptr, indices, contrib, log_weight, Py_ssize_t n_keep):
    """Same contract as the pure-Python ``eliminate``."""
    cdef const cnp.int64_t[::1] ptr = np.ascontiguousarray(indptr, np.int64)
    cdef const cnp.int64_t[::1] nbr = np.ascontiguousarray(indices, np.int64)
    cdef const double[::1] cw = np.ascontiguousarray(contrib, np.float64)
    cdef const double[::1] lw = np.ascontiguousarray(log_weight, np.float64)
    cdef Py_ssize_t m = ptr.shape[0] - 1
    cdef Py_ssize_t n_remove = m - n_keep
    if n_remove <= 0:
        return np.empty(0, np.int64)
    dens_a = np.zeros(m, np.float64)
    prio_a = np.empty(m, np.float64)
    heap_a = np.arange(m, dtype=np.intp)
    where_a = np.arange(m, dtype=np.intp)
    removed_a = np.zeros(m, np.uint8)
    order_a = np.empty(n_remove, np.int64)
    cdef double[::1] dens = dens_a
    cdef double[::1] prio = prio_a
    cdef Py_ssize_t[::1] heap = heap_a
    cdef Py_ssize_t[::1] where = where_a
    cdef unsigned char[::1] removed = removed_a
    cdef cnp.int64_t[::1] order = order_a
    cdef Py_ssize_t i, j, k, pos, size = m, done = 0
    cdef double s, p
    with nogil:
        for i in range(m):
            s = 0.0
            for k in range(ptr[i], ptr[i + 1]):
                s = s + cw[k]
            dens[i] = s
            prio[i] = _priority(s, lw[i])
        pos = m // 2
        while pos > 0:
            pos -= 1
            _sift_down(heap, where, prio, pos, size)
        while done < n_remove:
            i = heap[0]
            size -= 1
            if size > 0:
                heap[0] = heap[size]
                where[heap[0]] = 0
                _sift_down(heap, where, prio, 0, size)
            removed[i] = 1
            order[done] = i
            done += 1
            for k in range(ptr[i], ptr[i + 1]):
                j = nbr[k]
                if removed[j]:
                    continue
                dens[j] = dens[j] - cw[k]
                p = _priority(dens[j], lw[j])
                if p != prio[j]:
                    # density only decreases, so priority only falls
                    prio[j] = p
                    _sift_down(heap, where, prio, where[j], size)
    return order_a
