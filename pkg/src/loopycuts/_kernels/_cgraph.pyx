# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Cython twin of pygraph.py. Same relaxation order, same tie-breaking,
bit-identical output (verified in tests and in benchmarks/bench_kernels.py)."""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc, realloc

cnp.import_array()

cdef double INF = float("inf")


cdef struct HeapItem:
    double dist
    long long node


cdef inline bint _less(HeapItem a, HeapItem b) nogil:
    if a.dist != b.dist:
        return a.dist < b.dist
    return a.node < b.node


cdef class _Heap:
    cdef HeapItem* items
    cdef Py_ssize_t size
    cdef Py_ssize_t cap

    def __cinit__(self, Py_ssize_t cap):
        self.items = <HeapItem*> malloc(cap * sizeof(HeapItem))
        if self.items == NULL:
            raise MemoryError()
        self.size = 0
        self.cap = cap

    def __dealloc__(self):
        if self.items != NULL:
            free(self.items)

    cdef int push(self, double d, long long node) except -1:
        cdef Py_ssize_t i, parent
        cdef HeapItem it
        cdef HeapItem* grown
        if self.size == self.cap:
            grown = <HeapItem*> realloc(self.items, 2 * self.cap * sizeof(HeapItem))
            if grown == NULL:
                raise MemoryError()
            self.items = grown
            self.cap *= 2
        it.dist = d
        it.node = node
        i = self.size
        self.size += 1
        while i > 0:
            parent = (i - 1) >> 1
            if _less(it, self.items[parent]):
                self.items[i] = self.items[parent]
                i = parent
            else:
                break
        self.items[i] = it
        return 0

    cdef HeapItem pop(self):
        cdef HeapItem top = self.items[0]
        cdef HeapItem last
        cdef Py_ssize_t i = 0, child
        self.size -= 1
        if self.size > 0:
            last = self.items[self.size]
            while True:
                child = 2 * i + 1
                if child >= self.size:
                    break
                if child + 1 < self.size and _less(self.items[child + 1], self.items[child]):
                    child += 1
                if _less(self.items[child], last):
                    self.items[i] = self.items[child]
                    i = child
                else:
                    break
            self.items[i] = last
        return top


def dijkstra(indptr_in, indices_in, weights_in, disabled_in, sources_in,
             source_dist=None, stop_mask=None):
    cdef cnp.int64_t[::1] indptr = np.ascontiguousarray(indptr_in, dtype=np.int64)
    cdef cnp.int64_t[::1] indices = np.ascontiguousarray(indices_in, dtype=np.int64)
    cdef cnp.float64_t[::1] weights = np.ascontiguousarray(weights_in, dtype=np.float64)
    cdef cnp.uint8_t[::1] disabled = np.ascontiguousarray(disabled_in, dtype=np.uint8)
    cdef cnp.int64_t[::1] sources = np.ascontiguousarray(sources_in, dtype=np.int64)

    cdef Py_ssize_t n = indptr.shape[0] - 1
    dist_arr = np.full(n, INF)
    pred_arr = np.full(n, -1, dtype=np.int64)
    done_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.float64_t[::1] dist = dist_arr
    cdef cnp.int64_t[::1] pred = pred_arr
    cdef cnp.uint8_t[::1] done = done_arr

    cdef cnp.float64_t[::1] sdist = np.zeros(0)
    cdef cnp.uint8_t[::1] stop = np.zeros(0, dtype=np.uint8)
    cdef bint has_sdist = source_dist is not None
    cdef bint has_stop = stop_mask is not None
    if has_sdist:
        sdist = np.ascontiguousarray(source_dist, dtype=np.float64)
    if has_stop:
        stop = np.ascontiguousarray(stop_mask, dtype=np.uint8)

    cdef _Heap heap = _Heap(max(16, 2 * sources.shape[0]))
    cdef Py_ssize_t k, a
    cdef long long s, u, v
    cdef double d0, d, nd
    cdef long long remaining = -1
    cdef HeapItem top

    for k in range(sources.shape[0]):
        s = sources[k]
        d0 = sdist[k] if has_sdist else 0.0
        if d0 < dist[s]:
            dist[s] = d0
            heap.push(d0, s)

    if has_stop:
        remaining = 0
        for k in range(n):
            if stop[k]:
                remaining += 1

    while heap.size > 0:
        top = heap.pop()
        d = top.dist
        u = top.node
        if done[u]:
            continue
        done[u] = 1
        if has_stop and stop[u]:
            remaining -= 1
            if remaining == 0:
                break
        for a in range(indptr[u], indptr[u + 1]):
            if disabled[a]:
                continue
            v = indices[a]
            if done[v]:
                continue
            nd = d + weights[a]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heap.push(nd, v)
    return dist_arr, pred_arr


def shortest_cycle(indptr_in, indices_in, weights_in, disabled_in,
                   rev_indptr_in, rev_indices_in, rev_arcs_in, seed_in):
    cdef cnp.int64_t[::1] rev_indptr = np.ascontiguousarray(rev_indptr_in, dtype=np.int64)
    cdef cnp.int64_t[::1] rev_indices = np.ascontiguousarray(rev_indices_in, dtype=np.int64)
    cdef cnp.int64_t[::1] rev_arcs = np.ascontiguousarray(rev_arcs_in, dtype=np.int64)
    cdef cnp.uint8_t[::1] disabled = np.ascontiguousarray(disabled_in, dtype=np.uint8)
    cdef cnp.float64_t[::1] weights = np.ascontiguousarray(weights_in, dtype=np.float64)
    cdef long long seed = seed_in

    cdef Py_ssize_t n = len(indptr_in) - 1
    stop_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] stop = stop_arr
    cdef Py_ssize_t a
    cdef long long nstop = 0
    for a in range(rev_indptr[seed], rev_indptr[seed + 1]):
        if not disabled[rev_arcs[a]]:
            stop[rev_indices[a]] = 1
            nstop += 1
    if nstop == 0:
        return INF, None

    dist_arr, pred_arr = dijkstra(indptr_in, indices_in, weights_in, disabled_in,
                                  np.array([seed], dtype=np.int64),
                                  stop_mask=stop_arr)
    cdef cnp.float64_t[::1] dist = dist_arr
    cdef cnp.int64_t[::1] pred = pred_arr

    cdef double best = INF
    cdef long long best_v = -1
    cdef long long v, arc
    cdef double c
    for a in range(rev_indptr[seed], rev_indptr[seed + 1]):
        arc = rev_arcs[a]
        if disabled[arc]:
            continue
        v = rev_indices[a]
        if dist[v] == INF:
            continue
        c = dist[v] + weights[arc]
        if c < best or (c == best and v < best_v):
            best = c
            best_v = v
    if best_v < 0:
        return INF, None

    path = [best_v]
    cdef long long u = best_v
    while u != seed:
        u = pred[u]
        if u < 0:
            return INF, None
        path.append(int(u))
    path.reverse()
    return float(best), [int(x) for x in path]
