"""Pure-Python Dijkstra kernels over CSR adjacency.

Reference implementation of the hot graph searches. The Cython twin in
``_cgraph.pyx`` mirrors this code statement by statement; both must produce
bit-identical distances and predecessors (same arc visit order, same strict
``<`` relaxation, ties broken by node id through the (dist, node) heap key).
"""

from __future__ import annotations

import heapq

import numpy as np

INF = np.inf


def dijkstra(indptr, indices, weights, disabled, sources, source_dist=None,
             stop_mask=None):
    """Multi-source Dijkstra. Returns (dist, pred) arrays over all nodes.

    disabled: uint8 per arc, 1 = arc unusable.
    sources: int array of seed nodes (dist 0 unless source_dist given).
    stop_mask: optional uint8 per node; propagation halts once every flagged
        node has been finalized (distances beyond them stay inf).
    """
    n = len(indptr) - 1
    dist = np.full(n, INF)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)

    heap = []
    for k, s in enumerate(sources):
        d0 = 0.0 if source_dist is None else float(source_dist[k])
        if d0 < dist[s]:
            dist[s] = d0
            heapq.heappush(heap, (d0, int(s)))

    remaining = int(stop_mask.sum()) if stop_mask is not None else -1

    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if remaining >= 0 and stop_mask[u]:
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
                heapq.heappush(heap, (nd, int(v)))
    return dist, pred


def shortest_cycle(indptr, indices, weights, disabled, rev_indptr, rev_indices,
                   rev_arcs, seed):
    """Shortest non-empty directed cycle through ``seed``.

    Returns (cost, node_path) where node_path starts at seed and omits the
    closing repeat, or (inf, None) when no cycle exists. The cycle is the
    minimum over in-arcs (v -> seed) of dist(seed, v) + w(v, seed); ties are
    broken by the smaller in-neighbor node id.
    """
    n = len(indptr) - 1
    stop = np.zeros(n, dtype=np.uint8)
    nstop = 0
    for a in range(rev_indptr[seed], rev_indptr[seed + 1]):
        if not disabled[rev_arcs[a]]:
            stop[rev_indices[a]] = 1
            nstop += 1
    if nstop == 0:
        return INF, None

    dist, pred = dijkstra(indptr, indices, weights, disabled, np.array([seed]),
                          stop_mask=stop)

    best = INF
    best_v = -1
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
            best_v = int(v)
    if best_v < 0:
        return INF, None

    path = [best_v]
    u = best_v
    while u != seed:
        u = int(pred[u])
        if u < 0:  # seed unreachable: only possible via stale stop nodes
            return INF, None
        path.append(u)
    path.reverse()
    return float(best), path
