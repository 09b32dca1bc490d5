"""Volumetric cuts: harmonic extension of a surface bi-partition.

The cut surface is the 0.5 level set of a Laplace solve with Dirichlet data
0.5 on the cut loops and values pushed above/below 0.5 on the two sides of
the bi-partition, scaled by surface distance to the loops. The uniform
(combinatorial) Laplacian keeps the system well conditioned on meshes
degraded by earlier edge splits.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as sparse_dijkstra
from scipy.sparse.linalg import spsolve

from .grouping import side_vertex_sets
from .surface import MeshError

LEVEL = 0.5
PERTURB = 1e-12


def _tet_edge_csr(tet):
    pairs = sorted(tet.edge_graph())
    n = len(tet.V)
    rows, cols, data = [], [], []
    for u, v in pairs:
        w = float(np.linalg.norm(tet.V[u] - tet.V[v]))
        rows.extend((u, v))
        cols.extend((v, u))
        data.extend((w, w))
    return csr_matrix((data, (rows, cols)), shape=(n, n))


def surface_distance_to_cut(tet, vc_tet_ids):
    """Graph distance from every tet vertex to the cut vertex set, measured
    along the edges of the volumetric mesh."""
    if not vc_tet_ids:
        raise MeshError("empty cut set")
    g = _tet_edge_csr(tet)
    d = sparse_dijkstra(g, directed=False, indices=sorted(vc_tet_ids),
                        min_only=True)
    return d


def harmonic_cut_field(tet, vc, vl, vr):
    """Solve the uniform-Laplacian Dirichlet problem for one cut.

    vc, vl, vr: tet vertex index sets (cut, left of it, right of it). All
    other vertices are free. Returns per-vertex values in [0,1]; exact-level
    free values are nudged so the level set stays transversal.
    """
    n = len(tet.V)
    d = surface_distance_to_cut(tet, vc)
    boundary_ids = sorted(vl | vr)
    dmax = max((d[v] for v in boundary_ids), default=0.0)
    if not np.isfinite(dmax) or dmax <= 0:
        dmax = 1.0
    values = np.full(n, np.nan)
    for v in vc:
        values[v] = LEVEL
    for v in vl:
        values[v] = LEVEL + d[v] / (2.0 * dmax)
    for v in vr:
        values[v] = LEVEL - d[v] / (2.0 * dmax)

    free = np.isnan(values)
    free_ids = np.nonzero(free)[0]
    if len(free_ids) == 0:
        return values
    index = {int(v): i for i, v in enumerate(free_ids)}
    pairs = sorted(tet.edge_graph())
    deg = np.zeros(len(free_ids))
    rows, cols, data = [], [], []
    rhs = np.zeros(len(free_ids))
    for u, v in pairs:
        for a, b in ((u, v), (v, u)):
            if not free[a]:
                continue
            i = index[a]
            deg[i] += 1.0
            if free[b]:
                rows.append(i)
                cols.append(index[b])
                data.append(-1.0)
            else:
                rhs[i] += values[b]
    rows.extend(range(len(free_ids)))
    cols.extend(range(len(free_ids)))
    data.extend(deg)
    A = csr_matrix((data, (rows, cols)),
                   shape=(len(free_ids), len(free_ids)))
    if np.any(deg == 0):
        raise MeshError("disconnected free region in the harmonic solve")
    sol = spsolve(A, rhs)
    values[free_ids] = sol
    exact = free & (values == LEVEL)
    values[exact] = LEVEL + PERTURB
    return values


def check_maximum_principle(tet, values, free_mask, tol=1e-9):
    """Every free vertex strictly inside the hull of its neighbors."""
    nbr = {}
    for u, v in tet.edge_graph():
        nbr.setdefault(u, []).append(v)
        nbr.setdefault(v, []).append(u)
    for v in np.nonzero(free_mask)[0]:
        vs = [values[w] for w in nbr[int(v)]]
        if not (min(vs) - tol <= values[v] <= max(vs) + tol):
            return False
        mean = sum(vs) / len(vs)
        if abs(values[v] - mean) > tol * max(1.0, abs(mean)):
            return False
    return True


def apply_solid_cut(tet, surface, cutset, snap_tol=0.25):
    """Embed one cut: harmonic solve, level-set edge splits, facet tags.

    Returns (EmbeddedCut, values). The caller relabels afterwards.
    """
    vc_s, vl_s, vr_s = side_vertex_sets(surface, cutset)
    to_tet = tet.tet_vertex_of
    vc = {int(to_tet[v]) for v in vc_s}
    vl = {int(to_tet[v]) for v in vl_s}
    vr = {int(to_tet[v]) for v in vr_s}
    values = harmonic_cut_field(tet, vc, vl, vr)
    cut, values = tet.embed_levelset(values, LEVEL, snap_tol=snap_tol,
                                     protected=vc | vl | vr)
    return cut, values


def cut_boundary_matches_loops(tet, cut, vc_tet_ids):
    """The boundary edges of the cut facet set must be exactly the embedded
    loop edges: every facet boundary vertex lies in V_C."""
    edge_count = {}
    for (a, b, c) in cut.facets:
        for u, v in ((a, b), (a, c), (b, c)):
            key = (u, v) if u < v else (v, u)
            edge_count[key] = edge_count.get(key, 0) + 1
    boundary_vertices = set()
    for (u, v), cnt in edge_count.items():
        if cnt == 1:
            boundary_vertices.update((u, v))
    return boundary_vertices <= set(vc_tet_ids)
