"""Cut sets: bi-partition the surface along whole loops.

Three escalation stages: a direct two-coloring when the forced loop set
already separates the surface, a geometric min-cut that buys additional
loops by pairing-penalty-weighted length, and a purely topological backup
that minimizes total cut length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .profiles import pair_penalty

# scipy's maximum_flow needs int32 capacities; keep every sum well inside
CAP_SCALE = 10 ** 5
BIG = 1 << 27


@dataclass
class CutSet:
    initiator: int
    members: list                 # loop ids whose chains form the boundary
    labels: np.ndarray            # per-triangle side (True = left of initiator)
    origin: str                   # geometric | backup | forced-cluster
    energy: float = 0.0
    extra_chains: list = field(default_factory=list)  # backup-only edge cycles


def chain_side_faces(surface, loop):
    """(left faces, right faces) along the loop chain."""
    left, right = [], []
    for a, b in loop.chain_edge_pairs():
        left.append(surface.halfedge_face(a, b))
        right.append(surface.halfedge_face(b, a))
    return left, right


def direct_bipartition(surface, members):
    """Two-color the triangle components separated by the member chains so
    that every chain has opposite colors at its sides. None when the members
    do not jointly separate the surface."""
    blocked = {}
    for lp in members:
        for a, b in lp.chain_edge_pairs():
            blocked[frozenset((a, b))] = lp.id
    comp = np.full(surface.n_faces, -1, dtype=np.int64)
    nxt = 0
    for seed in range(surface.n_faces):
        if comp[seed] >= 0:
            continue
        stack = [seed]
        comp[seed] = nxt
        while stack:
            f = stack.pop()
            for ei in surface.face_edges[f]:
                u, v = surface.edges[ei]
                if frozenset((int(u), int(v))) in blocked:
                    continue
                g = surface.other_face(ei, f)
                if comp[g] < 0:
                    comp[g] = nxt
                    stack.append(g)
        nxt += 1
    if nxt < 2:
        return None
    # inequality constraints between the components at each chain's sides
    adj = {}
    for lp in members:
        l, r = chain_side_faces(surface, lp)
        for fl, fr in zip(l, r):
            a, b = int(comp[fl]), int(comp[fr])
            if a == b:
                return None
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
    color = {}
    for start in range(nxt):
        if start in color:
            continue
        color[start] = 0
        stack = [start]
        while stack:
            c = stack.pop()
            for d in adj.get(c, ()):
                if d not in color:
                    color[d] = 1 - color[c]
                    stack.append(d)
                elif color[d] == color[c]:
                    return None
    labels = np.array([color[int(c)] == 0 for c in comp])
    if labels.all() or not labels.any():
        return None
    return labels


def _mincut_labels(surface, cap_of_edge, src_faces, dst_faces):
    """Exact s-t min cut over the triangle dual; True = source side."""
    nf = surface.n_faces
    s, t = nf, nf + 1
    rows, cols, caps = [], [], []
    for ei, (f, g) in enumerate(surface.edge_faces.tolist()):
        c = cap_of_edge(ei)
        rows.extend((f, g))
        cols.extend((g, f))
        caps.extend((c, c))
    for f in sorted(set(src_faces)):
        rows.extend((s, f)); cols.extend((f, s)); caps.extend((BIG, 0))
    for f in sorted(set(dst_faces)):
        rows.extend((f, t)); cols.extend((t, f)); caps.extend((BIG, 0))
    graph = csr_matrix((np.array(caps, dtype=np.int32),
                        (np.array(rows), np.array(cols))),
                       shape=(nf + 2, nf + 2))
    res = maximum_flow(graph, s, t)
    # source side via BFS in the residual graph
    residual = graph - res.flow
    reach = np.zeros(nf + 2, dtype=bool)
    stack = [s]
    reach[s] = True
    indptr, indices, data = residual.indptr, residual.indices, residual.data
    while stack:
        u = stack.pop()
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if data[k] > 0 and not reach[v]:
                reach[v] = True
                stack.append(int(v))
    return reach[:nf], int(res.flow_value)


def _boundary_edges(surface, labels):
    out = []
    for ei, (f, g) in enumerate(surface.edge_faces.tolist()):
        if labels[f] != labels[g]:
            out.append(ei)
    return out


def _loop_usage(surface, labels, loops):
    """For each loop: (chain edges on the label boundary, total chain edges)."""
    usage = {}
    for lp in loops:
        cut = 0
        total = 0
        for a, b in lp.chain_edge_pairs():
            ei = surface.edge_id(a, b)
            f, g = surface.edge_faces[ei]
            total += 1
            if labels[f] != labels[g]:
                cut += 1
        usage[lp.id] = (cut, total)
    return usage


def _try_members(surface, initiator, members, profiles, origin, eps_c,
                 literal_cyl):
    labels = direct_bipartition(surface, members)
    if labels is None:
        return None
    prof = profiles[initiator.id]
    energy = sum(pair_penalty(prof, profiles[m.id], eps_c, literal_cyl)
                 for m in members if m.id != initiator.id)
    if not np.isfinite(energy):
        energy = -1.0
    return CutSet(initiator.id, sorted(m.id for m in members), labels,
                  origin, float(energy))


def enumerate_mate(surface, initiator, queue_loops, profiles, consumed,
                   eps_c, literal_cyl, balance_weight=1.0):
    """Best single mate: pairing penalty plus an imbalance term, so a deep
    halving cut beats a shallow crescent between nearby loops."""
    prof = profiles[initiator.id]
    area = surface.face_area
    total = float(area.sum())
    best = None
    for other in queue_loops:
        if other.id == initiator.id or other.id in consumed:
            continue
        e = pair_penalty(prof, profiles[other.id], eps_c, literal_cyl)
        if not np.isfinite(e) and not (prof.type == "II"
                                       and profiles[other.id].type == "II"):
            continue
        if not np.isfinite(e):
            e = 1.0  # two cavity loops may pair as a last resort
        labels = direct_bipartition(surface, [initiator, other])
        if labels is None:
            continue
        a1 = float(area[labels].sum())
        imbalance = 1.0 - 2.0 * min(a1, total - a1) / total
        # loops bounding one cut surface should sit on oppositely oriented
        # surface regions; reward antipodal mean normals
        opposition = 0.0
        ni = prof.mean_surface_normal
        nj = profiles[other.id].mean_surface_normal
        if ni is not None and nj is not None:
            opposition = 0.5 * (1.0 + float(ni @ nj))
        score = e + balance_weight * imbalance + opposition
        if best is None or score < best[0]:
            best = (score, other.id, labels, e)
    if best is None:
        return None
    _, mate, labels, e = best
    return CutSet(initiator.id, sorted({initiator.id, mate}), labels,
                  "geometric", float(e))


def group_loops(surface, initiator, queue_loops, profiles, clusters,
                consumed=(), eps_c=1e-9, literal_cyl=False):
    """Geometric grouping. Returns a CutSet or None (caller falls back).

    Escalation: forced cavity cluster (whole, then anchor-initiator pair),
    separating loop alone, best single mate by penalty plus balance, then
    the penalty-weighted min-cut for completions needing several loops.
    """
    by_id = {lp.id: lp for lp in queue_loops}
    prof = profiles[initiator.id]
    forced = {initiator.id}
    origin = "geometric"
    anchor = None
    if prof.type == "II":
        anchor = clusters.anchor_of.get(initiator.id)
        if anchor is not None:
            forced.add(anchor)
            forced.update(clusters.clusters.get(anchor, ()))
            origin = "forced-cluster"
    elif prof.type == "I" and initiator.id in clusters.clusters:
        anchor = initiator.id
        forced.update(clusters.clusters[initiator.id])
        origin = "forced-cluster"
    elif prof.type == "III" and initiator.id in clusters.mate_of:
        forced.add(clusters.mate_of[initiator.id])
        origin = "forced-cluster"

    if len(forced) > 1:
        cs = _try_members(surface, initiator,
                          [by_id[i] for i in sorted(forced)], profiles,
                          origin, eps_c, literal_cyl)
        if cs is not None:
            return cs
        if anchor is not None and anchor != initiator.id:
            cs = _try_members(surface, initiator,
                              [initiator, by_id[anchor]], profiles,
                              origin, eps_c, literal_cyl)
            if cs is not None:
                return cs
    elif prof.type != "II":
        # a separating loop cuts alone; cavity (type II) loops never do
        cs = _try_members(surface, initiator, [initiator], profiles,
                          "geometric", eps_c, literal_cyl)
        if cs is not None:
            return cs

    cs = enumerate_mate(surface, initiator, queue_loops, profiles,
                        set(consumed), eps_c, literal_cyl)
    if cs is not None:
        return cs

    # min-cut: completions that need several loops at once
    edge_loop = {}
    for lp in queue_loops:
        for a, b in lp.chain_edge_pairs():
            edge_loop[surface.edge_id(a, b)] = lp.id
    lengths = {lp.id: lp.chain_length(surface) for lp in queue_loops}
    consumed = set(consumed)

    def cap(ei):
        owner = edge_loop.get(ei)
        if owner is None:
            return BIG
        if owner in forced or owner in consumed:
            return 0  # existing boundaries are free to ride
        e = pair_penalty(prof, profiles[owner], eps_c, literal_cyl)
        if not np.isfinite(e):
            return BIG
        u, v = surface.edges[ei]
        frac = float(np.linalg.norm(surface.V[u] - surface.V[v])) / lengths[owner]
        return max(int(round(e * frac * CAP_SCALE)), 1)

    left, right = chain_side_faces(surface, initiator)
    if set(left) & set(right):
        return None
    labels, flow = _mincut_labels(surface, cap, left, right)
    if flow >= BIG:
        return None
    usage = _loop_usage(surface, labels, queue_loops)
    members = []
    for lid, (cut, total) in sorted(usage.items()):
        if cut == 0 or lid in consumed:
            continue
        if cut != total:
            return None  # partial loop: globally inconsistent
        members.append(lid)
    for lid in forced:
        if lid not in members and lid not in consumed:
            return None
    if labels.all() or not labels.any():
        return None
    energy = flow / CAP_SCALE
    return CutSet(initiator.id, members, labels, origin, float(energy))


def backup_group(surface, initiator, queue_loops):
    """Topological fallback: minimize total boundary length, constrained to
    keep opposite labels across the initiating loop."""
    init_edges = {surface.edge_id(a, b)
                  for a, b in initiator.chain_edge_pairs()}

    def cap(ei):
        if ei in init_edges:
            return 0
        return max(int(round(surface.edge_length(ei) * CAP_SCALE)), 1)

    left, right = chain_side_faces(surface, initiator)
    if set(left) & set(right):
        return None
    labels, flow = _mincut_labels(surface, cap, left, right)
    if labels.all() or not labels.any():
        return None
    usage = _loop_usage(surface, labels, queue_loops)
    members = [lid for lid, (cut, total) in sorted(usage.items())
               if cut == total and cut > 0]
    boundary = set(_boundary_edges(surface, labels))
    member_edges = set()
    by_id = {lp.id: lp for lp in queue_loops}
    for lid in members:
        for a, b in by_id[lid].chain_edge_pairs():
            member_edges.add(surface.edge_id(a, b))
    extra = sorted(boundary - member_edges)
    chains = _edge_cycles(surface, extra)
    return CutSet(initiator.id, members, labels, "backup",
                  float(flow) / CAP_SCALE, extra_chains=chains)


def _edge_cycles(surface, edge_ids):
    """Group leftover boundary edges into vertex chains/cycles."""
    adj = {}
    for ei in edge_ids:
        u, v = (int(x) for x in surface.edges[ei])
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    unused = {frozenset(surface.edges[ei]) for ei in edge_ids}
    cycles = []
    while unused:
        a, b = sorted(min(unused, key=lambda e: sorted(e)))
        chain = [a, b]
        unused.discard(frozenset((a, b)))
        while True:
            cur = chain[-1]
            nxt = [w for w in sorted(adj[cur])
                   if frozenset((cur, w)) in unused]
            if not nxt:
                break
            chain.append(nxt[0])
            unused.discard(frozenset((cur, nxt[0])))
        cycles.append(chain)
    return cycles


def cut_boundary_vertices(surface, cutset):
    """Vertices on the bi-partition boundary (the V_C of the solid cut)."""
    out = set()
    for ei in _boundary_edges(surface, cutset.labels):
        u, v = surface.edges[ei]
        out.add(int(u))
        out.add(int(v))
    return out


def side_vertex_sets(surface, cutset):
    """(V_C, V_left, V_right) surface vertex sets from the triangle labels."""
    vc = cut_boundary_vertices(surface, cutset)
    vl, vr = set(), set()
    for f in range(surface.n_faces):
        for v in surface.F[f]:
            v = int(v)
            if v in vc:
                continue
            if cutset.labels[f]:
                vl.add(v)
            else:
                vr.add(v)
    # vertices touching both sides but not on a boundary edge cannot occur
    both = vl & vr
    vl -= both
    vr -= both
    vc |= both
    return vc, vl, vr
