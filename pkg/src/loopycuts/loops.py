"""Loops: traced field-coherent cycles and feature-derived rings.

A loop keeps two geometric records: the graph polyline it was traced through
(used for classification and distances) and a snapped chain of surface
vertices (used for cutting, where the loop must be a closed edge path).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .surface import MeshError


@dataclass
class Loop:
    id: int
    source: str
    positions: list            # graph position ids along the loop (cyclic)
    polyline: np.ndarray        # positions in space, one row per entry above
    chain: list                 # closed surface-vertex path (cyclic, oriented)
    footprint: dict             # triangle -> set of line classes used there
    vertex_classes: dict        # chain vertex -> set of line classes there
    normal_faces: list = None   # optional per-sample face ids for surface normals
    feature_id: int = None      # feature this loop runs along, if any

    def chain_edge_pairs(self):
        n = len(self.chain)
        return [(self.chain[i], self.chain[(i + 1) % n]) for i in range(n)]

    def chain_length(self, surface):
        return float(sum(np.linalg.norm(surface.V[a] - surface.V[b])
                         for a, b in self.chain_edge_pairs()))

    def polyline_length(self):
        p = self.polyline
        return float(np.sum(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)))

    def sample_weights(self):
        """Per-sample half-lengths of the incident polyline segments."""
        p = self.polyline
        seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
        return 0.5 * (seg + np.roll(seg, 1))


def position_normal(graph, pos):
    s = graph.surface
    if pos < s.n_vertices:
        return s.vertex_normal(pos)
    f, g = s.edge_faces[graph.pos_edge[pos]]
    n = s.face_normal[f] + s.face_normal[g]
    return n / np.linalg.norm(n)


def _nearest_class(field, f, u, min_dot=0.0):
    """Line class of direction u in face f, or None when the direction is
    too close to the 45-degree class boundary to call (min_dot > 0)."""
    best_j, best = 0, -np.inf
    for j in range(4):
        d = float(u @ field.direction(f, j))
        if d > best:
            best, best_j = d, j
    if best < min_dot:
        return None
    return best_j % 2


def chain_footprint(graph, chain, closed=True, min_dot=0.0):
    """(triangle, class) tags of a surface-edge chain, both sides.

    min_dot > 0 drops class-ambiguous segments (features the field does not
    align with must not block crossings)."""
    s = graph.surface
    fp = {}
    n = len(chain)
    steps = n if closed else n - 1
    for i in range(steps):
        a, b = chain[i], chain[(i + 1) % n]
        ei = s.edge_id(a, b)
        if ei < 0:
            raise MeshError(f"chain step ({a},{b}) is not a surface edge")
        u = s.V[b] - s.V[a]
        u = u / np.linalg.norm(u)
        for f in s.edge_faces[ei]:
            cls = _nearest_class(graph.field, int(f), u, min_dot)
            if cls is not None:
                fp.setdefault(int(f), set()).add(cls)
    return fp


FEATURE_CLASS_MARGIN = float(np.cos(np.deg2rad(35.0)))


def chain_vertex_classes(graph, chain, closed=True, min_dot=0.0):
    """Line class of the chain at each of its (non-singular) vertices.

    Each incident segment is classified inside one of its own edge's faces
    and mapped through the sheet offsets, so classes stay consistent across
    sharp creases where segment directions leave the reference face plane.
    """
    s = graph.surface
    out = {}
    n = len(chain)
    for i in range(n):
        v = chain[i]
        if not graph.pos_alive[v]:
            continue
        classes = set()
        if closed:
            nbs = [chain[(i - 1) % n], chain[(i + 1) % n]]
        else:
            nbs = [chain[j] for j in (i - 1, i + 1) if 0 <= j < n]
        for w in nbs:
            ei = s.edge_id(v, w)
            if ei < 0:
                continue
            d = s.V[w] - s.V[v]
            d = d / np.linalg.norm(d)
            f = int(s.edge_faces[ei][0])
            best_j, best = 0, -np.inf
            for j in range(4):
                dot = float(d @ graph.field.direction(f, j))
                if dot > best:
                    best, best_j = dot, j
            if best >= min_dot:
                classes.add(graph.sheet_in_face(v, f, best_j) % 2)
        if classes:
            out[v] = classes
    return out


# -- snapping ------------------------------------------------------------------

def _surface_path(surface, a, b, max_hops=64):
    """Shortest vertex path a->b along surface edges (small local repairs)."""
    if a == b:
        return [a]
    dist = {a: 0.0}
    pred = {}
    heap = [(0.0, a)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == b:
            break
        if d > dist.get(u, np.inf):
            continue
        for ei in surface.vertex_edges[u]:
            x, y = surface.edges[ei]
            v = int(y) if u == x else int(x)
            nd = d + surface.edge_length(ei)
            if nd < dist.get(v, np.inf):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    if b not in pred:
        raise MeshError(f"no edge path between {a} and {b}")
    path = [b]
    while path[-1] != a:
        path.append(pred[path[-1]])
        if len(path) > max_hops:
            raise MeshError("snap repair path too long")
    return path[::-1]


def snap_to_chain(graph, positions, forced=None):
    """Closed vertex chain for a cyclic position sequence, or None.

    Steiner points snap to the nearer edge endpoint (forced overrides take
    precedence); duplicate runs and backtracks collapse; missing edges are
    repaired by short surface paths. Chains that still repeat a vertex are
    rejected (the loop would pinch).
    """
    s = graph.surface
    raw = []
    for p in positions:
        p = int(p)
        if forced and p in forced:
            raw.append(int(forced[p]))
        elif p < s.n_vertices:
            raw.append(p)
        else:
            ei = graph.pos_edge[p]
            t = graph.pos_param[p]
            u, v = (int(x) for x in s.edges[ei])
            near, far = (u, v) if (t < 0.5 or (t == 0.5 and u < v)) else (v, u)
            if not graph.pos_alive[near] and graph.pos_alive[far]:
                near = far  # keep chains off singular vertices when possible
            raw.append(near)

    def collapse(ch):
        changed = True
        while changed and len(ch) > 2:
            changed = False
            n = len(ch)
            dedup = [ch[i] for i in range(n) if ch[i] != ch[(i + 1) % n]]
            if len(dedup) != n:
                ch = dedup
                changed = True
                continue
            for i in range(n):  # backtrack ...x,y,x... -> ...x...
                if ch[(i - 1) % n] == ch[(i + 1) % n]:
                    skip = {i, (i + 1) % n}
                    ch = [ch[j] for j in range(n) if j not in skip]
                    changed = True
                    break
        return ch

    chain = collapse(raw)
    if len(chain) < 3:
        return None
    # repair steps that are not surface edges
    repaired = []
    n = len(chain)
    for i in range(n):
        a, b = chain[i], chain[(i + 1) % n]
        repaired.append(a)
        if s.edge_id(a, b) < 0:
            mid = _surface_path(s, a, b)[1:-1]
            repaired.extend(mid)
    chain = collapse(repaired)
    if len(chain) < 3 or len(set(chain)) != len(chain):
        return None
    return chain


# -- tracing ---------------------------------------------------------------------

def trace_loop(graph, seed, blocked_pairs=(), view=None, loop_id=-1,
               source="trace", forced_snap=None, own_pairs=()):
    """Shortest field-coherent cycle through the seed node, as a Loop.

    Returns None when no cycle closes, the cycle self-intersects
    tangentially, or its snapped chain degenerates.
    """
    blocked = set(blocked_pairs) - set(own_pairs)
    cost, path = graph.shortest_cycle(seed, blocked, view)
    if path is None:
        return None
    seen = set()
    for node in path:
        key = (node // 4, node % 2)
        if key in seen:
            return None
        seen.add(key)
    positions = [n // 4 for n in path]
    chain = snap_to_chain(graph, positions, forced_snap)
    if chain is None:
        return None
    return Loop(id=loop_id, source=source, positions=positions,
                polyline=graph.pos_xyz[positions].copy(), chain=chain,
                footprint=chain_footprint(graph, chain),
                vertex_classes=chain_vertex_classes(graph, chain))


def chain_positions(graph, chain, closed=True):
    """Graph positions along an edge chain: vertices plus edge Steiner points
    in traversal order."""
    s = graph.surface
    out = []
    n = len(chain)
    steps = n if closed else n - 1
    for i in range(steps):
        a, b = chain[i], chain[(i + 1) % n]
        out.append(int(a))
        ei = s.edge_id(a, b)
        ks = range(graph.steiner_per_edge)
        if (int(s.edges[ei][0]), int(s.edges[ei][1])) == (a, b):
            out.extend(graph.steiner_pos(ei, k) for k in ks)
        else:
            out.extend(graph.steiner_pos(ei, k) for k in reversed(ks))
    if not closed:
        out.append(int(chain[-1]))
    return out


def loop_from_chain(graph, chain, loop_id=-1, source="feature", side="left",
                    feature_id=None):
    """Loop lying exactly on a closed surface-edge chain (feature rings).

    side selects which incident faces supply surface normals: 'left' faces
    contain the halfedge (v_i -> v_i+1).
    """
    s = graph.surface
    chain = list(chain)
    n = len(chain)
    faces = []
    for i in range(n):
        a, b = chain[i], chain[(i + 1) % n]
        faces.append(s.halfedge_face(a, b) if side == "left"
                     else s.halfedge_face(b, a))
    positions = chain_positions(graph, chain)
    per_seg = graph.steiner_per_edge + 1
    faces_dense = [faces[i // per_seg] for i in range(len(positions))]
    return Loop(id=loop_id, source=source, positions=positions,
                polyline=graph.pos_xyz[positions].copy(), chain=chain,
                footprint=chain_footprint(graph, chain),
                vertex_classes=chain_vertex_classes(graph, chain),
                normal_faces=faces_dense, feature_id=feature_id)


# -- combinatorial intersections ----------------------------------------------

def intersection_components(surface, l1: Loop, l2: Loop):
    """Connected clusters of intersection evidence, labeled T or O.

    Evidence: triangles both loops run in (same class there = tangential) and
    chain vertices both loops pass (same direction class = tangential). One
    connected cluster is one geometric meeting point.
    """
    tris = set(l1.footprint) & set(l2.footprint)
    verts = set(l1.vertex_classes) & set(l2.vertex_classes)
    if not tris and not verts:
        return []
    items = [("f", f) for f in sorted(tris)] + [("v", v) for v in sorted(verts)]
    index = {it: i for i, it in enumerate(items)}
    parent = list(range(len(items)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for f in tris:
        for ei in surface.face_edges[f]:
            g = surface.other_face(ei, f)
            if ("f", g) in index:
                union(index[("f", f)], index[("f", g)])
        for v in surface.F[f]:
            if ("v", int(v)) in index:
                union(index[("f", f)], index[("v", int(v))])
    vset = set(verts)
    for v in verts:
        for ei in surface.vertex_edges[v]:
            a, b = surface.edges[ei]
            w = int(b) if v == a else int(a)
            if w in vset:
                union(index[("v", v)], index[("v", w)])

    groups = {}
    for it, i in index.items():
        groups.setdefault(find(i), []).append(it)
    labels = []
    for members in groups.values():
        tang = False
        for kind, x in members:
            if kind == "f" and (l1.footprint[x] & l2.footprint[x]):
                tang = True
            if kind == "v" and (l1.vertex_classes[x] & l2.vertex_classes[x]):
                tang = True
        labels.append("T" if tang else "O")
    return labels


def classify_intersection(surface, l1, l2):
    labels = intersection_components(surface, l1, l2)
    if "T" in labels:
        return "tangential"
    if "O" in labels:
        return "orthogonal"
    return "none"


def count_crossings(surface, l1, l2):
    """Number of orthogonal crossing clusters (tangential contact counts 0
    but flags the pair invalid elsewhere)."""
    return sum(1 for lab in intersection_components(surface, l1, l2)
               if lab == "O")


def blocked_pairs_of(loop: Loop):
    return {(tri, cls) for tri, classes in loop.footprint.items()
            for cls in classes}


def feature_blocked_pairs(graph, network):
    """Tangential-blocking tags of every feature curve, keyed by curve id."""
    out = {}
    for c in network.curves:
        fp = chain_footprint(graph, list(c.vertices), closed=c.closed,
                             min_dot=FEATURE_CLASS_MARGIN)
        out[c.id] = {(t, cl) for t, cs in fp.items() for cl in cs}
    return out
