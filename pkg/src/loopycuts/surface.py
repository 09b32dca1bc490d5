"""Triangle surface mesh, cross-field storage and the feature-curve network."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree


class MeshError(ValueError):
    """Raised for invalid or inconsistent mesh input."""


def _unit(v, eps=1e-14):
    n = np.linalg.norm(v)
    if n < eps:
        raise MeshError("degenerate vector")
    return v / n


class SurfaceMesh:
    """Closed, consistently oriented 2-manifold triangle mesh.

    Adjacency is precomputed once; instances are treated as immutable after
    construction (pipeline stages only read them).
    """

    def __init__(self, vertices, triangles):
        self.V = np.ascontiguousarray(vertices, dtype=np.float64)
        self.F = np.ascontiguousarray(triangles, dtype=np.int64)
        if self.V.ndim != 2 or self.V.shape[1] != 3:
            raise MeshError("vertices must be (n,3)")
        if self.F.ndim != 2 or self.F.shape[1] != 3:
            raise MeshError("triangles must be (m,3)")
        if self.F.size and (self.F.min() < 0 or self.F.max() >= len(self.V)):
            raise MeshError("triangle index out of range")
        self._build()

    def _build(self):
        V, F = self.V, self.F
        e1 = V[F[:, 1]] - V[F[:, 0]]
        e2 = V[F[:, 2]] - V[F[:, 0]]
        cr = np.cross(e1, e2)
        area2 = np.linalg.norm(cr, axis=1)
        if np.any(area2 < 1e-14):
            bad = np.nonzero(area2 < 1e-14)[0]
            raise MeshError(f"degenerate (zero-area) triangles: {bad[:8].tolist()}")
        self.face_normal = cr / area2[:, None]
        self.face_area = 0.5 * area2
        self.face_centroid = (V[F[:, 0]] + V[F[:, 1]] + V[F[:, 2]]) / 3.0

        lo, hi = V.min(axis=0), V.max(axis=0)
        self.bbox_diag = float(np.linalg.norm(hi - lo))

        # Halfedge bookkeeping: every undirected edge must carry exactly one
        # halfedge per orientation, otherwise the surface is open/non-manifold.
        half = {}
        for f in range(len(F)):
            a, b, c = F[f]
            for u, v in ((a, b), (b, c), (c, a)):
                if (u, v) in half:
                    raise MeshError(f"non-manifold or inconsistently oriented edge ({u},{v})")
                half[(u, v)] = f
        edge_index = {}
        edges = []
        edge_faces = []
        for (u, v), f in half.items():
            if u > v:
                continue
            if (v, u) not in half:
                raise MeshError("open surface")
            edge_index[(u, v)] = len(edges)
            edges.append((u, v))
            edge_faces.append((f, half[(v, u)]))
        order = sorted(range(len(edges)), key=lambda i: edges[i])
        self.edges = np.array([edges[i] for i in order], dtype=np.int64)
        self.edge_faces = np.array([edge_faces[i] for i in order], dtype=np.int64)
        self.edge_index = {tuple(e): i for i, e in enumerate(self.edges.tolist())}

        self.face_edges = np.empty((len(F), 3), dtype=np.int64)
        for f in range(len(F)):
            a, b, c = F[f]
            for k, (u, v) in enumerate(((a, b), (b, c), (c, a))):
                self.face_edges[f, k] = self.edge_index[(min(u, v), max(u, v))]

        self.vertex_faces = [[] for _ in range(len(V))]
        for f in range(len(F)):
            for v in F[f]:
                self.vertex_faces[v].append(f)
        self.vertex_edges = [[] for _ in range(len(V))]
        for ei, (u, v) in enumerate(self.edges.tolist()):
            self.vertex_edges[u].append(ei)
            self.vertex_edges[v].append(ei)

        self._face_tree = None

    @property
    def n_vertices(self):
        return len(self.V)

    @property
    def n_faces(self):
        return len(self.F)

    def edge_id(self, u, v):
        return self.edge_index.get((min(u, v), max(u, v)), -1)

    def edge_length(self, ei):
        u, v = self.edges[ei]
        return float(np.linalg.norm(self.V[u] - self.V[v]))

    def other_face(self, ei, f):
        a, b = self.edge_faces[ei]
        return int(b) if f == a else int(a)

    def halfedge_face(self, u, v):
        """Face whose cyclic vertex order contains u followed by v."""
        f1, f2 = self.edge_faces[self.edge_id(u, v)]
        for f in (f1, f2):
            a, b, c = self.F[f]
            if (a, b) == (u, v) or (b, c) == (u, v) or (c, a) == (u, v):
                return int(f)
        raise MeshError(f"halfedge ({u},{v}) not found")

    def face_fan(self, v):
        """Faces incident to v, ordered by walking around the vertex."""
        faces = self.vertex_faces[v]
        if not faces:
            return []
        start = min(faces)
        fan = [start]
        cur = start
        while True:
            a, b, c = self.F[cur]
            # halfedge leaving v inside cur: (v, next vertex)
            nxt = {a: b, b: c, c: a}[v]
            ei = self.edge_id(v, nxt)
            cur = self.other_face(ei, cur)
            if cur == start:
                break
            fan.append(cur)
            if len(fan) > len(faces):
                raise MeshError(f"vertex {v} has a broken face fan")
        return fan

    def vertex_normal(self, v):
        faces = self.vertex_faces[v]
        n = self.face_normal[faces].sum(axis=0)
        return _unit(n)

    def project_point(self, p, k=8):
        """Closest point on the surface: (point, face id, distance)."""
        if self._face_tree is None:
            self._face_tree = cKDTree(self.face_centroid)
        k = min(k, self.n_faces)
        _, cand = self._face_tree.query(p, k=k)
        cand = np.atleast_1d(cand)
        best, best_f, best_d = None, -1, np.inf
        for f in cand:
            q = closest_point_on_triangle(p, *self.V[self.F[f]])
            d = float(np.linalg.norm(q - p))
            if d < best_d:
                best, best_f, best_d = q, int(f), d
        return best, best_f, best_d


def closest_point_on_triangle(p, a, b, c):
    """Ericson's barycentric region test."""
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return a
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0 <= d1 and d3 <= 0:
        t = d1 / (d1 - d3)
        return a + t * ab
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0 <= d2 and d6 <= 0:
        t = d2 / (d2 - d6)
        return a + t * ac
    va = d3 * d6 - d5 * d4
    if va <= 0 and d4 - d3 >= 0 and d5 - d6 >= 0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + t * (c - b)
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return a + ab * v + ac * w


class CrossField:
    """Per-triangle representative direction of a 4-RoSy field.

    The representative is projected into its triangle plane; the other three
    field directions are the +-90/180 degree rotations about the face normal.
    Singular vertices are derived from the per-edge sheet matchings.
    """

    def __init__(self, surface: SurfaceMesh, directions):
        self.surface = surface
        d = np.ascontiguousarray(directions, dtype=np.float64)
        if d.shape != (surface.n_faces, 3):
            raise MeshError("field must give one direction per triangle")
        n = surface.face_normal
        d = d - (np.sum(d * n, axis=1))[:, None] * n
        norms = np.linalg.norm(d, axis=1)
        if np.any(norms < 1e-12):
            raise MeshError("field direction parallel to face normal")
        self.rep = d / norms[:, None]
        self.perp = np.cross(n, self.rep)
        self._matchings = None
        self._singular = None

    def direction(self, f, j):
        """j-th field direction (j in 0..3) of triangle f."""
        if j == 0:
            return self.rep[f]
        if j == 1:
            return self.perp[f]
        if j == 2:
            return -self.rep[f]
        return -self.perp[f]

    def edge_matching(self, ei):
        """m such that direction j of edge_faces[ei][0] continues as
        direction (j+m)%4 of edge_faces[ei][1] across the edge."""
        return self.matchings[ei]

    @property
    def matchings(self):
        if self._matchings is None:
            self._compute_matchings()
        return self._matchings

    @property
    def singular_vertices(self):
        if self._singular is None:
            self._compute_matchings()
        return self._singular

    def _compute_matchings(self):
        s = self.surface
        m = np.zeros(len(s.edges), dtype=np.int64)
        for ei, (u, v) in enumerate(s.edges.tolist()):
            f, g = s.edge_faces[ei]
            t = _unit(s.V[v] - s.V[u])
            tf = np.cross(s.face_normal[f], t)
            tg = np.cross(s.face_normal[g], t)
            af = np.arctan2(self.rep[f] @ tf, self.rep[f] @ t)
            ag = np.arctan2(self.rep[g] @ tg, self.rep[g] @ t)
            m[ei] = int(np.rint((af - ag) / (np.pi / 2))) % 4
        self._matchings = m

        sing = set()
        for v in range(s.n_vertices):
            fan = s.face_fan(v)
            total = 0
            for i, f in enumerate(fan):
                g = fan[(i + 1) % len(fan)]
                shared = set(s.face_edges[f]) & set(s.face_edges[g])
                ei = min(shared)
                ef, eg = s.edge_faces[ei]
                total += m[ei] if (ef, eg) == (f, g) else -m[ei]
            if total % 4 != 0:
                sing.add(v)
        self._singular = sing


FEATURE_KINDS = ("convex", "concave", "flat")


@dataclass
class FeatureCurve:
    """A chain of surface edges with a dihedral classification."""

    id: int
    vertices: list = field(default_factory=list)  # v0..vk; closed: vk connects to v0
    kind: str = "flat"
    closed: bool = False

    @property
    def edge_pairs(self):
        vs = self.vertices
        pairs = [(vs[i], vs[i + 1]) for i in range(len(vs) - 1)]
        if self.closed:
            pairs.append((vs[-1], vs[0]))
        return pairs

    @property
    def endpoints(self):
        return [] if self.closed else [self.vertices[0], self.vertices[-1]]

    def length(self, surface):
        return sum(np.linalg.norm(surface.V[a] - surface.V[b]) for a, b in self.edge_pairs)


class FeatureNetwork:
    def __init__(self, surface: SurfaceMesh, curves):
        self.surface = surface
        self.curves = list(curves)
        self.edge_curve = {}
        for c in self.curves:
            for a, b in c.edge_pairs:
                key = (min(a, b), max(a, b))
                if key in self.edge_curve:
                    raise MeshError(f"feature curves share edge {key}")
                if surface.edge_id(*key) < 0:
                    raise MeshError(f"unresolved feature edge {key}")
                self.edge_curve[key] = c.id
        deg = {}
        for c in self.curves:
            for v in c.endpoints:
                deg[v] = deg.get(v, 0) + 1
        self.vertex_degree = deg
        self.network_vertices = set(deg)
        self.irregular_vertices = {v for v, d in deg.items() if d != 3}

    @property
    def feature_edges(self):
        return set(self.edge_curve)

    def by_kind(self, kind):
        return [c for c in self.curves if c.kind == kind]

    def curve(self, cid):
        for c in self.curves:
            if c.id == cid:
                return c
        raise KeyError(cid)


def interior_dihedral(surface, u, v):
    """Interior dihedral angle at edge (u,v): < pi convex, > pi concave."""
    ei = surface.edge_id(u, v)
    if ei < 0:
        raise MeshError(f"unresolved feature edge ({u},{v})")
    f, g = surface.edge_faces[ei]
    n1, n2 = surface.face_normal[f], surface.face_normal[g]
    beta = float(np.arccos(np.clip(n1 @ n2, -1.0, 1.0)))
    convex = (n1 @ (surface.face_centroid[g] - surface.face_centroid[f])) <= 0
    return np.pi - beta if convex else np.pi + beta


def detect_sharp_chains(surface, angle_threshold):
    """Edges whose interior dihedral deviates from pi by more than the
    threshold, returned as raw vertex chains tagged 'auto'."""
    sharp = []
    for u, v in surface.edges.tolist():
        if abs(interior_dihedral(surface, u, v) - np.pi) > angle_threshold:
            sharp.append((u, v))
    return [("auto", list(ch)) for ch in _chain_edges(sharp)]


def _chain_edges(edge_list):
    """Greedy chaining of undirected edges into maximal vertex paths/cycles."""
    adj = {}
    for u, v in edge_list:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    unused = {(min(u, v), max(u, v)) for u, v in edge_list}
    chains = []
    # open chains first (start at odd-degree or >2-degree vertices)
    starts = sorted(v for v, nb in adj.items() if len(nb) != 2)
    for s in starts:
        for t in sorted(adj[s]):
            if (min(s, t), max(s, t)) not in unused:
                continue
            chain = [s, t]
            unused.discard((min(s, t), max(s, t)))
            while len(adj[chain[-1]]) == 2:
                a = chain[-1]
                nxt = [w for w in adj[a] if (min(a, w), max(a, w)) in unused]
                if not nxt:
                    break
                chain.append(nxt[0])
                unused.discard((min(a, nxt[0]), max(a, nxt[0])))
            chains.append(chain)
    # remaining edges form closed cycles of degree-2 vertices
    while unused:
        s, t = min(unused)
        chain = [s, t]
        unused.discard((s, t))
        while True:
            a = chain[-1]
            nxt = [w for w in adj[a] if (min(a, w), max(a, w)) in unused]
            if not nxt:
                break
            chain.append(nxt[0])
            unused.discard((min(a, nxt[0]), max(a, nxt[0])))
        chains.append(chain)
    return chains


def classify_features(surface, raw_chains, angle_threshold=np.deg2rad(30.0),
                      corner_angle=np.deg2rad(45.0)):
    """Split raw chains at network vertices and classify each curve.

    raw_chains: iterable of (kind, [v0..vk]) where kind is one of
    convex/concave/flat/auto. Explicit kinds win; 'auto' classifies from the
    average interior dihedral with the convex/concave threshold at
    pi -+ angle_threshold.
    """
    edge_kind = {}
    for kind, vs in raw_chains:
        if kind not in FEATURE_KINDS + ("auto",):
            raise MeshError(f"unknown feature kind {kind!r}")
        closed_chain = len(vs) > 2 and vs[0] == vs[-1]
        ids = vs[:-1] if closed_chain else vs
        pairs = [(ids[i], ids[i + 1]) for i in range(len(ids) - 1)]
        if closed_chain:
            pairs.append((ids[-1], ids[0]))
        for a, b in pairs:
            if surface.edge_id(a, b) < 0:
                raise MeshError(f"unresolved feature edge ({a},{b})")
            edge_kind[(min(a, b), max(a, b))] = kind

    # network vertices: degree != 2 in the feature edge graph, plus sharp
    # direction changes along degree-2 paths
    deg = {}
    for a, b in edge_kind:
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    breakers = {v for v, d in deg.items() if d != 2}
    vadj = {}
    for a, b in edge_kind:
        vadj.setdefault(a, []).append(b)
        vadj.setdefault(b, []).append(a)
    for v, nb in vadj.items():
        if len(nb) == 2 and v not in breakers:
            d1 = _unit(surface.V[nb[0]] - surface.V[v])
            d2 = _unit(surface.V[nb[1]] - surface.V[v])
            if np.arccos(np.clip(-(d1 @ d2), -1, 1)) > corner_angle:
                breakers.add(v)

    curves = []
    unused = set(edge_kind)
    def take(a, b):
        unused.discard((min(a, b), max(a, b)))

    def grow(chain):
        while chain[-1] not in breakers:
            a = chain[-1]
            nxt = [w for w in sorted(vadj[a]) if (min(a, w), max(a, w)) in unused]
            if not nxt:
                break
            chain.append(nxt[0])
            take(a, nxt[0])
            if chain[-1] == chain[0]:
                break
        return chain

    cid = 0
    for s in sorted(breakers):
        for t in sorted(vadj.get(s, [])):
            if (min(s, t), max(s, t)) not in unused:
                continue
            take(s, t)
            chain = grow([s, t])
            curves.append(_make_curve(surface, cid, chain, edge_kind, angle_threshold))
            cid += 1
    while unused:  # closed loops with no breaker
        s, t = min(unused)
        take(s, t)
        chain = grow([s, t])
        if chain[-1] == chain[0]:
            chain = chain[:-1]
        c = _make_curve(surface, cid, chain, edge_kind, angle_threshold)
        c.closed = True
        curves.append(c)
        cid += 1
    return FeatureNetwork(surface, curves)


def _make_curve(surface, cid, chain, edge_kind, angle_threshold):
    closed = chain[0] == chain[-1] and len(chain) > 2
    ids = chain[:-1] if closed else chain
    curve = FeatureCurve(cid, ids, closed=closed)
    kinds = set()
    total = 0.0
    wsum = 0.0
    for a, b in curve.edge_pairs:
        k = edge_kind[(min(a, b), max(a, b))]
        if k != "auto":
            kinds.add(k)
        w = np.linalg.norm(surface.V[a] - surface.V[b])
        total += w * interior_dihedral(surface, a, b)
        wsum += w
    if kinds:
        if len(kinds) > 1:
            raise MeshError(f"conflicting kinds on one curve: {sorted(kinds)}")
        curve.kind = kinds.pop()
    else:
        avg = total / wsum
        if avg < np.pi - angle_threshold:
            curve.kind = "convex"
        elif avg > np.pi + angle_threshold:
            curve.kind = "concave"
        else:
            curve.kind = "flat"
    return curve
