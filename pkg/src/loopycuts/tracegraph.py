"""Stratified point-arrow graph over the surface and field-coherent tracing.

Every non-singular position (surface vertex or Steiner point on an edge)
carries four point-arrows, one per field direction. Directed arcs connect
point-arrows of the same transported sheet across a shared triangle whenever
the arc direction stays within 45 degrees of the sheet direction; the arc
weight is the Euclidean length inflated by the drift penalty.

Crossing bookkeeping is combinatorial: each arc is tagged with the triangles
it runs in and the line-field class (sheet mod 2) it follows there. Two paths
meeting in a triangle with the same class are tangential, with different
classes orthogonal.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .surface import MeshError

QUARTER = np.pi / 4


def drift_weight(length, angle, alpha):
    """Anisotropic arc length: |w| * (1 + alpha * angle/(pi/4))."""
    return length * (1.0 + alpha * (angle / QUARTER))


class TraceGraph:
    def __init__(self, surface, field, steiner_per_edge=3, alpha=0.5):
        if steiner_per_edge < 1:
            raise ValueError("need at least one Steiner point per edge")
        self.surface = surface
        self.field = field
        self.steiner_per_edge = int(steiner_per_edge)
        self.alpha = float(alpha)
        self._build_positions()
        self._build_arcs()
        self._tag_index = None
        self._rev = None

    # -- positions and sheets ----------------------------------------------

    def _build_positions(self):
        s = self.surface
        ns = self.steiner_per_edge
        self.n_vertex_pos = s.n_vertices
        npos = s.n_vertices + len(s.edges) * ns
        self.pos_xyz = np.zeros((npos, 3))
        self.pos_xyz[: s.n_vertices] = s.V
        self.pos_edge = np.full(npos, -1, dtype=np.int64)   # Steiner: host edge
        self.pos_param = np.zeros(npos)
        for ei, (u, v) in enumerate(s.edges.tolist()):
            for k in range(ns):
                t = (k + 1) / (ns + 1)
                p = s.n_vertices + ei * ns + k
                self.pos_xyz[p] = (1 - t) * s.V[u] + t * s.V[v]
                self.pos_edge[p] = ei
                self.pos_param[p] = t

        singular = self.field.singular_vertices
        self.pos_alive = np.ones(npos, dtype=bool)
        for v in singular:
            self.pos_alive[v] = False

        # sheet offset per (position, incident face): sheet k corresponds to
        # field direction (k + off) % 4 in that face
        self.offsets = [None] * npos
        m = self.field.matchings
        for v in range(s.n_vertices):
            if not self.pos_alive[v]:
                continue
            fan = s.face_fan(v)
            off = {fan[0]: 0}
            for i in range(len(fan) - 1):
                f, g = fan[i], fan[i + 1]
                ei = min(set(s.face_edges[f]) & set(s.face_edges[g]))
                ef, eg = s.edge_faces[ei]
                step = m[ei] if (ef, eg) == (f, g) else (-m[ei]) % 4
                off[g] = (off[f] + step) % 4
            self.offsets[v] = off
        for p in range(s.n_vertices, npos):
            ei = self.pos_edge[p]
            f, g = (int(x) for x in s.edge_faces[ei])
            if f < g:
                self.offsets[p] = {f: 0, g: int(m[ei])}
            else:
                self.offsets[p] = {g: 0, f: (-int(m[ei])) % 4}

    def steiner_pos(self, ei, k):
        return self.surface.n_vertices + ei * self.steiner_per_edge + k

    def edge_positions(self, ei):
        """Positions along edge ei in parameter order (vertices included)."""
        u, v = self.surface.edges[ei]
        return [int(u)] + [self.steiner_pos(ei, k)
                           for k in range(self.steiner_per_edge)] + [int(v)]

    def node(self, pos, sheet):
        return int(pos) * 4 + int(sheet)

    def node_pos(self, node):
        return node // 4

    def node_sheet(self, node):
        return node % 4

    def node_direction(self, node):
        """Sheet direction expressed in the position's reference face."""
        pos, k = node // 4, node % 4
        off = self.offsets[pos]
        f = min(off)
        return self.field.direction(f, (k + off[f]) % 4)

    def sheet_in_face(self, pos, face, j):
        """Sheet index at pos matching field direction j of an incident face."""
        return (j - self.offsets[pos][face]) % 4

    # -- arcs -----------------------------------------------------------------

    def _face_positions(self, f):
        s = self.surface
        out = []
        for v in s.F[f]:
            out.append((int(v), -1))
        for ei in s.face_edges[f]:
            for k in range(self.steiner_per_edge):
                out.append((self.steiner_pos(ei, k), int(ei)))
        return out

    def _build_arcs(self):
        s = self.surface
        fld = self.field
        alpha = self.alpha
        limit = QUARTER * (1.0 - 1e-9)
        ns = self.steiner_per_edge

        srcs, dsts, wgts = [], [], []
        tri1s, cls1s, tri2s, cls2s = [], [], [], []

        # face pass: all cross-triangle pairs, vectorized per face
        m = 3 + 3 * ns
        sheet_of = np.empty((m, 4), dtype=np.int64)
        for f in range(s.n_faces):
            plist = self._face_positions(f)
            pos = np.array([p for p, _ in plist], dtype=np.int64)
            host = np.array([e for _, e in plist], dtype=np.int64)
            alive = self.pos_alive[pos]
            P = self.pos_xyz[pos]
            D = np.stack([fld.direction(f, j) for j in range(4)])  # (4,3)
            for k, p in enumerate(pos):
                off = self.offsets[p].get(f, 0) if self.pos_alive[p] else 0
                sheet_of[k] = (np.arange(4) - off) % 4

            W = P[None, :, :] - P[:, None, :]
            ln = np.linalg.norm(W, axis=2)
            ok = np.ones((m, m), dtype=bool)
            np.fill_diagonal(ok, False)
            ok &= alive[:, None] & alive[None, :]
            ok &= ln > 1e-14
            same_edge = (host[:, None] == host[None, :]) & (host[:, None] >= 0)
            ok &= ~same_edge
            # vertex endpoints of a Steiner host edge, and vertex-vertex pairs
            # (always an edge of f): all handled by the edge pass
            for k in range(3):
                v = pos[k]
                on_host = np.array(
                    [h >= 0 and v in s.edges[h] for h in host.tolist()])
                ok[k, :] &= ~on_host
                ok[:, k] &= ~on_host
            ok[:3, :3] = False

            with np.errstate(invalid="ignore", divide="ignore"):
                U = W / ln[:, :, None]
            dots = np.einsum("abk,jk->abj", U, D)
            j_best = np.argmax(dots, axis=2)
            ang = np.arccos(np.clip(np.take_along_axis(
                dots, j_best[:, :, None], axis=2)[:, :, 0], -1.0, 1.0))
            ok &= ang < limit

            ii, jj = np.nonzero(ok)
            if len(ii) == 0:
                continue
            jb = j_best[ii, jj]
            srcs.append(pos[ii] * 4 + sheet_of[ii, jb])
            dsts.append(pos[jj] * 4 + sheet_of[jj, jb])
            wgts.append(drift_weight(ln[ii, jj], ang[ii, jj], alpha))
            tri1s.append(np.full(len(ii), f, dtype=np.int64))
            cls1s.append(jb % 2)
            tri2s.append(np.full(len(ii), -1, dtype=np.int64))
            cls2s.append(np.full(len(ii), -1, dtype=np.int64))

        # edge pass: consecutive positions along each edge, tagged both sides
        def nearest_dir(f, u):
            best_j, best_a = 0, np.inf
            for j in range(4):
                a = np.arccos(np.clip(u @ fld.direction(f, j), -1.0, 1.0))
                if a < best_a:
                    best_j, best_a = j, a
            return best_j, best_a

        e_src, e_dst, e_w = [], [], []
        e_t1, e_c1, e_t2, e_c2 = [], [], [], []
        for ei in range(len(s.edges)):
            f, g = (int(x) for x in s.edge_faces[ei])
            chain = self.edge_positions(ei)
            for a, b in zip(chain[:-1], chain[1:]):
                if not (self.pos_alive[a] and self.pos_alive[b]):
                    continue
                for p, q in ((a, b), (b, a)):
                    w = self.pos_xyz[q] - self.pos_xyz[p]
                    ln = np.linalg.norm(w)
                    u = w / ln
                    jf, af = nearest_dir(f, u)
                    jg, ag = nearest_dir(g, u)
                    if min(af, ag) >= limit:
                        continue
                    hf, hj, ha = (f, jf, af) if af <= ag else (g, jg, ag)
                    e_src.append(self.node(p, self.sheet_in_face(p, hf, hj)))
                    e_dst.append(self.node(q, self.sheet_in_face(q, hf, hj)))
                    e_w.append(drift_weight(ln, ha, alpha))
                    e_t1.append(f); e_c1.append(jf % 2)
                    e_t2.append(g); e_c2.append(jg % 2)
        if e_src:
            srcs.append(np.array(e_src, dtype=np.int64))
            dsts.append(np.array(e_dst, dtype=np.int64))
            wgts.append(np.array(e_w))
            tri1s.append(np.array(e_t1, dtype=np.int64))
            cls1s.append(np.array(e_c1, dtype=np.int64))
            tri2s.append(np.array(e_t2, dtype=np.int64))
            cls2s.append(np.array(e_c2, dtype=np.int64))

        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        wgt = np.concatenate(wgts)
        tri1 = np.concatenate(tri1s)
        cls1 = np.concatenate(cls1s)
        tri2 = np.concatenate(tri2s)
        cls2 = np.concatenate(cls2s)

        n_nodes = 4 * len(self.pos_xyz)
        order = np.lexsort((dst, src))
        self.arc_src = src[order]
        self.arc_dst = dst[order]
        self.arc_w = wgt[order]
        self.arc_tri1 = tri1[order]
        self.arc_cls1 = cls1[order]
        self.arc_tri2 = tri2[order]
        self.arc_cls2 = cls2[order]
        self.indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.add.at(self.indptr, self.arc_src + 1, 1)
        self.indptr = np.cumsum(self.indptr)
        self.n_nodes = n_nodes
        self.base_disabled = np.zeros(len(self.arc_src), dtype=np.uint8)

    @property
    def rev(self):
        if self._rev is None:
            order = np.lexsort((self.arc_src, self.arc_dst))
            rev_indices = self.arc_src[order]
            rev_arcs = np.asarray(order, dtype=np.int64)
            rev_indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
            np.add.at(rev_indptr, self.arc_dst[order] + 1, 1)
            self._rev = (np.cumsum(rev_indptr), rev_indices, rev_arcs)
        return self._rev

    @property
    def tag_index(self):
        """(triangle, class) -> arc ids carrying that tag."""
        if self._tag_index is None:
            keys = np.concatenate([self.arc_tri1 * 2 + self.arc_cls1,
                                   self.arc_tri2 * 2 + self.arc_cls2])
            arcs = np.concatenate([np.arange(len(self.arc_src)),
                                   np.arange(len(self.arc_src))])
            valid = keys >= 0
            keys, arcs = keys[valid], arcs[valid]
            order = np.argsort(keys, kind="stable")
            keys, arcs = keys[order], arcs[order]
            bounds = np.nonzero(np.diff(keys))[0] + 1
            self._tag_index = {
                (int(k // 2), int(k % 2)): chunk
                for k, chunk in zip(keys[np.r_[0, bounds]] if len(keys) else [],
                                    np.split(arcs, bounds))}
        return self._tag_index

    def arc_between(self, na, nb):
        lo, hi = self.indptr[na], self.indptr[na + 1]
        k = np.searchsorted(self.arc_dst[lo:hi], nb)
        if k < hi - lo and self.arc_dst[lo + k] == nb:
            return int(lo + k)
        return -1

    def arc_tags(self, a):
        tags = [(int(self.arc_tri1[a]), int(self.arc_cls1[a]))]
        if self.arc_tri2[a] >= 0:
            tags.append((int(self.arc_tri2[a]), int(self.arc_cls2[a])))
        return tags

    # -- searches ---------------------------------------------------------------

    def disabled_for(self, blocked_pairs, view=None):
        base = view.disabled if view is not None else self.base_disabled
        if not blocked_pairs:
            return base
        dis = base.copy()
        for pair in blocked_pairs:
            arcs = self.tag_index.get(pair)
            if arcs is not None:
                dis[arcs] = 1
        return dis

    def weights_for(self, view=None):
        return view.weights if view is not None else self.arc_w

    def shortest_cycle(self, seed, blocked_pairs=(), view=None):
        dis = self.disabled_for(blocked_pairs, view)
        rev_indptr, rev_indices, rev_arcs = self.rev
        return _kernels.shortest_cycle(
            self.indptr, self.arc_dst, self.weights_for(view), dis,
            rev_indptr, rev_indices, rev_arcs, int(seed))

    def propagate(self, source_nodes, blocked_pairs=(), view=None):
        dis = self.disabled_for(blocked_pairs, view)
        sources = np.asarray(sorted(set(int(x) for x in source_nodes)),
                             dtype=np.int64)
        if len(sources) == 0:
            return np.full(self.n_nodes, np.inf), np.full(self.n_nodes, -1,
                                                          dtype=np.int64)
        return _kernels.dijkstra(self.indptr, self.arc_dst,
                                 self.weights_for(view), dis, sources)


class GraphView:
    """Weight/disabled overlay for corridor-modified tracing."""

    def __init__(self, graph):
        self.graph = graph
        self.weights = graph.arc_w.copy()
        self.disabled = graph.base_disabled.copy()


def feature_strips(graph, curve):
    """Left/right one-ring triangle strips along a feature curve."""
    s = graph.surface
    pairs = curve.edge_pairs
    chain_verts = set(curve.vertices)
    ring = set()
    for v in curve.vertices:
        ring.update(s.vertex_faces[v])
    seeds = {"left": [], "right": []}
    for u, v in pairs:
        seeds["left"].append(s.halfedge_face(u, v))
        seeds["right"].append(s.halfedge_face(v, u))
    feature_edges = {s.edge_id(u, v) for u, v in pairs}

    strips = {}
    for side in ("left", "right"):
        seen = set(seeds[side])
        stack = list(seeds[side])
        while stack:
            f = stack.pop()
            for ei in s.face_edges[f]:
                if int(ei) in feature_edges:
                    continue
                g = s.other_face(ei, f)
                if g in ring and g not in seen:
                    seen.add(g)
                    stack.append(g)
        strips[side] = seen
    return strips


def carve_corridors(graph, curve, kappa=0.1, view=None):
    """Discount corridor-interior arcs and seal the corridor sides.

    Returns (view, seeds) where seeds maps side -> a corridor node to trace
    from. Any path entering a corridor can leave it only at the feature ends.
    """
    if curve.kind == "convex":
        raise MeshError("corridors are for concave/flat features")
    s = graph.surface
    view = view if view is not None else GraphView(graph)
    strips = feature_strips(graph, curve)
    chain_verts = set(curve.vertices)

    # local feature direction at each chain vertex
    fdir = {}
    vs = curve.vertices
    for i, v in enumerate(vs):
        nb = []
        if i > 0 or curve.closed:
            nb.append(vs[i - 1])
        if i < len(vs) - 1 or curve.closed:
            nb.append(vs[(i + 1) % len(vs)])
        d = np.zeros(3)
        for w in nb:
            seg = s.V[w] - s.V[v]
            if nb.index(w) == 0 and len(nb) > 1:
                seg = -seg
            d += seg / np.linalg.norm(seg)
        n = np.linalg.norm(d)
        fdir[v] = d / n if n > 1e-12 else None

    mid = np.mean(s.V[curve.vertices], axis=0)
    sides = {}
    for side, strip in strips.items():
        # crossing edges: strip-interior edges with exactly one chain endpoint
        crossing = set()
        for f in strip:
            for ei in s.face_edges[f]:
                u, v = s.edges[ei]
                if (u in chain_verts) != (v in chain_verts):
                    g = s.other_face(ei, f)
                    if g in strip:
                        crossing.add(int(ei))
        corridor_nodes = set()
        forced = {}
        seed_best, seed_score = None, np.inf
        for ei in sorted(crossing):
            u, v = s.edges[ei]
            anchor = int(u) if u in chain_verts else int(v)
            d = fdir.get(anchor)
            if d is None:
                continue
            for k in range(graph.steiner_per_edge):
                p = graph.steiner_pos(ei, k)
                if not graph.pos_alive[p]:
                    continue
                forced[p] = anchor
                for sheet in range(4):
                    nd = graph.node_direction(graph.node(p, sheet))
                    dot = float(np.dot(nd, d))
                    if abs(dot) > np.cos(QUARTER):
                        corridor_nodes.add(graph.node(p, sheet))
                        if dot > np.cos(QUARTER) and k == 0:
                            score = float(np.linalg.norm(s.V[anchor] - mid))
                            if score < seed_score:
                                seed_best, seed_score = graph.node(p, sheet), score
        if corridor_nodes:
            strip_arr = np.fromiter(strip, dtype=np.int64)
            in_strip = (np.isin(graph.arc_tri1, strip_arr)
                        | np.isin(graph.arc_tri2, strip_arr))
            idx = np.nonzero(in_strip)[0]
            cn = np.fromiter(corridor_nodes, dtype=np.int64)
            sin = np.isin(graph.arc_src[idx], cn)
            din = np.isin(graph.arc_dst[idx], cn)
            both = idx[sin & din]
            view.weights[both] = graph.arc_w[both] * kappa
            view.disabled[idx[sin ^ din]] = 1
        sides[side] = {"seed": seed_best, "forced": forced,
                       "nodes": corridor_nodes}
    return view, sides
