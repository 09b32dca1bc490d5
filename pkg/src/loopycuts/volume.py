"""Tetrahedral mesh with incremental cut embedding and block labeling.

Cuts arrive as scalar level sets: every tet edge strictly straddling the iso
value is split at the interpolated point, after which the level set is a set
of tet facets whose vertices all carry the iso value. Those facets are tagged
and block labels are recovered by region growing that never crosses a tagged
facet.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .surface import MeshError


def _tri_key(a, b, c):
    if a > b:
        a, b = b, a
    if b > c:
        b, c = c, b
        if a > b:
            a, b = b, a
    return (a, b, c)


@dataclass
class EmbeddedCut:
    cut_id: int
    split_edges: dict = field(default_factory=dict)  # (u,v) -> (new vertex, t)
    facets: set = field(default_factory=set)         # tri keys on the level set


class TetMesh:
    def __init__(self, vertices, tets):
        self.V = np.ascontiguousarray(vertices, dtype=np.float64)
        self.tets = [tuple(int(x) for x in t) for t in tets]
        if any(len(set(t)) != 4 for t in self.tets):
            raise MeshError("degenerate tet (repeated vertex)")
        for i, t in enumerate(self.tets):  # normalize to positive orientation
            if self.tet_volume(i) < 0:
                a, b, c, d = t
                self.tets[i] = (a, b, d, c)
        self.surf_vertex = np.full(len(self.V), -1, dtype=np.int64)
        self.boundary_tris = {}   # tri key -> surface face id
        self.cut_facets = {}      # tri key -> cut id
        self.labels = np.zeros(len(self.tets), dtype=np.int64)
        self._next_cut = 0

    # -- basic queries ----------------------------------------------------

    def alive(self):
        return [i for i, t in enumerate(self.tets) if t is not None]

    def n_alive(self):
        return sum(1 for t in self.tets if t is not None)

    def tet_volume(self, i):
        a, b, c, d = self.tets[i]
        return float(np.linalg.det(np.array([self.V[b] - self.V[a],
                                             self.V[c] - self.V[a],
                                             self.V[d] - self.V[a]])) / 6.0)

    def total_volume(self):
        return sum(self.tet_volume(i) for i in self.alive())

    def tet_faces(self, t):
        a, b, c, d = t
        return (_tri_key(a, b, c), _tri_key(a, b, d), _tri_key(a, c, d), _tri_key(b, c, d))

    def face_map(self):
        """tri key -> incident alive tet ids (1 on the boundary, else 2)."""
        fm = {}
        for i in self.alive():
            for key in self.tet_faces(self.tets[i]):
                fm.setdefault(key, []).append(i)
        return fm

    def edge_graph(self):
        """Unique undirected vertex pairs of all alive tets."""
        seen = set()
        for i in self.alive():
            a, b, c, d = self.tets[i]
            for u, v in ((a, b), (a, c), (a, d), (b, c), (b, d), (c, d)):
                seen.add((u, v) if u < v else (v, u))
        return seen

    def validate_boundary(self, surface):
        """Bind boundary faces/vertices to the surface; bijection required."""
        from scipy.spatial import cKDTree

        fm = self.face_map()
        bfaces = [k for k, ts in fm.items() if len(ts) == 1]
        if len(bfaces) != surface.n_faces:
            raise MeshError(
                f"unmatched boundary: {len(bfaces)} tet boundary faces vs "
                f"{surface.n_faces} surface triangles")
        bverts = sorted({v for k in bfaces for v in k})
        tree = cKDTree(surface.V)
        tol = 1e-6 * max(surface.bbox_diag, 1e-30)
        d, idx = tree.query(self.V[bverts])
        if np.any(d > tol):
            raise MeshError("unmatched boundary: tet boundary vertex off surface")
        self.surf_vertex[:] = -1
        for tv, sv in zip(bverts, idx):
            self.surf_vertex[tv] = sv
        surf_tris = {_tri_key(*f): i for i, f in enumerate(surface.F.tolist())}
        self.boundary_tris = {}
        for key in bfaces:
            mapped = _tri_key(*(int(self.surf_vertex[v]) for v in key))
            if mapped not in surf_tris:
                raise MeshError(f"unmatched boundary triangle {key}")
            self.boundary_tris[key] = surf_tris[mapped]
        if len(self.boundary_tris) != surface.n_faces:
            raise MeshError("boundary map is not a bijection")
        # inverse map: surface vertex -> tet vertex
        self.tet_vertex_of = np.full(surface.n_vertices, -1, dtype=np.int64)
        for tv, sv in zip(bverts, idx):
            self.tet_vertex_of[sv] = tv
        if np.any(self.tet_vertex_of < 0):
            raise MeshError("surface vertex missing from tet boundary")

    # -- level-set embedding ----------------------------------------------

    def embed_levelset(self, values, iso=0.5, snap_tol=0.25, protected=None):
        """Split all edges strictly straddling iso; tag the resulting facets.

        values: per-vertex scalars; entries equal to iso mark vertices already
        on the cut. Vertices whose value sits within snap_tol of the crossing
        along every straddling edge are snapped onto the level set first
        (protected vertices, typically the Dirichlet boundary, never snap);
        this keeps successive cuts from shaving slivers where they cross.
        Returns (EmbeddedCut, values') where values' covers the inserted
        vertices (each exactly iso).
        """
        values = np.asarray(values, dtype=np.float64).copy()
        if len(values) != len(self.V):
            raise MeshError("one value per tet vertex required")
        cut_id = self._next_cut
        self._next_cut += 1
        cut = EmbeddedCut(cut_id)

        if snap_tol > 0:
            guard = np.zeros(len(values), dtype=bool)
            if protected is not None:
                guard[list(protected)] = True
            frac = np.full(len(values), np.inf)
            for i in self.alive():
                a, b, c, d = self.tets[i]
                for u, v in ((a, b), (a, c), (a, d), (b, c), (b, d), (c, d)):
                    fu, fv = values[u] - iso, values[v] - iso
                    if fu * fv < 0:
                        span = abs(fu) + abs(fv)
                        frac[u] = min(frac[u], abs(fu) / span)
                        frac[v] = min(frac[v], abs(fv) / span)
            snap = (frac < snap_tol) & ~guard
            values[snap] = iso

        def straddles(u, v):
            return (values[u] - iso) * (values[v] - iso) < 0

        inc = {}        # crossing edge -> set of incident alive tet ids
        tet_cross = {}  # tet id -> set of its crossing edges
        for i in self.alive():
            a, b, c, d = self.tets[i]
            for u, v in ((a, b), (a, c), (a, d), (b, c), (b, d), (c, d)):
                key = (u, v) if u < v else (v, u)
                if key in inc:
                    inc[key].add(i)
                    tet_cross.setdefault(i, set()).add(key)
                elif straddles(*key):
                    inc[key] = {i}
                    tet_cross.setdefault(i, set()).add(key)

        new_pos = []
        new_vals = []
        nv0 = len(self.V)
        for key in sorted(inc):
            u, v = key
            fu, fv = values[u], values[v]
            t = (iso - fu) / (fv - fu)
            t = min(max(t, 1e-9), 1.0 - 1e-9)
            m = nv0 + len(new_pos)
            new_pos.append((1.0 - t) * self.V[u] + t * self.V[v])
            new_vals.append(iso)
            cut.split_edges[key] = (m, float(t))
            for ti in sorted(inc[key]):
                tet = self.tets[ti]
                others = [x for x in tet if x != u and x != v]
                for x in others:
                    tri = _tri_key(u, v, x)
                    for reg in (self.cut_facets, self.boundary_tris):
                        if tri in reg:
                            tag = reg.pop(tri)
                            reg[_tri_key(u, m, x)] = tag
                            reg[_tri_key(m, v, x)] = tag
                t1 = tuple(m if x == v else x for x in tet)
                t2 = tuple(m if x == u else x for x in tet)
                self.tets[ti] = None
                i1 = len(self.tets); self.tets.append(t1)
                i2 = len(self.tets); self.tets.append(t2)
                for okey in tet_cross.pop(ti, ()):  # hand off other crossings
                    if okey == key:
                        continue
                    inc[okey].discard(ti)
                    for cand in (i1, i2):
                        ct = self.tets[cand]
                        if okey[0] in ct and okey[1] in ct:
                            inc[okey].add(cand)
                            tet_cross.setdefault(cand, set()).add(okey)
        if new_pos:
            self.V = np.vstack([self.V, np.array(new_pos)])
            self.surf_vertex = np.concatenate(
                [self.surf_vertex, np.full(len(new_pos), -1, dtype=np.int64)])
            values = np.concatenate([values, np.array(new_vals)])
        self.labels = np.zeros(len(self.tets), dtype=np.int64)

        inverted = [i for i in self.alive() if self.tet_volume(i) <= 0.0]
        if inverted:
            raise MeshError(f"inverted tets after split: {inverted[:8]}")

        # sides: after splitting no tet straddles iso
        side = {}
        for i in self.alive():
            vs = values[list(self.tets[i])]
            above = bool(np.any(vs > iso))
            below = bool(np.any(vs < iso))
            if above and below:
                raise MeshError(f"tet {i} still straddles the level set")
            side[i] = 1 if above else (-1 if below else 1)

        fm = self.face_map()
        for key, ts in fm.items():
            if len(ts) != 2:
                continue
            if side[ts[0]] * side[ts[1]] < 0:
                if all(values[v] == iso for v in key):
                    cut.facets.add(key)
                    self.cut_facets[key] = cut_id
        return cut, values

    # -- block labels -------------------------------------------------------

    def relabel(self, order=None):
        """Region growing across faces that are neither cut facets nor the
        boundary. Labels are dense ints; returns the number of blocks."""
        fm = self.face_map()
        adj = {}
        for key, ts in fm.items():
            if len(ts) == 2 and key not in self.cut_facets:
                a, b = ts
                adj.setdefault(a, []).append(b)
                adj.setdefault(b, []).append(a)
        alive = self.alive() if order is None else list(order)
        labels = np.full(len(self.tets), -1, dtype=np.int64)
        nxt = 0
        for seed in alive:
            if self.tets[seed] is None or labels[seed] >= 0:
                continue
            q = deque([seed])
            labels[seed] = nxt
            while q:
                cur = q.popleft()
                for nb in adj.get(cur, ()):
                    if labels[nb] < 0:
                        labels[nb] = nxt
                        q.append(nb)
            nxt += 1
        self.labels = labels
        return nxt

    def label_partition(self):
        """Frozen partition of alive tet ids by label (order-independent)."""
        groups = {}
        for i in self.alive():
            groups.setdefault(int(self.labels[i]), set()).add(i)
        return frozenset(frozenset(g) for g in groups.values())

    def dissolve_slivers(self, vol_frac=0.05):
        """Merge sliver blocks into their dominant neighbor.

        Wobbling discrete cut surfaces can pinch off thin wedges where cuts
        cross; such blocks pollute the decomposition with micro faces. Any
        block smaller than vol_frac of the median block volume loses the cut
        facets toward the neighbor it shares the most area with, and region
        growing reunites them. Returns the number of merges."""
        merges = 0
        while True:
            self.relabel()
            vols = {}
            for i in self.alive():
                vols[int(self.labels[i])] = vols.get(int(self.labels[i]), 0.0) \
                    + self.tet_volume(i)
            if len(vols) < 2:
                return merges
            median = sorted(vols.values())[len(vols) // 2]
            small = sorted(l for l, v in vols.items() if v < vol_frac * median)
            if not small:
                return merges
            label = small[0]
            fm = self.face_map()
            shared = {}
            for key, ts in fm.items():
                if len(ts) != 2 or key not in self.cut_facets:
                    continue
                la, lb = int(self.labels[ts[0]]), int(self.labels[ts[1]])
                if label not in (la, lb) or la == lb:
                    continue
                other = lb if la == label else la
                a, b, c = key
                area = 0.5 * np.linalg.norm(
                    np.cross(self.V[b] - self.V[a], self.V[c] - self.V[a]))
                shared.setdefault(other, [0.0, []])
                shared[other][0] += area
                shared[other][1].append(key)
            if not shared:
                return merges
            target = max(sorted(shared), key=lambda k: shared[k][0])
            for key in shared[target][1]:
                del self.cut_facets[key]
            merges += 1
