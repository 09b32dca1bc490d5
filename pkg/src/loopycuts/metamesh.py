"""Block-decomposition complex over the labeled tet mesh.

Faces gather interface facets with the same (unordered) label pair, split
into connected components and never merged across feature curves. Edges are
chains of tet edges with a stable incident-face set; vertices appear where
at least three meta-edges meet. Cells add their own boundary view: per-cell
corner valences drive the hex criteria and the midpoint subdivision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .surface import MeshError
from .volume import _tri_key

OUTSIDE = -1


@dataclass
class MetaFace:
    id: int
    pair: tuple                 # (label, label) with OUTSIDE for open space
    facets: list                # tri keys
    corners: list = None        # meta-vertex cycle (walk order)
    chains: list = None         # meta-edge ids around the face
    area: float = 0.0
    centroid: np.ndarray = None

    @property
    def external(self):
        return OUTSIDE in self.pair


@dataclass
class MetaEdge:
    id: int
    vertices: list              # tet vertex chain, endpoints are meta-vertices
    faces: tuple                # incident meta-face ids (sorted)
    on_feature: bool = False
    closed: bool = False


@dataclass
class MetaCell:
    label: int
    tets: list
    faces: list                 # meta-face ids
    corners: dict               # tet vertex -> incident meta-edge ids (in cell)
    genus: int = 0
    boundary_components: int = 1

    def corner_valences(self):
        return {v: len(es) for v, es in self.corners.items()}


class MetaMesh:
    def __init__(self, tet, surface, feature_edge_set, exempt_vertices=(),
                 suppressed_edges=()):
        """feature_edge_set: frozenset pairs of tet vertex ids lying on
        feature curves (or curves marked convex later); exempt_vertices: tet
        vertex ids allowed to break the valence-three rule; suppressed_edges:
        material tet edges removed by topological cleaning."""
        self.tet = tet
        self.surface = surface
        self.feature_edges = set(feature_edge_set)
        self.exempt = set(exempt_vertices)
        self.suppressed = {(min(e), max(e)) for e in
                           ({tuple(x) for x in suppressed_edges})}
        self.faces = []
        self.edges = []
        self.cells = {}
        self._build()

    # -- construction -------------------------------------------------------

    def _interface_facets(self):
        """tri key -> (unordered label pair)."""
        tet = self.tet
        out = {}
        fm = tet.face_map()
        for key, ts in fm.items():
            if len(ts) == 1:
                out[key] = (int(tet.labels[ts[0]]), OUTSIDE)
            else:
                a, b = (int(tet.labels[ts[0]]), int(tet.labels[ts[1]]))
                if a != b:
                    out[key] = (min(a, b), max(a, b))
        return out

    def _build(self):
        tet = self.tet
        self._fm = tet.face_map()
        facets = self._interface_facets()

        # orient every interface facet outward from its smaller-label side
        self.oriented = {}
        for key in facets:
            ts = self._fm[key]
            pick = ts[0]
            if len(ts) == 2:
                l0, l1 = tet.labels[ts[0]], tet.labels[ts[1]]
                pick = ts[0] if l0 <= l1 else ts[1]
            a, b, c = key
            cen = np.mean(tet.V[list(tet.tets[pick])], axis=0)
            n = np.cross(tet.V[b] - tet.V[a], tet.V[c] - tet.V[a])
            if n @ (cen - tet.V[a]) > 0:
                a, b, c = a, c, b
            self.oriented[key] = (a, b, c)

        def traversal(key, e):
            a, b, c = self.oriented[key]
            for u, v in ((a, b), (b, c), (c, a)):
                if (min(u, v), max(u, v)) == e:
                    return (u, v)
            raise MeshError("edge not on facet")

        # group facets into faces: same pair, edge-connected manifold-style
        # (opposite traversal, exactly two facets at the edge), never across
        # feature curves
        by_pair = {}
        for key, pair in facets.items():
            by_pair.setdefault(pair, []).append(key)
        edge_to_facets = {}
        for key in facets:
            a, b, c = key
            for e in ((a, b), (a, c), (b, c)):
                e = e if e[0] < e[1] else (e[1], e[0])
                edge_to_facets.setdefault(e, []).append(key)

        self.faces = []
        facet_face = {}
        for pair in sorted(by_pair):
            left = set(by_pair[pair])
            while left:
                seed = min(left)
                comp = {seed}
                left.discard(seed)
                stack = [seed]
                while stack:
                    cur = stack.pop()
                    a, b, c = cur
                    for e in ((a, b), (a, c), (b, c)):
                        e = e if e[0] < e[1] else (e[1], e[0])
                        if frozenset(e) in self.feature_edges:
                            continue
                        same = [k for k in edge_to_facets[e]
                                if facets[k] == pair]
                        if len(same) != 2:
                            continue
                        u, v = traversal(cur, e)
                        for nb in same:
                            if nb in left and traversal(nb, e) == (v, u):
                                left.discard(nb)
                                comp.add(nb)
                                stack.append(nb)
                fid = len(self.faces)
                mf = MetaFace(fid, pair, sorted(comp))
                self.faces.append(mf)
                for key in comp:
                    facet_face[key] = fid

        # meta-edge material: tet edges whose incident face set has >= 2
        # faces, or feature edges
        edge_faces = {}
        for key, fid in facet_face.items():
            a, b, c = key
            for e in ((a, b), (a, c), (b, c)):
                e = e if e[0] < e[1] else (e[1], e[0])
                edge_faces.setdefault(e, set()).add(fid)
        material = {}
        for e, fids in edge_faces.items():
            if e in self.suppressed and frozenset(e) not in self.feature_edges:
                continue
            if len(fids) >= 2 or frozenset(e) in self.feature_edges:
                material[e] = tuple(sorted(fids))

        # meta-vertices: endpoints where the material structure changes
        incident = {}
        for e in material:
            for v in e:
                incident.setdefault(v, []).append(e)
        self.meta_vertices = set()
        for v, es in incident.items():
            if len(es) != 2:
                self.meta_vertices.add(v)
            elif material[es[0]] != material[es[1]]:
                self.meta_vertices.add(v)

        # chains between meta-vertices (closed chains when none on the ring)
        self.edges = []
        self.edge_of_tet_edge = {}
        unused = set(material)

        def eat(a, b):
            unused.discard((a, b) if a < b else (b, a))

        def walk(start, nxt):
            chain = [start, nxt]
            eat(start, nxt)
            while chain[-1] not in self.meta_vertices:
                v = chain[-1]
                options = [e for e in incident[v]
                           if (min(e), max(e)) in unused]
                if not options:
                    break
                e = options[0]
                w = e[0] if e[1] == v else e[1]
                chain.append(w)
                eat(v, w)
                if chain[-1] == chain[0]:
                    break
            return chain

        for v in sorted(self.meta_vertices):
            for e in sorted(incident.get(v, [])):
                if (min(e), max(e)) not in unused:
                    continue
                w = e[0] if e[1] == v else e[1]
                chain = walk(v, w)
                self._add_edge(chain, material)
        while unused:  # islands / closed rings without corners
            e = min(unused)
            chain = walk(e[0], e[1])
            me = self._add_edge(chain, material)
            me.closed = chain[0] == chain[-1]

        self._build_cells(facets, facet_face)
        self._face_geometry()
        self._face_boundaries()

    def _add_edge(self, chain, material):
        fids = material[(min(chain[0], chain[1]), max(chain[0], chain[1]))]
        on_feat = all(frozenset((chain[i], chain[i + 1])) in self.feature_edges
                      for i in range(len(chain) - 1))
        me = MetaEdge(len(self.edges), chain, fids, on_feature=on_feat,
                      closed=chain[0] == chain[-1] and len(chain) > 2)
        self.edges.append(me)
        for i in range(len(chain) - 1):
            a, b = chain[i], chain[i + 1]
            self.edge_of_tet_edge[(min(a, b), max(a, b))] = me.id
        return me

    def _build_cells(self, facets, facet_face):
        tet = self.tet
        by_label = {}
        for i in tet.alive():
            by_label.setdefault(int(tet.labels[i]), []).append(i)
        self.cells = {}
        for label, tets in sorted(by_label.items()):
            bfaces = set()
            for key, pair in facets.items():
                if label in pair:
                    bfaces.add(key)
            face_ids = sorted({facet_face[k] for k in bfaces})
            # boundary surface Euler characteristic
            bverts = set()
            bedges = set()
            for a, b, c in bfaces:
                bverts.update((a, b, c))
                for e in ((a, b), (a, c), (b, c)):
                    bedges.add((min(e), max(e)))
            chi = len(bverts) - len(bedges) + len(bfaces)
            comps = self._surface_components(bfaces)
            genus = (2 * comps - chi) // 2

            # per-cell corners: meta-edges on this cell's boundary
            cell_edges = set()
            for e in bedges:
                me = self.edge_of_tet_edge.get(e)
                if me is None:
                    continue
                # the meta edge must bound two of the cell's own facets with
                # different faces, or lie on a feature
                inc = [facet_face[k] for k in self._edge_facets(e, bfaces)]
                if len(set(inc)) >= 2 or frozenset(e) in self.feature_edges:
                    cell_edges.add(me)
            corners = {}
            for me_id in cell_edges:
                me = self.edges[me_id]
                if me.closed:
                    continue
                for v in (me.vertices[0], me.vertices[-1]):
                    corners.setdefault(v, set()).add(me_id)
            corners = {v: sorted(es) for v, es in corners.items()
                       if len(es) >= 2}
            cell = MetaCell(label, tets, face_ids, corners, genus, comps)
            cell.edge_ids = sorted(cell_edges)
            self.cells[label] = cell

    def _edge_facets(self, e, bfaces):
        a, b = e
        out = []
        for key in bfaces:
            if a in key and b in key:
                out.append(key)
        return out

    def _surface_components(self, bfaces):
        edge_map = {}
        for key in bfaces:
            a, b, c = key
            for e in ((a, b), (a, c), (b, c)):
                edge_map.setdefault((min(e), max(e)), []).append(key)
        left = set(bfaces)
        comps = 0
        while left:
            seed = min(left)
            left.discard(seed)
            stack = [seed]
            while stack:
                cur = stack.pop()
                a, b, c = cur
                for e in ((a, b), (a, c), (b, c)):
                    for nb in edge_map[(min(e), max(e))]:
                        if nb in left:
                            left.discard(nb)
                            stack.append(nb)
            comps += 1
        return comps

    def _face_geometry(self):
        V = self.tet.V
        for mf in self.faces:
            areas = []
            cens = []
            for a, b, c in mf.facets:
                cr = np.cross(V[b] - V[a], V[c] - V[a])
                areas.append(0.5 * np.linalg.norm(cr))
                cens.append((V[a] + V[b] + V[c]) / 3.0)
            mf.area = float(sum(areas))
            if mf.area > 0:
                mf.centroid = np.average(cens, axis=0, weights=areas)
            else:
                mf.centroid = np.mean(cens, axis=0)

    def _face_boundaries(self):
        """Corner cycle of every face by walking its boundary halfedges."""
        for mf in self.faces:
            half = {}
            for key in mf.facets:
                a, b, c = self.oriented[key]
                for u, v in ((a, b), (b, c), (c, a)):
                    if (u, v) in half:
                        raise MeshError(
                            f"face {mf.id} is not manifold at ({u},{v})")
                    half[(u, v)] = (a, b, c)
            boundary = [(u, v) for (u, v) in half if (v, u) not in half]
            mf.corners = []
            mf.chains = []
            mf.rings = []
            if not boundary:
                continue
            bset = set(boundary)

            def out_halfedge(tri, v):
                a, b, c = tri
                if a == v:
                    return b
                if b == v:
                    return c
                return a

            def next_he(u, v):
                # rotate around v facet by facet, never crossing a boundary
                # edge (keeps pinched rings separate)
                tri = half[(u, v)]
                guard = 0
                while True:
                    y = out_halfedge(tri, v)
                    if (v, y) in bset:
                        return (v, y)
                    tri = half.get((y, v))
                    if tri is None:
                        raise MeshError("face boundary walk failed")
                    guard += 1
                    if guard > 4 * len(mf.facets) + 8:
                        raise MeshError("face boundary walk stuck")

            left = set(boundary)
            rings = []
            while left:
                he = min(left)
                ring = []
                cur = he
                while True:
                    left.discard(cur)
                    ring.append(cur)
                    cur = next_he(*cur)
                    if cur == he:
                        break
                    if len(ring) > len(boundary):
                        raise MeshError("face boundary ring does not close")
                rings.append(ring)
            mf.rings = rings
            main = max(rings, key=len)
            corners = [v for (u, v) in main if v in self.meta_vertices]
            mf.corners = corners
            chains = []
            for u, v in main:
                me = self.edge_of_tet_edge.get((min(u, v), max(u, v)))
                if me is not None and (not chains or chains[-1] != me):
                    chains.append(me)
            if len(chains) > 1 and chains[0] == chains[-1]:
                chains.pop()
            mf.chains = chains

    # -- queries -------------------------------------------------------------

    def summary_counts(self):
        """(hex-like, prism-like, other) cell counts for the report."""
        h = p = o = 0
        for cell in self.cells.values():
            vals = cell.corner_valences()
            n3 = sum(1 for k in vals.values() if k == 3)
            if cell.genus == 0 and len(vals) == 8 and n3 == 8 \
                    and len(cell.faces) == 6:
                h += 1
            elif cell.genus == 0 and len(vals) == 6 and n3 == 6 \
                    and len(cell.faces) == 5:
                p += 1
            else:
                o += 1
        return h, p, o


def clean_topology(meta: MetaMesh):
    """Remove dangling meta-edges and island rings, rebuilding until stable.

    A dangling chain has a free endpoint (valence one among meta-edges); an
    island is a closed chain inside a single face touching no meta-vertex.
    Feature edges are never removed. Idempotent: a clean mesh is returned
    unchanged (fresh object, same structure).
    """
    suppressed = set(meta.suppressed)
    current = meta
    while True:
        valence = {}
        for me in current.edges:
            for v in (me.vertices[0], me.vertices[-1]):
                valence[v] = valence.get(v, 0) + 1
        drop = []
        for me in current.edges:
            if me.on_feature:
                continue
            if me.closed and len(set(me.faces)) < 2:
                drop.append(me)  # island ring inside one face
            elif not me.closed and (valence.get(me.vertices[0], 0) == 1
                                    or valence.get(me.vertices[-1], 0) == 1):
                drop.append(me)  # dangling chain
        if not drop:
            return current
        for me in drop:
            ch = me.vertices
            for i in range(len(ch) - 1):
                a, b = ch[i], ch[i + 1]
                suppressed.add((min(a, b), max(a, b)))
        current = MetaMesh(meta.tet, meta.surface, meta.feature_edges,
                           meta.exempt, suppressed)


@dataclass
class CriteriaReport:
    cell_genus: dict
    cell_face_min_sides: dict
    bad_valence: dict            # cell label -> [(vertex, valence)] excluding exempt
    exempt_hits: dict            # cell label -> [(vertex, valence)] at exempt vertices
    g3_deviation: dict           # face id -> relative area deviation
    g3_tol: float

    def t1_ok(self):
        return all(g == 0 for g in self.cell_genus.values())

    def t2_ok(self):
        return all(m >= 3 for m in self.cell_face_min_sides.values())

    def t3_ok(self):
        return all(not bad for bad in self.bad_valence.values())

    def g3_ok(self):
        return all(d <= self.g3_tol for d in self.g3_deviation.values())

    def all_ok(self):
        return self.t1_ok() and self.t2_ok() and self.t3_ok() and self.g3_ok()


def evaluate_criteria(meta: MetaMesh, g3_tol=0.15, turn_deg=45.0):
    """Per-cell topology and external-face accuracy checks."""
    V = meta.tet.V
    genus = {}
    min_sides = {}
    bad_val = {}
    exempt_hits = {}
    for label, cell in sorted(meta.cells.items()):
        genus[label] = cell.genus if cell.boundary_components == 1 else -1
        sides = []
        for fid in cell.faces:
            mf = meta.faces[fid]
            sides.append(max(len(mf.chains), len(mf.corners)))
        min_sides[label] = min(sides) if sides else 0
        bad = []
        hits = []
        for v, es in cell.corners.items():
            if len(es) == 3:
                continue
            if v in meta.exempt:
                hits.append((v, len(es)))
            else:
                bad.append((v, len(es)))
        bad_val[label] = bad
        exempt_hits[label] = hits

    g3 = {}
    cos_turn = np.cos(np.deg2rad(turn_deg))
    for mf in meta.faces:
        if not mf.external:
            continue
        if not mf.rings or len(mf.rings) > 1:
            g3[mf.id] = 1.0
            continue
        ring = max(mf.rings, key=len)
        # corner polygon enriched with sharp geometric turns, mirroring the
        # sampling-phase patch test
        poly = []
        for i, (u, v) in enumerate(ring):
            if v in meta.meta_vertices:
                poly.append(v)
                continue
            w = ring[(i + 1) % len(ring)][1]
            d1 = V[v] - V[u]
            d2 = V[w] - V[v]
            n1, n2 = np.linalg.norm(d1), np.linalg.norm(d2)
            if n1 > 0 and n2 > 0 and float(d1 @ d2) / (n1 * n2) < cos_turn:
                poly.append(v)
        if len(poly) < 3 or len(mf.rings) > 1:
            g3[mf.id] = 1.0
            continue
        pts = V[poly]
        center = pts.mean(axis=0)
        flat = 0.0
        for i in range(len(pts)):
            a = pts[i] - center
            b = pts[(i + 1) % len(pts)] - center
            flat += 0.5 * np.linalg.norm(np.cross(a, b))
        g3[mf.id] = abs(mf.area - flat) / max(mf.area, 1e-30)
    return CriteriaReport(genus, min_sides, bad_val, exempt_hits, g3, g3_tol)


def decomposition_done(report: CriteriaReport):
    return report.all_ok()
