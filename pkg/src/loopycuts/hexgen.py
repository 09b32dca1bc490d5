"""Hexahedral mesh from the block decomposition.

One midpoint-subdivision step: new vertices at meta-edge midpoints, face
centroids and cell centroids; every valence-three cell corner becomes a hex,
any other corner becomes a general polyhedron confined to its cell. Geometry
is then improved by constrained Laplacian smoothing with projection onto the
input surface and feature curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .surface import MeshError

# corner -> its three edge-connected corners, ordered so the frame of the
# reference cube has determinant +1
HEX_CORNER_NEIGHBORS = (
    (1, 3, 4), (2, 0, 5), (3, 1, 6), (0, 2, 7),
    (7, 5, 0), (4, 6, 1), (5, 7, 2), (6, 4, 3),
)

HEX_FACES = ((0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
             (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7))


class HexMesh:
    def __init__(self):
        self.V = []
        self.hexes = []
        self.polyhedra = []          # list of face lists (vertex cycles)
        self.hex_cell = []           # provenance: meta cell label per hex
        self.poly_cell = []
        self.constraint = []         # per-vertex: ("free"|"surface"|"fixed"|
                                     #              ("feature", curve points))
        self._key_index = {}

    def add_vertex(self, key, pos, constraint="free"):
        if key in self._key_index:
            return self._key_index[key]
        vid = len(self.V)
        self.V.append(np.asarray(pos, dtype=np.float64))
        self.constraint.append(constraint)
        self._key_index[key] = vid
        return vid

    def points(self):
        return np.array(self.V)

    def n_cells(self):
        return len(self.hexes) + len(self.polyhedra)

    def hex_quality(self):
        P = self.points()
        return [scaled_jacobian(P[list(h)]) for h in self.hexes]

    def quad_faces(self):
        """(face key -> count) over hex faces and polyhedron faces."""
        faces = {}
        for h in self.hexes:
            for f in HEX_FACES:
                key = frozenset(h[i] for i in f)
                faces[key] = faces.get(key, 0) + 1
        for poly in self.polyhedra:
            for f in poly:
                faces[frozenset(f)] = faces.get(frozenset(f), 0) + 1
        return faces


def scaled_jacobian(corners):
    """Minimum over the eight corners of det of the normalized edge frame."""
    corners = np.asarray(corners, dtype=np.float64)
    worst = 1.0
    for i, (a, b, c) in enumerate(HEX_CORNER_NEIGHBORS):
        e = np.stack([corners[a] - corners[i],
                      corners[b] - corners[i],
                      corners[c] - corners[i]])
        norms = np.linalg.norm(e, axis=1)
        if np.any(norms < 1e-30):
            return 0.0
        e = e / norms[:, None]
        worst = min(worst, float(np.linalg.det(e)))
    return worst


def _chain_midpoint(V, chain):
    pts = V[chain]
    seg = np.linalg.norm(pts[1:] - pts[:-1], axis=1)
    total = seg.sum()
    if total <= 0:
        return pts[0]
    half = total / 2.0
    acc = 0.0
    for i, s in enumerate(seg):
        if acc + s >= half:
            t = (half - acc) / s
            return (1 - t) * pts[i] + t * pts[i + 1]
        acc += s
    return pts[-1]


def _project_to_facets(point, V, facets):
    from .surface import closest_point_on_triangle
    best, bd = point, np.inf
    for a, b, c in facets:
        q = closest_point_on_triangle(point, V[a], V[b], V[c])
        d = float(np.linalg.norm(q - point))
        if d < bd:
            best, bd = q, d
    return best


def midpoint_subdivide(meta, features=None):
    """One midpoint-subdivision step over every meta cell.

    features: optional mapping curve id -> polyline (for constraining the
    smoothing later); vertex constraints are derived from the meta structure:
    surface corners project to the surface, feature-chain points ride their
    curve, feature-network vertices stay fixed.
    """
    tet = meta.tet
    V = tet.V
    hx = HexMesh()

    surface_vertex = tet.surf_vertex >= 0

    def corner_constraint(v):
        if not surface_vertex[v]:
            return "free"
        incident = [me for me in meta.edges
                    if me.on_feature and (v in (me.vertices[0],
                                                me.vertices[-1]))]
        through = [me for me in meta.edges
                   if me.on_feature and v in me.vertices]
        if len(incident) >= 2 or v in meta.exempt:
            return "fixed"
        if through:
            return ("feature", V[through[0].vertices].copy())
        return "surface"

    def edge_constraint(me):
        verts = me.vertices
        if me.on_feature:
            return ("feature", V[verts].copy())
        if all(surface_vertex[v] for v in verts):
            return "surface"
        return "free"

    def face_constraint(mf):
        return "surface" if mf.external else "free"

    for label, cell in sorted(meta.cells.items()):
        centroid = np.zeros(3)
        vol = 0.0
        for t in cell.tets:
            tv = tet.tet_volume(t)
            centroid += tv * np.mean(V[list(tet.tets[t])], axis=0)
            vol += tv
        centroid = centroid / vol if vol > 0 else centroid
        cid = hx.add_vertex(("c", label), centroid)

        # per-corner local structure
        edges_by_id = {me.id: me for me in meta.edges}
        for v in sorted(cell.corners):
            e_ids = cell.corners[v]
            k = len(e_ids)
            mids = {}
            for eid in e_ids:
                me = edges_by_id[eid]
                mids[eid] = hx.add_vertex(("e", eid),
                                          _chain_midpoint(V, me.vertices),
                                          edge_constraint(me))
            # faces of this cell at v: those whose chain set contains two
            # incident edges
            fpairs = {}
            for fid in cell.faces:
                mf = meta.faces[fid]
                here = [e for e in e_ids if e in mf.chains]
                if len(here) == 2:
                    fpairs[fid] = tuple(sorted(here))
            if len(fpairs) != k or {e for p in fpairs.values() for e in p} \
                    != set(e_ids):
                continue  # corner structure not two-edges-per-face: skip
            fcent = {}
            for fid in fpairs:
                mf = meta.faces[fid]
                pos = _project_to_facets(mf.centroid, V, mf.facets)
                fcent[fid] = hx.add_vertex(("f", fid), pos,
                                           face_constraint(mf))
            vc = hx.add_vertex(("v", v), V[v].copy(), corner_constraint(v))

            if k == 3:
                e1, e2, e3 = e_ids
                def face_of(a, b):
                    for fid, pr in fpairs.items():
                        if pr == tuple(sorted((a, b))):
                            return fid
                    return None
                f12, f13, f23 = (face_of(e1, e2), face_of(e1, e3),
                                 face_of(e2, e3))
                if None in (f12, f13, f23):
                    continue
                corners = [vc, mids[e1], fcent[f12], mids[e2],
                           mids[e3], fcent[f13], cid, fcent[f23]]
                P = [hx.V[i] for i in corners]
                frame = np.stack([P[1] - P[0], P[3] - P[0], P[4] - P[0]])
                if np.linalg.det(frame) < 0:
                    corners = [vc, mids[e2], fcent[f12], mids[e1],
                               mids[e3], fcent[f23], cid, fcent[f13]]
                hx.hexes.append(tuple(corners))
                hx.hex_cell.append(label)
            else:
                faces = []
                for fid, (ea, eb) in sorted(fpairs.items()):
                    faces.append([vc, mids[ea], fcent[fid], mids[eb]])
                for eid in e_ids:
                    inc = sorted(fid for fid, pr in fpairs.items()
                                 if eid in pr)
                    if len(inc) != 2:
                        faces = None
                        break
                    faces.append([mids[eid], fcent[inc[0]], cid,
                                  fcent[inc[1]]])
                if faces is None:
                    continue
                hx.polyhedra.append(faces)
                hx.poly_cell.append(label)
    return hx


@dataclass
class QualityReport:
    min_sj: float
    mean_sj: float
    hex_count: int
    non_hex_count: int
    histogram: list

    def lines(self):
        out = [f"hexes {self.hex_count}",
               f"non_hex {self.non_hex_count}",
               f"min_scaled_jacobian {self.min_sj:.6f}",
               f"mean_scaled_jacobian {self.mean_sj:.6f}"]
        for lo, hi, n in self.histogram:
            out.append(f"sj [{lo:.1f},{hi:.1f}) {n}")
        return out


def quality_report(hexmesh):
    sj = hexmesh.hex_quality()
    if not sj:
        return QualityReport(0.0, 0.0, 0, len(hexmesh.polyhedra), [])
    hist = []
    edges = np.linspace(-1, 1, 11)
    counts, _ = np.histogram(sj, bins=edges)
    for i, n in enumerate(counts):
        hist.append((float(edges[i]), float(edges[i + 1]), int(n)))
    return QualityReport(float(min(sj)), float(np.mean(sj)), len(sj),
                         len(hexmesh.polyhedra), hist)


def _vertex_adjacency(hexmesh):
    adj = {}
    def link(a, b):
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    for h in hexmesh.hexes:
        for i, nbs in enumerate(HEX_CORNER_NEIGHBORS):
            for j in nbs:
                link(h[i], h[j])
    for poly in hexmesh.polyhedra:
        for face in poly:
            n = len(face)
            for i in range(n):
                link(face[i], face[(i + 1) % n])
    return adj


def _project_constraint(kind, point, surface):
    if kind == "free":
        return point
    if kind == "fixed":
        return None  # caller keeps the original
    if kind == "surface":
        q, _, _ = surface.project_point(point)
        return q
    # feature curve: closest point on the stored polyline
    poly = kind[1]
    best, bd = point, np.inf
    for i in range(len(poly) - 1):
        a, b = poly[i], poly[i + 1]
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0 else np.clip(float((point - a) @ ab) / denom,
                                           0.0, 1.0)
        q = a + t * ab
        d = float(np.linalg.norm(q - point))
        if d < bd:
            best, bd = q, d
    return best


def smooth_project(hexmesh, surface, iterations=50, step=0.5):
    """Constrained Laplacian smoothing with per-vertex inversion rollback.

    Boundary vertices are projected back to the surface (feature points to
    their curve) after each move; a full sweep is rolled back when the global
    minimum scaled Jacobian would decrease.
    """
    adj = _vertex_adjacency(hexmesh)
    incident = {}
    for ci, h in enumerate(hexmesh.hexes):
        for v in h:
            incident.setdefault(v, []).append(ci)
    P = hexmesh.points()

    def cell_sj(ci, pts):
        return scaled_jacobian(pts[list(hexmesh.hexes[ci])])

    def global_min(pts):
        vals = [cell_sj(ci, pts) for ci in range(len(hexmesh.hexes))]
        return min(vals) if vals else 1.0

    best_min = global_min(P)
    for _ in range(iterations):
        prev = P.copy()
        prev_min = best_min
        order = sorted(adj)
        moved = False
        for v in order:
            kind = hexmesh.constraint[v]
            if kind == "fixed":
                continue
            target = np.mean(P[sorted(adj[v])], axis=0)
            cand = P[v] + step * (target - P[v])
            proj = _project_constraint(kind, cand, surface)
            if proj is None:
                continue
            before = min((cell_sj(ci, P) for ci in incident.get(v, [])),
                         default=1.0)
            old = P[v].copy()
            P[v] = proj
            after = min((cell_sj(ci, P) for ci in incident.get(v, [])),
                        default=1.0)
            if after < min(before, 0.0) or (before >= 0 and after < 0):
                P[v] = old  # the move would invert a cell
            elif not np.allclose(old, P[v]):
                moved = True
        cur = global_min(P)
        if cur < prev_min - 1e-12:
            P = prev  # keep the reported minimum monotone
            break
        best_min = cur
        if not moved:
            break
    for v in range(len(hexmesh.V)):
        hexmesh.V[v] = P[v]
    return hexmesh


def refine(hexmesh, levels=1):
    """Split every hex into eight per level; polyhedra subdivide by the same
    midpoint rule, spawning hexes at their valence-three corners."""
    current = hexmesh
    for _ in range(max(levels, 0)):
        nxt = HexMesh()
        P = current.points()

        def mid_of(*vids):
            key = ("m",) + tuple(sorted(vids))
            kinds = [current.constraint[v] for v in vids]
            if all(k == kinds[0] for k in kinds) and not isinstance(
                    kinds[0], tuple):
                kind = kinds[0]
                if kind == "fixed":
                    kind = "surface"
            elif all(k == "surface" or isinstance(k, tuple) or k == "fixed"
                     for k in kinds):
                kind = "surface"
            else:
                kind = "free"
            return nxt.add_vertex(key, np.mean(P[list(vids)], axis=0), kind)

        for hi, h in enumerate(current.hexes):
            vv = {}
            for i in range(8):
                vv[i] = nxt.add_vertex(("o", h[i]), P[h[i]],
                                       current.constraint[h[i]])
            em = {}
            for i, nbs in enumerate(HEX_CORNER_NEIGHBORS):
                for j in nbs:
                    em[(i, j)] = mid_of(h[i], h[j])
            fm = {}
            for f in HEX_FACES:
                fm[f] = mid_of(*(h[i] for i in f))
            cm = mid_of(*h)

            def face_of(i, j):
                for f in HEX_FACES:
                    if i in f and j in f:
                        yield f

            for i in range(8):
                a, b, c = HEX_CORNER_NEIGHBORS[i]
                fab = next(f for f in face_of(i, a) if b in f)
                fac = next(f for f in face_of(i, a) if c in f)
                fbc = next(f for f in face_of(i, b) if c in f)
                corners = [vv[i], em[(i, a)], fm[fab], em[(i, b)],
                           em[(i, c)], fm[fac], cm, fm[fbc]]
                pts = [nxt.V[x] for x in corners]
                frame = np.stack([pts[1] - pts[0], pts[3] - pts[0],
                                  pts[4] - pts[0]])
                if np.linalg.det(frame) < 0:
                    corners = [vv[i], em[(i, b)], fm[fab], em[(i, a)],
                               em[(i, c)], fm[fbc], cm, fm[fac]]
                nxt.hexes.append(tuple(corners))
                nxt.hex_cell.append(current.hex_cell[hi])

        for pi, poly in enumerate(current.polyhedra):
            sub_hexes, sub_polys = _subdivide_polyhedron(current, nxt, poly)
            for h in sub_hexes:
                nxt.hexes.append(h)
                nxt.hex_cell.append(current.poly_cell[pi])
            for p in sub_polys:
                nxt.polyhedra.append(p)
                nxt.poly_cell.append(current.poly_cell[pi])
        current = nxt
    return current


def _subdivide_polyhedron(src, dst, faces):
    """Midpoint subdivision of one general polyhedron (face lists)."""
    P = src.points()
    verts = sorted({v for f in faces for v in f})
    edges = set()
    for f in faces:
        n = len(f)
        for i in range(n):
            a, b = f[i], f[(i + 1) % n]
            edges.add((min(a, b), max(a, b)))

    def vkey(v):
        return dst.add_vertex(("o", v), P[v], src.constraint[v])

    def ekey(a, b):
        kinds = (src.constraint[a], src.constraint[b])
        kind = "surface" if all(
            k == "surface" or k == "fixed" or isinstance(k, tuple)
            for k in kinds) else "free"
        return dst.add_vertex(("m", min(a, b), max(a, b)),
                              (P[a] + P[b]) / 2.0, kind)

    def fkey(f):
        kinds = [src.constraint[v] for v in f]
        kind = "surface" if all(
            k == "surface" or k == "fixed" or isinstance(k, tuple)
            for k in kinds) else "free"
        return dst.add_vertex(("fm",) + tuple(sorted(f)),
                              np.mean(P[list(f)], axis=0), kind)

    ckey = dst.add_vertex(("cm",) + tuple(verts),
                          np.mean(P[verts], axis=0), "free")

    v_edges = {}
    for a, b in edges:
        v_edges.setdefault(a, []).append((a, b))
        v_edges.setdefault(b, []).append((a, b))
    v_faces = {}
    for fi, f in enumerate(faces):
        for v in f:
            v_faces.setdefault(v, []).append(fi)

    hexes, polys = [], []
    for v in verts:
        es = sorted(v_edges[v])
        fs = sorted(v_faces[v])
        pair_of = {}
        for fi in fs:
            f = faces[fi]
            n = len(f)
            i = f.index(v)
            ea = (min(v, f[(i - 1) % n]), max(v, f[(i - 1) % n]))
            eb = (min(v, f[(i + 1) % n]), max(v, f[(i + 1) % n]))
            pair_of[fi] = (ea, eb)
        if len(es) == 3 and len(fs) == 3:
            e1, e2, e3 = es
            def face_with(x, y):
                for fi, (ea, eb) in pair_of.items():
                    if {ea, eb} == {x, y}:
                        return fi
                return None
            f12, f13, f23 = (face_with(e1, e2), face_with(e1, e3),
                             face_with(e2, e3))
            if None in (f12, f13, f23):
                continue
            corners = [vkey(v), ekey(*e1), fkey(faces[f12]), ekey(*e2),
                       ekey(*e3), fkey(faces[f13]), ckey, fkey(faces[f23])]
            pts = [dst.V[x] for x in corners]
            frame = np.stack([pts[1] - pts[0], pts[3] - pts[0],
                              pts[4] - pts[0]])
            if np.linalg.det(frame) < 0:
                corners = [vkey(v), ekey(*e2), fkey(faces[f12]), ekey(*e1),
                           ekey(*e3), fkey(faces[f23]), ckey,
                           fkey(faces[f13])]
            hexes.append(tuple(corners))
        else:
            pfaces = []
            for fi, (ea, eb) in sorted(pair_of.items()):
                pfaces.append([vkey(v), ekey(*ea), fkey(faces[fi]),
                               ekey(*eb)])
            ok = True
            for e in es:
                inc = sorted(fi for fi, pr in pair_of.items() if e in pr)
                if len(inc) != 2:
                    ok = False
                    break
                pfaces.append([ekey(*e), fkey(faces[inc[0]]), ckey,
                               fkey(faces[inc[1]])])
            if ok:
                polys.append(pfaces)
    return hexes, polys
