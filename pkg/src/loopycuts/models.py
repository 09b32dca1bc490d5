"""Built-in solid models for demos and tests.

Each generator emits a matched (surface, cross-field, features, tet mesh)
bundle. Solids are assembled from convex polyhedral cells (hexes, wedges,
pyramids) which are tetrahedralized through face/cell centroids, so the tet
boundary always conforms to the extracted triangle surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .surface import CrossField, SurfaceMesh, classify_features
from .volume import TetMesh


@dataclass
class ModelBundle:
    surface: SurfaceMesh
    field: CrossField
    features: FeatureNetwork
    tets: TetMesh
    raw_chains: list


# -- generic cell tetrahedralization ---------------------------------------

def solid_from_cells(points, cells):
    """cells: list of polyhedra, each a list of faces (cyclic vertex lists).

    Triangle faces are kept; larger faces get a shared center point; every
    cell gets a centroid; tets fan from face triangles to the centroid.
    """
    pts = [np.asarray(p, dtype=np.float64) for p in points]
    face_center = {}

    def center_of(face):
        key = tuple(sorted(face))
        if key not in face_center:
            face_center[key] = len(pts)
            pts.append(np.mean([pts[v] for v in face], axis=0))
        return face_center[key]

    tets = []
    for cell in cells:
        cid = len(pts)
        pts.append(np.mean([pts[v] for face in cell for v in face], axis=0))
        for face in cell:
            if len(face) == 3:
                tris = [tuple(face)]
            else:
                fc = center_of(face)
                tris = [(face[i], face[(i + 1) % len(face)], fc)
                        for i in range(len(face))]
            for a, b, c in tris:
                tets.append((a, b, c, cid))
    return TetMesh(np.array(pts), tets)


def extract_surface(tet: TetMesh):
    """Boundary triangles of the tet mesh as a compact oriented SurfaceMesh."""
    fm = tet.face_map()
    btris = []
    for key, ts in sorted(fm.items()):
        if len(ts) != 1:
            continue
        i = ts[0]
        cen = np.mean(tet.V[list(tet.tets[i])], axis=0)
        a, b, c = key
        n = np.cross(tet.V[b] - tet.V[a], tet.V[c] - tet.V[a])
        if n @ (cen - tet.V[a]) > 0:
            a, b, c = a, c, b
        btris.append((a, b, c))
    vids = sorted({v for t in btris for v in t})
    remap = {v: i for i, v in enumerate(vids)}
    V = tet.V[vids]
    F = [[remap[a], remap[b], remap[c]] for a, b, c in btris]
    surface = SurfaceMesh(V, F)
    tet.validate_boundary(surface)
    return surface


def field_axis(surface):
    """Globally axis-aligned guide field: per face the first coordinate axis
    with a usable tangential projection."""
    reps = np.zeros((surface.n_faces, 3))
    axes = np.eye(3)
    for f in range(surface.n_faces):
        n = surface.face_normal[f]
        for a in axes:
            t = a - (a @ n) * n
            if np.linalg.norm(t) > 0.1:
                reps[f] = t
                break
    return CrossField(surface, reps)


def field_circular(surface):
    """Guide field rotating around the z axis (tori: no z-normal caps)."""
    reps = np.zeros((surface.n_faces, 3))
    z = np.array([0.0, 0.0, 1.0])
    for f in range(surface.n_faces):
        n = surface.face_normal[f]
        c = surface.face_centroid[f]
        t = np.cross(z, np.array([c[0], c[1], 0.0]))
        t = t - (t @ n) * n
        if np.linalg.norm(t) < 1e-9:
            t = np.array([1.0, 0.0, 0.0]) - n[0] * n
        reps[f] = t / np.linalg.norm(t)
    return CrossField(surface, reps)


def field_axis_circular(surface, z_tol=0.9):
    """Circular around z on walls, axis-aligned on near-horizontal caps.

    A purely circular field on a capped solid puts an index-one circulation
    at each cap center, which no field-coherent path can cross; aligning the
    caps to an axis instead yields quarter singularities on the rims and
    leaves the caps crossable, like the fields the meshing pipeline expects.
    """
    reps = np.zeros((surface.n_faces, 3))
    z = np.array([0.0, 0.0, 1.0])
    for f in range(surface.n_faces):
        n = surface.face_normal[f]
        if abs(n @ z) > z_tol:
            t = np.array([1.0, 0.0, 0.0]) - n[0] * n
        else:
            c = surface.face_centroid[f]
            t = np.cross(z, np.array([c[0], c[1], 0.0]))
            t = t - (t @ n) * n
            if np.linalg.norm(t) < 1e-9:
                t = np.array([1.0, 0.0, 0.0]) - n[0] * n
        reps[f] = t / np.linalg.norm(t)
    return CrossField(surface, reps)


def _bundle(tet, raw_chains, field_fn=field_axis):
    surface = extract_surface(tet)
    field = field_fn(surface)
    features = classify_features(surface, raw_chains)
    return ModelBundle(surface, field, features, tet, raw_chains)


def _edge_chain(surface, predicate, sort_key):
    """Vertices satisfying predicate, ordered along sort_key."""
    ids = [v for v in range(surface.n_vertices) if predicate(surface.V[v])]
    ids.sort(key=lambda v: sort_key(surface.V[v]))
    return ids


# -- cube -------------------------------------------------------------------

def cube(n=8, size=1.0):
    """Unit cube, structured n^3 lattice, convex wireframe features."""
    h = size / n
    idx = {}
    pts = []
    for i in range(n + 1):
        for j in range(n + 1):
            for k in range(n + 1):
                idx[(i, j, k)] = len(pts)
                pts.append((i * h, j * h, k * h))
    cells = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                v = [idx[(i + a, j + b, k + c)]
                     for a, b, c in ((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
                                     (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1))]
                cells.append(_hex_faces(v))
    tet = solid_from_cells(pts, cells)
    surface = extract_surface(tet)
    eps = 1e-9
    chains = []
    for axis in range(3):
        for s1 in (0.0, size):
            for s2 in (0.0, size):
                o1, o2 = [a for a in range(3) if a != axis]
                ids = _edge_chain(
                    surface,
                    lambda p, o1=o1, o2=o2, s1=s1, s2=s2:
                        abs(p[o1] - s1) < eps and abs(p[o2] - s2) < eps,
                    lambda p, axis=axis: p[axis])
                chains.append(("convex", ids))
    field = field_axis(surface)
    features = classify_features(surface, chains)
    return ModelBundle(surface, field, features, tet, chains)


def _hex_faces(v):
    """Faces of a hex given VTK-ordered corners (bottom quad, top quad)."""
    return [[v[0], v[3], v[2], v[1]], [v[4], v[5], v[6], v[7]],
            [v[0], v[1], v[5], v[4]], [v[1], v[2], v[6], v[5]],
            [v[2], v[3], v[7], v[6]], [v[3], v[0], v[4], v[7]]]


# -- torus --------------------------------------------------------------------

def torus(nu=24, nv=12, nr=3, R=1.0, r=0.4):
    """Solid torus around the z axis; toroidal guide field; no features."""
    pts = []
    disk = []  # (ring, angle) -> local id; ring 0 is the tube center
    local = {}
    local[(0, 0)] = 0
    disk.append((0.0, 0.0))
    for ring in range(1, nr + 1):
        for a in range(nv):
            local[(ring, a)] = len(disk)
            ang = 2 * np.pi * a / nv
            rad = r * ring / nr
            disk.append((rad * np.cos(ang), rad * np.sin(ang)))
    nd = len(disk)
    for u in range(nu):
        phi = 2 * np.pi * u / nu
        cp, sp = np.cos(phi), np.sin(phi)
        for (x, y) in disk:
            rho = R + x
            pts.append((rho * cp, rho * sp, y))

    def gid(u, ring, a):
        return (u % nu) * nd + local[(ring, a % nv)]

    cells = []
    for u in range(nu):
        for a in range(nv):
            # innermost wedge
            cells.append([
                [gid(u, 0, 0), gid(u, 1, a), gid(u, 1, a + 1)],
                [gid(u + 1, 0, 0), gid(u + 1, 1, a + 1), gid(u + 1, 1, a)],
                [gid(u, 0, 0), gid(u + 1, 0, 0), gid(u + 1, 1, a), gid(u, 1, a)],
                [gid(u, 1, a + 1), gid(u + 1, 1, a + 1), gid(u + 1, 0, 0), gid(u, 0, 0)],
                [gid(u, 1, a), gid(u + 1, 1, a), gid(u + 1, 1, a + 1), gid(u, 1, a + 1)],
            ])
            for ring in range(1, nr):
                q = [gid(u, ring, a), gid(u, ring, a + 1),
                     gid(u, ring + 1, a + 1), gid(u, ring + 1, a),
                     gid(u + 1, ring, a), gid(u + 1, ring, a + 1),
                     gid(u + 1, ring + 1, a + 1), gid(u + 1, ring + 1, a)]
                cells.append([[q[0], q[1], q[2], q[3]], [q[7], q[6], q[5], q[4]],
                              [q[0], q[4], q[5], q[1]], [q[1], q[5], q[6], q[2]],
                              [q[2], q[6], q[7], q[3]], [q[3], q[7], q[4], q[0]]])
    tet = solid_from_cells(pts, cells)
    return _bundle(tet, [], field_circular)


# -- cylinder with a blind cavity ---------------------------------------------

def cavity_block(na=16, nr=4, nz=4, radius=1.0, height=1.0,
                 cavity_radius=0.5, cavity_depth=0.5):
    """Cylindrical block with a coaxial blind cavity opening on the top face.

    The cavity floor rim is a closed concave ring; all other rims are convex.
    """
    rc = int(round(nr * cavity_radius / radius))
    kc = int(round(nz * (height - cavity_depth) / height))
    if not (0 < rc < nr and 0 < kc < nz):
        raise ValueError("cavity does not fit the grid")
    pts = []
    idx = {}

    def node(ring, a, k):
        key = (ring, a % na if ring > 0 else 0, k)
        if key not in idx:
            idx[key] = len(pts)
            if ring == 0:
                pts.append((0.0, 0.0, k * height / nz))
            else:
                ang = 2 * np.pi * (a % na) / na
                rad = radius * ring / nr
                pts.append((rad * np.cos(ang), rad * np.sin(ang), k * height / nz))
        return idx[key]

    def solid_cell(ring, a, k):
        return not (ring < rc and k >= kc)

    cells = []
    for k in range(nz):
        for a in range(na):
            for ring in range(nr):
                if not solid_cell(ring, a, k):
                    continue
                if ring == 0:
                    cells.append([
                        [node(0, 0, k), node(1, a + 1, k), node(1, a, k)],
                        [node(0, 0, k + 1), node(1, a, k + 1), node(1, a + 1, k + 1)],
                        [node(0, 0, k), node(0, 0, k + 1), node(1, a + 1, k + 1), node(1, a + 1, k)],
                        [node(1, a, k), node(1, a, k + 1), node(0, 0, k + 1), node(0, 0, k)],
                        [node(1, a + 1, k), node(1, a + 1, k + 1), node(1, a, k + 1), node(1, a, k)],
                    ])
                else:
                    q = [node(ring, a, k), node(ring, a + 1, k),
                         node(ring + 1, a + 1, k), node(ring + 1, a, k),
                         node(ring, a, k + 1), node(ring, a + 1, k + 1),
                         node(ring + 1, a + 1, k + 1), node(ring + 1, a, k + 1)]
                    cells.append([[q[0], q[1], q[2], q[3]], [q[7], q[6], q[5], q[4]],
                                  [q[0], q[4], q[5], q[1]], [q[1], q[5], q[6], q[2]],
                                  [q[2], q[6], q[7], q[3]], [q[3], q[7], q[4], q[0]]])
    tet = solid_from_cells(pts, cells)
    surface = extract_surface(tet)
    eps = 1e-9

    def ring_chain(rad, z):
        ids = [v for v in range(surface.n_vertices)
               if abs(np.hypot(*surface.V[v][:2]) - rad) < 1e-6
               and abs(surface.V[v][2] - z) < eps]
        ids.sort(key=lambda v: np.arctan2(surface.V[v][1], surface.V[v][0]))
        return ids + [ids[0]]

    z_floor = kc * height / nz
    r_cav = radius * rc / nr
    chains = [
        ("convex", ring_chain(radius, 0.0)),
        ("convex", ring_chain(radius, height)),
        ("convex", ring_chain(r_cav, height)),
        ("concave", ring_chain(r_cav, z_floor)),
    ]
    field = field_axis_circular(surface)
    features = classify_features(surface, chains)
    return ModelBundle(surface, field, features, tet, chains)


# -- four-sided pyramid --------------------------------------------------------

def pyramid(n=6, m=6, size=2.0, height=2.4):
    """Square pyramid: 4 slant feature curves meeting at the apex plus the
    4 base edges. The apex is an irregular (valence 4) network vertex.

    Steep by default: with height >= 2.2 * half-base the per-face horizontal
    directions transport across the slant creases without a quarter twist,
    so ring loops keep a consistent line class all the way around."""
    pts = []
    idx = {}

    def node(i, j, k):
        # level k in 0..m-1 is an (n+1)^2 grid shrunk toward the axis
        key = (i, j, k)
        if key not in idx:
            s = 1.0 - k / m
            x = (i / n - 0.5) * size * s
            y = (j / n - 0.5) * size * s
            idx[key] = len(pts)
            pts.append((x, y, height * k / m))
        return idx[key]

    apex = None
    cells = []
    for k in range(m - 1):
        for i in range(n):
            for j in range(n):
                q = [node(i, j, k), node(i + 1, j, k), node(i + 1, j + 1, k), node(i, j + 1, k),
                     node(i, j, k + 1), node(i + 1, j, k + 1), node(i + 1, j + 1, k + 1),
                     node(i, j + 1, k + 1)]
                cells.append([[q[0], q[3], q[2], q[1]], [q[4], q[5], q[6], q[7]],
                              [q[0], q[1], q[5], q[4]], [q[1], q[2], q[6], q[5]],
                              [q[2], q[3], q[7], q[6]], [q[3], q[0], q[4], q[7]]])
    apex = len(pts)
    pts.append((0.0, 0.0, height))
    for i in range(n):
        for j in range(n):
            base = [node(i, j, m - 1), node(i + 1, j, m - 1),
                    node(i + 1, j + 1, m - 1), node(i, j + 1, m - 1)]
            cells.append([[base[0], base[3], base[2], base[1]],
                          [base[0], base[1], apex], [base[1], base[2], apex],
                          [base[2], base[3], apex], [base[3], base[0], apex]])
    tet = solid_from_cells(pts, cells)
    surface = extract_surface(tet)
    eps = 1e-9
    half = size / 2

    def on_slant(p, sx, sy):
        # slant edges: x = sx*(half)*(1-z/height), y = sy*(half)*(1-z/height)
        s = 1.0 - p[2] / height
        return (abs(p[0] - sx * half * s) < 1e-6 and abs(p[1] - sy * half * s) < 1e-6)

    chains = []
    for sx, sy in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        ids = _edge_chain(surface, lambda p, sx=sx, sy=sy: on_slant(p, sx, sy),
                          lambda p: p[2])
        chains.append(("convex", ids))
    for axis, s in ((0, -half), (0, half), (1, -half), (1, half)):
        o = 1 - axis
        ids = _edge_chain(
            surface,
            lambda p, axis=axis, s=s: abs(p[axis] - s) < eps and abs(p[2]) < eps,
            lambda p, o=o: p[o])
        chains.append(("convex", ids))

    def pyramid_field(surf):
        reps = np.zeros((surf.n_faces, 3))
        for f in range(surf.n_faces):
            nrm = surf.face_normal[f]
            if abs(nrm[2]) > 0.99:
                reps[f] = [1.0, 0.0, 0.0]
            else:
                t = np.cross([0.0, 0.0, 1.0], nrm)
                reps[f] = t / np.linalg.norm(t)
        return CrossField(surf, reps)

    field = pyramid_field(surface)
    features = classify_features(surface, chains)
    return ModelBundle(surface, field, features, tet, chains)


# -- L-bracket (concave crease fixture) ----------------------------------------

def l_bracket(n=3, depth=1.0):
    """L-shaped prism; the inner vertical crease is concave (270 degrees)."""
    pts = []
    idx = {}

    def node(i, j, k):
        if (i, j, k) not in idx:
            idx[(i, j, k)] = len(pts)
            pts.append((i / n, j / n, depth * k / n))
        return idx[(i, j, k)]

    cells = []
    for i in range(2 * n):
        for j in range(2 * n):
            if i >= n and j >= n:
                continue  # the notch
            for k in range(n):
                q = [node(i, j, k), node(i + 1, j, k), node(i + 1, j + 1, k), node(i, j + 1, k),
                     node(i, j, k + 1), node(i + 1, j, k + 1), node(i + 1, j + 1, k + 1),
                     node(i, j + 1, k + 1)]
                cells.append([[q[0], q[3], q[2], q[1]], [q[4], q[5], q[6], q[7]],
                              [q[0], q[1], q[5], q[4]], [q[1], q[2], q[6], q[5]],
                              [q[2], q[3], q[7], q[6]], [q[3], q[0], q[4], q[7]]])
    tet = solid_from_cells(pts, cells)
    surface = extract_surface(tet)
    ids = _edge_chain(surface,
                      lambda p: abs(p[0] - 1.0) < 1e-9 and abs(p[1] - 1.0) < 1e-9,
                      lambda p: p[2])
    chains = [("auto", ids)]
    field = field_axis(surface)
    features = classify_features(surface, chains)
    return ModelBundle(surface, field, features, tet, chains)


def jittered_cube(n=4, amount=0.15, seed=0):
    """Cube lattice with interior vertices randomly displaced; for solver
    robustness tests."""
    bundle = cube(n)
    tet = bundle.tets
    rng = np.random.default_rng(seed)
    h = 1.0 / n
    interior = np.nonzero(tet.surf_vertex < 0)[0]
    tet.V[interior] += rng.uniform(-amount * h, amount * h, (len(interior), 3))
    return bundle


MODELS = {
    "cube": cube,
    "torus": torus,
    "cavity": cavity_block,
    "pyramid": pyramid,
    "lbracket": l_bracket,
}
