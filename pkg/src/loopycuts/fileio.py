"""File formats: OBJ surfaces, plain-text fields/features/loops, MEDIT tet
meshes, legacy-VTK volumetric output with cell quality."""

from __future__ import annotations

import os

import numpy as np

from .surface import CrossField, SurfaceMesh, classify_features, detect_sharp_chains, MeshError
from .volume import TetMesh


# -- surface ---------------------------------------------------------------

def read_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                ids = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                if len(ids) != 3:
                    raise MeshError("only triangle faces supported")
                faces.append(ids)
    return SurfaceMesh(np.array(verts), np.array(faces, dtype=np.int64))


def write_obj(path, surface):
    with open(path, "w") as fh:
        for p in surface.V:
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for a, b, c in surface.F:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


# -- cross field -------------------------------------------------------------

def read_field(path, surface):
    reps = np.zeros((surface.n_faces, 3))
    seen = np.zeros(surface.n_faces, dtype=bool)
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            t = int(parts[0])
            reps[t] = [float(x) for x in parts[1:4]]
            seen[t] = True
    if not seen.all():
        raise MeshError("field file does not cover every triangle")
    return CrossField(surface, reps)


def write_field(path, field):
    with open(path, "w") as fh:
        for t, d in enumerate(field.rep):
            fh.write(f"{t} {d[0]:.17g} {d[1]:.17g} {d[2]:.17g}\n")


# -- features ------------------------------------------------------------------

def read_feature_chains(path):
    chains = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            chains.append((parts[0], [int(v) for v in parts[1:]]))
    return chains


def write_feature_chains(path, chains):
    with open(path, "w") as fh:
        for kind, ids in chains:
            fh.write(kind + " " + " ".join(str(v) for v in ids) + "\n")


def features_to_chains(network):
    out = []
    for c in network.curves:
        ids = list(c.vertices)
        if c.closed:
            ids = ids + [ids[0]]
        out.append((c.kind, ids))
    return out


# -- tet meshes (MEDIT .mesh) -----------------------------------------------------

def read_medit(path):
    verts, tets = [], []
    with open(path) as fh:
        tokens = fh.read().split()
    i = 0
    while i < len(tokens):
        tok = tokens[i].lower()
        if tok == "vertices":
            n = int(tokens[i + 1]); i += 2
            for _ in range(n):
                verts.append([float(tokens[i]), float(tokens[i + 1]),
                              float(tokens[i + 2])])
                i += 4  # + ref
        elif tok == "tetrahedra":
            n = int(tokens[i + 1]); i += 2
            for _ in range(n):
                tets.append([int(tokens[i]) - 1, int(tokens[i + 1]) - 1,
                             int(tokens[i + 2]) - 1, int(tokens[i + 3]) - 1])
                i += 5
        elif tok in ("meshversionformatted", "dimension"):
            i += 2
        elif tok == "end":
            break
        else:
            i += 1
    if not verts or not tets:
        raise MeshError(f"no tetrahedra in {path}")
    return TetMesh(np.array(verts), tets)


def write_medit(path, tet: TetMesh, labels=False):
    alive = tet.alive()
    with open(path, "w") as fh:
        fh.write("MeshVersionFormatted 2\nDimension 3\nVertices\n")
        fh.write(f"{len(tet.V)}\n")
        for p in tet.V:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g} 0\n")
        fh.write(f"Tetrahedra\n{len(alive)}\n")
        for i in alive:
            a, b, c, d = tet.tets[i]
            ref = int(tet.labels[i]) + 1 if labels else 0
            fh.write(f"{a + 1} {b + 1} {c + 1} {d + 1} {ref}\n")
        fh.write("End\n")


# -- hex meshes (legacy VTK) -------------------------------------------------------

def write_vtk_hexmesh(path, hexmesh):
    """Unstructured grid: hexahedra plus general polyhedra, with the scaled
    Jacobian as cell data (-2 marks non-hex cells)."""
    pts = hexmesh.V
    cells = []
    types = []
    for h in hexmesh.hexes:
        cells.append([8] + list(h))
        types.append(12)
    for poly in hexmesh.polyhedra:
        stream = [len(poly)]
        for face in poly:
            stream.append(len(face))
            stream.extend(face)
        cells.append([len(stream)] + stream)
        types.append(42)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nloopycuts hex mesh\nASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(pts)} double\n")
        for p in pts:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        total = sum(len(c) for c in cells)
        fh.write(f"CELLS {len(cells)} {total}\n")
        for c in cells:
            fh.write(" ".join(str(x) for x in c) + "\n")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        for t in types:
            fh.write(f"{t}\n")
        fh.write(f"CELL_DATA {len(cells)}\n")
        fh.write("SCALARS scaled_jacobian double 1\nLOOKUP_TABLE default\n")
        sj = list(hexmesh.hex_quality()) + [-2.0] * len(hexmesh.polyhedra)
        for v in sj:
            fh.write(f"{v:.17g}\n")


def read_vtk_counts(path):
    """(points, hex cells, polyhedron cells) of a legacy VTK file."""
    npts = ncell = 0
    types = []
    with open(path) as fh:
        lines = fh.readlines()
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if parts[:1] == ["POINTS"]:
            npts = int(parts[1])
        elif parts[:1] == ["CELL_TYPES"]:
            ncell = int(parts[1])
            for j in range(ncell):
                types.append(int(lines[i + 1 + j]))
            i += ncell
        i += 1
    return npts, types.count(12), types.count(42)


def write_vtk_tet_scalar(path, tet: TetMesh, values, name="harmonic"):
    """Debug dump: tet mesh with a per-vertex scalar."""
    alive = tet.alive()
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nloopycuts cut field\nASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(tet.V)} double\n")
        for p in tet.V:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        fh.write(f"CELLS {len(alive)} {len(alive) * 5}\n")
        for i in alive:
            a, b, c, d = tet.tets[i]
            fh.write(f"4 {a} {b} {c} {d}\n")
        fh.write(f"CELL_TYPES {len(alive)}\n")
        for _ in alive:
            fh.write("10\n")
        fh.write(f"POINT_DATA {len(tet.V)}\n")
        fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        for v in values:
            fh.write(f"{v:.17g}\n")


# -- loops -------------------------------------------------------------------------

def write_loops(path, loops, surface):
    """One record per loop: header line with the polyline, then the exact
    per-segment triangle ids (left face of each chain step)."""
    with open(path, "w") as fh:
        for lp in loops:
            pts = surface.V[lp.chain]
            coords = " ".join(f"{x:.17g}" for p in pts for x in p)
            fh.write(f"loop {lp.id} {lp.source} {len(lp.chain)}  {coords}\n")
            tris = [surface.halfedge_face(a, b) for a, b in lp.chain_edge_pairs()]
            fh.write("tris " + " ".join(str(t) for t in tris) + "\n")


def read_loop_records(path):
    records = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "loop":
                n = int(parts[3])
                coords = np.array([float(x) for x in parts[4:4 + 3 * n]])
                records.append({"id": int(parts[1]), "source": parts[2],
                                "points": coords.reshape(n, 3), "tris": []})
            elif parts[0] == "tris":
                records[-1]["tris"] = [int(t) for t in parts[1:]]
    return records


# -- bundles -------------------------------------------------------------------------

def load_inputs(surface_path, field_path, features_path, tet_path,
                angle_threshold=np.deg2rad(30.0)):
    surface = read_obj(surface_path)
    field = read_field(field_path, surface)
    chains = read_feature_chains(features_path) if features_path else []
    if not chains:
        chains = detect_sharp_chains(surface, angle_threshold)
    features = classify_features(surface, chains, angle_threshold)
    tet = read_medit(tet_path)
    tet.validate_boundary(surface)
    return surface, field, features, tet


def write_model(outdir, bundle):
    os.makedirs(outdir, exist_ok=True)
    write_obj(os.path.join(outdir, "surface.obj"), bundle.surface)
    write_field(os.path.join(outdir, "field.txt"), bundle.field)
    write_feature_chains(os.path.join(outdir, "features.txt"), bundle.raw_chains)
    write_medit(os.path.join(outdir, "tets.mesh"), bundle.tets)
    return {
        "surface": os.path.join(outdir, "surface.obj"),
        "field": os.path.join(outdir, "field.txt"),
        "features": os.path.join(outdir, "features.txt"),
        "tets": os.path.join(outdir, "tets.mesh"),
    }
