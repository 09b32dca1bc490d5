"""Loop typing and pairing metrics.

A loop's outward curve normals against the surface normals decide whether it
would bound a near-planar cut (type I outside / II inside cavities) or a
cylinder-like cut (type III, normals in the tangent plane). Pairing penalties
are Gaussian similarity scores between fitted planes or cylinders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .loops import position_normal
from .surface import MeshError

TYPE_I = "I"
TYPE_II = "II"
TYPE_III = "III"


@dataclass
class LoopProfile:
    loop_id: int
    type: str
    score: float
    plane_normal: np.ndarray
    centroid: np.ndarray
    axis: np.ndarray
    radius: float
    mean_surface_normal: np.ndarray = None


def loop_profile(graph, loop, type_threshold=0.3):
    """Classify a loop and fit its plane and cylinder.

    The alignment score is the turn-weighted mean of dot(curve normal,
    surface normal); curve normals come from the discrete Frenet frame and
    are globally flipped to point away from the center of mass. Straight
    samples carry no turn and hence no weight.
    """
    P = loop.polyline
    n = len(P)
    if n < 3:
        raise MeshError("degenerate loop polyline")
    seg = np.roll(P, -1, axis=0) - P
    lens = np.linalg.norm(seg, axis=1)
    if np.any(lens < 1e-14):
        keep = lens >= 1e-14
        P = P[keep]
        n = len(P)
        seg = np.roll(P, -1, axis=0) - P
        lens = np.linalg.norm(seg, axis=1)
    T = seg / lens[:, None]
    turn = T - np.roll(T, 1, axis=0)
    w = np.linalg.norm(turn, axis=1)
    com = (P * lens[:, None]).sum(axis=0) / lens.sum()

    good = w > 1e-7
    if not np.any(good):
        raise MeshError("collinear loop polyline: no curve normals")
    normals = np.zeros_like(P)
    normals[good] = turn[good] / w[good][:, None]

    flip = float(np.sum(w[good] * np.einsum("ij,ij->i", normals[good],
                                            P[good] - com)))
    if flip < 0:
        normals = -normals

    if loop.normal_faces is not None:
        surf_n = graph.surface.face_normal[
            np.asarray(loop.normal_faces, dtype=np.int64)[:n]]
    else:
        surf_n = np.array([position_normal(graph, int(p))
                           for p in loop.positions[:n]])
    score = float(np.sum(w[good] * np.einsum(
        "ij,ij->i", normals[good], surf_n[good])) / w[good].sum())

    if score > type_threshold:
        ltype = TYPE_I
    elif score < -type_threshold:
        ltype = TYPE_II
    else:
        ltype = TYPE_III

    # least-squares plane through the samples
    centered = (P - com) * np.sqrt(lens)[:, None]
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    plane_n = vt[-1]

    # cylinder axis: null direction of the curve-normal covariance
    wn = normals[good] * np.sqrt(w[good])[:, None]
    _, _, vtn = np.linalg.svd(wn, full_matrices=False)
    axis = vtn[-1]
    mean_sn = surf_n[good].mean(axis=0)
    if axis @ mean_sn < 0:
        axis = -axis
    rel = P - com
    rad = np.linalg.norm(rel - np.outer(rel @ axis, axis), axis=1)
    radius = float((rad * lens).sum() / lens.sum())

    msn = surf_n.mean(axis=0)
    nrm = np.linalg.norm(msn)
    msn = msn / nrm if nrm > 1e-12 else msn
    return LoopProfile(loop_id=loop.id, type=ltype, score=score,
                       plane_normal=plane_n, centroid=com, axis=axis,
                       radius=radius, mean_surface_normal=msn)


def e_plane(pi: LoopProfile, pj: LoopProfile, eps_c=1e-9):
    """Plane-similarity penalty in (0,1]: small when the loops span the same
    plane, larger with angular or offset mismatch."""
    ndot = abs(float(pi.plane_normal @ pj.plane_normal))
    delta = pi.centroid - pj.centroid
    dist = float(np.linalg.norm(delta))
    if dist < eps_c:
        off = 0.0
    else:
        c = delta / dist
        off = max(abs(float(c @ pi.plane_normal)),
                  abs(float(c @ pj.plane_normal)))
    return 0.5 * (np.exp(-(ndot ** 2) / 0.2) + np.exp(-((1.0 - off) ** 2) / 0.2))


def e_cyl(pi: LoopProfile, pj: LoopProfile, literal=False):
    """Cylinder-similarity penalty in [0,1]: small for opposite axis
    orientations and matching radii.

    literal=True evaluates the radius term with +min(ratio) instead of
    1-min(ratio); that variant rewards mismatched radii.
    """
    ddot = float(pi.axis @ pj.axis)
    ratio = min(pi.radius / pj.radius, pj.radius / pi.radius) \
        if pi.radius > 0 and pj.radius > 0 else 0.0
    ang = 1.0 - np.exp(-((1.0 + ddot) ** 2) / 0.2)
    rterm = ratio if literal else 1.0 - ratio
    return 0.5 * (ang + rterm)


def pair_penalty(pi, pj, eps_c=1e-9, literal_cyl=False):
    """Full pairing metric: plane term for I/II pairs, cylinder term for
    III/III pairs, infinite across types."""
    planar = (TYPE_I, TYPE_II)
    if pi.type in planar and pj.type in planar:
        return float(e_plane(pi, pj, eps_c))
    if pi.type == TYPE_III and pj.type == TYPE_III:
        return float(e_cyl(pi, pj, literal_cyl))
    return np.inf


def loop_separates(surface, loop):
    """True when cutting the surface along the loop chain disconnects it."""
    blocked = {frozenset(p) for p in loop.chain_edge_pairs()}
    seen = np.zeros(surface.n_faces, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        f = stack.pop()
        for ei in surface.face_edges[f]:
            u, v = surface.edges[ei]
            if frozenset((int(u), int(v))) in blocked:
                continue
            g = surface.other_face(ei, f)
            if not seen[g]:
                seen[g] = True
                stack.append(g)
    return not seen.all()


@dataclass
class CavityClusters:
    anchor_of: dict      # type-II loop id -> type-I anchor id (or None)
    clusters: dict       # type-I anchor id -> sorted type-II member ids
    mate_of: dict        # contractible type-III loop id -> best mate id
    unanchored: list     # type-II loops with no type-I candidate


def precompute_cavity_clusters(surface, loops, profiles, eps_c=1e-9,
                               literal_cyl=False, anchor_threshold=0.2):
    """Anchor every type-II loop to its best type-I loop and pair every
    separating (contractible) type-III loop with its best type-III mate.

    Anchoring requires a genuinely small plane penalty; a type-II loop with
    no near-coplanar type-I partner stays unanchored rather than forcing an
    arbitrary distant pairing."""
    by_id = {lp.id: lp for lp in loops}
    anchor_of = {}
    clusters = {}
    unanchored = []
    t1 = [p for p in profiles.values() if p.type == TYPE_I]
    for pid, prof in sorted(profiles.items()):
        if prof.type != TYPE_II:
            continue
        best, best_e = None, np.inf
        for cand in t1:
            e = e_plane(prof, profiles[cand.loop_id], eps_c)
            if e < best_e:
                best, best_e = cand.loop_id, e
        if best_e > anchor_threshold:
            best = None
        anchor_of[pid] = best
        if best is None:
            unanchored.append(pid)
        else:
            clusters.setdefault(best, []).append(pid)
    for k in clusters:
        clusters[k].sort()

    mate_of = {}
    t3 = [p for p in profiles.values() if p.type == TYPE_III]
    for prof in sorted(t3, key=lambda p: p.loop_id):
        if not loop_separates(surface, by_id[prof.loop_id]):
            continue
        best, best_e = None, np.inf
        for cand in t3:
            if cand.loop_id == prof.loop_id:
                continue
            e = e_cyl(prof, cand, literal_cyl)
            if e < best_e:
                best, best_e = cand.loop_id, e
        if best is not None:
            mate_of[prof.loop_id] = best
    return CavityClusters(anchor_of, clusters, mate_of, unanchored)
