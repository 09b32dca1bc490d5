"""Ordered loop queue: feature initialization, loop-space distances and
biased furthest-point sampling over a dynamic candidate pool."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .loops import (FEATURE_CLASS_MARGIN, Loop, blocked_pairs_of,
                    chain_footprint, chain_positions, chain_vertex_classes,
                    classify_intersection, count_crossings, loop_from_chain,
                    trace_loop)
from .surface import MeshError
from .tracegraph import carve_corridors


class CurveMark:
    """Constrained curve (convex feature or user-marked loop): blocks
    tangential traffic but is never cut through."""

    def __init__(self, graph, chain, closed, curve_id, kind="convex"):
        self.id = curve_id
        self.kind = kind
        self.chain = list(chain)
        self.closed = closed
        self.footprint = chain_footprint(graph, self.chain, closed=closed,
                                         min_dot=FEATURE_CLASS_MARGIN)
        self.vertex_classes = chain_vertex_classes(
            graph, self.chain, closed=closed, min_dot=FEATURE_CLASS_MARGIN)
        self.positions = chain_positions(graph, self.chain, closed=closed)
        self.polyline = graph.pos_xyz[self.positions].copy()

    def blocked_pairs(self):
        return {(t, c) for t, cs in self.footprint.items() for c in cs}


@dataclass
class Candidate:
    id: int
    loop: Loop
    seed: int        # graph node the trace starts from; used for retracing
    origin: str      # "curve" | "poisson"


class LoopPool:
    def __init__(self):
        self.candidates = {}
        self._next = 0

    def add(self, loop, seed, origin):
        cid = self._next
        self._next += 1
        loop.id = -1  # pool candidates get a queue id only on selection
        self.candidates[cid] = Candidate(cid, loop, seed, origin)
        return cid

    def remove(self, cid):
        del self.candidates[cid]

    def __len__(self):
        return len(self.candidates)

    def items(self):
        return sorted(self.candidates.items())


class LoopQueue:
    def __init__(self, graph, features, kappa=0.1, rng=None):
        self.graph = graph
        self.surface = graph.surface
        self.features = features
        self.kappa = kappa
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.loops = []            # L, in selection order
        self.cf = []               # constrained curves (CF)
        self.arc_counts = []       # per loop: crossings with other queue loops
        self.unresolved = []       # feature ids that failed to extend
        self.synthetic_convex = []  # chains added as convex by extension
        self.pool = LoopPool()
        self.log = []
        self._next_loop_id = 0
        self._dist_cache = None

    # -- membership -----------------------------------------------------------

    def lbar(self):
        """Loops plus constrained curves."""
        return list(self.loops) + list(self.cf)

    def blocked_pairs(self, exclude_feature=None):
        pairs = set()
        for lp in self.loops:
            pairs |= blocked_pairs_of(lp)
        for cm in self.cf:
            if exclude_feature is not None and cm.id == exclude_feature:
                continue
            pairs |= cm.blocked_pairs()
        return pairs

    def lhat_indices(self):
        return [i for i, c in enumerate(self.arc_counts) if c < 3]

    def add_constrained(self, chain, closed, curve_id, kind="convex"):
        self.cf.append(CurveMark(self.graph, chain, closed, curve_id, kind))

    def push_loop(self, loop: Loop):
        loop.id = self._next_loop_id
        self._next_loop_id += 1
        crossings = []
        for other in self.loops:
            kind = classify_intersection(self.surface, loop, other)
            same_feature = (loop.feature_id is not None
                            and loop.feature_id == other.feature_id)
            if kind == "tangential" and not same_feature:
                raise MeshError(
                    f"tangential pair entered the queue: {loop.id}/{other.id}")
            crossings.append(count_crossings(self.surface, loop, other))
        for i, c in enumerate(crossings):
            self.arc_counts[i] += c
        self.arc_counts.append(sum(crossings))
        self.loops.append(loop)
        self._dist_cache = None
        return loop.id

    # -- feature initialization --------------------------------------------------

    def init_from_features(self):
        """Queue steps 1-3: closed non-convex rings, open feature extension,
        dangling convex endpoints."""
        g = self.graph
        for c in sorted(self.features.by_kind("convex"), key=lambda c: c.id):
            self.add_constrained(list(c.vertices), c.closed, c.id)

        for c in sorted(self.features.curves, key=lambda c: c.id):
            if c.kind == "convex":
                continue
            if c.closed:
                sides = ("left", "right") if c.kind == "concave" else ("left",)
                for side in sides:
                    lp = loop_from_chain(g, list(c.vertices), source=f"feature:{c.id}:{side}",
                                         side=side, feature_id=c.id)
                    self.push_loop(lp)
            else:
                self._extend_open_feature(c)

        for c in sorted(self.features.by_kind("convex"), key=lambda c: c.id):
            if c.closed:
                continue
            dangling = [v for v in c.endpoints
                        if self.features.vertex_degree.get(v, 0) == 1]
            if len(dangling) == 1:
                self._extend_convex(c, dangling[0])

    def _spanning_loops(self, curve):
        """Queue loops that already run along most of this feature."""
        out = []
        for lp in self.loops:
            hit = sum(1 for v in curve.vertices if v in set(lp.chain))
            if hit >= max(2, len(curve.vertices) // 2):
                out.append(lp)
        return out

    def _extend_open_feature(self, curve):
        g = self.graph
        need = 2 if curve.kind == "concave" else 1
        produced = len(self._spanning_loops(curve))
        if produced >= need:
            self.log.append(f"feature {curve.id} already spanned")
            return
        view, sides = carve_corridors(g, curve, kappa=self.kappa)
        own = {(t, c) for t, cs in
               chain_footprint(g, list(curve.vertices), closed=False).items()
               for c in cs}
        for side in ("left", "right"):
            if produced >= need:
                break
            info = sides[side]
            if info["seed"] is None:
                continue
            blocked = self.blocked_pairs() - own
            lp = trace_loop(g, info["seed"], blocked, view=view,
                            source=f"feature:{curve.id}:{side}",
                            forced_snap=info["forced"])
            if lp is None:
                continue
            lp.feature_id = curve.id
            if any(classify_intersection(self.surface, lp, m) == "tangential"
                   for m in self.loops):
                continue
            self.push_loop(lp)
            produced += 1
        if produced < need:
            self.unresolved.append(curve.id)
            self.log.append(f"unresolved feature {curve.id} ({curve.kind})")

    def _extend_convex(self, curve, endpoint):
        """Continue a dangling convex feature straight ahead into a loop; on
        failure trace an orthogonal loop through the endpoint instead."""
        g = self.graph
        s = self.surface
        vs = list(curve.vertices)
        if vs[0] == endpoint:
            vs = vs[::-1]
        d = s.V[vs[-1]] - s.V[vs[-2]]
        d = d / np.linalg.norm(d)
        seed = self._aligned_seed_near(endpoint, d)
        if seed is not None:
            blocked = self.blocked_pairs(exclude_feature=curve.id)
            lp = trace_loop(g, seed, blocked, source=f"extend:{curve.id}")
            if lp is not None and set(curve.vertices) & set(lp.chain):
                self.synthetic_convex.append(lp.chain)
                self.add_constrained(lp.chain, True, 10000 + curve.id)
                self.log.append(f"convex feature {curve.id} extended to a loop")
                return
        seed = self._aligned_seed_near(endpoint, d, orthogonal=True)
        if seed is not None:
            lp = trace_loop(g, seed, self.blocked_pairs(),
                            source=f"tjunction:{curve.id}")
            if lp is not None:
                self.push_loop(lp)
                self.log.append(f"orthogonal loop through endpoint of {curve.id}")
                return
        self.unresolved.append(curve.id)

    def _aligned_seed_near(self, vertex, direction, orthogonal=False):
        g = self.graph
        best = None
        best_d = np.inf
        for ei in self.surface.vertex_edges[vertex]:
            for k in range(g.steiner_per_edge):
                p = g.steiner_pos(ei, k)
                if not g.pos_alive[p]:
                    continue
                for sheet in range(4):
                    nd = g.node_direction(g.node(p, sheet))
                    dot = float(nd @ direction)
                    score = -abs(dot) if orthogonal else -dot
                    if score < best_d:
                        best_d = score
                        best = g.node(p, sheet)
        return best

    # -- loop-space distance ---------------------------------------------------------

    def distance_field(self):
        """Multi-source propagation from every position of every member of
        Lbar, all four sheets (one Dijkstra serves all queries)."""
        if self._dist_cache is not None:
            return self._dist_cache
        nodes = []
        for m in self.lbar():
            for p in m.positions:
                p = int(p)
                if self.graph.pos_alive[p]:
                    nodes.extend(self.graph.node(p, k) for k in range(4))
        if not nodes:
            dist = np.full(self.graph.n_nodes, np.inf)
        else:
            dist, _ = self.graph.propagate(nodes)
        self._dist_cache = dist
        return dist

    def loop_distance(self, loop):
        if not self.lbar():
            return np.inf
        dist = self.distance_field()
        pos = np.array([int(p) for p in loop.positions], dtype=np.int64)
        alive = self.graph.pos_alive[pos]
        per = np.full(len(pos), np.inf)
        for k in range(4):
            per = np.minimum(per, dist[pos * 4 + k])
        w = loop.sample_weights() * alive
        if w.sum() <= 0:
            return np.inf
        per = np.where(np.isfinite(per), per, self.surface.bbox_diag * 10)
        return float((per * w).sum() / w.sum())

    # -- pool ---------------------------------------------------------------------------

    def _position_tree(self):
        if not hasattr(self, "_ptree"):
            alive = self.graph.pos_alive.copy()
            alive[self.surface.n_vertices:] = False
            alive_idx = np.nonzero(alive)[0]
            self._ptree_ids = alive_idx
            self._ptree = cKDTree(self.graph.pos_xyz[alive_idx])
        return self._ptree

    def nearest_position(self, point):
        tree = self._position_tree()
        _, k = tree.query(point)
        return int(self._ptree_ids[k])

    def _orthogonal_seeds(self, pos, tangent):
        g = self.graph
        scores = []
        for cls in (0, 1):
            nd = g.node_direction(g.node(pos, cls))
            scores.append(abs(float(nd @ tangent)))
        cls = int(np.argmin(scores))
        return [g.node(pos, cls), g.node(pos, cls + 2)]

    def _class_seeds(self, pos, cls):
        return [self.graph.node(pos, cls), self.graph.node(pos, cls + 2)]

    def _trace_candidate(self, seeds, origin):
        blocked = self.blocked_pairs()
        best = None
        for seed in seeds:
            lp = trace_loop(self.graph, seed, blocked)
            if lp is None:
                continue
            if not self._candidate_ok(lp):
                continue
            if best is None or lp.polyline_length() < best[0].polyline_length():
                best = (lp, seed)
        if best is None:
            return None
        return self.pool.add(best[0], best[1], origin)

    def _candidate_ok(self, lp):
        used_edges = set()
        for m in self.lbar():
            if classify_intersection(self.surface, lp, m) == "tangential":
                return False
            ch = m.chain if hasattr(m, "chain") else []
            n = len(ch)
            rng = range(n if getattr(m, "closed", True) else n - 1)
            for i in rng:
                used_edges.add(frozenset((ch[i], ch[(i + 1) % n])))
        new_edges = {frozenset(p) for p in lp.chain_edge_pairs()}
        if new_edges & used_edges:
            return False
        for c in self.pool.candidates.values():
            if {frozenset(p) for p in c.loop.chain_edge_pairs()} == new_edges:
                return False
        return True

    def curve_stations(self, member, interval):
        """Sample positions along a queue member at fixed arc-length steps."""
        pts = member.polyline
        pos = member.positions
        closed = getattr(member, "closed", True)
        n = len(pts)
        if closed:
            seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        else:
            seg = np.linalg.norm(pts[1:] - pts[:-1], axis=1)
        total = seg.sum()
        if total <= 0:
            return []
        k = max(int(total // interval), 1)
        stations = []
        acc = 0.0
        i = 0
        for j in range(k):
            target = j * interval
            while i < len(seg) - 1 and acc + seg[i] < target:
                acc += seg[i]
                i += 1
            stations.append(i)
        out = []
        for i in sorted(set(stations)):
            p = int(pos[i])
            if self.graph.pos_alive[p]:
                lo = (i - 1) % n if closed else max(i - 1, 0)
                hi = (i + 1) % n if closed else min(i + 1, n - 1)
                tangent = pts[hi] - pts[lo]
                nt = np.linalg.norm(tangent)
                if nt > 1e-12:
                    out.append((p, tangent / nt))
        return out

    def seed_pool(self, sample_interval, poisson_radius):
        before = len(self.pool)
        for m in self.lbar():
            for pos, tangent in self.curve_stations(m, sample_interval):
                self._trace_candidate(self._orthogonal_seeds(pos, tangent),
                                      "curve")
        for pt in poisson_samples(self.surface, poisson_radius, self.rng):
            pos = self.nearest_position(pt)
            for cls in (0, 1):
                self._trace_candidate(self._class_seeds(pos, cls), "poisson")
        return len(self.pool) - before

    def replenish(self, new_loop, sample_interval):
        for pos, tangent in self.curve_stations(new_loop, sample_interval):
            self._trace_candidate(self._orthogonal_seeds(pos, tangent), "curve")
        stale = []
        for cid, cand in self.pool.items():
            kind = classify_intersection(self.surface, cand.loop, new_loop)
            if kind == "tangential" or not self._chain_disjoint(cand.loop, new_loop):
                stale.append(cid)
        blocked = self.blocked_pairs()
        for cid in stale:
            cand = self.pool.candidates[cid]
            self.pool.remove(cid)
            lp = trace_loop(self.graph, cand.seed, blocked)
            if lp is not None and self._candidate_ok(lp):
                self.pool.add(lp, cand.seed, cand.origin)

    def _chain_disjoint(self, l1, l2):
        e1 = {frozenset(p) for p in l1.chain_edge_pairs()}
        e2 = {frozenset(p) for p in l2.chain_edge_pairs()}
        return not (e1 & e2)

    # -- selection ---------------------------------------------------------------------

    def next_loop(self, g3_tol=0.15):
        """Pull the best candidate: prefer those that cross loops still under
        three arcs (the more of them the better), then those that subdivide a
        patch failing the accuracy test, then maximize loop-space distance
        from Lbar; ties resolve to the lowest candidate id."""
        if len(self.pool) == 0:
            return None
        lhat = [self.loops[i] for i in self.lhat_indices()]
        fixes = {}
        for cid, cand in self.pool.items():
            fixes[cid] = sum(1 for h in lhat
                             if count_crossings(self.surface, cand.loop, h) > 0)
        top = max(fixes.values(), default=0)
        if lhat and top == 0:
            # nothing in the pool can raise an under-crossed loop to three
            # arcs (e.g. only parallel rings are traceable on this shape);
            # treat like exhaustion so the caller may reseed or stop
            return None
        helps = {cid: 0 for cid in self.pool.candidates}
        if not lhat and self.loops:
            base = self.network_edges()
            _, report = patch_accuracy(self.surface, base, g3_tol)
            fail0 = sum(a for _, a, _, good in report if not good)
            if fail0 > 0:
                for cid, cand in self.pool.items():
                    edges = base | {frozenset(p)
                                    for p in cand.loop.chain_edge_pairs()}
                    _, rep2 = patch_accuracy(self.surface, edges, g3_tol)
                    fail1 = sum(a for _, a, _, good in rep2 if not good)
                    helps[cid] = int(fail1 < fail0 - 1e-12)
        top_help = max(helps.values(), default=0)
        best_cid, best_d = None, -np.inf
        for cid, cand in self.pool.items():
            if fixes[cid] != top or helps[cid] != top_help:
                continue
            d = self.loop_distance(cand.loop)
            if d > best_d:
                best_cid, best_d = cid, d
        cand = self.pool.candidates[best_cid]
        self.pool.remove(best_cid)
        loop = cand.loop
        self.push_loop(loop)
        self.log.append(
            f"step {len(self.loops)}  chosen loop {loop.id}  "
            f"distance {best_d:.9g}  lhat {len(self.lhat_indices())}  "
            f"pool {len(self.pool)}")
        return loop

    def build(self, sample_interval, poisson_radius, g3_tol=0.15,
              max_loops=64, reseed_rounds=4):
        """Drive selection until the stopping criteria hold: every loop
        crossed at least three times and all loop-network patches accurate.
        The pool is re-seeded with a shrinking Poisson radius when it runs
        dry before the criteria are met."""
        self.seed_pool(sample_interval, poisson_radius)
        rounds = 0
        while len(self.loops) < max_loops:
            if self.loops and self.loops_done(g3_tol):
                return True
            lp = self.next_loop(g3_tol)
            if lp is None:
                if rounds >= reseed_rounds:
                    return self.loops_done(g3_tol)
                rounds += 1
                poisson_radius *= 0.6
                sample_interval *= 0.6
                self.log.append(f"pool reseed round {rounds} "
                                f"radius {poisson_radius:.6g}")
                added = self.seed_bad_patches(g3_tol)
                added += self.seed_pool(sample_interval, poisson_radius)
                if added == 0 or len(self.pool) == 0:
                    return self.loops_done(g3_tol)
                continue
            self.replenish(lp, sample_interval)
        return self.loops_done(g3_tol)

    def seed_bad_patches(self, g3_tol):
        """Trace candidates from inside every patch failing the area test."""
        before = len(self.pool)
        blocked_edges = self.network_edges()
        comp, n = surface_patches(self.surface, blocked_edges)
        _, report = patch_accuracy(self.surface, blocked_edges, g3_tol)
        for pid, _, _, good in report:
            if good:
                continue
            faces = np.nonzero(comp == pid)[0]
            f = int(faces[np.argmax(self.surface.face_area[faces])])
            for v in sorted(int(x) for x in self.surface.F[f]):
                if self.graph.pos_alive[v]:
                    for cls in (0, 1):
                        self._trace_candidate(self._class_seeds(v, cls),
                                              "patch")
                    break
        return len(self.pool) - before

    # -- termination --------------------------------------------------------------------

    def network_edges(self):
        """Surface edges used by queue loops and constrained curves."""
        edges = set()
        for m in self.lbar():
            ch = m.chain
            n = len(ch)
            steps = n if getattr(m, "closed", True) else n - 1
            for i in range(steps):
                edges.add(frozenset((ch[i], ch[(i + 1) % n])))
        return edges

    def loops_done(self, g3_tol=0.15):
        if not self.loops:
            return False
        if any(c < 3 for c in self.arc_counts):
            return False
        ok, _ = patch_accuracy(self.surface, self.network_edges(), g3_tol)
        return ok


# -- surface patches for the sampling-phase accuracy test ------------------------

def surface_patches(surface, blocked_edges):
    """Triangle components separated by the blocked edge set."""
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
                if frozenset((int(u), int(v))) in blocked_edges:
                    continue
                g = surface.other_face(ei, f)
                if comp[g] < 0:
                    comp[g] = nxt
                    stack.append(g)
        nxt += 1
    return comp, nxt


def patch_boundary_corners(surface, patch_faces, blocked_edges, corner_set):
    """Cyclic corner sequences of a patch's boundary components."""
    boundary = []
    in_patch = set(patch_faces)
    for f in patch_faces:
        a, b, c = surface.F[f]
        for u, v in ((a, b), (b, c), (c, a)):
            if frozenset((int(u), int(v))) in blocked_edges:
                boundary.append((int(u), int(v)))
    if not boundary:
        return []
    starts = set(boundary)

    def rotate_next(u, v):
        # rotate around v facet by facet inside the patch, never crossing a
        # boundary edge (keeps pinched rings separate)
        f = surface.halfedge_face(u, v)
        guard = 0
        while True:
            a, b, c = (int(x) for x in surface.F[f])
            y = b if a == v else (c if b == v else a)
            if (v, y) in starts:
                return (v, y)
            f = surface.halfedge_face(y, v)
            guard += 1
            if guard > 2 * len(boundary) + len(patch_faces) + 8:
                raise MeshError("patch boundary walk stuck")

    loops = []
    left = set(boundary)
    turn_cos = np.cos(np.deg2rad(45.0))
    while left:
        he = min(left)
        cyc = []
        cur = he
        while True:
            left.discard(cur)
            cyc.append(cur)
            cur = rotate_next(*cur)
            if cur == he:
                break
        corners = []
        for i, (u, v) in enumerate(cyc):
            if v in corner_set:
                corners.append(v)
                continue
            # geometric corner: the boundary turns sharply at v
            w = cyc[(i + 1) % len(cyc)][1]
            d1 = surface.V[v] - surface.V[u]
            d2 = surface.V[w] - surface.V[v]
            d1 /= np.linalg.norm(d1)
            d2 /= np.linalg.norm(d2)
            if float(d1 @ d2) < turn_cos:
                corners.append(v)
        loops.append(corners)
    return loops


def patch_accuracy(surface, blocked_edges, tol):
    """g3 test: every patch needs >=3 corners, one boundary component, and a
    flat corner-polygon area within tol of the true patch area."""
    deg = {}
    for e in blocked_edges:
        for v in e:
            deg[v] = deg.get(v, 0) + 1
    corner_set = {v for v, d in deg.items() if d != 2}
    comp, n = surface_patches(surface, blocked_edges)
    report = []
    ok = True
    for pid in range(n):
        faces = np.nonzero(comp == pid)[0]
        area = float(surface.face_area[faces].sum())
        rings = patch_boundary_corners(surface, faces.tolist(), blocked_edges,
                                       corner_set)
        if len(rings) != 1 or len(rings[0]) < 3:
            ok = False
            report.append((pid, area, None, False))
            continue
        poly = surface.V[rings[0]]
        center = poly.mean(axis=0)
        flat = 0.0
        for i in range(len(poly)):
            a = poly[i] - center
            b = poly[(i + 1) % len(poly)] - center
            flat += 0.5 * np.linalg.norm(np.cross(a, b))
        dev = abs(area - flat) / max(area, 1e-30)
        good = dev <= tol
        ok = ok and good
        report.append((pid, area, dev, good))
    return ok, report


def poisson_samples(surface, radius, rng, attempts_factor=30):
    """Seeded dart throwing on the surface (area-weighted triangle choice)."""
    area = surface.face_area
    p = area / area.sum()
    n_attempts = max(int(attempts_factor * area.sum() / (np.pi * radius ** 2)), 32)
    kept = []
    faces = rng.choice(surface.n_faces, size=n_attempts, p=p)
    r1 = np.sqrt(rng.random(n_attempts))
    r2 = rng.random(n_attempts)
    for f, a, b in zip(faces, r1, r2):
        tri = surface.V[surface.F[f]]
        pt = (1 - a) * tri[0] + a * (1 - b) * tri[1] + a * b * tri[2]
        if all(np.linalg.norm(pt - q) >= radius for q in kept):
            kept.append(pt)
    return kept
