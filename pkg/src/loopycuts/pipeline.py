"""End-to-end orchestration: queue, cuts, meta criteria, hex output.

The same engine serves the fully automatic run and the interactive session;
every mutation is journaled and the journal replays bit-exactly.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import fileio
from .hexgen import midpoint_subdivide, quality_report, refine, smooth_project
from .loops import classify_intersection
from .metamesh import MetaMesh, clean_topology, decomposition_done, evaluate_criteria
from .profiles import loop_profile, precompute_cavity_clusters
from .grouping import backup_group, direct_bipartition, group_loops
from .queueing import LoopQueue
from .solidcut import apply_solid_cut
from .surface import MeshError
from .tracegraph import TraceGraph
from .volume import TetMesh


@dataclass
class PipelineConfig:
    alpha: float = 2.0
    kappa: float = 0.1
    steiner_per_edge: int = 3
    sample_interval: float = 0.10    # fraction of the bounding-box diagonal
    poisson_radius: float = 0.15     # fraction of the bounding-box diagonal
    g3_tol: float = 0.15
    feature_angle_deg: float = 30.0
    type_threshold: float = 0.3
    max_cuts: int = 32
    max_loops: int = 64
    seed: int = 0
    smooth_iterations: int = 50
    refine_levels: int = 0
    snap_tol: float = 0.25
    literal_ecyl: bool = False
    mode: str = "auto"

    @classmethod
    def from_file(cls, path):
        cfg = cls()
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if len(parts) != 2 or parts[0].startswith("#"):
                    continue
                key, val = parts
                if not hasattr(cfg, key):
                    raise ValueError(f"unknown config key {key!r}")
                cur = getattr(cfg, key)
                if isinstance(cur, bool):
                    setattr(cfg, key, val.lower() in ("1", "true", "yes"))
                elif isinstance(cur, int):
                    setattr(cfg, key, int(val))
                elif isinstance(cur, float):
                    setattr(cfg, key, float(val))
                else:
                    setattr(cfg, key, val)
        return cfg

    def lines(self):
        return [f"{k} {v}" for k, v in sorted(asdict(self).items())]


class Pipeline:
    """Meshing engine instance bound to one input model."""

    def __init__(self, config, surface, fieldx, features, tet):
        self.config = config
        self.surface = surface
        self.field = fieldx
        self.features = features
        self.tet = tet
        self._pristine = (tet.V.copy(), [t for t in tet.tets])
        tet.validate_boundary(surface)
        self.graph = TraceGraph(surface, fieldx, config.steiner_per_edge,
                                config.alpha)
        self.rng = np.random.default_rng(config.seed)
        self.queue = LoopQueue(self.graph, features, kappa=config.kappa,
                               rng=self.rng)
        self.diag = surface.bbox_diag
        self.profiles = {}
        self.clusters = None
        self.journal = []
        self.manifest = []
        self.cut_history = []      # CutSet objects actually applied
        self.consumed = set()      # loop ids already part of a cut
        self.convex_marked = set()
        self.discarded = set()
        self.pair_override = {}    # loop id -> tuple of paired ids
        self.snapshot = 0
        self.hexmesh = None
        self.report = None
        self._rebuild_feature_edges()
        self.meta = None

    # -- setup ----------------------------------------------------------------

    def _rebuild_feature_edges(self):
        feat = set()
        for c in self.features.curves:
            for u, v in c.edge_pairs:
                feat.add(frozenset((int(self.tet.tet_vertex_of[u]),
                                    int(self.tet.tet_vertex_of[v]))))
        for lid in sorted(self.convex_marked):
            lp = self._loop(lid)
            for a, b in lp.chain_edge_pairs():
                feat.add(frozenset((int(self.tet.tet_vertex_of[a]),
                                    int(self.tet.tet_vertex_of[b]))))
        self.feature_edges = feat
        self.exempt = {int(self.tet.tet_vertex_of[v])
                       for v in self.features.irregular_vertices}

    def build_queue(self):
        cfg = self.config
        self.queue.init_from_features()
        done = self.queue.build(cfg.sample_interval * self.diag,
                                cfg.poisson_radius * self.diag,
                                cfg.g3_tol, cfg.max_loops)
        self.manifest.extend(self.queue.log)
        self.manifest.append(f"queue complete {int(done)} "
                             f"loops {len(self.queue.loops)}")
        self.profiles = {lp.id: loop_profile(self.graph, lp,
                                             cfg.type_threshold)
                         for lp in self.queue.loops}
        self.clusters = precompute_cavity_clusters(
            self.surface, self.queue.loops, self.profiles,
            literal_cyl=cfg.literal_ecyl)
        for lp in self.queue.loops:
            p = self.profiles[lp.id]
            self.manifest.append(
                f"loop {lp.id} type {p.type} score {p.score:.6f} "
                f"source {lp.source} arcs {self.queue.arc_counts[self.queue.loops.index(lp)]}")
        return done

    def _loop(self, lid):
        for lp in self.queue.loops:
            if lp.id == lid:
                return lp
        raise KeyError(f"no loop {lid}")

    # -- meta ------------------------------------------------------------------

    def refresh_meta(self):
        merged = self.tet.dissolve_slivers()
        if merged:
            self.manifest.append(f"dissolved {merged} sliver blocks")
        self.tet.relabel()
        self.meta = clean_topology(MetaMesh(self.tet, self.surface,
                                            self.feature_edges, self.exempt))
        self.snapshot += 1
        return self.meta

    def criteria(self):
        if self.meta is None:
            self.refresh_meta()
        return evaluate_criteria(self.meta, self.config.g3_tol)

    # -- cutting ----------------------------------------------------------------

    def compute_group(self, lid):
        lp = self._loop(lid)
        if lid in self.pair_override:
            members = [self._loop(i) for i in self.pair_override[lid]]
            labels = direct_bipartition(self.surface, members)
            if labels is not None:
                from .grouping import CutSet
                return CutSet(lid, sorted(m.id for m in members), labels,
                              "forced-cluster")
        cs = group_loops(self.surface, lp, self.queue.loops, self.profiles,
                         self.clusters, consumed=self.consumed,
                         literal_cyl=self.config.literal_ecyl)
        if cs is None:
            cs = backup_group(self.surface, lp, self.queue.loops)
        return cs

    def select_cut(self, lid, journal=True, refresh=True):
        """Group the loop, apply the volumetric cut, refresh the meta-mesh."""
        if lid in self.consumed or lid in self.convex_marked:
            raise MeshError(f"loop {lid} is already used")
        cs = self.compute_group(lid)
        if cs is None:
            self.discarded.add(lid)
            self.manifest.append(f"cut - initiator {lid} strategy none "
                                 "discarded")
            if journal:
                self.journal.append(("discard", lid))
            return None
        before = self.tet.n_alive()
        labels_before = len(set(int(self.tet.labels[i])
                                for i in self.tet.alive()))
        cut, _ = apply_solid_cut(self.tet, self.surface, cs,
                                 self.config.snap_tol)
        nlabels = self.tet.relabel()
        if nlabels <= labels_before:
            self.manifest.append(f"cut - initiator {lid} void (no new block)")
            self.discarded.add(lid)
            if journal:
                self.journal.append(("discard", lid))
            return None
        self.cut_history.append(cs)
        self.consumed.update(cs.members)
        k = len(self.cut_history)
        self.manifest.append(
            f"cut {k}  initiator {cs.initiator}  strategy "
            f"{'backup' if cs.origin == 'backup' else 'geom'}  members "
            f"{cs.members}  energy {cs.energy:.9g}")
        if journal:
            self.journal.append(("select_cut", lid))
        if refresh:
            self.refresh_meta()
        else:
            self.meta = None
            self.snapshot += 1
        return cs

    def pair_loops(self, lids, journal=True):
        lids = tuple(sorted(int(x) for x in lids))
        for lid in lids:
            self.pair_override[lid] = lids
        if journal:
            self.journal.append(("pair_loops", lids))
        self.manifest.append(f"pair {list(lids)}")

    def mark_convex(self, lid, journal=True):
        lp = self._loop(lid)
        self.convex_marked.add(lid)
        self.consumed.add(lid)
        self.queue.add_constrained(lp.chain, True, 20000 + lid,
                                   kind="marked")
        self._rebuild_feature_edges()
        if journal:
            self.journal.append(("mark_convex", lid))
        self.manifest.append(f"mark_convex {lid}")
        self.refresh_meta()

    def undo(self, journal=True):
        """Rewind the last mutating action by replaying the journal."""
        trimmed = list(self.journal)
        while trimmed and trimmed[-1][0] == "pair_loops":
            trimmed.pop()
        if not trimmed:
            return False
        trimmed.pop()
        self._reset_solids()
        self.journal = []
        for entry in trimmed:
            self.replay_entry(entry)
        if journal:
            self.manifest.append("undo")
        return True

    def replay_entry(self, entry):
        kind = entry[0]
        if kind == "select_cut":
            self.select_cut(entry[1])
        elif kind == "discard":
            self.select_cut(entry[1])
        elif kind == "pair_loops":
            self.pair_loops(entry[1])
        elif kind == "mark_convex":
            self.mark_convex(entry[1])
        elif kind == "finalize":
            self.finalize()

    def _reset_solids(self):
        V0, tets0 = self._pristine
        self.tet = TetMesh(V0.copy(), [t for t in tets0 if t is not None])
        self.tet.validate_boundary(self.surface)
        self.cut_history = []
        self.consumed = set()
        self.discarded = set()
        self.convex_marked = set()
        self.pair_override = {}
        self.queue.cf = [cm for cm in self.queue.cf if cm.kind != "marked"]
        self._rebuild_feature_edges()
        self.meta = None
        self.hexmesh = None
        self.report = None

    # -- automatic driver ----------------------------------------------------------

    def run_cut_stage(self):
        """Scan the whole queue in order; every selected loop was sized into
        the plan by the sampling criteria, so all of them cut (or join a
        grouped cut). max_cuts is the hard stop."""
        cfg = self.config
        self.refresh_meta()
        for lp in list(self.queue.loops):
            if len(self.cut_history) >= cfg.max_cuts:
                self.manifest.append("max cuts reached")
                break
            if lp.id in self.consumed or lp.id in self.convex_marked \
                    or lp.id in self.discarded:
                continue
            self.select_cut(lp.id, refresh=False)
        self.refresh_meta()
        rep = self.criteria()
        self.manifest.append(
            f"criteria t1 {int(rep.t1_ok())} t2 {int(rep.t2_ok())} "
            f"t3 {int(rep.t3_ok())} g3 {int(rep.g3_ok())}")
        return rep

    def finalize(self, journal=True):
        self.refresh_meta()
        hx = midpoint_subdivide(self.meta)
        hx = smooth_project(hx, self.surface,
                            iterations=self.config.smooth_iterations)
        if self.config.refine_levels > 0:
            hx = refine(hx, self.config.refine_levels)
            hx = smooth_project(hx, self.surface, iterations=10)
        self.hexmesh = hx
        self.report = quality_report(hx)
        h, p, o = self.meta.summary_counts()
        self.manifest.append(f"meta H {h} P {p} O {o}")
        self.manifest.extend(self.report.lines())
        if journal:
            self.journal.append(("finalize",))
        return self.report


def run_auto(config, surface, fieldx, features, tet, outdir=None):
    """Fully automatic pipeline; returns (pipeline, report)."""
    t0 = time.time()
    pipe = Pipeline(config, surface, fieldx, features, tet)
    pipe.manifest.extend(["config"] + config.lines())
    pipe.build_queue()
    pipe.run_cut_stage()
    report = pipe.finalize()
    pipe.manifest.append(f"cuts {len(pipe.cut_history)}")
    pipe.manifest.append(f"runtime_seconds {time.time() - t0:.1f}")
    if outdir:
        write_outputs(pipe, outdir)
    return pipe, report


def write_outputs(pipe, outdir):
    os.makedirs(outdir, exist_ok=True)
    fileio.write_vtk_hexmesh(os.path.join(outdir, "hexmesh.vtk"),
                             pipe.hexmesh)
    fileio.write_loops(os.path.join(outdir, "loops.txt"), pipe.queue.loops,
                       pipe.surface)
    fileio.write_medit(os.path.join(outdir, "blocks.mesh"), pipe.tet,
                       labels=True)
    write_meta_text(pipe, os.path.join(outdir, "metamesh.txt"))
    with open(os.path.join(outdir, "manifest.txt"), "w") as fh:
        fh.write("\n".join(pipe.manifest) + "\n")


def write_meta_text(pipe, path):
    meta = pipe.meta
    h, p, o = meta.summary_counts()
    with open(path, "w") as fh:
        fh.write(f"summary H {h} P {p} O {o}\n")
        rep = evaluate_criteria(meta, pipe.config.g3_tol)
        for label, cell in sorted(meta.cells.items()):
            vals = sorted(cell.corner_valences().values())
            fh.write(f"cell {label} genus {rep.cell_genus[label]} "
                     f"valences {' '.join(map(str, vals))}\n")
        for mf in meta.faces:
            corners = " ".join(map(str, mf.corners or []))
            fh.write(f"face {mf.id} pair {mf.pair[0]} {mf.pair[1]} "
                     f"corners {corners}\n")
        for me in meta.edges:
            fh.write(f"edge {me.id} vertices "
                     f"{' '.join(map(str, me.vertices))}\n")
