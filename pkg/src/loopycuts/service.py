"""Interactive steering service: structured-text request/reply over HTTP.

A single-threaded server keeps mutations strictly serialized. Payloads are
plain text, one record per line, so a browser client or a scripted driver
can consume them directly.
"""

from __future__ import annotations

import urllib.parse
from http.server import BaseHTTPRequestHandler, HTTPServer

from .metamesh import evaluate_criteria
from .surface import MeshError


def state_lines(pipe):
    h, p, o = pipe.meta.summary_counts() if pipe.meta else (0, 0, 0)
    rep = pipe.criteria()
    return [
        f"snapshot {pipe.snapshot}",
        f"loops {len(pipe.queue.loops)}",
        f"cuts {len(pipe.cut_history)}",
        f"cells {len(pipe.meta.cells) if pipe.meta else 0}",
        f"meta H {h} P {p} O {o}",
        f"criteria t1 {int(rep.t1_ok())} t2 {int(rep.t2_ok())} "
        f"t3 {int(rep.t3_ok())} g3 {int(rep.g3_ok())}",
    ]


def loops_lines(pipe):
    out = []
    for lp in pipe.queue.loops:
        prof = pipe.profiles.get(lp.id)
        if lp.id in pipe.convex_marked:
            status = "convex"
        elif lp.id in pipe.consumed:
            status = "cut"
        elif lp.id in pipe.discarded:
            status = "discarded"
        else:
            status = "queued"
        out.append(
            f"loop {lp.id} type {prof.type if prof else '?'} "
            f"score {prof.score if prof else 0:.4f} status {status} "
            f"source {lp.source}")
    return out


def geometry_lines(pipe, what):
    s = pipe.surface
    out = []
    if what == "surface":
        for p in s.V:
            out.append(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
        for a, b, c in s.F:
            out.append(f"f {a} {b} {c}")
    elif what == "loops":
        for lp in pipe.queue.loops:
            pts = s.V[lp.chain]
            coords = " ".join(f"{x:.9g}" for p in pts for x in p)
            out.append(f"loop {lp.id} {len(lp.chain)} {coords}")
    elif what == "meta":
        meta = pipe.meta
        V = pipe.tet.V
        cls = {}
        for label, cell in meta.cells.items():
            vals = cell.corner_valences()
            n3 = sum(1 for k in vals.values() if k == 3)
            if len(vals) == 8 and n3 == 8 and len(cell.faces) == 6:
                cls[label] = "hexa"
            elif len(vals) == 6 and n3 == 6 and len(cell.faces) == 5:
                cls[label] = "prism"
            else:
                cls[label] = "other"
        for label, cell in sorted(meta.cells.items()):
            out.append(f"cell {label} class {cls[label]}")
        for mf in meta.faces:
            a, b = mf.pair
            kind = "outer" if mf.external else "cut"
            tris = " ".join(f"{x},{y},{z}" for x, y, z in mf.facets)
            out.append(f"face {mf.id} {a} {b} {kind} {tris}")
        for i, p in enumerate(V):
            out.append(f"p {i} {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    else:
        raise MeshError(f"unknown geometry payload {what!r}")
    return out


class _Handler(BaseHTTPRequestHandler):
    pipe = None

    def _reply(self, code, lines):
        body = ("\n".join(lines) + "\n").encode()
        self.send_response(code)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass

    def do_GET(self):
        url = urllib.parse.urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts == ["state"]:
                self._reply(200, state_lines(self.pipe))
            elif parts == ["loops"]:
                self._reply(200, loops_lines(self.pipe))
            elif len(parts) == 2 and parts[0] == "geometry":
                self._reply(200, geometry_lines(self.pipe, parts[1]))
            else:
                self._reply(404, [f"error unknown path {url.path}"])
        except Exception as exc:  # noqa: BLE001 - structured error reply
            self._reply(400, [f"error {exc}"])

    def do_POST(self):
        url = urllib.parse.urlparse(self.path)
        q = urllib.parse.parse_qs(url.query)
        parts = [p for p in url.path.split("/") if p]
        pipe = self.pipe
        try:
            if parts == ["select_cut"]:
                lid = int(q["id"][0])
                cs = pipe.select_cut(lid)
                if cs is None:
                    self._reply(200, [f"discarded {lid}",
                                      f"snapshot {pipe.snapshot}"])
                else:
                    self._reply(200, [
                        f"cut {len(pipe.cut_history)}",
                        f"members {' '.join(map(str, cs.members))}",
                        f"snapshot {pipe.snapshot}"])
            elif parts == ["pair_loops"]:
                ids = [int(x) for x in q["ids"][0].split(",")]
                pipe.pair_loops(ids)
                self._reply(200, [f"paired {' '.join(map(str, ids))}"])
            elif parts == ["mark_convex"]:
                lid = int(q["id"][0])
                pipe.mark_convex(lid)
                self._reply(200, [f"marked {lid}",
                                  f"snapshot {pipe.snapshot}"])
            elif parts == ["undo"]:
                ok = pipe.undo()
                self._reply(200, [f"undo {int(ok)}",
                                  f"snapshot {pipe.snapshot}"])
            elif parts == ["finalize"]:
                report = pipe.finalize()
                self._reply(200, report.lines())
            else:
                self._reply(404, [f"error unknown path {url.path}"])
        except Exception as exc:  # noqa: BLE001
            self._reply(400, [f"error {exc}"])


def serve(pipe, port, ready_callback=None):
    handler = type("BoundHandler", (_Handler,), {"pipe": pipe})
    httpd = HTTPServer(("127.0.0.1", port), handler)
    if ready_callback:
        ready_callback(httpd)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
