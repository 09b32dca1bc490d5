"""Command line entry points: automatic runs, the steering service, and
built-in demo model generation."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import fileio
from .pipeline import PipelineConfig, Pipeline, run_auto, write_outputs


def _add_input_args(p):
    p.add_argument("--surface", required=True, help="triangle surface (OBJ)")
    p.add_argument("--field", required=True,
                   help="per-triangle guide direction file")
    p.add_argument("--features", default=None,
                   help="feature chain file (omit to auto-detect)")
    p.add_argument("--tets", required=True, help="tet mesh (MEDIT .mesh)")
    p.add_argument("--config", default=None, help="config file (key value)")
    p.add_argument("--max-cuts", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)


def _load(args):
    cfg = PipelineConfig.from_file(args.config) if args.config \
        else PipelineConfig()
    if args.max_cuts is not None:
        cfg.max_cuts = args.max_cuts
    if args.seed is not None:
        cfg.seed = args.seed
    surface, fieldx, features, tet = fileio.load_inputs(
        args.surface, args.field, args.features, args.tets,
        np.deg2rad(cfg.feature_angle_deg))
    return cfg, surface, fieldx, features, tet


def cmd_run(args):
    cfg, surface, fieldx, features, tet = _load(args)
    pipe, report = run_auto(cfg, surface, fieldx, features, tet, args.out)
    for line in report.lines():
        print(line)
    print(f"cuts {len(pipe.cut_history)}")
    print(f"outputs in {args.out}")
    return 0


def cmd_serve(args):
    from .service import serve
    cfg, surface, fieldx, features, tet = _load(args)
    pipe = Pipeline(cfg, surface, fieldx, features, tet)
    pipe.build_queue()
    pipe.refresh_meta()
    serve(pipe, args.port)
    return 0


def cmd_make_model(args):
    from . import models
    if args.name not in models.MODELS:
        print(f"unknown model {args.name!r}; available: "
              f"{', '.join(sorted(models.MODELS))}", file=sys.stderr)
        return 2
    bundle = models.MODELS[args.name]()
    paths = fileio.write_model(args.out, bundle)
    for k, v in paths.items():
        print(f"{k}: {v}")
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="loopycuts",
        description="Block-decomposition hex meshing by field-coherent "
                    "loop cutting")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="fully automatic meshing")
    _add_input_args(p_run)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.set_defaults(fn=cmd_run)

    p_serve = sub.add_parser("serve", help="interactive steering service")
    _add_input_args(p_serve)
    p_serve.add_argument("--port", type=int, required=True)
    p_serve.set_defaults(fn=cmd_serve)

    p_model = sub.add_parser("make-model", help="write a built-in demo model")
    p_model.add_argument("name")
    p_model.add_argument("--out", required=True)
    p_model.set_defaults(fn=cmd_make_model)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
