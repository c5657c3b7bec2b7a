"""Command-line interface.

Subcommands: map-info, voronoi, features, eval-run, eval-env, fit,
predict, report, validate, pipeline. Exit codes: 0 success, 1 domain
error, 2 usage error. Errors go to stderr; --json makes stdout
machine-readable. MAPBENCH_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .datastore import validate_manifest
from .errors import MapbenchError
from .features import extract_features
from .gridmap import MapMeta, free_interior_area_m2, interior_mask, load_gridmap
from .models import (
    ModelSpec,
    kfold_cv,
    load_dataset_csv,
    load_models,
    predict_performance,
    save_bundle,
    save_model,
)
from .pipeline import ALL_STAGES, PipelineConfig, run_pipeline
from .trajectory import (
    TARGET_NAMES,
    RNG_ALGORITHM,
    SamplingPolicy,
    aggregate,
    evaluate_run,
    load_runlog,
)
from .traversal import SensorConfig
from .voronoi import build_graph, skeletonize

log = logging.getLogger("mapbench")


def _setup_logging():
    level = os.environ.get("MAPBENCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(path: str | None) -> dict[str, str]:
    """TOML-style key=value pairs providing flag defaults."""
    if not path:
        return {}
    config = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MapbenchError(f"config line without '=': {line!r}")
        key, value = line.split("=", 1)
        config[key.strip()] = value.strip().strip("\"'")
    return config


def _emit(args, doc: dict, human: str | None = None) -> None:
    if args.json:
        print(json.dumps(doc, indent=1, sort_keys=True))
    else:
        print(human if human is not None else json.dumps(doc, indent=1, sort_keys=True))


def _map_meta(args, config) -> MapMeta:
    res = args.resolution
    if res is None and "resolution" in config:
        res = float(config["resolution"])
    return MapMeta(
        resolution=res,
        occ_thresh=int(args.occ_thresh),
        free_thresh=int(args.free_thresh),
    )


def _sensor(args, config) -> SensorConfig:
    fov = float(args.fov if args.fov is not None else config.get("fov", 270.0))
    ares = float(
        args.angular_resolution
        if args.angular_resolution is not None
        else config.get("angular_resolution", 0.5)
    )
    rng = float(args.range if args.range is not None else config.get("range", 30.0))
    return SensorConfig(math.radians(fov), math.radians(ares), rng)


def _policy(args, seed: int) -> SamplingPolicy:
    return SamplingPolicy(
        confidence=args.confidence,
        margin_t=args.margin_t,
        margin_r=args.margin_r,
        pilot_pairs=args.pilot_pairs,
        seed=seed,
        z_squared=not args.z_unsquared,
    )


def cmd_map_info(args, config):
    gm = load_gridmap(args.image, _map_meta(args, config))
    im = interior_mask(gm)
    doc = {
        "width": gm.width,
        "height": gm.height,
        "resolution": gm.resolution,
        "free_cells": int(np.count_nonzero(gm.free())),
        "interior_area_m2": free_interior_area_m2(gm, im),
    }
    _emit(
        args,
        doc,
        f"{args.image}: {gm.width}x{gm.height} px @ {gm.resolution} m/px, "
        f"{doc['free_cells']} free cells, interior area {doc['interior_area_m2']:.3f} m2",
    )
    return 0


def cmd_voronoi(args, config):
    gm = load_gridmap(args.image, _map_meta(args, config))
    im = interior_mask(gm)
    graph = build_graph(gm, im)
    graph.save(args.out, gm)
    if args.debug_png:
        from PIL import Image

        sk = skeletonize(gm, im)
        canvas = np.full(gm.cells.shape, 255, dtype=np.uint8)
        canvas[gm.blocked()] = 0
        canvas[sk] = 128
        Image.fromarray(canvas, mode="L").save(args.debug_png)
    _emit(
        args,
        {"nodes": graph.node_count, "edges": graph.edge_count, "out": args.out},
        f"wrote {args.out}: {graph.node_count} nodes, {graph.edge_count} edges "
        f"(kernels: {_kernels.BACKEND})",
    )
    return 0


def cmd_features(args, config):
    gm = load_gridmap(args.image, _map_meta(args, config))
    start = None
    if args.start_x is not None or args.start_y is not None:
        if args.start_x is None or args.start_y is None:
            raise MapbenchError("--start-x and --start-y must be given together")
        start = (args.start_x, args.start_y)
    fv, trace = extract_features(gm, _sensor(args, config), start)
    doc = fv.as_dict()
    if args.trace:
        doc["trace"] = [
            {
                "target": leg.target,
                "path": leg.path,
                "distance_m": leg.distance_m,
                "rotation_rad": leg.rotation_rad,
            }
            for leg in trace.legs
        ]
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=1))
    _emit(
        args,
        doc,
        f"vtd={fv.vtd_m:.3f} m vtr={fv.vtr_rad:.3f} rad area={fv.area_m2:.3f} m2 "
        f"perimeter={fv.perimeter_m:.3f} m nodes={fv.node_count} edges={fv.edge_count}",
    )
    return 0


def cmd_eval_run(args, config):
    run = load_runlog(args.csv)
    err = evaluate_run(run, _policy(args, args.seed), args.mode)
    doc = err.as_dict()
    doc["seed"] = args.seed
    doc["rng"] = RNG_ALGORITHM
    _emit(args, doc)
    return 0


def cmd_eval_env(args, config):
    paths = sorted(Path(args.dir).glob("*.csv"))
    if not paths:
        raise MapbenchError(f"no run CSVs in {args.dir}")
    policy = _policy(args, args.seed)
    runs = []
    errors = []
    for path in paths:
        err = evaluate_run(load_runlog(path), policy, args.mode)
        errors.append(err)
        runs.append({"run": path.name, **err.as_dict()})
    perf = aggregate(errors)
    doc = {"performance": perf.as_dict(), "runs": runs, "seed": args.seed, "rng": RNG_ALGORITHM}
    table = "\n".join(
        f"  {r['run']}: eps_t={r['eps_t']:.6f} eps_r={r['eps_r']:.6f} n={r['n_pairs']}"
        for r in runs
    )
    _emit(
        args,
        doc,
        f"{len(runs)} runs\n{table}\n"
        f"mean_eps_t={perf.mean_eps_t:.6f} std_eps_t={perf.std_eps_t:.6f} "
        f"mean_eps_r={perf.mean_eps_r:.6f} std_eps_r={perf.std_eps_r:.6f}",
    )
    return 0


def _model_spec(args) -> ModelSpec:
    features = [f.strip() for f in args.features.split(",")] if args.features else ["vtd_m"]
    return ModelSpec(
        kind=args.model,
        features=features,
        l1=args.l1,
        l2=args.l2,
        gp_grid_search=args.gp_search,
    )


def cmd_fit(args, config):
    data = load_dataset_csv(args.dataset, target=args.target)
    spec = _model_spec(args)
    meta = {"seed": args.seed, "k": args.k}
    if args.all_targets:
        bundle = {t: spec.fit(data.with_target(t)) for t in TARGET_NAMES if t in data.targets}
        save_bundle(bundle, args.out, meta)
        doc = {"out": args.out, "targets": sorted(bundle)}
    else:
        model = spec.fit(data)
        report = kfold_cv(data, spec, k=args.k, seed=args.seed)
        save_model(model, args.out, meta)
        doc = {"out": args.out, "cv": report.as_dict()}
        if hasattr(model, "coefficients"):
            doc["coefficients"] = list(map(float, model.coefficients))
            doc["intercept"] = model.intercept
    _emit(args, doc)
    return 0


def cmd_predict(args, config):
    bundle = load_models(args.model)
    features = json.loads(Path(args.features_json).read_text())
    doc = predict_performance(bundle, features)
    _emit(
        args,
        doc,
        "\n".join(f"{t}: {v:.6g}" for t, v in sorted(doc.items())),
    )
    return 0


def cmd_report(args, config):
    data = load_dataset_csv(args.dataset)
    spec = _model_spec(args)
    targets = TARGET_NAMES if args.all_targets else [args.target]
    rows = []
    for target in targets:
        if target not in data.targets:
            continue
        report = kfold_cv(data.with_target(target), spec, k=args.k, seed=args.seed)
        rows.append(report)
    lines = ["target,feature,r2,rmse,nrmse_percent"]
    for r in rows:
        lines.append(
            f"{r.target},{'+'.join(spec.features)},{r.r2:.3f},{r.rmse:.4g},{100 * r.nrmse:.2f}"
        )
    out = "\n".join(lines)
    if args.out:
        Path(args.out).write_text(out + "\n")
    if args.json:
        _emit(args, {"rows": [r.as_dict() for r in rows]})
    else:
        print(out)
    return 0


def cmd_validate(args, config):
    manifest = validate_manifest(args.manifest)
    doc = {"ok": True, "environments": len(manifest.environments)}
    _emit(args, doc, f"{args.manifest}: OK, {len(manifest.environments)} environments")
    return 0


def cmd_pipeline(args, config):
    manifest = validate_manifest(args.manifest)
    stages = [s.strip() for s in args.stages.split(",")] if args.stages else list(ALL_STAGES)
    cfg = PipelineConfig(
        stages=stages,
        jobs=args.jobs,
        seed=args.seed,
        sensor=_sensor(args, config),
        policy=_policy(args, args.seed),
        mode=args.mode,
        model=_model_spec(args),
        cv_folds=args.k,
    )
    summary = run_pipeline(manifest, cfg, args.out_dir)
    human = []
    for st in summary.statuses:
        detail = ", ".join(f"{k}={v}" for k, v in st.stages.items())
        human.append(f"{st.env_id}: {detail}")
    _emit(args, summary.as_dict(), "\n".join(human))
    return 0 if summary.ok else 1


def _add_map_flags(p):
    p.add_argument("--resolution", type=float, default=None, help="meters per pixel")
    p.add_argument("--occ-thresh", type=int, default=50, dest="occ_thresh")
    p.add_argument("--free-thresh", type=int, default=205, dest="free_thresh")


def _add_sensor_flags(p):
    p.add_argument("--fov", type=float, default=None, help="field of view, degrees")
    p.add_argument("--angular-resolution", type=float, default=None, help="degrees")
    p.add_argument("--range", type=float, default=None, help="sensor range, m")


def _add_policy_flags(p):
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--margin-t", type=float, default=0.02, dest="margin_t")
    p.add_argument("--margin-r", type=float, default=0.01, dest="margin_r")
    p.add_argument("--pilot-pairs", type=int, default=100, dest="pilot_pairs")
    p.add_argument("--mode", choices=["absolute", "squared"], default="absolute")
    p.add_argument("--z-unsquared", action="store_true",
                   help="use z instead of z^2 in the sample-size bound")


def _add_model_flags(p):
    p.add_argument("--model", choices=["ols", "enet", "gp"], default="ols")
    p.add_argument("--features", default="vtd_m", help="comma-separated feature columns")
    p.add_argument("--k", type=int, default=5, help="cross-validation folds")
    p.add_argument("--l1", type=float, default=0.0)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--gp-search", action="store_true", dest="gp_search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapbench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mapbench {__version__}")
    parser.add_argument("--json", action="store_true", help="machine-readable stdout")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=0, help="parallel workers (0 = cores)")
    parser.add_argument("--config", default=None, help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map-info", help="print map dimensions and interior area")
    p.add_argument("image")
    _add_map_flags(p)
    p.set_defaults(fn=cmd_map_info)

    p = sub.add_parser("voronoi", help="build the sparsified Voronoi graph")
    p.add_argument("image")
    _add_map_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--debug-png", default=None, dest="debug_png")
    p.set_defaults(fn=cmd_voronoi)

    p = sub.add_parser("features", help="extract the feature vector of a floor plan")
    p.add_argument("image")
    _add_map_flags(p)
    _add_sensor_flags(p)
    p.add_argument("--start-x", type=float, default=None, dest="start_x")
    p.add_argument("--start-y", type=float, default=None, dest="start_y")
    p.add_argument("--out", default=None)
    p.add_argument("--trace", action="store_true")
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("eval-run", help="localization error of one run log")
    p.add_argument("csv")
    _add_policy_flags(p)
    p.set_defaults(fn=cmd_eval_run)

    p = sub.add_parser("eval-env", help="aggregate error over a directory of run logs")
    p.add_argument("dir")
    _add_policy_flags(p)
    p.set_defaults(fn=cmd_eval_env)

    p = sub.add_parser("fit", help="fit a regression model on a dataset CSV")
    p.add_argument("dataset")
    p.add_argument("--target", choices=TARGET_NAMES, default="mean_eps_t")
    p.add_argument("--all-targets", action="store_true", dest="all_targets")
    _add_model_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("predict", help="predict performance from a features JSON")
    p.add_argument("model")
    p.add_argument("features_json")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("report", help="cross-validation metrics per error component")
    p.add_argument("dataset")
    p.add_argument("--target", choices=TARGET_NAMES, default="mean_eps_t")
    p.add_argument("--all-targets", action="store_true", dest="all_targets")
    _add_model_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("validate", help="validate an experiment manifest")
    p.add_argument("manifest")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("pipeline", help="run batch stages over a manifest")
    p.add_argument("manifest")
    p.add_argument("--stages", default=None, help=f"comma-separated from {ALL_STAGES}")
    p.add_argument("--out-dir", default=None, dest="out_dir")
    _add_sensor_flags(p)
    _add_policy_flags(p)
    _add_model_flags(p)
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.fn(args, config)
    except MapbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
