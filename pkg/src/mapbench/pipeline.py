"""Batch orchestration over a manifest: features -> eval -> fit ->
predict, skipping environments whose artifacts are already current
(content-hash staleness check). Feature extraction and run evaluation
parallelize across environments; fitting is dataset-level.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .datastore import EnvironmentRecord, Manifest, assemble_dataset, save_manifest
from .errors import MapbenchError
from .features import FeatureVector, extract_features
from .gridmap import MapMeta, load_gridmap
from .models import ModelSpec, load_models, predict_performance
from .trajectory import (
    TARGET_NAMES,
    PerformanceVector,
    SamplingPolicy,
    aggregate,
    evaluate_run,
    load_runlog,
)
from .traversal import SensorConfig

ALL_STAGES = ["features", "eval", "fit", "predict"]


@dataclass
class PipelineConfig:
    stages: list[str] = field(default_factory=lambda: list(ALL_STAGES))
    jobs: int = 0  # 0 -> logical core count
    seed: int = 0
    sensor: SensorConfig = field(default_factory=SensorConfig)
    policy: SamplingPolicy = field(default_factory=SamplingPolicy)
    mode: str = "absolute"
    model: ModelSpec = field(default_factory=ModelSpec)
    cv_folds: int = 5

    def effective_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)


def _hash_parts(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, (bytes, bytearray)):
            h.update(part)
        else:
            h.update(json.dumps(part, sort_keys=True, default=str).encode())
        h.update(b"\x1f")
    return h.hexdigest()


def features_hash(manifest: Manifest, rec: EnvironmentRecord, cfg: PipelineConfig) -> str:
    map_bytes = manifest.resolve(rec.map_path).read_bytes()
    return _hash_parts(
        map_bytes,
        rec.resolution,
        rec.start,
        [cfg.sensor.fov, cfg.sensor.angular_resolution, cfg.sensor.range_m],
    )


def performance_hash(manifest: Manifest, rec: EnvironmentRecord, cfg: PipelineConfig) -> str:
    run_bytes = [manifest.resolve(p).read_bytes() for p in rec.run_paths]
    policy = cfg.policy
    return _hash_parts(
        *run_bytes,
        [policy.confidence, policy.margin_t, policy.margin_r, policy.pilot_pairs, policy.seed],
        cfg.mode,
    )


def _features_task(map_path: str, resolution: float, start, sensor: SensorConfig) -> dict:
    gm = load_gridmap(map_path, MapMeta(resolution=resolution))
    fv, _ = extract_features(gm, sensor, start)
    return fv.as_dict()


def _eval_task(run_paths: list[str], policy: SamplingPolicy, mode: str) -> dict:
    errors = [evaluate_run(load_runlog(p), policy, mode) for p in run_paths]
    return aggregate(errors).as_dict()


@dataclass
class EnvStatus:
    env_id: str
    stages: dict[str, str] = field(default_factory=dict)  # stage -> ok|skipped|failed: msg

    @property
    def failed(self) -> bool:
        return any(v.startswith("failed") for v in self.stages.values())


@dataclass
class PipelineSummary:
    statuses: list[EnvStatus]
    outputs: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not any(s.failed for s in self.statuses)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "environments": {s.env_id: s.stages for s in self.statuses},
            "outputs": self.outputs,
        }


def _strip_dates(doc):
    if isinstance(doc, dict):
        return {k: _strip_dates(v) for k, v in doc.items() if k != "date"}
    return doc


def _save_bundle_if_changed(bundle, path: Path, training_meta: dict) -> None:
    """Rewrite the model file only when the models themselves changed;
    an unchanged re-fit keeps the original file (and its date) intact."""
    from .models import model_to_dict

    doc = {"models": {t: model_to_dict(m, training_meta) for t, m in bundle.items()}}
    if path.exists():
        try:
            old = json.loads(path.read_text())
        except json.JSONDecodeError:
            old = None
        if old is not None and _strip_dates(old) == _strip_dates(doc):
            return
    path.write_text(json.dumps(doc, indent=1))


def _run_stage_parallel(tasks: dict[str, tuple], jobs: int, fn) -> dict[str, object]:
    """Run fn(*args) per env id; exceptions are captured per env."""
    results: dict[str, object] = {}
    if not tasks:
        return results
    if jobs <= 1 or len(tasks) == 1:
        for env_id, args in tasks.items():
            try:
                results[env_id] = fn(*args)
            except Exception as exc:  # per-env failure must not kill the batch
                results[env_id] = exc
        return results
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        futures = {env_id: pool.submit(fn, *args) for env_id, args in tasks.items()}
        for env_id, fut in futures.items():
            try:
                results[env_id] = fut.result()
            except Exception as exc:
                results[env_id] = exc
    return results


def run_pipeline(manifest: Manifest, cfg: PipelineConfig, out_dir: str | Path | None = None) -> PipelineSummary:
    """Execute the requested stages over every environment.

    Per-environment results are written back into the manifest; fitted
    models and predictions land next to it (or in out_dir).
    """
    unknown = [s for s in cfg.stages if s not in ALL_STAGES]
    if unknown:
        raise MapbenchError(f"unknown stages {unknown}; valid: {ALL_STAGES}")
    out_dir = Path(out_dir) if out_dir else manifest.path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    statuses = {rec.env_id: EnvStatus(rec.env_id) for rec in manifest.environments}
    summary = PipelineSummary(statuses=list(statuses.values()))
    jobs = cfg.effective_jobs()

    if "features" in cfg.stages:
        tasks = {}
        for rec in manifest.environments:
            digest = features_hash(manifest, rec, cfg)
            if rec.features is not None and rec.features_hash == digest:
                statuses[rec.env_id].stages["features"] = "skipped (up to date)"
                continue
            tasks[rec.env_id] = (
                str(manifest.resolve(rec.map_path)),
                rec.resolution,
                rec.start,
                cfg.sensor,
            )
        for env_id, result in _run_stage_parallel(tasks, jobs, _features_task).items():
            rec = manifest.record(env_id)
            if isinstance(result, Exception):
                statuses[env_id].stages["features"] = f"failed: {result}"
                continue
            rec.features = FeatureVector.from_dict(result)
            rec.features_hash = features_hash(manifest, rec, cfg)
            statuses[env_id].stages["features"] = "ok"

    if "eval" in cfg.stages:
        tasks = {}
        for rec in manifest.environments:
            if not rec.run_paths:
                statuses[rec.env_id].stages["eval"] = "failed: no run logs"
                continue
            digest = performance_hash(manifest, rec, cfg)
            if rec.performance is not None and rec.performance_hash == digest:
                statuses[rec.env_id].stages["eval"] = "skipped (up to date)"
                continue
            tasks[rec.env_id] = (
                [str(manifest.resolve(p)) for p in rec.run_paths],
                cfg.policy,
                cfg.mode,
            )
        for env_id, result in _run_stage_parallel(tasks, jobs, _eval_task).items():
            rec = manifest.record(env_id)
            if isinstance(result, Exception):
                statuses[env_id].stages["eval"] = f"failed: {result}"
                continue
            rec.performance = PerformanceVector.from_dict(result)
            rec.performance_hash = performance_hash(manifest, rec, cfg)
            statuses[env_id].stages["eval"] = "ok"

    save_manifest(manifest)

    models_path = out_dir / "models.json"
    if "fit" in cfg.stages:
        try:
            complete = Manifest(
                [r for r in manifest.environments if r.features and r.performance],
                path=manifest.path,
            )
            if not complete.environments:
                raise MapbenchError("no environment has both features and performance")
            data = assemble_dataset(complete)
            bundle = {}
            for target in TARGET_NAMES:
                bundle[target] = cfg.model.fit(data.with_target(target))
            _save_bundle_if_changed(
                bundle,
                models_path,
                {"seed": cfg.seed, "k": cfg.cv_folds, "rows": len(data)},
            )
            summary.outputs["models"] = str(models_path)
            for rec in complete.environments:
                statuses[rec.env_id].stages["fit"] = "ok"
        except MapbenchError as exc:
            for st in statuses.values():
                st.stages["fit"] = f"failed: {exc}"

    if "predict" in cfg.stages:
        if not models_path.exists():
            for st in statuses.values():
                st.stages["predict"] = "failed: no fitted models"
        else:
            bundle = load_models(models_path)
            predictions = {}
            for rec in manifest.environments:
                if rec.features is None:
                    statuses[rec.env_id].stages["predict"] = "failed: no features"
                    continue
                try:
                    predictions[rec.env_id] = predict_performance(bundle, rec.features.values())
                    statuses[rec.env_id].stages["predict"] = "ok"
                except MapbenchError as exc:
                    statuses[rec.env_id].stages["predict"] = f"failed: {exc}"
            pred_path = out_dir / "predictions.json"
            content = json.dumps(predictions, indent=1, sort_keys=True)
            if not (pred_path.exists() and pred_path.read_text() == content):
                pred_path.write_text(content)
            summary.outputs["predictions"] = str(pred_path)

    return summary
