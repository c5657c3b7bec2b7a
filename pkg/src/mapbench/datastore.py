"""Experiment manifest: environments, their floor plans, run logs, and
the extracted features/performance, persisted as plain JSON + CSV.

Writers take an advisory lock file next to the manifest; readers are
unrestricted.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ValidationError
from .features import FeatureVector
from .models import Dataset
from .trajectory import PerformanceVector

SCHEMA_VERSION = 1


@dataclass
class EnvironmentRecord:
    env_id: str
    map_path: str
    resolution: float
    start: tuple[float, float] | None = None
    run_paths: list[str] = field(default_factory=list)
    features: FeatureVector | None = None
    features_hash: str | None = None
    performance: PerformanceVector | None = None
    performance_hash: str | None = None

    def as_dict(self) -> dict:
        doc = {
            "env_id": self.env_id,
            "map": self.map_path,
            "resolution": self.resolution,
            "runs": list(self.run_paths),
        }
        if self.start is not None:
            doc["start"] = [self.start[0], self.start[1]]
        if self.features is not None:
            doc["features"] = self.features.as_dict()
            doc["features_hash"] = self.features_hash
        if self.performance is not None:
            doc["performance"] = self.performance.as_dict()
            doc["performance_hash"] = self.performance_hash
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "EnvironmentRecord":
        try:
            rec = cls(
                env_id=doc["env_id"],
                map_path=doc["map"],
                resolution=float(doc["resolution"]),
                start=tuple(doc["start"]) if "start" in doc else None,
                run_paths=list(doc.get("runs", [])),
            )
        except KeyError as exc:
            raise ValidationError(f"environment record missing key {exc}")
        if "features" in doc:
            rec.features = FeatureVector.from_dict(doc["features"])
            rec.features_hash = doc.get("features_hash")
        if "performance" in doc:
            rec.performance = PerformanceVector.from_dict(doc["performance"])
            rec.performance_hash = doc.get("performance_hash")
        return rec


@dataclass
class Manifest:
    environments: list[EnvironmentRecord]
    created: str = ""
    toolkit_version: str = __version__
    path: Path | None = None

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "toolkit_version": self.toolkit_version,
            "created": self.created,
            "environments": [e.as_dict() for e in self.environments],
        }

    def resolve(self, rel: str) -> Path:
        base = self.path.parent if self.path else Path(".")
        p = Path(rel)
        return p if p.is_absolute() else base / p

    def record(self, env_id: str) -> EnvironmentRecord:
        for rec in self.environments:
            if rec.env_id == env_id:
                return rec
        raise ValidationError(f"no environment {env_id!r} in manifest")


def validate_manifest(path: str | Path) -> Manifest:
    """Parse and validate a manifest: schema version, unique ids, and
    all referenced files present. Side-effect free."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"no such manifest: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError(
            f"{path}: schema_version {doc.get('schema_version')!r} != {SCHEMA_VERSION}"
        )
    envs = [EnvironmentRecord.from_dict(e) for e in doc.get("environments", [])]
    manifest = Manifest(
        environments=envs,
        created=doc.get("created", ""),
        toolkit_version=doc.get("toolkit_version", ""),
        path=path,
    )
    seen: set[str] = set()
    for rec in envs:
        if rec.env_id in seen:
            raise ValidationError(f"duplicate environment id {rec.env_id!r}")
        seen.add(rec.env_id)
    missing = []
    for rec in envs:
        for rel in [rec.map_path, *rec.run_paths]:
            if not manifest.resolve(rel).exists():
                missing.append(f"{rec.env_id}: {rel}")
    if missing:
        raise ValidationError("missing files:\n  " + "\n  ".join(missing))
    return manifest


def save_manifest(manifest: Manifest, path: str | Path | None = None) -> bool:
    """Write the manifest unless the rendered content is unchanged.
    Returns True when the file was (re)written."""
    path = Path(path or manifest.path)
    content = json.dumps(manifest.as_dict(), indent=1)
    if path.exists() and path.read_text() == content:
        return False
    with manifest_lock(path):
        path.write_text(content)
    manifest.path = path
    return True


@contextmanager
def manifest_lock(path: str | Path):
    """Advisory exclusive lock for manifest writers."""
    lock = Path(str(path) + ".lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ValidationError(f"manifest is locked by another writer: {lock}")
    try:
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def assemble_dataset(manifest: Manifest) -> Dataset:
    """One dataset row per environment, sorted by id. Every record must
    have features and performance."""
    incomplete = []
    for rec in manifest.environments:
        stages = []
        if rec.features is None:
            stages.append("features")
        if rec.performance is None:
            stages.append("performance")
        if stages:
            incomplete.append(f"{rec.env_id}: missing {', '.join(stages)}")
    if incomplete:
        raise ValidationError("incomplete records:\n  " + "\n  ".join(incomplete))
    recs = sorted(manifest.environments, key=lambda r: r.env_id)
    features: dict[str, list[float]] = {}
    targets: dict[str, list[float]] = {}
    for rec in recs:
        for name, value in rec.features.values().items():
            features.setdefault(name, []).append(value)
        perf = rec.performance.as_dict()
        for name in ("mean_eps_t", "std_eps_t", "mean_eps_r", "std_eps_r"):
            targets.setdefault(name, []).append(perf[name])
    return Dataset(
        [r.env_id for r in recs],
        {k: np.array(v) for k, v in features.items()},
        {k: np.array(v) for k, v in targets.items()},
    )
