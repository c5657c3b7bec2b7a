"""Regression models mapping environment features to localization-error
components, with k-fold cross-validation reporting.

OLS operates on raw units so coefficients are directly interpretable;
the elastic net and the Gaussian process standardize features
internally. A distinct model is fit per error component; a bundle of
four predicts the whole performance vector.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import (
    CholeskyError,
    ConvergenceError,
    EmptySampleError,
    MapbenchError,
    MissingFeatureError,
    SingularDesignError,
    ValidationError,
)
from .trajectory import TARGET_NAMES

DEFAULT_TARGET = "mean_eps_t"


@dataclass
class Dataset:
    """Rows of (environment id, features, targets) plus the selected
    target column."""

    env_ids: list[str]
    features: dict[str, np.ndarray]
    targets: dict[str, np.ndarray]
    target: str = DEFAULT_TARGET

    def __post_init__(self):
        n = len(self.env_ids)
        if len(set(self.env_ids)) != n:
            dupes = sorted({e for e in self.env_ids if self.env_ids.count(e) > 1})
            raise ValidationError(f"duplicate environment ids: {dupes}")
        for name, col in [*self.features.items(), *self.targets.items()]:
            col = np.asarray(col, dtype=float)
            if col.shape != (n,):
                raise ValidationError(f"column {name}: wrong length")
            if name in self.features and not np.all(np.isfinite(col)):
                raise ValidationError(f"feature {name}: non-finite values")

    def __len__(self) -> int:
        return len(self.env_ids)

    @property
    def feature_names(self) -> list[str]:
        return sorted(self.features)

    def x(self, names: list[str]) -> np.ndarray:
        missing = [n for n in names if n not in self.features]
        if missing:
            raise MissingFeatureError(f"dataset lacks features: {missing}")
        return np.column_stack([np.asarray(self.features[n], dtype=float) for n in names])

    def y(self) -> np.ndarray:
        if self.target not in self.targets:
            raise MapbenchError(f"dataset has no target column {self.target!r}")
        return np.asarray(self.targets[self.target], dtype=float)

    def with_target(self, target: str) -> "Dataset":
        return Dataset(self.env_ids, self.features, self.targets, target)

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            [self.env_ids[i] for i in idx],
            {k: v[idx] for k, v in self.features.items()},
            {k: v[idx] for k, v in self.targets.items()},
            self.target,
        )


def load_dataset_csv(path: str | Path, target: str = DEFAULT_TARGET) -> Dataset:
    """Columns: env_id, any feature columns, then the four target
    columns (those not present are simply absent)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "env_id" not in reader.fieldnames:
            raise ValidationError(f"{path}: missing env_id column")
        rows = list(reader)
    if not rows:
        raise ValidationError(f"{path}: empty dataset")
    names = [c for c in rows[0] if c != "env_id"]
    cols = {c: np.array([float(r[c]) for r in rows]) for c in names}
    features = {c: v for c, v in cols.items() if c not in TARGET_NAMES}
    targets = {c: v for c, v in cols.items() if c in TARGET_NAMES}
    return Dataset([r["env_id"] for r in rows], features, targets, target)


def save_dataset_csv(data: Dataset, path: str | Path) -> None:
    names = data.feature_names + [t for t in TARGET_NAMES if t in data.targets]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["env_id", *names])
        for k, env in enumerate(data.env_ids):
            row = [env]
            for name in names:
                col = data.features.get(name)
                if col is None:
                    col = data.targets[name]
                row.append(repr(float(col[k])))
            writer.writerow(row)


@dataclass
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    feature_names: list[str]
    target: str

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        return x @ self.coefficients + self.intercept


def fit_ols(data: Dataset, features: list[str] | None = None) -> LinearModel:
    """Ordinary least squares on raw feature units."""
    features = features or ["vtd_m"]
    x = data.x(features)
    y = data.y()
    n, p = x.shape
    if n < p + 1:
        raise SingularDesignError(f"{n} rows cannot identify {p} coefficients + intercept")
    a = np.column_stack([x, np.ones(n)])
    coef, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < p + 1:
        raise SingularDesignError("design matrix is rank deficient")
    return LinearModel(coef[:p], float(coef[p]), list(features), data.target)


@dataclass
class ElasticNetModel:
    coefficients: np.ndarray  # original units
    intercept: float
    feature_names: list[str]
    target: str
    l1: float
    l2: float
    x_mean: np.ndarray
    x_std: np.ndarray

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        return x @ self.coefficients + self.intercept


def elastic_net_objective(
    w: np.ndarray, xs: np.ndarray, yc: np.ndarray, l1: float, l2: float
) -> float:
    """Penalized objective on standardized features and centered target:
    (1/2n)*RSS + l1*|w|_1 + (l2/2)*|w|_2^2."""
    n = len(yc)
    r = yc - xs @ w
    return float(r @ r / (2 * n) + l1 * np.abs(w).sum() + l2 / 2 * w @ w)


def standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    return (x - mean) / safe, mean, std


def fit_elastic_net(
    data: Dataset,
    l1: float,
    l2: float,
    features: list[str] | None = None,
    tolerance: float = 1e-10,
    max_iter: int = 100_000,
) -> ElasticNetModel:
    """Coordinate descent on standardized features; converged when the
    largest coefficient update falls below `tolerance`. Coefficients are
    reported back in original units."""
    if l1 < 0 or l2 < 0:
        raise MapbenchError("penalties must be >= 0")
    features = features or ["vtd_m"]
    x = data.x(features)
    y = data.y()
    n, p = x.shape
    xs, x_mean, x_std = standardize(x)
    y_mean = y.mean()
    yc = y - y_mean

    w = np.zeros(p)
    r = yc.copy()  # residual yc - xs @ w
    col_scale = (xs * xs).mean(axis=0)  # 1.0 for non-constant columns
    for iteration in range(max_iter):
        max_delta = 0.0
        for k in range(p):
            if col_scale[k] == 0.0:
                continue  # constant feature stays at zero
            rho = w[k] * col_scale[k] + xs[:, k] @ r / n
            new = math.copysign(max(abs(rho) - l1, 0.0), rho) / (col_scale[k] + l2)
            delta = new - w[k]
            if delta != 0.0:
                r -= delta * xs[:, k]
                w[k] = new
                max_delta = max(max_delta, abs(delta))
        if max_delta < tolerance:
            break
    else:
        raise ConvergenceError(
            f"elastic net did not converge within {max_iter} iterations", max_iter
        )

    safe = np.where(x_std > 0, x_std, 1.0)
    coef = w / safe
    intercept = float(y_mean - coef @ x_mean)
    return ElasticNetModel(coef, intercept, list(features), data.target, l1, l2, x_mean, x_std)


@dataclass
class GPModel:
    """RBF-kernel Gaussian-process regressor (mean prediction only)."""

    x_train: np.ndarray  # standardized
    alpha: np.ndarray
    length_scale: float
    signal_var: float
    noise_var: float
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    feature_names: list[str]
    target: str
    log_marginal_likelihood: float = 0.0

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        safe = np.where(self.x_std > 0, self.x_std, 1.0)
        xs = (x - self.x_mean) / safe
        k = rbf_kernel(xs, self.x_train, self.length_scale, self.signal_var)
        return k @ self.alpha + self.y_mean


def rbf_kernel(a: np.ndarray, b: np.ndarray, length_scale: float, signal_var: float) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return signal_var * np.exp(-d2 / (2 * length_scale**2))


def fit_gp(
    data: Dataset,
    features: list[str] | None = None,
    length_scale: float | None = None,
    signal_var: float | None = None,
    noise_var: float | None = None,
    grid_search: bool = False,
) -> GPModel:
    """GP regression mean fit. Defaults: unit length scale on
    standardized features, signal variance = target variance, noise =
    0.1 * target variance. grid_search refines hyperparameters by log
    marginal likelihood."""
    features = features or ["vtd_m"]
    x = data.x(features)
    y = data.y()
    xs, x_mean, x_std = standardize(x)
    y_mean = float(y.mean())
    yc = y - y_mean
    y_var = float(yc.var()) or 1.0

    ls0 = 1.0 if length_scale is None else length_scale
    sv0 = y_var if signal_var is None else signal_var
    nv0 = 0.1 * y_var if noise_var is None else noise_var

    def factorize(ls, sv, nv):
        k = rbf_kernel(xs, xs, ls, sv) + nv * np.eye(len(xs))
        try:
            cho = linalg.cho_factor(k, lower=True)
        except linalg.LinAlgError:
            raise CholeskyError(
                "kernel matrix not positive definite; increase the noise term"
            )
        alpha = linalg.cho_solve(cho, yc)
        lml = float(
            -0.5 * yc @ alpha - np.log(np.diag(cho[0])).sum() - len(yc) / 2 * np.log(2 * np.pi)
        )
        return alpha, lml

    candidates = [(ls0, sv0, nv0)]
    if grid_search:
        candidates = [
            (ls, sv, nv)
            for ls in ls0 * np.logspace(-1, 1, 5)
            for sv in sv0 * np.logspace(-1, 1, 3)
            for nv in nv0 * np.logspace(-1, 1, 3)
        ]
    best = None
    for ls, sv, nv in candidates:
        try:
            alpha, lml = factorize(ls, sv, nv)
        except CholeskyError:
            if len(candidates) == 1:
                raise
            continue
        if best is None or lml > best[0]:
            best = (lml, ls, sv, nv, alpha)
    if best is None:
        raise CholeskyError("no hyperparameter candidate yielded a positive-definite kernel")
    lml, ls, sv, nv, alpha = best
    return GPModel(xs, alpha, ls, sv, nv, x_mean, x_std, y_mean, list(features), data.target, lml)


def gp_predict(model: GPModel, x: np.ndarray) -> np.ndarray:
    return model.predict_matrix(np.atleast_2d(np.asarray(x, dtype=float)))


Model = LinearModel | ElasticNetModel | GPModel


def predict(model: Model, features: dict[str, float]) -> float:
    """Evaluate a fitted model on one feature mapping."""
    missing = [n for n in model.feature_names if n not in features]
    if missing:
        raise MissingFeatureError(f"feature vector lacks {missing} needed by the model")
    x = np.array([[float(features[n]) for n in model.feature_names]])
    return float(model.predict_matrix(x)[0])


def predict_performance(bundle: dict[str, Model], features: dict[str, float]) -> dict[str, float]:
    """Evaluate one model per error component."""
    return {target: predict(m, features) for target, m in bundle.items()}


def f_select(data: Dataset, k: int) -> list[str]:
    """Top-k features by the univariate linear-regression F statistic
    against the target; ties break on feature name."""
    names = data.feature_names
    if not 1 <= k <= len(names):
        raise MapbenchError(f"k must be in [1, {len(names)}], got {k}")
    y = data.y()
    n = len(y)
    scored = []
    for name in names:
        x = np.asarray(data.features[name], dtype=float)
        if x.std() == 0 or y.std() == 0:
            scored.append((0.0, name))
            continue
        r = float(np.corrcoef(x, y)[0, 1])
        r2 = min(r * r, 1.0)
        f = r2 / (1 - r2) * (n - 2) if r2 < 1 else math.inf
        scored.append((f, name))
    scored.sort(key=lambda s: (-s[0], s[1]))
    return [name for _, name in scored[:k]]


@dataclass
class ModelSpec:
    """What to fit inside cross-validation folds."""

    kind: str = "ols"  # ols | enet | gp
    features: list[str] = field(default_factory=lambda: ["vtd_m"])
    l1: float = 0.0
    l2: float = 0.0
    gp_grid_search: bool = False

    def fit(self, data: Dataset) -> Model:
        if self.kind == "ols":
            return fit_ols(data, self.features)
        if self.kind == "enet":
            return fit_elastic_net(data, self.l1, self.l2, self.features)
        if self.kind == "gp":
            return fit_gp(data, self.features, grid_search=self.gp_grid_search)
        raise MapbenchError(f"unknown model kind {self.kind!r}")


@dataclass
class CVReport:
    r2: float  # average across folds
    rmse: float  # pooled out-of-fold
    nrmse: float  # rmse / observed target range
    fold_r2: list[float]
    fold_rmse: list[float]
    k: int
    seed: int
    target: str

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "r2": self.r2,
            "rmse": self.rmse,
            "nrmse": self.nrmse,
            "k": self.k,
            "seed": self.seed,
            "fold_r2": self.fold_r2,
            "fold_rmse": self.fold_rmse,
        }


def kfold_cv(data: Dataset, spec: ModelSpec, k: int = 5, seed: int = 0) -> CVReport:
    """Seeded shuffle into k near-equal folds; fit on k-1, predict the
    held-out fold. R^2 is averaged across folds, RMSE pools all
    out-of-fold predictions, NRMSE divides by the full observed target
    range."""
    n = len(data)
    if not 2 <= k <= n:
        raise MapbenchError(f"fold count {k} must be in [2, {n}]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    folds = np.array_split(order, k)
    y = data.y()
    preds = np.empty(n)
    fold_r2 = []
    fold_rmse = []
    for fold in folds:
        train = np.setdiff1d(order, fold)
        model = spec.fit(data.subset(train))
        x_test = data.x(model.feature_names)[fold]
        p = model.predict_matrix(x_test)
        preds[fold] = p
        resid = y[fold] - p
        ss_tot = float(((y[fold] - y[fold].mean()) ** 2).sum())
        fold_r2.append(1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 0.0)
        fold_rmse.append(float(np.sqrt(np.mean(resid**2))))
    rmse = float(np.sqrt(np.mean((preds - y) ** 2)))
    y_range = float(y.max() - y.min())
    if y_range <= 0:
        raise EmptySampleError("target has zero observed range; NRMSE undefined")
    return CVReport(
        r2=float(np.mean(fold_r2)),
        rmse=rmse,
        nrmse=rmse / y_range,
        fold_r2=fold_r2,
        fold_rmse=fold_rmse,
        k=k,
        seed=seed,
        target=data.target,
    )


def model_to_dict(model: Model, training_meta: dict | None = None) -> dict:
    meta = {"date": date.today().isoformat()}
    meta.update(training_meta or {})
    doc = {"target": model.target, "features": model.feature_names, "training_meta": meta}
    if isinstance(model, LinearModel):
        doc["model_type"] = "ols"
        doc["coefficients"] = list(map(float, model.coefficients))
        doc["intercept"] = model.intercept
    elif isinstance(model, ElasticNetModel):
        doc["model_type"] = "enet"
        doc["coefficients"] = list(map(float, model.coefficients))
        doc["intercept"] = model.intercept
        doc["hyperparams"] = {"l1": model.l1, "l2": model.l2}
        doc["standardization"] = {
            "x_mean": list(map(float, model.x_mean)),
            "x_std": list(map(float, model.x_std)),
        }
    elif isinstance(model, GPModel):
        doc["model_type"] = "gp"
        doc["hyperparams"] = {
            "length_scale": model.length_scale,
            "signal_var": model.signal_var,
            "noise_var": model.noise_var,
            "log_marginal_likelihood": model.log_marginal_likelihood,
        }
        doc["training"] = {
            "x_train": model.x_train.tolist(),
            "alpha": model.alpha.tolist(),
            "x_mean": list(map(float, model.x_mean)),
            "x_std": list(map(float, model.x_std)),
            "y_mean": model.y_mean,
        }
    else:
        raise MapbenchError(f"cannot serialize model {type(model).__name__}")
    return doc


def model_from_dict(doc: dict) -> Model:
    kind = doc.get("model_type")
    target = doc["target"]
    features = list(doc["features"])
    if kind == "ols":
        return LinearModel(np.array(doc["coefficients"], dtype=float), float(doc["intercept"]),
                           features, target)
    if kind == "enet":
        std = doc["standardization"]
        return ElasticNetModel(
            np.array(doc["coefficients"], dtype=float),
            float(doc["intercept"]),
            features,
            target,
            float(doc["hyperparams"]["l1"]),
            float(doc["hyperparams"]["l2"]),
            np.array(std["x_mean"], dtype=float),
            np.array(std["x_std"], dtype=float),
        )
    if kind == "gp":
        hp = doc["hyperparams"]
        tr = doc["training"]
        return GPModel(
            np.array(tr["x_train"], dtype=float),
            np.array(tr["alpha"], dtype=float),
            float(hp["length_scale"]),
            float(hp["signal_var"]),
            float(hp["noise_var"]),
            np.array(tr["x_mean"], dtype=float),
            np.array(tr["x_std"], dtype=float),
            float(tr["y_mean"]),
            features,
            target,
            float(hp.get("log_marginal_likelihood", 0.0)),
        )
    raise ValidationError(f"unknown model_type {kind!r}")


def save_model(model: Model, path: str | Path, training_meta: dict | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, training_meta), indent=1))


def load_model(path: str | Path) -> Model:
    return model_from_dict(json.loads(Path(path).read_text()))


def save_bundle(bundle: dict[str, Model], path: str | Path, training_meta: dict | None = None):
    doc = {"models": {t: model_to_dict(m, training_meta) for t, m in bundle.items()}}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_models(path: str | Path) -> dict[str, Model]:
    """Load either a single-model file or a bundle; returns target -> model."""
    doc = json.loads(Path(path).read_text())
    if "models" in doc:
        return {t: model_from_dict(d) for t, d in doc["models"].items()}
    model = model_from_dict(doc)
    return {model.target: model}
