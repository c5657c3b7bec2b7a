"""Localization-error metric over estimated vs ground-truth trajectories.

The error of one run is the mean residual between estimated and true
relative displacements over a random sample of pose pairs; the sample
size comes from a normal-approximation bound given a confidence level
and margin of error. Per-environment performance aggregates run errors
into means and population standard deviations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import EmptySampleError, MapbenchError, ValidationError
from .geometry import wrap_angles

RNG_ALGORITHM = "PCG64 (numpy default_rng)"

# Common two-sided z-scores; other confidences fall back to the exact
# normal quantile.
Z_TABLE = {0.80: 1.282, 0.90: 1.645, 0.95: 1.960, 0.98: 2.326, 0.99: 2.576}

RUNLOG_HEADER = ["t", "est_x", "est_y", "est_theta", "gt_x", "gt_y", "gt_theta"]


def z_score(confidence: float) -> float:
    if not 0 < confidence < 1:
        raise MapbenchError(f"confidence must be in (0, 1), got {confidence}")
    if confidence in Z_TABLE:
        return Z_TABLE[confidence]
    return float(stats.norm.ppf((1 + confidence) / 2))


@dataclass(frozen=True)
class SamplingPolicy:
    """Confidence/margin policy for relation and run-count sampling.

    Margins are independent for translation (m) and rotation (rad); the
    larger of the two implied sample sizes wins. z_squared selects the
    standard sample-size formula; False reproduces the unsquared variant.
    """

    confidence: float = 0.99
    margin_t: float = 0.02
    margin_r: float = 0.01
    pilot_pairs: int = 100
    pilot_runs: int = 10
    seed: int = 0
    z_squared: bool = True

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise MapbenchError(f"confidence must be in (0, 1), got {self.confidence}")
        if self.margin_t <= 0 or self.margin_r <= 0:
            raise MapbenchError("margins must be > 0")


def sample_size(
    variance: float,
    policy: SamplingPolicy,
    margin: float | None = None,
    lower: int | None = None,
    upper: int | None = None,
) -> int:
    """Required sample count for estimating a mean to within `margin` at
    the policy confidence: ceil(z^2 * s^2 / d^2), clamped to
    [lower, upper]."""
    if variance < 0:
        raise MapbenchError(f"variance must be >= 0, got {variance}")
    d = policy.margin_t if margin is None else margin
    z = z_score(policy.confidence)
    zz = z * z if policy.z_squared else z
    n = math.ceil(zz * variance / (d * d))
    n = max(n, policy.pilot_pairs if lower is None else lower)
    if upper is not None:
        n = min(n, upper)
    return n


@dataclass
class RunLog:
    """Time-aligned estimated and ground-truth poses of one run."""

    run_id: str
    t: np.ndarray  # (n,)
    est: np.ndarray  # (n, 3): x, y, theta
    gt: np.ndarray  # (n, 3)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.est = np.asarray(self.est, dtype=float)
        self.gt = np.asarray(self.gt, dtype=float)
        n = len(self.t)
        if n < 2:
            raise ValidationError(f"run {self.run_id}: needs at least 2 poses, got {n}")
        if self.est.shape != (n, 3) or self.gt.shape != (n, 3):
            raise ValidationError(f"run {self.run_id}: estimated/truth lengths differ")
        if not np.all(np.diff(self.t) > 0):
            raise ValidationError(f"run {self.run_id}: timestamps not strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def total_pairs(self) -> int:
        n = len(self)
        return n * (n - 1) // 2


def load_runlog(path: str | Path, run_id: str | None = None) -> RunLog:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != RUNLOG_HEADER:
            raise ValidationError(
                f"{path}: expected header {','.join(RUNLOG_HEADER)}, got {header}"
            )
        try:
            rows = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        except ValueError as exc:
            raise ValidationError(f"{path}: non-numeric value ({exc})")
    if rows.ndim != 2 or rows.shape[1] != 7:
        raise ValidationError(f"{path}: malformed rows")
    return RunLog(run_id or path.stem, rows[:, 0], rows[:, 1:4], rows[:, 4:7])


def save_runlog(run: RunLog, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUNLOG_HEADER)
        for k in range(len(run)):
            writer.writerow([repr(v) for v in (run.t[k], *run.est[k], *run.gt[k])])


@dataclass
class RelationSample:
    """Sampled pose-index pairs and their per-pair residuals."""

    pairs: np.ndarray  # (n, 2), i < j
    trans_norms: np.ndarray  # (n,) residual translation norms, m
    rot_offsets: np.ndarray  # (n,) wrapped residual rotations, rad
    required_t: int
    required_r: int

    def __len__(self) -> int:
        return len(self.pairs)


def _pair_rank_to_ij(ranks: np.ndarray, n: int) -> np.ndarray:
    """Decode linear pair ranks into (i, j) index pairs with i < j.

    Rank r counts pairs row by row: (0,1)..(0,n-1), (1,2).. etc.
    """
    ranks = np.asarray(ranks, dtype=np.int64)
    # i is the largest value with cum(i) <= r, cum(i) = i*n - i*(i+1)/2
    i = np.floor((2 * n - 1 - np.sqrt((2 * n - 1) ** 2 - 8 * ranks.astype(float))) / 2).astype(
        np.int64
    )
    # float rounding can land one row off; correct both directions
    cum = lambda k: k * n - k * (k + 1) // 2  # noqa: E731
    i = np.where(cum(i + 1) <= ranks, i + 1, i)
    i = np.where(cum(i) > ranks, i - 1, i)
    j = ranks - cum(i) + i + 1
    return np.column_stack([i, j])


def _draw_pairs(total: int, count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """count distinct pair ranks drawn uniformly without replacement."""
    if count >= total:
        ranks = np.arange(total, dtype=np.int64)
    elif count > total // 2:
        ranks = rng.permutation(total)[:count]
    else:
        chosen: set[int] = set()
        while len(chosen) < count:
            draw = rng.integers(0, total, size=count - len(chosen))
            chosen.update(int(v) for v in draw)
        ranks = np.fromiter(sorted(chosen), dtype=np.int64)
    return _pair_rank_to_ij(np.sort(np.asarray(ranks)), n)


def pair_residuals(run: RunLog, pairs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Residual translation norms and wrapped rotation offsets for the
    given (i, j) pose pairs.

    The residual is the estimated relative displacement expressed in the
    frame of the true one; its translation norm is rotation-invariant so
    only the relative translations and headings are needed.
    """
    i, j = pairs[:, 0], pairs[:, 1]

    def rel(poses):
        dx = poses[j, 0] - poses[i, 0]
        dy = poses[j, 1] - poses[i, 1]
        c = np.cos(poses[i, 2])
        s = np.sin(poses[i, 2])
        return (
            c * dx + s * dy,
            -s * dx + c * dy,
            wrap_angles(poses[j, 2] - poses[i, 2]),
        )

    ex, ey, eth = rel(run.est)
    gx, gy, gth = rel(run.gt)
    trans = np.hypot(ex - gx, ey - gy)
    rot = wrap_angles(eth - gth)
    return trans, rot


def sample_relations(run: RunLog, policy: SamplingPolicy) -> RelationSample:
    """Two-stage uniform pair sampling: a pilot draw estimates residual
    variances, the normal-approximation bound sizes the final draw
    (clamped to the available pairs). Deterministic given the seed."""
    rng = np.random.default_rng(policy.seed)
    total = run.total_pairs
    n = len(run)

    pilot_n = min(policy.pilot_pairs, total)
    pilot = _draw_pairs(total, pilot_n, n, rng)
    trans, rot = pair_residuals(run, pilot)
    var_t = float(np.var(trans, ddof=1)) if len(trans) > 1 else 0.0
    var_r = float(np.var(np.abs(rot), ddof=1)) if len(rot) > 1 else 0.0

    required_t = sample_size(var_t, policy, margin=policy.margin_t, upper=total)
    required_r = sample_size(var_r, policy, margin=policy.margin_r, upper=total)
    count = max(required_t, required_r)

    pairs = _draw_pairs(total, count, n, rng)
    trans, rot = pair_residuals(run, pairs)
    return RelationSample(pairs, trans, rot, required_t, required_r)


def exhaustive_relations(run: RunLog) -> RelationSample:
    """All pose pairs; the oracle counterpart of sample_relations."""
    n = len(run)
    i, j = np.triu_indices(n, k=1)
    pairs = np.column_stack([i, j]).astype(np.int64)
    trans, rot = pair_residuals(run, pairs)
    return RelationSample(pairs, trans, rot, len(pairs), len(pairs))


@dataclass
class RunError:
    """Localization error of one run; `absolute` mode keeps units m/rad,
    `squared` keeps the squared-residual form."""

    eps_t: float
    eps_r: float
    mode: str
    n_pairs: int

    def as_dict(self) -> dict:
        return {
            "eps_t": self.eps_t,
            "eps_r": self.eps_r,
            "mode": self.mode,
            "n_pairs": self.n_pairs,
        }


def localization_error(run: RunLog, rel: RelationSample, mode: str = "absolute") -> RunError:
    if len(rel) == 0:
        raise EmptySampleError("relation sample is empty")
    if mode == "absolute":
        eps_t = float(np.mean(rel.trans_norms))
        eps_r = float(np.mean(np.abs(rel.rot_offsets)))
    elif mode == "squared":
        eps_t = float(np.mean(rel.trans_norms**2))
        eps_r = float(np.mean(rel.rot_offsets**2))
    else:
        raise MapbenchError(f"unknown error mode {mode!r}")
    return RunError(eps_t, eps_r, mode, len(rel))


def evaluate_run(run: RunLog, policy: SamplingPolicy, mode: str = "absolute") -> RunError:
    return localization_error(run, sample_relations(run, policy), mode)


@dataclass
class PerformanceVector:
    """Mean and population standard deviation of the translational and
    rotational errors over an environment's runs."""

    mean_eps_t: float
    std_eps_t: float
    mean_eps_r: float
    std_eps_r: float
    run_count: int

    def as_dict(self) -> dict:
        return {
            "mean_eps_t": self.mean_eps_t,
            "std_eps_t": self.std_eps_t,
            "mean_eps_r": self.mean_eps_r,
            "std_eps_r": self.std_eps_r,
            "run_count": self.run_count,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PerformanceVector":
        return cls(
            doc["mean_eps_t"],
            doc["std_eps_t"],
            doc["mean_eps_r"],
            doc["std_eps_r"],
            doc["run_count"],
        )


TARGET_NAMES = ["mean_eps_t", "std_eps_t", "mean_eps_r", "std_eps_r"]


def aggregate(errors: list[RunError]) -> PerformanceVector:
    """Per-environment aggregation; the standard deviation uses the
    population denominator (the run count itself)."""
    if not errors:
        raise EmptySampleError("no run errors to aggregate")
    modes = {e.mode for e in errors}
    if len(modes) > 1:
        raise MapbenchError(f"mixed error modes in aggregation: {sorted(modes)}")
    et = np.array([e.eps_t for e in errors])
    er = np.array([e.eps_r for e in errors])
    return PerformanceVector(
        mean_eps_t=float(et.mean()),
        std_eps_t=float(et.std(ddof=0)),
        mean_eps_r=float(er.mean()),
        std_eps_r=float(er.std(ddof=0)),
        run_count=len(errors),
    )


@dataclass
class RunCountEstimate:
    required: int
    performed: int

    @property
    def satisfied(self) -> bool:
        return self.required <= self.performed

    @property
    def additional(self) -> int:
        return max(0, self.required - self.performed)


def estimate_run_count(batch: list[RunError], policy: SamplingPolicy) -> RunCountEstimate:
    """One step of the iterative run-count search: from the errors of the
    runs performed so far, how many runs does the policy require? The
    caller loops, adding runs, until the estimate is satisfied."""
    if len(batch) < policy.pilot_runs:
        raise EmptySampleError(
            f"need at least the pilot batch of {policy.pilot_runs} runs, got {len(batch)}"
        )
    et = np.array([e.eps_t for e in batch])
    er = np.array([e.eps_r for e in batch])
    req_t = sample_size(
        float(np.var(et, ddof=1)), policy, margin=policy.margin_t, lower=policy.pilot_runs
    )
    req_r = sample_size(
        float(np.var(er, ddof=1)), policy, margin=policy.margin_r, lower=policy.pilot_runs
    )
    return RunCountEstimate(required=max(req_t, req_r), performed=len(batch))
