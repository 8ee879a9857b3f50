"""Split conformal calibration of per-step prediction error radii.

Nonconformity scores are Euclidean prediction errors.  The default quantile
index ceil((n+1)(1-alpha)) carries the finite-sample coverage guarantee of
split conformal prediction; the plain empirical index ceil((1-alpha) n) is
kept behind a flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .orca import CalibrationDataset
from .prediction import ObservationWindow, TrajectoryPredictor

__all__ = [
    "ScoreSet",
    "ConformalRadii",
    "score_dataset",
    "conformal_radii",
    "empirical_coverage",
    "horizon_coverage",
    "min_sample_count",
    "QUANTILE_RULES",
]

QUANTILE_RULES = ("finite_sample", "empirical")


@dataclass(frozen=True)
class ScoreSet:
    """Per-future-step nonconformity scores, one row per step of the horizon."""

    scores: np.ndarray  # (t_pred, n)

    def __post_init__(self) -> None:
        s = np.asarray(self.scores, dtype=float)
        if s.ndim != 2:
            raise ValueError(f"scores must be 2D (t_pred, n), got shape {s.shape}")
        if s.shape[1] < 1:
            raise ValueError("score set must contain at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        if np.any(s < 0.0):
            raise ValueError("scores must be non-negative")
        object.__setattr__(self, "scores", s)

    @property
    def t_pred(self) -> int:
        return int(self.scores.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.scores.shape[1])


@dataclass(frozen=True)
class ConformalRadii:
    """Calibrated per-step radii together with their provenance."""

    radii: np.ndarray  # (t_pred,)
    alpha: float
    sample_count: int
    quantile_rule: str = "finite_sample"

    def __post_init__(self) -> None:
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1:
            raise ValueError(f"radii must be 1D, got shape {r.shape}")
        if not np.all(np.isfinite(r)) or np.any(r < 0.0):
            raise ValueError("radii must be finite and non-negative")
        object.__setattr__(self, "radii", r)

    @property
    def t_pred(self) -> int:
        return int(self.radii.shape[0])

    @staticmethod
    def zeros(t_pred: int, alpha: float) -> "ConformalRadii":
        return ConformalRadii(
            radii=np.zeros(t_pred), alpha=alpha, sample_count=0, quantile_rule="finite_sample"
        )


def score_dataset(dataset: CalibrationDataset, predictor: TrajectoryPredictor) -> ScoreSet:
    """Prediction errors of ``predictor`` on every calibration sample.

    Sample m with human i contributes one score per future step tau:
    the Euclidean distance between the predicted and simulated positions.
    Columns are ordered sample-major, so equal datasets give equal score sets.
    """
    t_pred = dataset.human_future.shape[2]
    errors = np.empty((dataset.n_samples, dataset.n_humans, t_pred), dtype=float)
    for m in range(dataset.n_samples):
        window = ObservationWindow(
            human_positions=dataset.human_obs[m],
            robot_positions=None if dataset.robot_obs is None else dataset.robot_obs[m],
            dt=dataset.dt,
        )
        predicted = predictor.predict(window, t_pred).positions
        diff = predicted - dataset.human_future[m]
        errors[m] = np.hypot(diff[..., 0], diff[..., 1])
    # (M, N, t_pred) -> (t_pred, M*N)
    flat = errors.reshape(dataset.n_samples * dataset.n_humans, t_pred).T
    return ScoreSet(scores=flat.copy())


def min_sample_count(alpha: float, quantile_rule: str = "finite_sample") -> int:
    """Smallest calibration size for which the quantile index is in range."""
    if quantile_rule == "finite_sample":
        return math.ceil((1.0 - alpha) / alpha)
    return 1


def _quantile_index(n: int, alpha: float, quantile_rule: str) -> int:
    if quantile_rule == "finite_sample":
        return math.ceil((n + 1) * (1.0 - alpha))
    return math.ceil(n * (1.0 - alpha))


def conformal_radii(
    scores: ScoreSet, alpha: float, quantile_rule: str = "finite_sample"
) -> ConformalRadii:
    """Per-step radii as the calibrated upper quantile of the scores."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if quantile_rule not in QUANTILE_RULES:
        raise ValueError(f"unknown quantile rule {quantile_rule!r}, expected {QUANTILE_RULES}")
    n = scores.n_samples
    q = _quantile_index(n, alpha, quantile_rule)
    if q > n:
        needed = min_sample_count(alpha, quantile_rule)
        raise ValueError(
            f"quantile index {q} exceeds sample count {n}; "
            f"alpha={alpha} needs at least {needed} calibration samples"
        )
    ordered = np.sort(scores.scores, axis=1)
    radii = ordered[:, q - 1].copy()
    return ConformalRadii(
        radii=radii, alpha=alpha, sample_count=n, quantile_rule=quantile_rule
    )


def _as_score_array(scores: ScoreSet | np.ndarray) -> np.ndarray:
    if isinstance(scores, ScoreSet):
        return scores.scores
    arr = np.asarray(scores, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"scores must be 2D (t_pred, n), got shape {arr.shape}")
    return arr


def empirical_coverage(
    radii: ConformalRadii, scores: ScoreSet | np.ndarray, strict: bool = False
) -> np.ndarray:
    """Per-step fraction of scores within the radii (non-strict by default)."""
    arr = _as_score_array(scores)
    if arr.shape[0] != radii.t_pred:
        raise ValueError(
            f"score steps {arr.shape[0]} do not match radii steps {radii.t_pred}"
        )
    r = radii.radii[:, None]
    hits = arr < r if strict else arr <= r
    return hits.mean(axis=1)


def horizon_coverage(
    radii: ConformalRadii, scores: ScoreSet | np.ndarray, strict: bool = False
) -> float:
    """Fraction of samples whose whole horizon stays within the radii."""
    arr = _as_score_array(scores)
    if arr.shape[0] != radii.t_pred:
        raise ValueError(
            f"score steps {arr.shape[0]} do not match radii steps {radii.t_pred}"
        )
    r = radii.radii[:, None]
    hits = arr < r if strict else arr <= r
    return float(hits.all(axis=0).mean())
