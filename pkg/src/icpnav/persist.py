"""On-disk artifacts: replay logs, metric tables, and calibrated radii.

Replays are JSON lines: a header object, one object per simulator timestep
with keys ``t``, ``robot``, ``humans``, ``predictions``, ``radii``, ``plan``
(plus ``alpha`` on planning rows of adaptive methods), and a footer carrying
the outcome.  Every float is written with 17 significant digits so values
survive a round trip bit for bit and reruns produce byte identical files.
Wall-clock timings are deliberately not persisted (they would break byte
determinism); reconstructed records carry zeros there.  A replay is
otherwise self-contained: episode metrics can be recomputed from it alone.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import OffcpRadii
from .conformal import ConformalRadii
from .episode import EpisodeLog
from .geometry import HorizonPrediction
from .metrics import EpisodeMetrics, EpisodeRecord, Outcome, SuiteSummary, episode_metrics

__all__ = [
    "ReplayMeta",
    "dumps",
    "write_replay",
    "parse_replay",
    "read_replay",
    "replay_metrics",
    "write_episodes_csv",
    "write_summary_csv",
    "save_radii",
    "load_radii",
    "SUMMARY_COLUMNS",
    "EPISODE_COLUMNS",
]

REPLAY_VERSION = 1

SUMMARY_COLUMNS = (
    "method",
    "NI",
    "CS",
    "ES",
    "SR",
    "ITR_mean",
    "ITR_std",
    "SD_mean",
    "SD_std",
    "PL_mean",
    "PL_std",
    "NT_mean",
    "NT_std",
    "CR_mean",
    "CR_std",
)
EPISODE_COLUMNS = ("case", "outcome", "NT", "PL", "ITR", "SD", "CR", "error")


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    return format(x, ".17g")


def _emit(obj, parts: list[str]) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(_fmt(float(obj)))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, dict):
        parts.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                parts.append(",")
            if not isinstance(k, str):
                raise TypeError(f"object keys must be strings, got {type(k).__name__}")
            parts.append(json.dumps(k))
            parts.append(":")
            _emit(v, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, v in enumerate(obj):
            if i:
                parts.append(",")
            _emit(v, parts)
        parts.append("]")
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), parts)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Compact JSON with floats at 17 significant digits."""
    parts: list[str] = []
    _emit(obj, parts)
    return "".join(parts)


@dataclass(frozen=True)
class ReplayMeta:
    """Episode identity and the constants metrics need."""

    method: str
    case_index: int
    seed: int
    t_pred: int
    r_r: float
    r_h: float


def _radii_payload(radii: ConformalRadii) -> dict:
    return {
        "values": radii.radii,
        "alpha": radii.alpha,
        "samples": radii.sample_count,
        "rule": radii.quantile_rule,
    }


def _radii_from_payload(payload: dict) -> ConformalRadii:
    return ConformalRadii(
        radii=np.asarray(payload["values"], dtype=float),
        alpha=float(payload["alpha"]),
        sample_count=int(payload["samples"]),
        quantile_rule=str(payload["rule"]),
    )


def replay_lines(meta: ReplayMeta, log: EpisodeLog) -> Iterable[str]:
    rec = log.record
    yield dumps(
        {
            "kind": "header",
            "version": REPLAY_VERSION,
            "method": meta.method,
            "case": meta.case_index,
            "seed": meta.seed,
            "dt": rec.dt,
            "t_pred": meta.t_pred,
            "r_r": meta.r_r,
            "r_h": meta.r_h,
            "n_humans": rec.n_humans,
        }
    )
    cycle_at = {step: i for i, step in enumerate(rec.prediction_steps)}
    for t in range(rec.steps + 1):
        row: dict = {
            "t": t,
            "robot": rec.robot[t],
            "humans": rec.humans[:, t, :],
            "predictions": None,
            "radii": None,
            "plan": None,
        }
        i = cycle_at.get(t)
        if i is not None:
            row["predictions"] = rec.predictions[i].positions
            row["radii"] = _radii_payload(rec.radii_in_force[i])
            row["plan"] = log.plan_positions[i]
            if log.alphas is not None:
                row["alpha"] = log.alphas[i]
        yield dumps(row)
    yield dumps({"kind": "end", "outcome": rec.outcome.value, "steps": rec.steps})


def write_replay(path: str | Path, meta: ReplayMeta, log: EpisodeLog) -> None:
    text = "\n".join(replay_lines(meta, log)) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def parse_replay(text: str) -> tuple[EpisodeLog, ReplayMeta]:
    lines = text.splitlines()
    if len(lines) < 3:
        raise ValueError("replay is truncated")
    header = json.loads(lines[0])
    footer = json.loads(lines[-1])
    if header.get("kind") != "header" or footer.get("kind") != "end":
        raise ValueError("replay is missing its header or footer")
    meta = ReplayMeta(
        method=str(header["method"]),
        case_index=int(header["case"]),
        seed=int(header["seed"]),
        t_pred=int(header["t_pred"]),
        r_r=float(header["r_r"]),
        r_h=float(header["r_h"]),
    )
    dt = float(header["dt"])
    n_humans = int(header["n_humans"])

    robot_rows: list[list[float]] = []
    human_rows: list[list[list[float]]] = []
    prediction_steps: list[int] = []
    predictions: list[HorizonPrediction] = []
    radii_in_force: list[ConformalRadii] = []
    cycle_wall_times: list[float] = []
    plan_positions: list[np.ndarray] = []
    alphas: list[float] = []
    for line in lines[1:-1]:
        row = json.loads(line)
        t = int(row["t"])
        if t != len(robot_rows):
            raise ValueError(f"replay has out-of-order timestep {t}")
        robot_rows.append(row["robot"])
        human_rows.append(row["humans"])
        if row["predictions"] is not None:
            prediction_steps.append(t)
            predictions.append(
                HorizonPrediction(positions=np.asarray(row["predictions"], dtype=float))
            )
            radii_in_force.append(_radii_from_payload(row["radii"]))
            cycle_wall_times.append(0.0)
            plan = np.asarray(row["plan"], dtype=float)
            plan_positions.append(plan.reshape(-1, 2))
            if "alpha" in row:
                alphas.append(float(row["alpha"]))

    steps = len(robot_rows) - 1
    if steps != int(footer["steps"]):
        raise ValueError("replay footer disagrees with its row count")
    humans = (
        np.transpose(np.asarray(human_rows, dtype=float), (1, 0, 2))
        if n_humans
        else np.zeros((0, steps + 1, 2))
    )
    record = EpisodeRecord(
        robot=np.asarray(robot_rows, dtype=float),
        humans=humans,
        dt=dt,
        outcome=Outcome(footer["outcome"]),
        prediction_steps=tuple(prediction_steps),
        predictions=tuple(predictions),
        radii_in_force=tuple(radii_in_force),
        cycle_wall_times=tuple(cycle_wall_times),
    )
    log = EpisodeLog(
        record=record,
        plan_positions=tuple(plan_positions),
        alphas=tuple(alphas) if alphas else None,
    )
    return log, meta


def read_replay(path: str | Path) -> tuple[EpisodeLog, ReplayMeta]:
    return parse_replay(Path(path).read_text(encoding="utf-8"))


def replay_metrics(path: str | Path) -> EpisodeMetrics:
    """Recompute episode metrics from a replay file alone."""
    log, meta = read_replay(path)
    return episode_metrics(log.record, t_pred=meta.t_pred, r_r=meta.r_r, r_h=meta.r_h)


def _cell(value: float | None) -> str:
    return "" if value is None else _fmt(value)


def write_episodes_csv(
    path: str | Path,
    rows: Sequence[tuple[int, EpisodeMetrics | None, str | None]],
) -> None:
    """One row per case: metrics when the episode ran, otherwise the error."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(EPISODE_COLUMNS)
        for case_index, metrics, error in rows:
            if metrics is None:
                writer.writerow([case_index, "Error", "", "", "", "", "", error or ""])
            else:
                writer.writerow(
                    [
                        case_index,
                        metrics.outcome.value,
                        _fmt(metrics.nt),
                        _fmt(metrics.pl),
                        _fmt(metrics.itr),
                        _cell(metrics.sd),
                        _cell(metrics.cr),
                        "",
                    ]
                )


def write_summary_csv(
    path: str | Path,
    method: str,
    ni: int,
    cs: int,
    es: str,
    summary: SuiteSummary,
) -> None:
    def stat(s) -> tuple[str, str]:
        return ("", "") if s is None else (_fmt(s.mean), _fmt(s.std))

    itr = stat(summary.itr)
    sd = stat(summary.sd)
    pl = stat(summary.pl)
    nt = stat(summary.nt)
    cr = stat(summary.cr)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerow(
            [method, ni, cs, es, _fmt(summary.success_rate), *itr, *sd, *pl, *nt, *cr]
        )


def save_radii(path: str | Path, calibrated: OffcpRadii) -> None:
    payload = {
        "radii": _radii_payload(calibrated.radii),
        "episodes": calibrated.episodes,
        "n_samples": calibrated.n_samples,
    }
    Path(path).write_text(dumps(payload) + "\n", encoding="utf-8")


def load_radii(path: str | Path) -> OffcpRadii:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return OffcpRadii(
        radii=_radii_from_payload(payload["radii"]),
        episodes=int(payload["episodes"]),
        n_samples=int(payload["n_samples"]),
    )
