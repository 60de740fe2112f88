"""Displacement metrics, best-of-K evaluation, kinematic baselines and the ablation grid."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .goalnet import GoalNet, predict_goals
from .nsf import NeuralSocialForce, make_force_batch, rollout_hypotheses
from .trajdata import LaneGeometry, TrajectoryWindow


class MetricError(ValueError):
    pass


def _pair(truth, pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    if t.shape != p.shape:
        raise MetricError(f"truth and prediction lengths differ: {t.shape} vs {p.shape}")
    if t.ndim != 2 or t.shape[1] != 2:
        raise MetricError(f"trajectories must be (T, 2), got {t.shape}")
    if len(t) == 0:
        raise MetricError("empty trajectory")
    return t, p


def displacement(truth, pred) -> np.ndarray:
    t, p = _pair(truth, pred)
    return np.sqrt(((t - p) ** 2).sum(-1))


def ade(truth, pred) -> float:
    return float(displacement(truth, pred).mean())


def fde(truth, pred) -> float:
    return float(displacement(truth, pred)[-1])


def rmse(truth, pred) -> float:
    t, p = _pair(truth, pred)
    return float(math.sqrt(((t - p) ** 2).sum(-1).mean()))


@dataclass(frozen=True)
class MetricReport:
    ade: float
    fde: float
    rmse: float
    horizon_slices: tuple[float, ...]  # RMSE at each whole second of the horizon
    K: int
    sample_count: int
    weighted: Mapping[str, float] | None = None
    label: str = ""

    def row(self) -> dict:
        out = {"label": self.label, "K": self.K, "samples": self.sample_count, "ade": self.ade, "fde": self.fde, "rmse": self.rmse}
        for i, v in enumerate(self.horizon_slices, 1):
            out[f"rmse_{i}s"] = v
        if self.weighted:
            out.update({f"weighted_{k}": v for k, v in self.weighted.items()})
        return out


def horizon_frames(T_pred: int, dt: float) -> list[int]:
    """0-based frame indices that close each full second of the horizon."""
    per_second = int(round(1.0 / dt))
    frames = [s * per_second - 1 for s in range(1, T_pred // per_second + 1)]
    return frames or [T_pred - 1]


def report_from_predictions(
    truths: np.ndarray,
    predictions: np.ndarray,
    dt: float,
    probabilities: np.ndarray | None = None,
    label: str = "",
) -> MetricReport:
    """Best-of-K metrics from ``truths (B, T, 2)`` and ``predictions (B, K, T, 2)``.

    Per window, the hypothesis with the lowest ADE is scored (ties go to the
    lower index); ADE, FDE and RMSE are then averaged over windows. Horizon
    slices are RMSE across windows of the best hypothesis at each second.
    """
    truths = np.asarray(truths, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    if predictions.ndim == 3:
        predictions = predictions[:, None]
    B, K, T, _ = predictions.shape
    if truths.shape != (B, T, 2):
        raise MetricError(f"truth shape {truths.shape} does not match predictions {predictions.shape}")
    d = np.sqrt(((predictions - truths[:, None]) ** 2).sum(-1))  # (B, K, T)
    ades = d.mean(-1)
    fdes = d[..., -1]
    rmses = np.sqrt((d**2).mean(-1))
    best = np.argmin(ades, axis=1)
    rows = np.arange(B)
    best_d = d[rows, best]
    slices = tuple(float(np.sqrt((best_d[:, f] ** 2).mean())) for f in horizon_frames(T, dt))
    weighted = None
    if probabilities is not None:
        w = np.asarray(probabilities, dtype=float)
        w = w / w.sum(-1, keepdims=True)
        weighted = {
            "ade": float((w * ades).sum(-1).mean()),
            "fde": float((w * fdes).sum(-1).mean()),
            "rmse": float((w * rmses).sum(-1).mean()),
        }
    return MetricReport(
        ade=float(ades[rows, best].mean()),
        fde=float(fdes[rows, best].mean()),
        rmse=float(rmses[rows, best].mean()),
        horizon_slices=slices,
        K=K,
        sample_count=B,
        weighted=weighted,
        label=label,
    )


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def baseline_cv(window: TrajectoryWindow, T_pred: int | None = None) -> np.ndarray:
    p = window.observed[:, :2]
    if len(p) < 2:
        raise MetricError("constant-velocity baseline needs at least 2 observed frames")
    T = T_pred or window.T_pred
    k = np.arange(1, T + 1)[:, None]
    return p[-1] + k * (p[-1] - p[-2])


def baseline_ca(window: TrajectoryWindow, T_pred: int | None = None) -> np.ndarray:
    """Quadratic through the last three observed positions, extrapolated per frame."""
    p = window.observed[:, :2]
    if len(p) < 3:
        raise MetricError("constant-acceleration baseline needs at least 3 observed frames")
    T = T_pred or window.T_pred
    p0, p1, p2 = p[-1], p[-2], p[-3]
    b = (3 * p0 - 4 * p1 + p2) / 2
    a = (p0 - 2 * p1 + p2) / 2
    s = np.arange(1, T + 1)[:, None]
    return p0 + b * s + a * s**2


def evaluate_baseline(windows: Sequence[TrajectoryWindow], fn: Callable, label: str = "") -> MetricReport:
    truths = np.stack([w.future[:, :2] for w in windows])
    preds = np.stack([fn(w) for w in windows])
    return report_from_predictions(truths, preds, windows[0].dt, label=label)


# ---------------------------------------------------------------------------
# Model evaluation
# ---------------------------------------------------------------------------


@dataclass
class GNPModel:
    goalnet: GoalNet
    force: NeuralSocialForce
    repulsion: bool = True


def predict_hypotheses(
    model: GNPModel, windows: Sequence[TrajectoryWindow], lanes, K: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Top-K goals ``(B, K, 2)``, their raw probabilities ``(B, K)`` and rollouts ``(B, K, T, 2)``."""
    goals, probs = predict_goals(model.goalnet, windows)
    L = goals.shape[1]
    K = min(K, L)
    order = np.argsort(-probs, axis=1, kind="stable")[:, :K]
    top_goals = np.take_along_axis(goals, order[..., None], 1)
    top_probs = np.take_along_axis(probs, order, 1)
    batch = make_force_batch(windows, lanes)
    paths = rollout_hypotheses(model.force, batch, top_goals, model.repulsion)
    return top_goals, top_probs, paths


def evaluate_best_of_k(
    model: GNPModel, windows: Sequence[TrajectoryWindow], lanes, K: int, label: str = ""
) -> MetricReport:
    if K < 1:
        raise MetricError("K must be >= 1")
    _, probs, paths = predict_hypotheses(model, windows, lanes, K)
    truths = np.stack([w.future[:, :2] for w in windows])
    return report_from_predictions(truths, paths, windows[0].dt, probs, label)


@dataclass(frozen=True)
class Variant:
    name: str
    intention_modes: bool
    goal_force: bool
    repulsion: bool


ABLATION_GRID = (
    Variant("(1)", False, True, True),
    Variant("(2)", False, True, False),
    Variant("(3)", True, True, False),
    Variant("(4)", True, True, True),
)


@dataclass
class AblationModels:
    goalnet_modes: GoalNet
    goalnet_mean: GoalNet
    force_full: NeuralSocialForce
    force_goal_only: NeuralSocialForce
    extra: dict = field(default_factory=dict)


def run_ablation(
    models: AblationModels,
    windows: Sequence[TrajectoryWindow],
    lanes: LaneGeometry | Mapping[str, LaneGeometry],
    K: int,
    grid: Sequence[Variant] = ABLATION_GRID,
) -> dict[str, MetricReport]:
    """One report per variant on the same windows, in grid order.

    Without intention modes the goal network is built on a single mean-future
    mode, so those variants score one hypothesis.
    """
    out = {}
    for v in grid:
        if not v.goal_force:
            raise ValueError("every variant keeps the goal attraction force")
        goalnet = models.goalnet_modes if v.intention_modes else models.goalnet_mean
        force = models.force_full if v.repulsion else models.force_goal_only
        out[v.name] = evaluate_best_of_k(GNPModel(goalnet, force, v.repulsion), windows, lanes, K, label=v.name)
    return out


# ---------------------------------------------------------------------------
# Report formatting
# ---------------------------------------------------------------------------


def reports_csv(reports: Sequence[MetricReport]) -> str:
    rows = [r.row() for r in reports]
    cols = list(dict.fromkeys(k for row in rows for k in row))
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c, "")) for c in cols))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def reports_table(reports: Sequence[MetricReport]) -> str:
    header = ["label", "K", "n", "ADE", "FDE", "RMSE"] + [f"{i}s" for i in range(1, 1 + max(len(r.horizon_slices) for r in reports))]
    body = [
        [r.label, str(r.K), str(r.sample_count), f"{r.ade:.3f}", f"{r.fde:.3f}", f"{r.rmse:.3f}"]
        + [f"{v:.3f}" for v in r.horizon_slices]
        for r in reports
    ]
    widths = [max(len(row[i]) if i < len(row) else 0 for row in [header] + body) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in [header] + body) + "\n"


def ablation_table(reports: Mapping[str, MetricReport], grid: Sequence[Variant] = ABLATION_GRID) -> str:
    mark = {True: "yes", False: "no"}
    lines = ["Variant  IM   F_GOAL  F_REP  ADE/FDE/RMSE"]
    for v in grid:
        r = reports[v.name]
        lines.append(
            f"{v.name:<8} {mark[v.intention_modes]:<4} {mark[v.goal_force]:<7} {mark[v.repulsion]:<6} {r.ade:.2f}/{r.fde:.2f}/{r.rmse:.2f}"
        )
    return "\n".join(lines) + "\n"
