"""Threshold models over 1-D projections of polyline nodes onto a chosen line."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .boxes import REFUSE
from .dataset import Dataset
from .projection import Polyline2D, ProjectionSpec, project, project_all, projection_bounds


class LinearError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionLine:
    p0: tuple
    p1: tuple
    node_selector: int = -1  # polyline node index to project, default final endpoint

    def __post_init__(self):
        if self.p0 == self.p1:
            raise LinearError("degenerate line: endpoints coincide")

    def to_dict(self) -> dict:
        return {"p0": list(self.p0), "p1": list(self.p1), "node_selector": self.node_selector}

    @staticmethod
    def from_dict(d: dict) -> "ProjectionLine":
        return ProjectionLine(tuple(d["p0"]), tuple(d["p1"]), d.get("node_selector", -1))


@dataclass(frozen=True)
class LinearModel:
    line: ProjectionLine
    threshold: float
    form: str  # one_sided | two_sided | conjunction
    positive_class: str
    negative_class: Optional[str] = None
    second: Optional[tuple] = None  # (ProjectionLine, threshold) for the conjunction form

    def __post_init__(self):
        if self.form not in ("one_sided", "two_sided", "conjunction"):
            raise LinearError(f"unknown form {self.form!r}")
        if self.form == "conjunction" and self.second is None:
            raise LinearError("conjunction form needs a second (line, threshold) term")

    def to_dict(self) -> dict:
        return {
            "line": self.line.to_dict(),
            "threshold": self.threshold,
            "form": self.form,
            "positive_class": self.positive_class,
            "negative_class": self.negative_class,
            "second": [self.second[0].to_dict(), self.second[1]] if self.second else None,
        }


def score(case, spec: ProjectionSpec, line: ProjectionLine) -> float:
    """Position of the selected node's orthogonal projection onto the line,
    normalized so p0 -> 0 and p1 -> 1."""
    poly = case if isinstance(case, Polyline2D) else project(case, spec)
    try:
        node = poly.nodes[line.node_selector]
    except IndexError as exc:
        raise LinearError(f"node selector {line.node_selector} out of range") from exc
    dx = line.p1[0] - line.p0[0]
    dy = line.p1[1] - line.p0[1]
    denom = dx * dx + dy * dy
    return ((node[0] - line.p0[0]) * dx + (node[1] - line.p0[1]) * dy) / denom


def classify_linear(model: LinearModel, case, spec: ProjectionSpec):
    s = score(case, spec, model.line)
    if model.form == "one_sided":
        return model.positive_class if s > model.threshold else REFUSE
    if model.form == "two_sided":
        return model.positive_class if s > model.threshold else model.negative_class
    line2, t2 = model.second
    s2 = score(case, spec, line2)
    if s > model.threshold and s2 > t2:
        return model.positive_class
    return REFUSE


@dataclass(frozen=True)
class LinearSearchConfig:
    angles: int = 36
    offsets: int = 20
    node_selector: int = -1
    min_recall: float = 0.5  # one_sided recall floor
    refine_rounds: int = 2


@dataclass
class LinearFitReport:
    model: LinearModel
    precision: float
    recall: float
    accuracy: float


def _scores_for_line(nodes: np.ndarray, p0, p1) -> np.ndarray:
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    denom = dx * dx + dy * dy
    return ((nodes[:, 0] - p0[0]) * dx + (nodes[:, 1] - p0[1]) * dy) / denom


def _best_threshold_one_sided(s: np.ndarray, is_pos: np.ndarray, min_recall: float):
    """Maximize precision of {score > T} subject to recall >= min_recall."""
    order = np.argsort(-s, kind="stable")
    pos_total = int(is_pos.sum())
    tp = np.cumsum(is_pos[order])
    n = np.arange(1, len(s) + 1)
    precision = tp / n
    recall = tp / max(pos_total, 1)
    ok = recall >= min_recall
    if not ok.any():
        return None
    best = int(np.lexsort((-recall[ok], -precision[ok]))[0])
    idx = np.where(ok)[0][best]
    sorted_s = s[order]
    if idx + 1 < len(sorted_s):
        t = (sorted_s[idx] + sorted_s[idx + 1]) / 2
    else:
        t = sorted_s[idx] - 1e-9
    return float(t), float(precision[idx]), float(recall[idx])


def _best_threshold_two_sided(s: np.ndarray, is_pos: np.ndarray):
    """Maximize accuracy of {score > T -> positive, else negative}."""
    order = np.argsort(-s, kind="stable")
    pos_sorted = is_pos[order].astype(int)
    tp = np.concatenate(([0], np.cumsum(pos_sorted)))
    n = len(s)
    npos = int(is_pos.sum())
    k = np.arange(n + 1)  # cases predicted positive (top-k by score)
    correct = tp + ((n - k) - (npos - tp))
    best_k = int(correct.argmax())
    acc = correct[best_k] / n
    sorted_s = s[order]
    if best_k == 0:
        t = sorted_s[0] + 1e-9
    elif best_k == n:
        t = sorted_s[-1] - 1e-9
    else:
        t = (sorted_s[best_k - 1] + sorted_s[best_k]) / 2
    return float(t), float(acc)


def fit_linear(dataset: Dataset, spec: ProjectionSpec, form: str,
               positive_class: str, negative_class: Optional[str] = None,
               config: LinearSearchConfig = LinearSearchConfig()) -> LinearFitReport:
    """Grid over line angle/offset in the projection bounding box, then local
    refinement; deterministic tie-break on smaller angle, then offset."""
    if form not in ("one_sided", "two_sided"):
        raise LinearError("fit_linear handles one_sided and two_sided forms")
    polylines = project_all(dataset, spec)
    nodes = np.array([p.nodes[config.node_selector] for p in polylines], dtype=float)
    labels = np.array(dataset.labels())
    is_pos = labels == positive_class
    if negative_class is None and form == "two_sided":
        others = [c for c in dataset.classes if c != positive_class]
        if len(others) != 1:
            raise LinearError("two_sided needs exactly one negative class")
        negative_class = others[0]

    min_x, max_x, min_y, max_y = projection_bounds(polylines)
    cx, cy = (min_x + max_x) / 2, (min_y + max_y) / 2
    half_diag = max(math.hypot(max_x - min_x, max_y - min_y) / 2, 1e-9)

    def line_for(angle_deg: float, offset_frac: float) -> ProjectionLine:
        th = math.radians(angle_deg)
        ux, uy = math.cos(th), math.sin(th)
        nx, ny = -uy, ux
        ox = cx + nx * offset_frac * half_diag
        oy = cy + ny * offset_frac * half_diag
        return ProjectionLine((ox - ux * half_diag, oy - uy * half_diag),
                              (ox + ux * half_diag, oy + uy * half_diag),
                              config.node_selector)

    def evaluate(angle, offset):
        line = line_for(angle, offset)
        s = _scores_for_line(nodes, line.p0, line.p1)
        if form == "one_sided":
            got = _best_threshold_one_sided(s, is_pos, config.min_recall)
            if got is None:
                return None
            t, prec, rec = got
            return ((prec, rec), line, t, prec, rec, None)
        t, acc = _best_threshold_two_sided(s, is_pos)
        pred_pos = s > t
        prec = float((pred_pos & is_pos).sum() / max(int(pred_pos.sum()), 1))
        rec = float((pred_pos & is_pos).sum() / max(int(is_pos.sum()), 1))
        return ((acc,), line, t, prec, rec, acc)

    angles = [i * (180.0 / config.angles) for i in range(config.angles)]
    offsets = [-0.9 + i * (1.8 / max(config.offsets - 1, 1)) for i in range(config.offsets)]
    best = None
    best_at = None
    for angle in angles:
        for offset in offsets:
            got = evaluate(angle, offset)
            if got is None:
                continue
            if best is None or got[0] > best[0]:
                best, best_at = got, (angle, offset)
    if best is None:
        raise LinearError(f"no line reaches the recall floor {config.min_recall}")

    # coordinate descent around the winning grid point
    angle_step = 180.0 / config.angles / 2
    offset_step = 1.8 / max(config.offsets - 1, 1) / 2
    for _ in range(config.refine_rounds):
        angle, offset = best_at
        for da, do in ((-angle_step, 0), (angle_step, 0), (0, -offset_step), (0, offset_step)):
            got = evaluate(angle + da, offset + do)
            if got is not None and got[0] > best[0]:
                best, best_at = got, (angle + da, offset + do)
        angle_step /= 2
        offset_step /= 2

    _, line, t, prec, rec, acc = best
    model = LinearModel(line=line, threshold=t, form=form,
                        positive_class=positive_class, negative_class=negative_class)
    if acc is None:
        pred = [classify_linear(model, p, spec) for p in polylines]
        acc = float(np.mean([p == l for p, l in zip(pred, labels)]))
    return LinearFitReport(model=model, precision=prec, recall=rec, accuracy=acc)
