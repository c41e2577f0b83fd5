"""Local box explanations for any predictor, with interval sandwich points."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .boxes import Box, REFUSE, RuleSet, classify, membership
from .dataset import Dataset, LabeledCase
from .projection import (Polyline2D, ProjectionSpec, STATIC_MODES, project,
                         project_all, projection_bounds)


class ExplanationError(ValueError):
    pass


@dataclass(frozen=True)
class ExplanationRequest:
    point: tuple
    predictor: Union[RuleSet, Callable]
    purity_threshold: float = 1.0
    initial_resolution: float = 1.0
    decrement: float = 0.25
    min_resolution: float = 0.25

    def __post_init__(self):
        if not (0 < self.purity_threshold <= 1):
            raise ExplanationError("purity threshold must be in (0, 1]")
        if not (0 < self.decrement < self.initial_resolution):
            raise ExplanationError("decrement must be in (0, initial resolution)")

    def predict(self, values, spec: ProjectionSpec):
        if isinstance(self.predictor, RuleSet):
            return classify(self.predictor, LabeledCase(tuple(values), "?", -1), spec)
        return self.predictor(tuple(values))


@dataclass
class FoundBox:
    box: Box
    counts: dict
    purity: float


@dataclass
class Explanation:
    verdict: str  # explained | no_box_found
    predicted_class: Optional[str]
    found_boxes: list
    sandwich_training: Optional[tuple]  # (a, b) value tuples
    sandwich_artificial: Optional[tuple]  # (d, e) value tuples
    resolution_used: Optional[float]
    membership_mode: str = "edge_cross"

    def payload(self, spec: ProjectionSpec, point: tuple) -> dict:
        """Serializable visualization payload: c, a, b, d, e and the box."""
        def poly(values):
            return [list(n) for n in project(LabeledCase(tuple(values), "?", -1), spec).nodes]

        out = {
            "verdict": self.verdict,
            "predicted_class": self.predicted_class,
            "resolution": self.resolution_used,
            "point": list(point),
            "polylines": {"c": poly(point)},
            "boxes": [dict(b.box.to_dict(), purity=b.purity, counts=b.counts)
                      for b in self.found_boxes],
        }
        if self.sandwich_training is not None:
            a, b = self.sandwich_training
            out["polylines"]["a"] = poly(a)
            out["polylines"]["b"] = poly(b)
            out["sandwich_training"] = [list(a), list(b)]
        if self.sandwich_artificial is not None:
            d, e = self.sandwich_artificial
            out["polylines"]["d"] = poly(d)
            out["polylines"]["e"] = poly(e)
            out["sandwich_artificial"] = [list(d), list(e)]
        return out


def _node_tensor(polylines) -> np.ndarray:
    return np.array([p.nodes for p in polylines], dtype=float)


def _members_edge_cross(nodes: np.ndarray, box: Box) -> np.ndarray:
    """Vectorized edge-or-node membership over a (cases, nodes, 2) tensor."""
    x, y = nodes[..., 0], nodes[..., 1]
    inside = ((x >= box.x1) & (x <= box.x2) & (y >= box.y1) & (y <= box.y2)).any(axis=1)
    # parametric clip of each segment against the rectangle
    p = nodes[:, :-1, :]
    q = nodes[:, 1:, :]
    t0 = np.zeros(p.shape[:2])
    t1 = np.ones(p.shape[:2])
    ok = np.ones(p.shape[:2], dtype=bool)
    for axis, lo, hi in ((0, box.x1, box.x2), (1, box.y1, box.y2)):
        d = q[..., axis] - p[..., axis]
        o = p[..., axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - o) / d
            tb = (hi - o) / d
        swap = ta > tb
        ta2 = np.where(swap, tb, ta)
        tb2 = np.where(swap, ta, tb)
        zero = d == 0
        out_of_band = zero & ((o < lo) | (o > hi))
        ok &= ~out_of_band
        t0 = np.where(zero, t0, np.maximum(t0, ta2))
        t1 = np.where(zero, t1, np.minimum(t1, tb2))
    crosses = (ok & (t0 <= t1 + 1e-12)).any(axis=1)
    return inside | crosses


def _cells_of(polyline: Polyline2D, origin, res: float, extent) -> list:
    """Grid cells the polyline crosses or ends in."""
    (x0, y0) = origin
    (nx, ny) = extent
    xs = [n[0] for n in polyline.nodes]
    ys = [n[1] for n in polyline.nodes]
    ix_lo = max(0, math.floor((min(xs) - x0) / res))
    ix_hi = min(nx - 1, math.floor((max(xs) - x0) / res))
    iy_lo = max(0, math.floor((min(ys) - y0) / res))
    iy_hi = min(ny - 1, math.floor((max(ys) - y0) / res))
    cells = []
    for ix in range(ix_lo, ix_hi + 1):
        for iy in range(iy_lo, iy_hi + 1):
            cell = Box(x0 + ix * res, x0 + (ix + 1) * res,
                       y0 + iy * res, y0 + (iy + 1) * res,
                       membership_mode="edge_cross")
            if membership(polyline, cell):
                cells.append(cell)
    return cells


def _attribute_ranges(training: Dataset) -> list:
    return [(a.observed_min, a.observed_max) for a in training.attributes]


def _artificial_sandwich(point, box: Box, spec: ProjectionSpec, ranges) -> tuple:
    """d <= c <= e inside the box, moving only the witness node's attribute pair."""
    c = list(point)
    poly = project(LabeledCase(tuple(c), "?", -1), spec)
    witness = None
    for k, (x, y) in enumerate(poly.nodes):
        if box.contains_point(x, y):
            witness = k
            break
    if witness is None:
        return tuple(c), tuple(c)  # crossing-only membership: degenerate sandwich
    h, v = spec.assignment.pairs[witness]
    x_k, y_k = poly.nodes[witness]
    d = list(c)
    e = list(c)
    if spec.mode in STATIC_MODES or spec.mode in ("ilc2_partial_dynamic", "ilc2_fully_dynamic"):
        d[h] = max(c[h] - (x_k - box.x1), ranges[h][0])
        e[h] = min(c[h] + (box.x2 - x_k), ranges[h][1])
        d[v] = max(c[v] - (y_k - box.y1), ranges[v][0])
        e[v] = min(c[v] + (box.y2 - y_k), ranges[v][1])
    for cand in (d, e):
        cand_poly = project(LabeledCase(tuple(cand), "?", -1), spec)
        if not membership(cand_poly, Box(box.x1, box.x2, box.y1, box.y2,
                                         membership_mode="edge_cross")):
            return tuple(c), tuple(c)
    if any(dv > cv for dv, cv in zip(d, c)) or any(ev < cv for ev, cv in zip(e, c)):
        return tuple(c), tuple(c)
    return tuple(d), tuple(e)


def explain_local(request: ExplanationRequest, training: Dataset,
                  spec: ProjectionSpec) -> Explanation:
    """Grid refinement until a pure-enough box contains the point's polyline.

    Membership is edge-crossing ("crosses or ends"). Returns every qualifying
    box at the first workable resolution, ranked purity then area, with
    training and artificial sandwich points from the best one. Never fabricates
    a box: if no resolution works the verdict is no_box_found.
    """
    c = tuple(request.point)
    if len(c) != training.dimension:
        raise ExplanationError(f"point has {len(c)} values, data has {training.dimension}")
    predicted = request.predict(c, spec)
    if predicted == REFUSE:
        return Explanation("no_box_found", None, [], None, None, None)

    polylines = project_all(training, spec)
    tensor = _node_tensor(polylines)
    labels = np.array(training.labels())
    c_poly = project(LabeledCase(c, "?", -1), spec)
    min_x, max_x, min_y, max_y = projection_bounds(polylines + [c_poly])
    ranges = _attribute_ranges(training)

    res = request.initial_resolution
    while res >= request.min_resolution - 1e-12:
        x0 = math.floor(min_x / res) * res
        y0 = math.floor(min_y / res) * res
        nx = max(1, math.ceil((max_x - x0) / res + 1e-12))
        ny = max(1, math.ceil((max_y - y0) / res + 1e-12))
        found = []
        for cell in _cells_of(c_poly, (x0, y0), res, (nx, ny)):
            members = _members_edge_cross(tensor, cell)
            total = int(members.sum())
            if total == 0:
                continue
            counts: dict = {}
            for lbl in labels[members]:
                counts[lbl] = counts.get(lbl, 0) + 1
            dominant = max(counts, key=counts.get)
            purity = counts[dominant] / total
            if dominant == predicted and purity >= request.purity_threshold:
                found.append(FoundBox(cell, counts, purity))
        if found:
            found.sort(key=lambda f: (-f.purity, f.box.area, f.box.corners()))
            top = found[0]
            members = _members_edge_cross(tensor, top.box)
            mats = training.matrix()
            cvec = np.array(c)
            of_class = members & (labels == predicted)
            below = of_class & (mats <= cvec + 1e-12).all(axis=1)
            above = of_class & (mats >= cvec - 1e-12).all(axis=1)
            sandwich_training = None
            if below.any() and above.any():
                a = tuple(mats[np.where(below)[0][int(mats[below].sum(axis=1).argmax())]])
                b = tuple(mats[np.where(above)[0][int(mats[above].sum(axis=1).argmin())]])
                sandwich_training = (a, b)
            sandwich_artificial = _artificial_sandwich(c, top.box, spec, ranges)
            return Explanation("explained", predicted, found, sandwich_training,
                               sandwich_artificial, res)
        res -= request.decrement
    return Explanation("no_box_found", predicted, [], None, None, None)


@dataclass(frozen=True)
class ConditionChain:
    conditions: tuple  # ((name, relation, value), ...)

    def render(self) -> str:
        return " & ".join(f"{n} {r} {v:g}" for n, r, v in self.conditions)


def boxes_to_tree_form(rule, ruleset: RuleSet,
                       attribute_names: Optional[Sequence[str]] = None,
                       bounds: Optional[Sequence[tuple]] = None) -> list:
    """Condition chains over original attributes for a static-ILC rule.

    A pair-bound box gives exactly one four-condition chain; a shared-plane
    static box gives one chain per coordinate pair it can capture (a union
    rule then reads as several independent single-branch trees). Dynamic
    projections are rejected: their plot coordinates are functions of several
    attributes and have no single-attribute reading.
    """
    spec = ruleset.projection

    def name_of(attr):
        if attribute_names is not None:
            return attribute_names[attr]
        return f"X{attr + 1}"

    chains = []
    for bid in rule.positive:
        box = ruleset.boxes[bid]
        if box.pair is not None:
            h, v = box.pair
            chains.append(ConditionChain((
                (name_of(h), ">" if box.open_sides[0] else ">=", box.x1),
                (name_of(h), "<" if box.open_sides[1] else "<=", box.x2),
                (name_of(v), ">" if box.open_sides[2] else ">=", box.y1),
                (name_of(v), "<" if box.open_sides[3] else "<=", box.y2),
            )))
            continue
        if spec.mode not in STATIC_MODES:
            raise ExplanationError(
                "dynamic projection: box coordinates are functions of several attributes")
        offsets = spec.offsets()
        for k, (h, v) in enumerate(spec.assignment.pairs):
            lo, hi = box.x1 - offsets[k], box.x2 - offsets[k]
            if bounds is not None:
                blo, bhi = bounds[h]
                if hi < blo or lo > bhi:
                    continue
            chains.append(ConditionChain((
                (name_of(h), ">=", lo),
                (name_of(h), "<=", hi),
                (name_of(v), ">=", box.y1),
                (name_of(v), "<=", box.y2),
            )))
    return chains


def plot_explanation(explanation: Explanation, spec: ProjectionSpec, point, path):
    """Headless vector plot of c, a, b, d, e and the explaining box."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Rectangle

    payload = explanation.payload(spec, point)
    fig, ax = plt.subplots(figsize=(8, 4))
    styles = {"c": ("black", 2.0, "-"), "a": ("tab:green", 1.2, "--"),
              "b": ("tab:green", 1.2, ":"), "d": ("tab:blue", 1.2, "--"),
              "e": ("tab:blue", 1.2, ":")}
    for name, nodes in payload["polylines"].items():
        xs = [n[0] for n in nodes]
        ys = [n[1] for n in nodes]
        color, lw, ls = styles.get(name, ("gray", 1.0, "-"))
        ax.plot(xs, ys, color=color, linewidth=lw, linestyle=ls, marker="o",
                markersize=3, label=name)
    for b in payload["boxes"]:
        x1, x2, y1, y2 = b["corners"]
        ax.add_patch(Rectangle((x1, y1), x2 - x1, y2 - y1, fill=False,
                               edgecolor="tab:red", linewidth=1.5))
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"verdict={payload['verdict']} class={payload['predicted_class']}")
    fig.savefig(path)
    plt.close(fig)
