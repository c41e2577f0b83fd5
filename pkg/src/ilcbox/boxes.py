"""Box discovery over projected polylines and hierarchical interval rules."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .dataset import Dataset, LabeledCase
from .projection import Polyline2D, ProjectionSpec, project, project_all

REFUSE = "REFUSE"

_EPS = 1e-9


class BoxError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned rectangle in projection space.

    pair binds the box to a static (h_attr, v_attr) attribute plane instead of
    the shared projection plane; open-side flags relax the closed boundary for
    bounds that came from strict tree splits.
    """

    x1: float
    x2: float
    y1: float
    y2: float
    id: str = ""
    membership_mode: str = "node_in"  # node_in | edge_cross
    pair: Optional[tuple] = None  # (h_attr_index, v_attr_index) for static rule boxes
    open_sides: tuple = (False, False, False, False)  # x1, x2, y1, y2

    def __post_init__(self):
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise BoxError(f"box corners out of order: {(self.x1, self.x2, self.y1, self.y2)}")
        if self.membership_mode not in ("node_in", "edge_cross"):
            raise BoxError(f"unknown membership mode {self.membership_mode!r}")

    @staticmethod
    def normalized(x1, x2, y1, y2, **kw) -> "Box":
        """Build a box from possibly swapped corner pairs."""
        if x1 > x2:
            x1, x2 = x2, x1
        if y1 > y2:
            y1, y2 = y2, y1
        return Box(x1, x2, y1, y2, **kw)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def corners(self) -> tuple:
        return (self.x1, self.x2, self.y1, self.y2)

    def contains_point(self, x: float, y: float) -> bool:
        ox1, ox2, oy1, oy2 = self.open_sides
        if not ((x > self.x1) if ox1 else (x >= self.x1 - _EPS)):
            return False
        if not ((x < self.x2) if ox2 else (x <= self.x2 + _EPS)):
            return False
        if not ((y > self.y1) if oy1 else (y >= self.y1 - _EPS)):
            return False
        if not ((y < self.y2) if oy2 else (y <= self.y2 + _EPS)):
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "corners": [self.x1, self.x2, self.y1, self.y2],
            "membership_mode": self.membership_mode,
            "pair": list(self.pair) if self.pair is not None else None,
            "open_sides": list(self.open_sides),
        }

    @staticmethod
    def from_dict(d: dict) -> "Box":
        x1, x2, y1, y2 = d["corners"]
        return Box(x1, x2, y1, y2, id=d.get("id", ""),
                   membership_mode=d.get("membership_mode", "node_in"),
                   pair=tuple(d["pair"]) if d.get("pair") else None,
                   open_sides=tuple(d.get("open_sides", (False,) * 4)))


def _segment_hits_box(p, q, box: Box) -> bool:
    # parametric clip of segment p->q against the closed rectangle
    t0, t1 = 0.0, 1.0
    for d, lo, hi, o in ((q[0] - p[0], box.x1, box.x2, p[0]),
                         (q[1] - p[1], box.y1, box.y2, p[1])):
        if d == 0.0:
            if o < lo - _EPS or o > hi + _EPS:
                return False
        else:
            ta = (lo - o) / d
            tb = (hi - o) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1 + _EPS:
                return False
    return True


def membership(polyline: Polyline2D, box: Box) -> bool:
    """Is the case in the box: a node inside (node_in) or any node/segment (edge_cross)."""
    if box.pair is not None:
        case = polyline.case_ref
        if case is None:
            raise BoxError("pair-bound box needs the polyline's source case")
        h, v = box.pair
        return box.contains_point(case.values[h], case.values[v])
    if any(box.contains_point(x, y) for x, y in polyline.nodes):
        return True
    if box.membership_mode == "edge_cross":
        nodes = polyline.nodes
        return any(_segment_hits_box(nodes[i], nodes[i + 1], box)
                   for i in range(len(nodes) - 1))
    return False


def case_in_box(case: LabeledCase, box: Box, spec: ProjectionSpec) -> bool:
    if box.pair is not None:
        h, v = box.pair
        return box.contains_point(case.values[h], case.values[v])
    return membership(project(case, spec), box)


@dataclass
class BoxStats:
    counts: dict
    dominant: Optional[str]
    purity_fraction: Optional[float]  # dominant / total, None for an empty box
    purity_ratio: Optional[float]  # dominant / others, +inf when others == 0
    coverage: int  # dominant-class member count

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def box_stats(box: Box, polylines: Sequence[Polyline2D], class_order: Optional[Sequence[str]] = None) -> BoxStats:
    """Per-class occupancy of a box; ties broken by class order."""
    counts: dict = {}
    for p in polylines:
        if membership(p, box):
            counts[p.label] = counts.get(p.label, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return BoxStats({}, None, None, None, 0)
    order = list(class_order) if class_order else sorted(counts)
    dominant = max(counts, key=lambda c: (counts[c], -order.index(c) if c in order else 0))
    dom = counts[dominant]
    others = total - dom
    return BoxStats(
        counts=counts,
        dominant=dominant,
        purity_fraction=dom / total,
        purity_ratio=(dom / others) if others else math.inf,
        coverage=dom,
    )


@dataclass(frozen=True)
class GridParams:
    cell_width: float
    cell_height: float
    max_span_w: int = 64
    max_span_h: int = 64
    coverage_fraction: float = 0.1
    purity_threshold: float = 1.0

    def __post_init__(self):
        if self.cell_width <= 0 or self.cell_height <= 0:
            raise BoxError("cell sizes must be positive")
        if self.max_span_w < 1 or self.max_span_h < 1:
            raise BoxError("spans must be >= 1")
        if not (0 < self.coverage_fraction <= 1) or not (0 < self.purity_threshold <= 1):
            raise BoxError("coverage_fraction and purity_threshold must be in (0, 1]")


def _grid_geometry(polylines, grid: GridParams):
    xs = [x for p in polylines for x, _ in p.nodes]
    ys = [y for p in polylines for _, y in p.nodes]
    w, h = grid.cell_width, grid.cell_height
    x0 = math.floor(min(xs) / w) * w
    y0 = math.floor(min(ys) / h) * h
    nx = max(1, math.ceil((max(xs) - x0) / w + _EPS))
    ny = max(1, math.ceil((max(ys) - y0) / h + _EPS))
    return x0, y0, nx, ny


def _cell_indices(v: float, origin: float, size: float, n: int) -> tuple:
    """Cells whose closed extent contains v (two when v sits on a boundary)."""
    frac = (v - origin) / size
    i = math.floor(frac + _EPS)
    cells = []
    if 0 <= i <= n - 1:
        cells.append(i)
    elif i == n:  # value at the far grid edge
        cells.append(n - 1)
    if abs(frac - round(frac)) < _EPS and round(frac) == i and i - 1 >= 0:
        cells.append(i - 1)
    return tuple(cells)


def grid_search(polylines: Sequence[Polyline2D], grid: GridParams,
                remaining: Optional[Sequence[int]] = None,
                class_order: Optional[Sequence[str]] = None,
                top_k: Optional[int] = 50) -> dict:
    """Ranked pure-enough, covering-enough candidate boxes per class.

    Candidates are anchor cells grown in height then width; kept if the
    dominant class covers at least coverage_fraction of the remaining cases
    and its purity fraction meets the threshold. Ranking: purity desc,
    coverage desc, area asc, corners ascending. Deterministic.
    """
    if remaining is None:
        remaining = range(len(polylines))
    remaining = list(remaining)
    if not remaining:
        raise BoxError("remaining case set is empty")
    x0, y0, nx, ny = _grid_geometry(polylines, grid)
    if nx * ny == 0:
        raise BoxError("grid produced zero cells")
    order = class_order or sorted({polylines[i].label for i in remaining})
    cls_index = {c: k for k, c in enumerate(order)}

    # per-cell bitmask of remaining cases with a node in the (closed) cell
    cellmask = [[0] * ny for _ in range(nx)]
    classmask = {c: 0 for c in order}
    for bit, i in enumerate(remaining):
        p = polylines[i]
        classmask[p.label] |= 1 << bit
        for x, y in p.nodes:
            for cx in _cell_indices(x, x0, grid.cell_width, nx):
                for cy in _cell_indices(y, y0, grid.cell_height, ny):
                    cellmask[cx][cy] |= 1 << bit

    min_cover = grid.coverage_fraction * len(remaining)
    heaps = {c: [] for c in order}  # bounded keep-best via negated keys

    def offer(cls, key, corners):
        heap = heaps[cls]
        entry = tuple(-v for v in key) + corners
        if top_k is None or len(heap) < top_k:
            heapq.heappush(heap, entry)
        elif entry > heap[0]:
            heapq.heapreplace(heap, entry)

    W = min(grid.max_span_w, nx)
    H = min(grid.max_span_h, ny)
    for ax in range(nx):
        for ay in range(ny):
            masks_prev = [0] * (H + 1)
            for w in range(1, W + 1):
                col = ax + w - 1
                if col >= nx:
                    break
                column = cellmask[col]
                colacc = 0
                for h in range(1, H + 1):
                    row = ay + h - 1
                    if row >= ny:
                        break
                    colacc |= column[row]
                    mask = masks_prev[h] | colacc
                    masks_prev[h] = mask
                    total = mask.bit_count()
                    if total == 0:
                        continue
                    best_cls, best_cnt = None, -1
                    for c in order:
                        cnt = (mask & classmask[c]).bit_count()
                        if cnt > best_cnt:
                            best_cls, best_cnt = c, cnt
                    purity = best_cnt / total
                    if best_cnt < min_cover or purity < grid.purity_threshold - _EPS:
                        continue
                    corners = (x0 + ax * grid.cell_width,
                               x0 + (ax + w) * grid.cell_width,
                               y0 + ay * grid.cell_height,
                               y0 + (ay + h) * grid.cell_height)
                    area = (corners[1] - corners[0]) * (corners[3] - corners[2])
                    key = (-purity, -best_cnt, area, corners[0], corners[2], corners[1], corners[3])
                    offer(best_cls, key, corners)

    out = {}
    for c in order:
        ranked = sorted(heaps[c], reverse=True)
        boxes = []
        for entry in ranked:
            x1, x2, y1, y2 = entry[-4:]
            boxes.append(Box(x1, x2, y1, y2))
        out[c] = boxes
    return out


@dataclass
class Rule:
    id: str
    positive: tuple  # box ids, union
    negative: tuple  # box ids, union, negated
    predicted_class: str
    else_branch: Optional["Rule"] = None
    covered_count: int = 0
    order: int = 0
    intermediate: bool = False  # predicts a grouped class; gates descent
    requires: Optional[str] = None  # id of an intermediate rule that must have matched

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "positive": list(self.positive),
            "negative": list(self.negative),
            "predicted_class": self.predicted_class,
            "else_branch": self.else_branch.to_dict() if self.else_branch else None,
            "covered_count": self.covered_count,
            "order": self.order,
            "intermediate": self.intermediate,
            "requires": self.requires,
        }

    @staticmethod
    def from_dict(d: dict) -> "Rule":
        eb = d.get("else_branch")
        return Rule(
            id=d["id"], positive=tuple(d["positive"]), negative=tuple(d["negative"]),
            predicted_class=d["predicted_class"],
            else_branch=Rule.from_dict(eb) if eb else None,
            covered_count=d.get("covered_count", 0), order=d.get("order", 0),
            intermediate=d.get("intermediate", False), requires=d.get("requires"),
        )


RULESET_FORMAT_VERSION = 1


@dataclass
class RuleSet:
    rules: list
    boxes: dict  # id -> Box
    projection: ProjectionSpec
    refuse_policy: str = "refuse"  # refuse | fallback_class
    fallback_class: Optional[str] = None
    class_order: tuple = ()

    def __post_init__(self):
        for rule in self._walk():
            for bid in rule.positive + rule.negative:
                if bid not in self.boxes:
                    raise BoxError(f"rule {rule.id} references unknown box {bid}")

    def _walk(self):
        for r in self.rules:
            node = r
            while node is not None:
                yield node
                node = node.else_branch

    def box_list(self) -> list:
        return list(self.boxes.values())

    def to_json(self) -> str:
        payload = {
            "format_version": RULESET_FORMAT_VERSION,
            "projection": self.projection.to_dict(),
            "boxes": {bid: b.to_dict() for bid, b in self.boxes.items()},
            "rules": [r.to_dict() for r in self.rules],
            "refuse_policy": self.refuse_policy,
            "fallback_class": self.fallback_class,
            "class_order": list(self.class_order),
        }
        return json.dumps(payload, sort_keys=True, indent=1)

    @staticmethod
    def from_json(text: str) -> "RuleSet":
        d = json.loads(text)
        return RuleSet(
            rules=[Rule.from_dict(r) for r in d["rules"]],
            boxes={bid: Box.from_dict(b) for bid, b in d["boxes"].items()},
            projection=ProjectionSpec.from_dict(d["projection"]),
            refuse_policy=d.get("refuse_policy", "refuse"),
            fallback_class=d.get("fallback_class"),
            class_order=tuple(d.get("class_order", ())),
        )

    def render_text(self) -> str:
        lines = []

        def fmt(rule: Rule) -> str:
            pos = " ∪ ".join(rule.positive)
            s = f"x ∈ {pos}"
            if rule.negative:
                neg = " ∪ ".join(rule.negative)
                s += f" & x ∉ {neg}"
            s += f" ⇒ x ∈ {rule.predicted_class} ({rule.covered_count} cases)"
            return s

        for r in self.rules:
            line = f"{r.id}: {fmt(r)}"
            node = r.else_branch
            while node is not None:
                line += f" (else {fmt(node)})"
                node = node.else_branch
            lines.append(line)
        return "\n".join(lines)


def _rule_members(rule: Rule, boxes: dict, polyline: Polyline2D) -> bool:
    return any(membership(polyline, boxes[b]) for b in rule.positive)


def _rule_blocked(rule: Rule, boxes: dict, polyline: Polyline2D) -> bool:
    return any(membership(polyline, boxes[b]) for b in rule.negative)


def classify(ruleset: RuleSet, case, spec: Optional[ProjectionSpec] = None):
    """First firing rule wins; intermediates gate later rules; REFUSE otherwise."""
    spec = spec or ruleset.projection
    if isinstance(case, Polyline2D):
        poly = case
    else:
        case = case if isinstance(case, LabeledCase) else LabeledCase(tuple(case), "?", -1)
        poly = project(case, spec)
    matched = set()
    for rule in ruleset.rules:
        if rule.requires is not None and rule.requires not in matched:
            continue
        if _rule_members(rule, ruleset.boxes, poly):
            if not _rule_blocked(rule, ruleset.boxes, poly):
                if rule.intermediate:
                    matched.add(rule.id)
                    continue
                return rule.predicted_class
        else:
            node = rule.else_branch
            while node is not None:
                if _rule_members(node, ruleset.boxes, poly) and not _rule_blocked(node, ruleset.boxes, poly):
                    return node.predicted_class
                node = node.else_branch
    if ruleset.refuse_policy == "fallback_class" and ruleset.fallback_class is not None:
        return ruleset.fallback_class
    return REFUSE


def fit_from_stream(polylines: Sequence[Polyline2D], stream: Sequence[tuple],
                    spec: ProjectionSpec, class_order: Optional[Sequence[str]] = None) -> RuleSet:
    """Build a hierarchical rule set from an ordered (box, class) stream.

    Cases member of each box are excluded before the next box is counted.
    Negative sets are opposite-class boxes of the final set that share a
    member case (of the opposite box's class) with the rule's box, over the
    full training data.
    """
    order = list(class_order or sorted({p.label for p in polylines}))
    boxes = {}
    placed = []
    for k, (box, cls) in enumerate(stream):
        bid = box.id or f"B{k + 1}"
        box = replace(box, id=bid)
        boxes[bid] = box
        placed.append((bid, cls))

    member = {
        bid: [membership(p, boxes[bid]) for p in polylines]
        for bid, _ in placed
    }

    # negative sets over full data
    negatives = {}
    for bid, cls in placed:
        negs = []
        for bid2, cls2 in placed:
            if cls2 == cls:
                continue
            if any(m1 and m2 and p.label == cls2
                   for m1, m2, p in zip(member[bid], member[bid2], polylines)):
                negs.append(bid2)
        negatives[bid] = tuple(negs)

    remaining = [True] * len(polylines)
    rules = []
    for k, (bid, cls) in enumerate(placed):
        fired = 0
        for i, p in enumerate(polylines):
            if not remaining[i] or not member[bid][i]:
                continue
            if not any(member[nb][i] for nb in negatives[bid]):
                fired += 1
        rules.append(Rule(id=f"R{k + 1}", positive=(bid,), negative=negatives[bid],
                          predicted_class=cls, covered_count=fired, order=k))
        for i in range(len(polylines)):
            if member[bid][i]:
                remaining[i] = False

    return RuleSet(rules=rules, boxes=boxes, projection=spec, class_order=tuple(order))


@dataclass(frozen=True)
class StopConfig:
    max_rules: Optional[int] = None


def bc_fit(dataset: Dataset, spec: ProjectionSpec, grid: GridParams,
           stop: StopConfig = StopConfig(),
           candidate_stream: Optional[Sequence[tuple]] = None) -> RuleSet:
    """Sequential hierarchical box classification.

    Greedily accepts the best grid-search candidate over the remaining cases,
    removes its members, and repeats until everything is covered or no
    candidate meets the thresholds. candidate_stream bypasses the search with
    a fixed ordered (box, class) sequence.
    """
    if not dataset.cases:
        raise BoxError("dataset is empty")
    polylines = project_all(dataset, spec)
    order = dataset.classes
    if candidate_stream is not None:
        return fit_from_stream(polylines, candidate_stream, spec, order)

    accepted = []
    remaining = list(range(len(polylines)))
    while remaining:
        if stop.max_rules is not None and len(accepted) >= stop.max_rules:
            break
        ranked = grid_search(polylines, grid, remaining, class_order=order, top_k=1)
        best = None
        for cls in order:
            if not ranked[cls]:
                continue
            box = ranked[cls][0]
            stats = box_stats(box, [polylines[i] for i in remaining], order)
            key = (-(stats.purity_fraction or 0), -stats.coverage, box.area, box.corners())
            if best is None or key < best[0]:
                best = (key, box, cls)
        if best is None:
            break
        _, box, cls = best
        accepted.append((box, cls))
        remaining = [i for i in remaining if not membership(polylines[i], box)]

    return fit_from_stream(polylines, accepted, spec, order)


@dataclass
class PruneAction:
    rule_id: str
    action: str  # kept | refused | merged | reassigned
    target: Optional[str] = None
    counts: Optional[dict] = None


@dataclass
class PruneReport:
    actions: list
    ruleset: RuleSet


def _recount(rule: Rule, ruleset: RuleSet, polylines: Sequence[Polyline2D]) -> dict:
    counts: dict = {}
    for p in polylines:
        if _rule_members(rule, ruleset.boxes, p):
            counts[p.label] = counts.get(p.label, 0) + 1
    return counts


def prune(ruleset: RuleSet, min_cases: int, mode: str = "refuse",
          polylines: Optional[Sequence[Polyline2D]] = None,
          decisions: Optional[dict] = None) -> PruneReport:
    """Deal with mini rules covering fewer than min_cases cases.

    mode 'refuse' drops them (their region refuses); 'associate' merges each
    into the largest same-class rule, fusing adjacent boxes into one bounding
    rectangle when the union is exact. decisions overrides per rule id with
    'refuse', ('merge', target_rule_id) or ('reassign', class); reassignment
    recounts the box with edge-crossing membership and reports the error mix.
    """
    if min_cases < 1:
        raise BoxError("min_cases must be >= 1")
    if mode not in ("refuse", "associate"):
        raise BoxError(f"unknown prune mode {mode!r}")
    decisions = decisions or {}
    actions = []
    new_rules = [replace(r) for r in ruleset.rules]
    boxes = dict(ruleset.boxes)
    keep = []
    for rule in new_rules:
        if rule.covered_count >= min_cases or rule.intermediate:
            keep.append(rule)
            actions.append(PruneAction(rule.id, "kept"))
            continue
        decision = decisions.get(rule.id, mode)
        if decision == "associate":
            targets = [r for r in new_rules
                       if r is not rule and r.predicted_class == rule.predicted_class
                       and r.covered_count >= min_cases]
            decision = ("merge", max(targets, key=lambda r: r.covered_count).id) if targets else "refuse"
        if decision == "refuse":
            actions.append(PruneAction(rule.id, "refused"))
            continue
        kind, arg = decision
        if kind == "merge":
            target = next(r for r in new_rules if r.id == arg)
            merged_pos = target.positive + tuple(b for b in rule.positive if b not in target.positive)
            fused = _try_fuse(merged_pos, boxes)
            if fused is not None:
                fid = "+".join(merged_pos)
                boxes[fid] = replace(fused, id=fid)
                target.positive = (fid,)
            else:
                target.positive = merged_pos
            if polylines is not None:
                target_counts = _recount(target, RuleSet([target], boxes, ruleset.projection,
                                                         class_order=ruleset.class_order), polylines)
                actions.append(PruneAction(rule.id, "merged", target.id, target_counts))
            else:
                actions.append(PruneAction(rule.id, "merged", target.id))
        elif kind == "reassign":
            rule.predicted_class = arg
            crossing = tuple(replace(boxes[b], membership_mode="edge_cross") for b in rule.positive)
            for b in crossing:
                boxes[b.id] = b
            counts = None
            if polylines is not None:
                counts = _recount(rule, RuleSet([rule], boxes, ruleset.projection,
                                                class_order=ruleset.class_order), polylines)
                rule.covered_count = counts.get(arg, 0)
            keep.append(rule)
            actions.append(PruneAction(rule.id, "reassigned", arg, counts))
        else:
            raise BoxError(f"unknown prune decision {decision!r}")
    pruned = RuleSet(rules=keep, boxes=boxes, projection=ruleset.projection,
                     refuse_policy=ruleset.refuse_policy, fallback_class=ruleset.fallback_class,
                     class_order=ruleset.class_order)
    return PruneReport(actions, pruned)


def _try_fuse(box_ids: tuple, boxes: dict) -> Optional[Box]:
    """Bounding box of the union, if the union tiles it exactly."""
    bs = [boxes[b] for b in box_ids]
    if any(b.pair is not None for b in bs):
        return None
    x1 = min(b.x1 for b in bs)
    x2 = max(b.x2 for b in bs)
    y1 = min(b.y1 for b in bs)
    y2 = max(b.y2 for b in bs)
    total = sum(b.area for b in bs)
    bounding = (x2 - x1) * (y2 - y1)
    # exact cover requires equal area and no pairwise interior overlap
    if abs(total - bounding) > _EPS * max(1.0, bounding):
        return None
    for i, a in enumerate(bs):
        for b in bs[i + 1:]:
            if (min(a.x2, b.x2) - max(a.x1, b.x1) > _EPS
                    and min(a.y2, b.y2) - max(a.y1, b.y1) > _EPS):
                return None
    return Box(x1, x2, y1, y2, membership_mode=bs[0].membership_mode)


def join_rules(ruleset: RuleSet, polylines: Optional[Sequence[Polyline2D]] = None) -> RuleSet:
    """Merge same-class rules into unions and fold conditioned opposite rules
    into else-branches without changing any training decision.

    With training polylines, vacuous negations (never co-membered) are dropped
    first and the joined set is verified case-for-case against the original.
    """
    boxes = dict(ruleset.boxes)
    top = [r for r in ruleset.rules]

    member_cache: dict = {}

    def members_of(bid: str) -> list:
        if bid not in member_cache:
            member_cache[bid] = [membership(p, boxes[bid]) for p in (polylines or ())]
        return member_cache[bid]

    def minimal_negs(rule: Rule) -> tuple:
        if polylines is None:
            return rule.negative
        out = []
        for nb in rule.negative:
            nm = members_of(nb)
            hit = False
            for pb in rule.positive:
                pm = members_of(pb)
                if any(a and b for a, b in zip(pm, nm)):
                    hit = True
                    break
            if hit:
                out.append(nb)
        return tuple(out)

    reduced = {r.id: minimal_negs(r) for r in top}

    # group same-class rules by reduced negative set
    groups: dict = {}
    for r in top:
        key = (r.predicted_class, frozenset(reduced[r.id]), r.intermediate, r.requires)
        groups.setdefault(key, []).append(r)

    merged_rules = []
    for key, rules_in in groups.items():
        rules_in.sort(key=lambda r: r.order)
        first = rules_in[0]
        positive = tuple(b for r in rules_in for b in r.positive)
        merged_rules.append(Rule(
            id=",".join(r.id for r in rules_in) if len(rules_in) > 1 else first.id,
            positive=positive,
            negative=reduced[first.id],
            predicted_class=first.predicted_class,
            covered_count=sum(r.covered_count for r in rules_in),
            order=first.order,
            intermediate=first.intermediate,
            requires=first.requires,
        ))
    merged_rules.sort(key=lambda r: r.order)

    # fold opposite-class rules whose negations include a merged rule's
    # positive set into that rule's else chain
    final = []
    folded = set()
    for parent in merged_rules:
        if parent.id in folded:
            continue
        pos_set = set(parent.positive)
        chain_tail = parent
        for other in merged_rules:
            if other.id == parent.id or other.id in folded:
                continue
            if other.predicted_class == parent.predicted_class or other.intermediate:
                continue
            negs = set(other.negative)
            if pos_set and pos_set <= negs:
                residual = tuple(b for b in other.negative if b not in pos_set)
                child = Rule(id=f"{other.id}", positive=other.positive, negative=residual,
                             predicted_class=other.predicted_class,
                             covered_count=other.covered_count, order=other.order)
                chain_tail.else_branch = child
                chain_tail = child
                folded.add(other.id)
        final.append(parent)
    final = [r for r in final if r.id not in folded]
    final.sort(key=lambda r: r.order)

    joined = RuleSet(rules=final, boxes=boxes, projection=ruleset.projection,
                     refuse_policy=ruleset.refuse_policy, fallback_class=ruleset.fallback_class,
                     class_order=ruleset.class_order)

    if polylines is not None:
        for p in polylines:
            if classify(ruleset, p) != classify(joined, p):
                # fall back to the conservative join: no negation reduction
                conservative = RuleSet(rules=[replace(r) for r in ruleset.rules], boxes=boxes,
                                       projection=ruleset.projection,
                                       refuse_policy=ruleset.refuse_policy,
                                       fallback_class=ruleset.fallback_class,
                                       class_order=ruleset.class_order)
                return conservative
    return joined
