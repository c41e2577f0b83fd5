"""Lossless 2-D polyline projections of n-D cases (in-line coordinate family)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .dataset import Dataset, LabeledCase

MODES = (
    "static_sequential",
    "static_collocated",
    "static_generic",
    "ilc2_static",
    "ilc2_partial_dynamic",
    "ilc2_fully_dynamic",
    "ilc2_weighted_dynamic",
)

STATIC_MODES = ("static_sequential", "static_collocated", "static_generic", "ilc2_static")


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class AxisAssignment:
    """Which attribute feeds each polyline node's x (horizontal) and y (vertical).

    Lists are zipped positionally into (h, v) pairs. One attribute may appear
    twice (recorded in duplicated) to even out an odd dimension; inversion
    recovers it from its first occurrence.
    """

    horizontal: tuple
    vertical: tuple
    duplicated: Optional[int] = None

    def __post_init__(self):
        if len(self.horizontal) != len(self.vertical):
            raise ProjectionError("horizontal and vertical lists must have equal length")
        counts = {}
        for i in tuple(self.horizontal) + tuple(self.vertical):
            counts[i] = counts.get(i, 0) + 1
        doubled = [i for i, c in counts.items() if c > 2]
        if doubled:
            raise ProjectionError(f"attribute(s) {doubled} used more than twice")
        twice = [i for i, c in counts.items() if c == 2]
        if twice and (len(twice) > 1 or twice[0] != self.duplicated):
            raise ProjectionError(f"duplicated attribute(s) {twice} not declared")

    @property
    def pairs(self) -> tuple:
        return tuple(zip(self.horizontal, self.vertical))

    @property
    def dimension(self) -> int:
        return len(set(self.horizontal) | set(self.vertical))

    def validate_dimension(self, n: int):
        used = set(self.horizontal) | set(self.vertical)
        if used != set(range(n)):
            raise ProjectionError(f"assignment covers attributes {sorted(used)}, case has {n}")

    def to_dict(self) -> dict:
        return {"horizontal": list(self.horizontal), "vertical": list(self.vertical),
                "duplicated": self.duplicated}

    @staticmethod
    def from_dict(d: dict) -> "AxisAssignment":
        return AxisAssignment(tuple(d["horizontal"]), tuple(d["vertical"]), d.get("duplicated"))


def consecutive_assignment(n: int) -> AxisAssignment:
    """Pairs (x1,x2),(x3,x4),...; odd n duplicates the last attribute."""
    idx = list(range(n))
    dup = None
    if n % 2:
        idx.append(n - 1)
        dup = n - 1
    return AxisAssignment(tuple(idx[0::2]), tuple(idx[1::2]), dup)


def swapped_assignment(n: int) -> AxisAssignment:
    a = consecutive_assignment(n)
    return AxisAssignment(a.vertical, a.horizontal, a.duplicated)


@dataclass(frozen=True)
class ProjectionSpec:
    mode: str
    assignment: AxisAssignment
    weights: Optional[tuple] = None  # one per attribute, weighted mode only
    coordinate_offsets: Optional[tuple] = None  # one per pair, static modes

    def __post_init__(self):
        if self.mode not in MODES:
            raise ProjectionError(f"unknown mode {self.mode!r}")
        if self.mode == "ilc2_weighted_dynamic" and self.weights is None:
            raise ProjectionError("weighted mode requires weights")
        if self.mode in ("static_sequential", "static_generic") and self.coordinate_offsets is None:
            raise ProjectionError(f"{self.mode} requires coordinate_offsets")
        if self.coordinate_offsets is not None and len(self.coordinate_offsets) != len(self.assignment.pairs):
            raise ProjectionError("one offset per pair required")
        if self.mode == "static_sequential" and self.coordinate_offsets is not None:
            off = self.coordinate_offsets
            if any(b < a for a, b in zip(off, off[1:])):
                raise ProjectionError("sequential offsets must be non-decreasing")

    def offsets(self) -> tuple:
        if self.coordinate_offsets is not None:
            return self.coordinate_offsets
        return (0.0,) * len(self.assignment.pairs)

    def weight_of(self, attr: int) -> float:
        if self.mode != "ilc2_weighted_dynamic" or self.weights is None:
            return 1.0
        return self.weights[attr]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "assignment": self.assignment.to_dict(),
            "weights": list(self.weights) if self.weights is not None else None,
            "coordinate_offsets": list(self.coordinate_offsets) if self.coordinate_offsets is not None else None,
        }

    @staticmethod
    def from_dict(d: dict) -> "ProjectionSpec":
        return ProjectionSpec(
            mode=d["mode"],
            assignment=AxisAssignment.from_dict(d["assignment"]),
            weights=tuple(d["weights"]) if d.get("weights") else None,
            coordinate_offsets=tuple(d["coordinate_offsets"]) if d.get("coordinate_offsets") else None,
        )


@dataclass(frozen=True)
class Polyline2D:
    nodes: tuple  # ((x, y), ...)
    case_ref: Optional[LabeledCase] = None
    node_provenance: tuple = ()  # (h_index, v_index) per node
    render_side: int = 1  # +1 above the baseline, -1 mirrored below

    @property
    def label(self) -> Optional[str]:
        return self.case_ref.label if self.case_ref is not None else None


def project(case, spec: ProjectionSpec) -> Polyline2D:
    """Map one case to its lossless polyline."""
    values = case.values if isinstance(case, LabeledCase) else tuple(case)
    spec.assignment.validate_dimension(len(values))
    pairs = spec.assignment.pairs
    offsets = spec.offsets()
    nodes = []
    if spec.mode in STATIC_MODES:
        for (h, v), off in zip(pairs, offsets):
            nodes.append((off + values[h], values[v]))
    else:
        x = 0.0
        y = 0.0
        for h, v in pairs:
            x += spec.weight_of(h) * values[h]
            if spec.mode == "ilc2_partial_dynamic":
                ynode = values[v]
            else:  # fully dynamic, weighted dynamic
                y += spec.weight_of(v) * values[v]
                ynode = y
            nodes.append((x, ynode))
    return Polyline2D(
        nodes=tuple(nodes),
        case_ref=case if isinstance(case, LabeledCase) else None,
        node_provenance=pairs,
    )


def invert(polyline, spec: ProjectionSpec) -> tuple:
    """Recover the original attribute values from a polyline (or node list)."""
    nodes = polyline.nodes if isinstance(polyline, Polyline2D) else tuple(polyline)
    pairs = spec.assignment.pairs
    if len(nodes) != len(pairs):
        raise ProjectionError(f"{len(nodes)} nodes for {len(pairs)} pairs")
    if spec.mode == "ilc2_weighted_dynamic":
        zero = [i for i in set(spec.assignment.horizontal) | set(spec.assignment.vertical)
                if spec.weight_of(i) == 0]
        if zero:
            raise ProjectionError(f"zero weight on attribute(s) {zero}: not invertible")
    n = spec.assignment.dimension
    values: list = [None] * n

    def put(attr, val):
        if values[attr] is None:
            values[attr] = val

    offsets = spec.offsets()
    if spec.mode in STATIC_MODES:
        for (h, v), off, (x, y) in zip(pairs, offsets, nodes):
            put(h, x - off)
            put(v, y)
    else:
        prev_x = 0.0
        prev_y = 0.0
        for (h, v), (x, y) in zip(pairs, nodes):
            put(h, (x - prev_x) / spec.weight_of(h))
            prev_x = x
            if spec.mode == "ilc2_partial_dynamic":
                put(v, y)
            else:
                put(v, (y - prev_y) / spec.weight_of(v))
                prev_y = y
    return tuple(values)


def project_all(dataset: Dataset, spec: ProjectionSpec, mirror: str = "none") -> list:
    """Project every case; mirror='by_class' tags the second class to render below."""
    if mirror not in ("none", "by_class"):
        raise ProjectionError(f"unknown mirror {mirror!r}")
    down = set()
    if mirror == "by_class":
        classes = dataset.classes
        if len(classes) != 2:
            raise ProjectionError(f"mirror=by_class needs exactly 2 classes, got {len(classes)}")
        down = {classes[1]}
    out = []
    for case in dataset.cases:
        p = project(case, spec)
        if case.label in down:
            p = Polyline2D(p.nodes, p.case_ref, p.node_provenance, render_side=-1)
        out.append(p)
    return out


def projection_bounds(polylines) -> tuple:
    """(min_x, max_x, min_y, max_y) over all nodes."""
    xs = [x for p in polylines for x, _ in p.nodes]
    ys = [y for p in polylines for _, y in p.nodes]
    return min(xs), max(xs), min(ys), max(ys)


def sequential_offsets(dataset: Dataset, assignment: AxisAssignment, gap: float = 0.0) -> tuple:
    """Offsets that lay the horizontal coordinates end to end by observed extent."""
    offsets = []
    pos = 0.0
    for h, _ in assignment.pairs:
        offsets.append(pos)
        pos += dataset.attributes[h].observed_max + gap
    return tuple(offsets)


def wbc_default_spec(mode: str = "ilc2_partial_dynamic") -> ProjectionSpec:
    """Nine WBC attributes, consecutive pairing, last attribute used twice."""
    return ProjectionSpec(mode=mode, assignment=consecutive_assignment(9))
