"""Ingestion, normalization and stratified splitting of labeled tabular data."""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

DATA_DIR = Path(__file__).resolve().parents[2] / "data"


class IngestError(ValueError):
    """Raised when a file cannot be turned into a Dataset."""


class SplitError(ValueError):
    """Raised when a split plan cannot be honored."""


@dataclass(frozen=True)
class AttributeMeta:
    name: str
    index: int
    observed_min: float
    observed_max: float
    resolution: int  # number of distinct observed values
    original_min: Optional[float] = None  # pre-normalization range, kept for inversion
    original_max: Optional[float] = None

    def __post_init__(self):
        if self.observed_min > self.observed_max:
            raise ValueError(f"attribute {self.name}: min {self.observed_min} > max {self.observed_max}")
        if self.resolution < 1:
            raise ValueError(f"attribute {self.name}: resolution must be >= 1")


@dataclass(frozen=True)
class LabeledCase:
    values: tuple
    label: str
    source_row: int


@dataclass
class Dataset:
    name: str
    attributes: list
    cases: list
    normalization: str = "raw"  # raw | min_max_unit
    _matrix: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def dimension(self) -> int:
        return len(self.attributes)

    @property
    def classes(self) -> list:
        seen = {}
        for c in self.cases:
            seen[c.label] = seen.get(c.label, 0) + 1
        return list(seen)

    @property
    def class_counts(self) -> dict:
        counts = {}
        for c in self.cases:
            counts[c.label] = counts.get(c.label, 0) + 1
        return counts

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.array([c.values for c in self.cases], dtype=float)
        return self._matrix

    def labels(self) -> list:
        return [c.label for c in self.cases]

    def subset(self, indices, name_suffix: str = "") -> "Dataset":
        return Dataset(
            name=self.name + name_suffix,
            attributes=self.attributes,
            cases=[self.cases[i] for i in indices],
            normalization=self.normalization,
        )

    def snapshot(self) -> str:
        """Canonical JSON snapshot, including normalization parameters."""
        payload = {
            "name": self.name,
            "normalization": self.normalization,
            "attributes": [
                {
                    "name": a.name,
                    "index": a.index,
                    "observed_min": a.observed_min,
                    "observed_max": a.observed_max,
                    "resolution": a.resolution,
                    "original_min": a.original_min,
                    "original_max": a.original_max,
                }
                for a in self.attributes
            ],
            "class_counts": self.class_counts,
            "cases": [
                {"values": list(c.values), "label": c.label, "source_row": c.source_row}
                for c in self.cases
            ],
        }
        return json.dumps(payload, sort_keys=True)

    @staticmethod
    def from_snapshot(text: str) -> "Dataset":
        payload = json.loads(text)
        attrs = [
            AttributeMeta(
                name=a["name"],
                index=a["index"],
                observed_min=a["observed_min"],
                observed_max=a["observed_max"],
                resolution=a["resolution"],
                original_min=a.get("original_min"),
                original_max=a.get("original_max"),
            )
            for a in payload["attributes"]
        ]
        cases = [
            LabeledCase(tuple(c["values"]), c["label"], c["source_row"])
            for c in payload["cases"]
        ]
        return Dataset(payload["name"], attrs, cases, payload["normalization"])


@dataclass(frozen=True)
class CsvSchema:
    """Column roles for ingestion.

    label_column indexes the raw file columns; skip_columns (e.g. a sample id)
    are dropped before attribute indexing.
    """

    label_column: int = -1
    skip_columns: tuple = ()
    has_header: bool = False
    missing_marker: str = "?"
    delimiter: str = ","
    attribute_names: Optional[Sequence[str]] = None
    label_map: Optional[dict] = None
    expected_classes: Optional[Sequence[str]] = None


@dataclass(frozen=True)
class SplitPlan:
    kind: str = "stratified_kfold"  # holdout | stratified_kfold
    fractions: tuple = (0.9, 0.1, 0.0)  # train, validation, test (holdout) or train/val split of the non-test part (kfold)
    fold_count: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("holdout", "stratified_kfold"):
            raise ValueError(f"unknown split kind {self.kind!r}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.kind == "stratified_kfold" and self.fold_count < 2:
            raise ValueError("fold_count must be >= 2")


@dataclass(frozen=True)
class Partition:
    train: Dataset
    validation: Dataset
    test: Dataset
    fold: int = 0


def ingest_csv(path, schema: CsvSchema = CsvSchema(), missing_policy: str = "drop_row",
               name: Optional[str] = None) -> Dataset:
    """Read a delimited text file into a validated Dataset.

    missing_policy: 'drop_row' removes rows containing the missing marker,
    'error' aborts on the first one.
    """
    if missing_policy not in ("drop_row", "error"):
        raise ValueError(f"unknown missing_policy {missing_policy!r}")
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        rows = list(reader)
    header = None
    if schema.has_header and rows:
        header = rows[0]
        rows = rows[1:]
    if not rows:
        raise IngestError(f"{path}: no data rows")

    ncol = len(rows[0])
    label_col = schema.label_column % ncol
    skip = {c % ncol for c in schema.skip_columns}
    attr_cols = [i for i in range(ncol) if i != label_col and i not in skip]

    if schema.attribute_names is not None:
        names = list(schema.attribute_names)
    elif header is not None:
        names = [header[i] for i in attr_cols]
    else:
        names = [f"X{i + 1}" for i in range(len(attr_cols))]
    if len(names) != len(attr_cols):
        raise IngestError(f"{path}: {len(names)} attribute names for {len(attr_cols)} columns")

    cases = []
    offset = 2 if schema.has_header else 1  # 1-based file row numbers
    for r, row in enumerate(rows):
        rownum = r + offset
        if len(row) != ncol:
            raise IngestError(f"{path}: row {rownum}: expected {ncol} columns, got {len(row)}")
        if any(row[i].strip() == schema.missing_marker for i in attr_cols):
            if missing_policy == "error":
                raise IngestError(f"{path}: row {rownum}: missing value")
            continue
        try:
            values = tuple(float(row[i]) for i in attr_cols)
        except ValueError as exc:
            raise IngestError(f"{path}: row {rownum}: unparseable value ({exc})") from exc
        label = row[label_col].strip()
        if schema.label_map is not None:
            if label not in schema.label_map:
                raise IngestError(f"{path}: row {rownum}: unknown label {label!r}")
            label = schema.label_map[label]
        if schema.expected_classes is not None and label not in schema.expected_classes:
            raise IngestError(f"{path}: row {rownum}: unknown label {label!r}")
        cases.append(LabeledCase(values, label, rownum))

    if not cases:
        raise IngestError(f"{path}: no usable rows")

    mat = np.array([c.values for c in cases])
    attrs = [
        AttributeMeta(
            name=names[j],
            index=j,
            observed_min=float(mat[:, j].min()),
            observed_max=float(mat[:, j].max()),
            resolution=int(len(np.unique(mat[:, j]))),
        )
        for j in range(len(attr_cols))
    ]
    return Dataset(name or path.stem, attrs, cases)


def normalize(dataset: Dataset, mode: str = "min_max_unit") -> Dataset:
    """Min-max scale every attribute to [0,1]; constant attributes map to 0."""
    if mode == "raw":
        return dataset
    if mode != "min_max_unit":
        raise ValueError(f"unknown normalization mode {mode!r}")
    if dataset.normalization == "min_max_unit":
        return dataset
    los = np.array([a.observed_min for a in dataset.attributes])
    his = np.array([a.observed_max for a in dataset.attributes])
    span = np.where(his > los, his - los, 1.0)
    mat = (dataset.matrix() - los) / span
    mat[:, his == los] = 0.0
    cases = [
        LabeledCase(tuple(float(v) for v in row), c.label, c.source_row)
        for row, c in zip(mat, dataset.cases)
    ]
    attrs = [
        AttributeMeta(
            name=a.name,
            index=a.index,
            observed_min=float(mat[:, j].min()),
            observed_max=float(mat[:, j].max()),
            resolution=a.resolution,
            original_min=a.observed_min,
            original_max=a.observed_max,
        )
        for j, a in enumerate(dataset.attributes)
    ]
    return Dataset(dataset.name, attrs, cases, "min_max_unit")


def denormalize(dataset: Dataset) -> Dataset:
    """Invert min_max_unit back to original units."""
    if dataset.normalization == "raw":
        return dataset
    los = np.array([a.original_min for a in dataset.attributes])
    his = np.array([a.original_max for a in dataset.attributes])
    span = np.where(his > los, his - los, 1.0)
    mat = dataset.matrix() * span + los
    cases = [
        LabeledCase(tuple(float(v) for v in row), c.label, c.source_row)
        for row, c in zip(mat, dataset.cases)
    ]
    attrs = [
        AttributeMeta(
            name=a.name,
            index=a.index,
            observed_min=a.original_min,
            observed_max=a.original_max,
            resolution=a.resolution,
        )
        for a in dataset.attributes
    ]
    return Dataset(dataset.name, attrs, cases, "raw")


def _per_class_indices(dataset: Dataset, rng: random.Random) -> dict:
    by_class = {}
    for i, c in enumerate(dataset.cases):
        by_class.setdefault(c.label, []).append(i)
    for idx in by_class.values():
        rng.shuffle(idx)
    return by_class


def _holdout_indices(by_class: dict, fractions) -> tuple:
    parts = ([], [], [])
    for idx in by_class.values():
        n = len(idx)
        n_train = round(n * fractions[0])
        n_val = round(n * (fractions[0] + fractions[1])) - n_train
        parts[0].extend(idx[:n_train])
        parts[1].extend(idx[n_train:n_train + n_val])
        parts[2].extend(idx[n_train + n_val:])
    return tuple(sorted(p) for p in parts)


def stratified_split(dataset: Dataset, plan: SplitPlan) -> list:
    """Deterministic stratified partitions.

    holdout: one Partition per the train/validation/test fractions.
    stratified_kfold: fold_count Partitions; each fold is the test set and the
    remainder is split train/validation by the plan's first two fractions
    (renormalized), preserving per-class proportions within one case.
    """
    rng = random.Random(plan.seed)
    by_class = _per_class_indices(dataset, rng)

    if plan.kind == "holdout":
        tr, va, te = _holdout_indices(by_class, plan.fractions)
        return [Partition(dataset.subset(tr, "/train"), dataset.subset(va, "/validation"),
                          dataset.subset(te, "/test"), fold=0)]

    k = plan.fold_count
    for label, idx in by_class.items():
        if len(idx) < k:
            raise SplitError(f"class {label!r} has {len(idx)} cases, fewer than {k} folds")
    folds = [[] for _ in range(k)]
    for idx in by_class.values():
        for i, case_index in enumerate(idx):
            folds[i % k].append(case_index)
    inner = plan.fractions[0] + plan.fractions[1]
    inner_fracs = (plan.fractions[0] / inner, plan.fractions[1] / inner, 0.0) if inner > 0 else (1.0, 0.0, 0.0)

    partitions = []
    for f in range(k):
        test_idx = sorted(folds[f])
        rest = sorted(i for g in range(k) if g != f for i in folds[g])
        rest_by_class = {}
        for i in rest:
            rest_by_class.setdefault(dataset.cases[i].label, []).append(i)
        # reshuffle deterministically per fold so inner splits are independent
        fold_rng = random.Random(plan.seed * 1_000_003 + f + 1)
        for idx in rest_by_class.values():
            fold_rng.shuffle(idx)
        tr, va, _ = _holdout_indices(rest_by_class, inner_fracs)
        partitions.append(Partition(dataset.subset(tr, f"/f{f}/train"),
                                    dataset.subset(va, f"/f{f}/validation"),
                                    dataset.subset(test_idx, f"/f{f}/test"), fold=f))
    return partitions


WBC_SCHEMA = CsvSchema(
    label_column=-1,
    skip_columns=(0,),
    has_header=False,
    missing_marker="?",
    attribute_names=[f"X{i}" for i in range(1, 10)],
    label_map={"2": "benign", "4": "malignant"},
)

PBC_SCHEMA = CsvSchema(label_column=-1, has_header=True)


def load_wbc(path=None, missing_policy: str = "drop_row") -> Dataset:
    """Wisconsin Breast Cancer (683 x 9 after dropping missing rows), raw 1..10 scale."""
    return ingest_csv(path or DATA_DIR / "wbc.csv", WBC_SCHEMA, missing_policy, name="wbc")


def load_page_blocks(path=None, normalized: bool = True) -> Dataset:
    """Page Block Classification (5473 x 10, classes 1..5), min-max normalized by default."""
    ds = ingest_csv(path or DATA_DIR / "page_blocks.csv", PBC_SCHEMA, name="page_blocks")
    return normalize(ds) if normalized else ds
