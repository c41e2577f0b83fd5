"""Per-rule precision/recall, weighted precision, cross-validation, baselines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .boxes import RuleSet, _rule_blocked, _rule_members
from .dataset import Dataset, Partition, SplitPlan, stratified_split
from .dt_guide import DecisionTree, TreeConfig, induce_tree
from .projection import project_all


class EvaluationError(ValueError):
    pass


@dataclass
class RuleOutcome:
    rule_id: str
    predicted_class: str
    classified_cases: int
    correct: int
    precision: Optional[float]  # None when the rule fired on nothing
    recall: Optional[float]
    split: str = "train"
    intermediate: bool = False


@dataclass
class EvaluationReport:
    split: str
    outcomes: list
    weighted_precision: Optional[float]
    refused: int
    total: int
    per_class_correct: dict
    per_class_classified: dict
    fold: int = 0

    def correct_total(self) -> int:
        return sum(o.correct for o in self.outcomes if not o.intermediate)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "fold": self.fold,
            "weighted_precision": self.weighted_precision,
            "refused": self.refused,
            "total": self.total,
            "per_class_correct": self.per_class_correct,
            "per_class_classified": self.per_class_classified,
            "outcomes": [
                {"rule_id": o.rule_id, "predicted_class": o.predicted_class,
                 "classified_cases": o.classified_cases, "correct": o.correct,
                 "precision": o.precision, "recall": o.recall,
                 "intermediate": o.intermediate}
                for o in self.outcomes
            ],
        }


def attribute_cases(ruleset: RuleSet, polylines) -> list:
    """Which rule (or else branch) claims each polyline. Mirrors classify()."""
    out = []
    for poly in polylines:
        matched = set()
        claimed = None
        for rule in ruleset.rules:
            if rule.requires is not None and rule.requires not in matched:
                continue
            if _rule_members(rule, ruleset.boxes, poly):
                if not _rule_blocked(rule, ruleset.boxes, poly):
                    if rule.intermediate:
                        matched.add(rule.id)
                        continue
                    claimed = (rule.id, rule.predicted_class, False)
                    break
            else:
                node = rule.else_branch
                hit = None
                while node is not None:
                    if _rule_members(node, ruleset.boxes, poly) and not _rule_blocked(node, ruleset.boxes, poly):
                        hit = (node.id, node.predicted_class, False)
                        break
                    node = node.else_branch
                if hit is not None:
                    claimed = hit
                    break
        out.append(claimed)
    return out


def rule_metrics(ruleset: RuleSet, dataset: Dataset, split: str = "train") -> list:
    """Per-rule firing counts under hierarchical order; recall against the
    rule's class total in the split."""
    polylines = project_all(dataset, ruleset.projection)
    attribution = attribute_cases(ruleset, polylines)
    class_totals: dict = {}
    for c in dataset.cases:
        class_totals[c.label] = class_totals.get(c.label, 0) + 1

    rows: dict = {}

    def ensure(rule, intermediate):
        if rule.id not in rows:
            rows[rule.id] = RuleOutcome(rule.id, rule.predicted_class, 0, 0, None, None,
                                        split, intermediate)
        return rows[rule.id]

    for rule in ruleset.rules:
        ensure(rule, rule.intermediate)
        node = rule.else_branch
        while node is not None:
            ensure(node, False)
            node = node.else_branch

    for case, claimed in zip(dataset.cases, attribution):
        if claimed is None:
            continue
        rule_id, predicted, _ = claimed
        row = rows[rule_id]
        row.classified_cases += 1
        if predicted == case.label:
            row.correct += 1

    for row in rows.values():
        if row.classified_cases:
            row.precision = row.correct / row.classified_cases
        total = class_totals.get(row.predicted_class, 0)
        row.recall = (row.correct / total) if total else None
    return list(rows.values())


def weighted_precision(outcomes: Sequence[RuleOutcome],
                       include: Optional[Callable[[RuleOutcome], bool]] = None) -> float:
    """Coverage-weighted average of rule precisions over terminal rules:
    P = sum(p_i * c_i) / sum(c_i). Intermediate (grouped-class) rules are
    excluded unless the filter says otherwise."""
    if include is None:
        include = lambda o: not o.intermediate
    rows = [o for o in outcomes if include(o) and o.classified_cases > 0]
    total = sum(o.classified_cases for o in rows)
    if total == 0:
        raise EvaluationError("no classified cases among included rules")
    return sum(o.precision * o.classified_cases for o in rows) / total


def evaluate_ruleset(ruleset: RuleSet, dataset: Dataset, split: str = "train",
                     fold: int = 0) -> EvaluationReport:
    outcomes = rule_metrics(ruleset, dataset, split)
    terminal = [o for o in outcomes if not o.intermediate]
    classified = sum(o.classified_cases for o in terminal)
    per_class_correct: dict = {c: 0 for c in dataset.classes}
    per_class_classified: dict = {c: 0 for c in dataset.classes}
    polylines = project_all(dataset, ruleset.projection)
    for case, claimed in zip(dataset.cases, attribute_cases(ruleset, polylines)):
        if claimed is None:
            continue
        _, predicted, _ = claimed
        per_class_classified[predicted] = per_class_classified.get(predicted, 0) + 1
        if predicted == case.label:
            per_class_correct[case.label] += 1
    wp = None
    if classified:
        wp = weighted_precision(outcomes)
    return EvaluationReport(split=split, outcomes=outcomes, weighted_precision=wp,
                            refused=len(dataset.cases) - classified, total=len(dataset.cases),
                            per_class_correct=per_class_correct,
                            per_class_classified=per_class_classified, fold=fold)


@dataclass
class FoldReport:
    fold: int
    train: EvaluationReport
    validation: Optional[EvaluationReport]
    test: EvaluationReport


@dataclass
class CrossValidationReport:
    folds: list
    average_test_weighted_precision: float
    plan: SplitPlan

    def class_hit_folds(self, classes: Sequence[str]) -> dict:
        """How many folds gave each class at least one correct test classification."""
        return {c: sum(1 for f in self.folds if f.test.per_class_correct.get(c, 0) > 0)
                for c in classes}

    def render_text(self) -> str:
        lines = ["Fold  Test weighted precision (%)"]
        for f in self.folds:
            wp = f.test.weighted_precision
            lines.append(f"{f.fold + 1:>4}  {wp * 100:.2f}" if wp is not None else f"{f.fold + 1:>4}  n/a")
        lines.append(f" avg  {self.average_test_weighted_precision * 100:.2f}")
        return "\n".join(lines)


def cross_validate(dataset: Dataset, pipeline: Callable[[Dataset], RuleSet],
                   plan: SplitPlan) -> CrossValidationReport:
    """Run the full fit pipeline per fold on that fold's training data only."""
    partitions = stratified_split(dataset, plan)
    folds = []
    for part in partitions:
        ruleset = pipeline(part.train)
        train_rep = evaluate_ruleset(ruleset, part.train, "train", part.fold)
        val_rep = (evaluate_ruleset(ruleset, part.validation, "validation", part.fold)
                   if part.validation.cases else None)
        test_rep = evaluate_ruleset(ruleset, part.test, "test", part.fold)
        folds.append(FoldReport(part.fold, train_rep, val_rep, test_rep))
    wps = [f.test.weighted_precision for f in folds if f.test.weighted_precision is not None]
    if not wps:
        raise EvaluationError("no fold produced classified test cases")
    return CrossValidationReport(folds=folds, average_test_weighted_precision=float(np.mean(wps)),
                                 plan=plan)


BASELINE_TREE_CONFIG = TreeConfig(max_depth=8, min_leaf_cases=50)

# Externally published comparison rows, reported as-is and never recomputed.
PUBLISHED_PBC_BASELINES = (
    {"algorithm": "K-nearest neighbor, single 80:20 split", "validation": 93.51},
    {"algorithm": "C4.5 decision tree, 10-fold 90:10", "validation": 96.95},
    {"algorithm": "C4.5 decision tree, 100% training data", "train": 96.02},
)


@dataclass
class TreeClassRow:
    label: str
    weight: float
    precision: float
    classified: int
    weighted_precision: float


@dataclass
class TreeSplitSection:
    split: str
    rows: list
    classified_total: int
    weighted_precision: Optional[float]


@dataclass
class TreeBaselineReport:
    sections: list
    tree: DecisionTree

    def section(self, split: str) -> TreeSplitSection:
        return next(s for s in self.sections if s.split == split)

    def render_text(self) -> str:
        lines = []
        for sec in self.sections:
            lines.append(sec.split.capitalize())
            lines.append("Class      Weight (%)  Precision (%)  Classified  Weighted precision (%)")
            for r in sec.rows:
                lines.append(f"{r.label:<10} {r.weight * 100:>9.2f}  {r.precision * 100:>12.2f}"
                             f"  {r.classified:>10}  {r.weighted_precision * 100:>21.2f}")
            wp = sec.weighted_precision
            lines.append(f"{'All':<10} {100.0:>9.2f}  {'':>12}  {sec.classified_total:>10}"
                         f"  {wp * 100 if wp is not None else 0.0:>21.2f}")
            lines.append("")
        return "\n".join(lines)


def _tree_section(tree: DecisionTree, ds: Dataset, split: str) -> TreeSplitSection:
    pred = tree.predict_labels(ds.matrix())
    truth = ds.labels()
    classes = list(tree.classes)
    rows = []
    total_classified = len(pred)
    correct_total = 0
    for c in classes:
        classified = sum(1 for p in pred if p == c)
        correct = sum(1 for p, t in zip(pred, truth) if p == c and t == c)
        correct_total += correct
        precision = correct / classified if classified else 0.0
        weight = classified / total_classified if total_classified else 0.0
        rows.append(TreeClassRow(label=f"Class {c}", weight=weight, precision=precision,
                                 classified=classified, weighted_precision=weight * precision))
    wp = correct_total / total_classified if total_classified else None
    return TreeSplitSection(split=split, rows=rows, classified_total=total_classified,
                            weighted_precision=wp)


def baseline_tree_report(dataset: Dataset, partition: Optional[Partition] = None,
                         config: TreeConfig = BASELINE_TREE_CONFIG,
                         plan: Optional[SplitPlan] = None) -> TreeBaselineReport:
    """Per-class weighted-precision table for the in-repo tree baseline."""
    if partition is None:
        plan = plan or SplitPlan(kind="holdout", fractions=(0.81, 0.09, 0.10), seed=0)
        partition = stratified_split(dataset, plan)[0]
    tree = induce_tree(partition.train, config)
    sections = [_tree_section(tree, partition.train, "training")]
    if partition.validation.cases:
        sections.append(_tree_section(tree, partition.validation, "validation"))
    if partition.test.cases:
        sections.append(_tree_section(tree, partition.test, "testing"))
    return TreeBaselineReport(sections=sections, tree=tree)
