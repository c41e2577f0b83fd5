"""Decision-tree-guided box search and divide-and-conquer multiclass fitting."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .boxes import Box, BoxError, Rule, RuleSet
from .dataset import Dataset
from .projection import AxisAssignment, ProjectionSpec, consecutive_assignment


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 8
    min_leaf_cases: int = 5


@dataclass
class TreeNode:
    counts: np.ndarray
    prediction: int
    attribute: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None  # attribute <= threshold
    right: Optional["TreeNode"] = None  # attribute > threshold

    @property
    def is_leaf(self) -> bool:
        return self.attribute is None


@dataclass
class DecisionTree:
    root: TreeNode
    classes: tuple
    config: TreeConfig

    def predict_one(self, values) -> str:
        node = self.root
        while not node.is_leaf:
            node = node.left if values[node.attribute] <= node.threshold else node.right
        return self.classes[node.prediction]

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X), dtype=int)

        def rec(node, idx):
            if len(idx) == 0:
                return
            if node.is_leaf:
                out[idx] = node.prediction
                return
            m = X[idx, node.attribute] <= node.threshold
            rec(node.left, idx[m])
            rec(node.right, idx[~m])

        rec(self.root, np.arange(len(X)))
        return out

    def predict_labels(self, X: np.ndarray) -> list:
        return [self.classes[i] for i in self.predict(X)]

    def leaf_count(self) -> int:
        def rec(n):
            return 1 if n.is_leaf else rec(n.left) + rec(n.right)
        return rec(self.root)


def _entropy_rows(M: np.ndarray, n: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        p = M / n[:, None]
        lg = np.where(M > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * lg).sum(axis=1)


def _grow(X: np.ndarray, y: np.ndarray, k: int, depth: int, config: TreeConfig) -> TreeNode:
    counts = np.bincount(y, minlength=k)
    node = TreeNode(counts=counts, prediction=int(counts.argmax()))
    n = len(y)
    if depth >= config.max_depth or n < 2 * config.min_leaf_cases or (counts > 0).sum() <= 1:
        return node
    total = counts.sum()
    p = counts[counts > 0] / total
    parent_entropy = float(-(p * np.log2(p)).sum())
    onehot = np.eye(k)[y]
    best_gain = 1e-12
    best = None
    for a in range(X.shape[1]):
        order = np.argsort(X[:, a], kind="stable")
        xs = X[order, a]
        cum = onehot[order].cumsum(axis=0)
        tot = cum[-1]
        i = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (i >= config.min_leaf_cases) & (n - i >= config.min_leaf_cases)
        if not valid.any():
            continue
        left = cum[:-1][valid]
        right = tot - left
        nl = left.sum(axis=1)
        nr = right.sum(axis=1)
        gain = parent_entropy - (nl * _entropy_rows(left, nl) + nr * _entropy_rows(right, nr)) / n
        j = int(gain.argmax())
        if gain[j] > best_gain:
            ii = np.where(valid)[0][j]
            best_gain = float(gain[j])
            best = (a, float((xs[ii] + xs[ii + 1]) / 2))
    if best is None:
        return node
    a, thr = best
    mask = X[:, a] <= thr
    node.attribute, node.threshold = a, thr
    node.left = _grow(X[mask], y[mask], k, depth + 1, config)
    node.right = _grow(X[~mask], y[~mask], k, depth + 1, config)
    return node


def induce_tree(dataset_or_xy, config: TreeConfig = TreeConfig(), classes: Optional[Sequence[str]] = None) -> DecisionTree:
    """Binary numeric tree: information gain, midpoint thresholds, deterministic."""
    if isinstance(dataset_or_xy, Dataset):
        ds = dataset_or_xy
        if not ds.cases:
            raise BoxError("dataset is empty")
        classes = tuple(classes or ds.classes)
        X = ds.matrix()
        y = np.array([classes.index(l) for l in ds.labels()])
    else:
        X, labels = dataset_or_xy
        X = np.asarray(X, dtype=float)
        classes = tuple(classes or sorted(set(labels)))
        y = np.array([classes.index(l) for l in labels])
    root = _grow(X, y, len(classes), 0, config)
    return DecisionTree(root=root, classes=classes, config=config)


@dataclass(frozen=True)
class Branch:
    conditions: tuple  # ((attribute, relation, threshold), ...) root -> leaf
    counts: dict
    dominant: str
    purity: float
    covered: int

    def describe(self, names: Optional[Sequence[str]] = None) -> str:
        def nm(a):
            return names[a] if names else f"X{a}"
        conds = " & ".join(f"{nm(a)} {rel} {thr:.6g}" for a, rel, thr in self.conditions)
        return f"{conds} -> {self.dominant} ({self.covered} cases, purity {self.purity:.3f})"


def tree_branches(tree: DecisionTree) -> list:
    out = []

    def rec(node, conds):
        if node.is_leaf:
            counts = {tree.classes[i]: int(c) for i, c in enumerate(node.counts) if c > 0}
            total = sum(counts.values())
            if total:
                dominant = tree.classes[node.prediction]
                out.append(Branch(conds, counts, dominant, counts.get(dominant, 0) / total, total))
            return
        rec(node.left, conds + ((node.attribute, "<=", node.threshold),))
        rec(node.right, conds + ((node.attribute, ">", node.threshold),))

    rec(tree.root, ())
    return out


def select_branches(tree: DecisionTree, purity_min: float, target_class: Optional[str] = None) -> list:
    """Branches whose leaf is dominated strongly enough, largest first."""
    if not (0 < purity_min <= 1):
        raise BoxError("purity_min must be in (0, 1]")
    picked = [b for b in tree_branches(tree)
              if b.purity >= purity_min and (target_class is None or b.dominant == target_class)]
    picked.sort(key=lambda b: (-b.covered, b.conditions))
    return picked


def branch_to_boxes(branch: Branch, assignment: AxisAssignment, bounds: Sequence[tuple]) -> list:
    """Convert a branch into attribute-plane boxes, root conditions first.

    Conditions are merged per attribute and paired in order of first
    appearance; unbounded sides clamp to the observed attribute bounds. Each
    box binds its own (h, v) attribute plane.
    """
    known = set(assignment.horizontal) | set(assignment.vertical)
    order = []
    intervals = {}
    for a, rel, thr in branch.conditions:
        if a not in known:
            raise BoxError(f"branch condition on attribute {a} outside the assignment")
        if a not in intervals:
            lo, hi = bounds[a]
            intervals[a] = [lo, hi, False, False]  # lo, hi, lo_open, hi_open
            order.append(a)
        iv = intervals[a]
        if rel in (">", ">="):
            if thr > iv[0] or (thr == iv[0] and rel == ">"):
                iv[0], iv[2] = thr, rel == ">"
        elif rel in ("<", "<="):
            if thr < iv[1] or (thr == iv[1] and rel == "<"):
                iv[1], iv[3] = thr, rel == "<"
        else:
            raise BoxError(f"unknown relation {rel!r}")

    partner = {}
    for h, v in assignment.pairs:
        partner.setdefault(h, v)
        partner.setdefault(v, h)

    boxes = []
    for i in range(0, len(order), 2):
        group = order[i:i + 2]
        a = group[0]
        if len(group) == 2:
            b = group[1]
            iva, ivb = intervals[a], intervals[b]
        else:
            b = partner.get(a, a)
            iva = intervals[a]
            ivb = [bounds[b][0], bounds[b][1], False, False]
        boxes.append(Box(
            x1=iva[0], x2=iva[1], y1=ivb[0], y2=ivb[1],
            pair=(a, b),
            open_sides=(iva[2], iva[3], ivb[2], ivb[3]),
        ))
    return boxes


def box_mask_matrix(box: Box, X: np.ndarray) -> np.ndarray:
    """Vectorized membership of cases (rows of X) in a pair-bound box."""
    if box.pair is None:
        raise BoxError("box_mask_matrix needs a pair-bound box")
    h, v = box.pair
    ox1, ox2, oy1, oy2 = box.open_sides
    m = (X[:, h] > box.x1) if ox1 else (X[:, h] >= box.x1)
    m &= (X[:, h] < box.x2) if ox2 else (X[:, h] <= box.x2)
    m &= (X[:, v] > box.y1) if oy1 else (X[:, v] >= box.y1)
    m &= (X[:, v] < box.y2) if oy2 else (X[:, v] <= box.y2)
    return m


def _box_key(box: Box, X: np.ndarray, target: np.ndarray) -> tuple:
    m = box_mask_matrix(box, X)
    total = int(m.sum())
    good = int((m & target).sum())
    purity = good / total if total else -1.0
    return (purity, good)


def refine_boxes(seeds: Sequence[Box], X: np.ndarray, target: np.ndarray,
                 step: float = 0.01, radius: int = 5, floor: int = 0,
                 max_iterations: int = 40,
                 bounds: Optional[Sequence[tuple]] = None) -> list:
    """Hill-climb each seed box over per-side perturbations of +/- k*step.

    Maximizes (purity fraction, target coverage); moves that would drop
    coverage below floor are rejected, and the result is never worse than the
    seed under that key. Sides never leave the observed attribute bounds.
    """
    if step <= 0:
        raise BoxError("step must be positive")
    out = []
    for seed in seeds:
        if bounds is not None and seed.pair is not None:
            x_lo, x_hi = bounds[seed.pair[0]]
            y_lo, y_hi = bounds[seed.pair[1]]
        else:
            x_lo = y_lo = -np.inf
            x_hi = y_hi = np.inf
        cur = seed
        cur_key = _box_key(cur, X, target)
        for _ in range(max_iterations):
            best, best_key = cur, cur_key
            for k in range(1, radius + 1):
                d = k * step
                moves = (
                    replace(cur, x1=max(x_lo, cur.x1 - d)),
                    replace(cur, x1=min(cur.x2, cur.x1 + d)),
                    replace(cur, x2=min(x_hi, cur.x2 + d)),
                    replace(cur, x2=max(cur.x1, cur.x2 - d)),
                    replace(cur, y1=max(y_lo, cur.y1 - d)),
                    replace(cur, y1=min(cur.y2, cur.y1 + d)),
                    replace(cur, y2=min(y_hi, cur.y2 + d)),
                    replace(cur, y2=max(cur.y1, cur.y2 - d)),
                )
                for mv in moves:
                    key = _box_key(mv, X, target)
                    if key[1] >= floor and key > best_key:
                        best, best_key = mv, key
            if best_key <= cur_key:
                break
            cur, cur_key = best, best_key
        out.append(cur)
    return out


@dataclass(frozen=True)
class HierarchyNode:
    left: tuple  # classes split off at this node
    right: tuple  # classes continuing down
    gate_right: bool = False  # also fit a grouped-class gate rule for the right side


@dataclass(frozen=True)
class ClassHierarchy:
    nodes: tuple
    tail_order: tuple  # rule order for the classes of the final right group

    def __post_init__(self):
        if not self.nodes:
            raise BoxError("hierarchy needs at least one node")
        leaves = []
        for node in self.nodes:
            leaves.extend(node.left)
        leaves.extend(self.nodes[-1].right)
        if len(set(leaves)) != len(leaves):
            raise BoxError("hierarchy leaves overlap")
        if set(self.tail_order) != set(self.nodes[-1].right):
            raise BoxError("tail_order must cover the final right group")

    @property
    def classes(self) -> tuple:
        out = []
        for node in self.nodes:
            out.extend(node.left)
        out.extend(self.nodes[-1].right)
        return tuple(out)


def default_pbc_hierarchy(classes: Sequence[str]) -> ClassHierarchy:
    """Majority class against the rest (gated), then the second class, then the
    remaining three resolved sequentially."""
    c = sorted(classes)
    if len(c) != 5:
        raise BoxError(f"default hierarchy expects 5 classes, got {len(c)}")
    return ClassHierarchy(
        nodes=(
            HierarchyNode(left=(c[0],), right=tuple(c[1:]), gate_right=True),
            HierarchyNode(left=(c[1],), right=tuple(c[2:])),
        ),
        tail_order=(c[3], c[4], c[2]),
    )


def two_class_hierarchy(classes: Sequence[str]) -> ClassHierarchy:
    c = list(classes)
    return ClassHierarchy(nodes=(HierarchyNode(left=(c[0],), right=(c[1],)),), tail_order=(c[1],))


@dataclass(frozen=True)
class NodeConfig:
    purity_min: float = 0.75
    branch_purity: float = 0.7
    max_boxes: int = 4
    coverage_fraction: float = 0.10
    min_cases: int = 3
    refine_step: float = 0.01
    refine_radius: int = 5
    tree: TreeConfig = TreeConfig()


DEFAULT_PBC_NODE_CONFIGS = {
    "majority": NodeConfig(purity_min=0.95, branch_purity=0.8, max_boxes=8),
    "gate": NodeConfig(purity_min=0.50, branch_purity=0.8, max_boxes=8),
    "second": NodeConfig(purity_min=0.75, branch_purity=0.6, min_cases=2),
    "tail": (NodeConfig(purity_min=0.70, branch_purity=0.6, min_cases=2),
             NodeConfig(purity_min=0.65, branch_purity=0.6, min_cases=2),
             NodeConfig(purity_min=0.60, branch_purity=0.6, min_cases=2)),
}


@dataclass
class NodeAudit:
    target: str
    subset_size: int
    tree_leaves: int
    selected_branches: list
    seeds: list
    boxes: list


@dataclass
class DcFitResult:
    ruleset: RuleSet
    audits: list


def _fit_target_boxes(X: np.ndarray, labels: list, target: str, cfg: NodeConfig,
                      assignment: AxisAssignment, bounds) -> tuple:
    """Greedy DTG box acceptance for one target class within a subset."""
    tmask = np.array([l == target for l in labels])
    binary = ["t" if m else "o" for m in tmask]
    tree = induce_tree((X, binary), cfg.tree, classes=("o", "t"))
    seeds = []
    seen = set()
    for branch in select_branches(tree, cfg.branch_purity, target_class="t"):
        for box in branch_to_boxes(branch, assignment, bounds):
            key = (box.pair, box.corners(), box.open_sides)
            if key not in seen:
                seen.add(key)
                seeds.append(box)
    audit = NodeAudit(target=target, subset_size=len(labels), tree_leaves=tree.leaf_count(),
                      selected_branches=[b.describe() for b in select_branches(tree, cfg.branch_purity, "t")],
                      seeds=list(seeds), boxes=[])
    accepted = []
    remaining = np.ones(len(X), bool)
    for _ in range(cfg.max_boxes):
        rem_target = int((tmask & remaining).sum())
        if rem_target == 0:
            break
        floor = max(cfg.min_cases, int(np.ceil(cfg.coverage_fraction * rem_target)))
        scored = []
        for box in seeds:
            key = _box_key(box, X[remaining], tmask[remaining])
            if key[1] >= floor:
                scored.append((key, box.corners(), box))
        scored.sort(key=lambda t: (tuple(-v for v in t[0]), t[1]))
        best, best_key = None, None
        for _, _, box in scored[:3]:
            h, v = box.pair
            span = max(bounds[h][1] - bounds[h][0], bounds[v][1] - bounds[v][0], 1e-9)
            refined = refine_boxes([box], X[remaining], tmask[remaining],
                                   step=cfg.refine_step * span,
                                   radius=cfg.refine_radius, floor=floor,
                                   bounds=bounds)[0]
            key = _box_key(refined, X[remaining], tmask[remaining])
            if best_key is None or key > best_key:
                best, best_key = refined, key
        if best is None or best_key[0] < cfg.purity_min or best_key[1] < floor:
            break
        accepted.append(best)
        remaining &= ~box_mask_matrix(best, X)
    audit.boxes = list(accepted)
    return accepted, audit


def dc_fit(dataset: Dataset, hierarchy: Optional[ClassHierarchy] = None,
           node_configs: Optional[dict] = None) -> DcFitResult:
    """Divide-and-conquer DTG box classification over a class hierarchy.

    Each node fits boxes for its left class against the node's case subset;
    a gated node also fits grouped-class boxes for the right side, and the
    final right group is resolved by sequential per-class rules.
    """
    classes = dataset.classes
    hierarchy = hierarchy or (default_pbc_hierarchy(classes) if len(classes) == 5
                              else two_class_hierarchy(classes))
    if set(hierarchy.classes) != set(classes):
        raise BoxError("hierarchy leaves must partition the dataset classes")
    cfgs = node_configs or DEFAULT_PBC_NODE_CONFIGS
    X = dataset.matrix()
    labels = dataset.labels()
    bounds = [(a.observed_min, a.observed_max) for a in dataset.attributes]
    assignment = consecutive_assignment(dataset.dimension)
    spec = ProjectionSpec(mode="static_collocated", assignment=assignment)

    boxes: dict = {}
    rules: list = []
    audits: list = []
    next_box = 1
    next_rule = 1
    gate_rule_id = None
    chain_boxes: list = []  # box ids of prior post-gate rules, for printed negations

    def add_rule(target, accepted, intermediate=False, requires=None, negatives=()):
        nonlocal next_box, next_rule
        ids = []
        for b in accepted:
            bid = f"B{next_box}"
            next_box += 1
            boxes[bid] = replace(b, id=bid)
            ids.append(bid)
        if not ids:
            return None
        rule = Rule(id=f"R{next_rule}", positive=tuple(ids), negative=tuple(negatives),
                    predicted_class=target, intermediate=intermediate, requires=requires,
                    order=next_rule - 1)
        next_rule += 1
        rules.append(rule)
        return rule

    def node_cfg(key, fallback=NodeConfig()):
        got = cfgs.get(key, fallback)
        return got

    # chain nodes
    node1_box_ids: list = []
    for depth, node in enumerate(hierarchy.nodes):
        subset_classes = set(node.left) | set(node.right)
        sel = [i for i, l in enumerate(labels) if l in subset_classes]
        Xs = X[sel]
        ls = [labels[i] for i in sel]
        target = node.left[0]
        cfg = node_cfg("majority" if depth == 0 else "second")
        accepted, audit = _fit_target_boxes(Xs, ls, target, cfg, assignment, bounds)
        audits.append(audit)
        requires = gate_rule_id if depth > 0 else None
        negatives = tuple(chain_boxes) if depth > 0 else ()
        rule = add_rule(target, accepted, requires=requires, negatives=negatives)
        if rule is not None and depth > 0:
            chain_boxes.extend(rule.positive)
        if depth == 0 and rule is not None:
            node1_box_ids = list(rule.positive)
        if node.gate_right:
            grouped = "+".join(node.right)
            gcfg = node_cfg("gate")
            gmask_labels = ["t" if l in node.right else "o" for l in ls]
            gaccepted, gaudit = _fit_target_boxes(
                Xs, gmask_labels, "t", gcfg, assignment, bounds)
            gaudit.target = grouped
            audits.append(gaudit)
            grule = add_rule(grouped, gaccepted, intermediate=True,
                             negatives=tuple(node1_box_ids))
            if grule is not None:
                gate_rule_id = grule.id

    # final right group, sequential per-class rules; a single-class tail keeps
    # the last node's left side as contrast
    tail_classes = hierarchy.nodes[-1].right
    if tail_classes:
        contrast = set(tail_classes)
        if len(tail_classes) == 1:
            contrast |= set(hierarchy.nodes[-1].left)
        sel = [i for i, l in enumerate(labels) if l in contrast]
        Xs = X[sel]
        ls = [labels[i] for i in sel]
        tail_cfgs = cfgs.get("tail", (NodeConfig(),) * len(hierarchy.tail_order))
        if isinstance(tail_cfgs, NodeConfig):
            tail_cfgs = (tail_cfgs,) * len(hierarchy.tail_order)
        for target, cfg in zip(hierarchy.tail_order, tail_cfgs):
            accepted, audit = _fit_target_boxes(Xs, ls, target, cfg, assignment, bounds)
            audits.append(audit)
            rule = add_rule(target, accepted, requires=gate_rule_id,
                            negatives=tuple(chain_boxes))
            if rule is not None:
                chain_boxes.extend(rule.positive)

    ruleset = RuleSet(rules=rules, boxes=boxes, projection=spec, class_order=tuple(classes))

    # training covered counts under gated ordered evaluation, vectorized
    masks = {bid: box_mask_matrix(b, X) for bid, b in boxes.items()}
    gates_matched: dict = {}
    unclaimed = np.ones(len(X), bool)
    for rule in rules:
        pos = np.zeros(len(X), bool)
        for b in rule.positive:
            pos |= masks[b]
        neg = np.zeros(len(X), bool)
        for b in rule.negative:
            neg |= masks[b]
        fires = pos & ~neg
        if rule.requires is not None:
            fires &= gates_matched.get(rule.requires, np.zeros(len(X), bool))
        if rule.intermediate:
            gates_matched[rule.id] = fires & unclaimed
            continue
        fires &= unclaimed
        rule.covered_count = int(fires.sum())
        unclaimed &= ~fires
    return DcFitResult(ruleset=ruleset, audits=audits)
