"""Full 2-D machine learning in lossless in-line coordinates: projections,
box/interval rules, tree-guided search, evaluation, and local explanations."""

from .boxes import (Box, GridParams, REFUSE, Rule, RuleSet, StopConfig, bc_fit,
                    box_stats, classify, fit_from_stream, grid_search, join_rules,
                    membership, prune)
from .dataset import (AttributeMeta, CsvSchema, Dataset, LabeledCase, Partition,
                      SplitPlan, denormalize, ingest_csv, load_page_blocks,
                      load_wbc, normalize, stratified_split)
from .dt_guide import (Branch, ClassHierarchy, DecisionTree, HierarchyNode,
                       NodeConfig, TreeConfig, branch_to_boxes, dc_fit,
                       default_pbc_hierarchy, induce_tree, refine_boxes,
                       select_branches)
from .evaluation import (EvaluationReport, RuleOutcome, baseline_tree_report,
                         cross_validate, evaluate_ruleset, rule_metrics,
                         weighted_precision)
from .explain import (Explanation, ExplanationRequest, boxes_to_tree_form,
                      explain_local)
from .linear import (LinearModel, ProjectionLine, classify_linear, fit_linear,
                     score)
from .projection import (AxisAssignment, Polyline2D, ProjectionSpec,
                         consecutive_assignment, invert, project, project_all,
                         swapped_assignment, wbc_default_spec)
from .session import Session, SessionConfig, replay_session

__version__ = "0.1.0"
