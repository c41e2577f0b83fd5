"""Batch command line: ingest, project, fit, evaluate, reproduce, serve."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import reproduce as repro
from .boxes import GridParams, RuleSet, StopConfig, bc_fit, join_rules, prune
from .dataset import (CsvSchema, Dataset, SplitPlan, ingest_csv, load_page_blocks,
                      load_wbc, normalize)
from .dt_guide import dc_fit
from .evaluation import cross_validate, evaluate_ruleset
from .explain import ExplanationRequest, explain_local, plot_explanation
from .projection import (ProjectionSpec, consecutive_assignment, project_all,
                         wbc_default_spec)


def _dataset_from_flag(name: str) -> Dataset:
    if name == "wbc":
        return load_wbc()
    if name in ("pbc", "page_blocks"):
        return load_page_blocks()
    path = Path(name)
    if path.suffix == ".json":
        return Dataset.from_snapshot(path.read_text())
    return ingest_csv(path, CsvSchema(has_header=True))


def _spec_for(dataset: Dataset, mode: str) -> ProjectionSpec:
    if dataset.name == "wbc":
        return wbc_default_spec(mode)
    return ProjectionSpec(mode=mode, assignment=consecutive_assignment(dataset.dimension))


def _write_snapshot(args, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    snap = {k: v for k, v in vars(args).items() if k != "func"}
    snap["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    (out_dir / "config_snapshot.json").write_text(json.dumps(snap, sort_keys=True, indent=1, default=str))


def cmd_ingest(args):
    schema = CsvSchema(label_column=args.label_column, skip_columns=tuple(args.skip_column),
                       has_header=args.header, missing_marker=args.missing_marker)
    ds = ingest_csv(args.input, schema, args.missing_policy)
    if args.normalize:
        ds = normalize(ds)
    out = Path(args.out or (Path(args.input).stem + ".snapshot.json"))
    out.write_text(ds.snapshot())
    print(f"{ds.name}: {len(ds.cases)} cases, {ds.dimension} attributes, "
          f"classes {ds.class_counts} -> {out}")
    _write_snapshot(args, Path(args.out_dir))
    return 0


def cmd_project(args):
    ds = _dataset_from_flag(args.dataset)
    spec = _spec_for(ds, args.mode)
    polylines = project_all(ds, spec, mirror=args.mirror)
    rows = [{"label": p.label, "render_side": p.render_side,
             "nodes": [list(n) for n in p.nodes]} for p in polylines]
    out = Path(args.out or f"{ds.name}_polylines.json")
    out.write_text(json.dumps({"spec": spec.to_dict(), "polylines": rows}))
    print(f"{len(rows)} polylines -> {out}")
    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(10, 4))
        colors = {}
        palette = ["tab:green", "tab:red", "tab:blue", "tab:orange", "tab:purple"]
        for p in polylines:
            color = colors.setdefault(p.label, palette[len(colors) % len(palette)])
            ys = [p.render_side * y for _, y in p.nodes]
            ax.plot([x for x, _ in p.nodes], ys, color=color, alpha=0.15, linewidth=0.6)
        ax.set_title(f"{ds.name} in {args.mode}")
        fig.savefig(args.plot)
        print(f"plot -> {args.plot}")
    _write_snapshot(args, Path(args.out_dir))
    return 0


def cmd_fit(args):
    ds = _dataset_from_flag(args.dataset)
    if args.guide == "dt":
        result = dc_fit(ds)
        ruleset = result.ruleset
        audit_path = Path(args.out or f"{ds.name}_rules.json").with_suffix(".audit.json")
        audit_path.write_text(json.dumps([
            {"target": a.target, "subset_size": a.subset_size,
             "tree_leaves": a.tree_leaves,
             "selected_branches": a.selected_branches,
             "seeds": [b.to_dict() for b in a.seeds],
             "boxes": [b.to_dict() for b in a.boxes]}
            for a in result.audits
        ], indent=1))
        print(f"guiding-tree audit -> {audit_path}")
    else:
        spec = _spec_for(ds, args.mode)
        grid = GridParams(cell_width=args.cell, cell_height=args.cell,
                          coverage_fraction=args.coverage, purity_threshold=args.purity)
        ruleset = bc_fit(ds, spec, grid, StopConfig(max_rules=args.max_rules))
    out = Path(args.out or f"{ds.name}_rules.json")
    out.write_text(ruleset.to_json())
    report = evaluate_ruleset(ruleset, ds, "train")
    wp = report.weighted_precision
    print(ruleset.render_text())
    print(f"train weighted precision: {wp * 100:.2f}%  refused: {report.refused}/{report.total}"
          if wp is not None else "no classified cases")
    print(f"rules -> {out}")
    _write_snapshot(args, Path(args.out_dir))
    return 0


def cmd_prune(args):
    ruleset = RuleSet.from_json(Path(args.rules).read_text())
    ds = _dataset_from_flag(args.dataset)
    polylines = project_all(ds, ruleset.projection)
    report = prune(ruleset, args.min_cases, args.mode, polylines)
    out = Path(args.out or args.rules)
    out.write_text(report.ruleset.to_json())
    for action in report.actions:
        print(f"{action.rule_id}: {action.action}"
              + (f" -> {action.target}" if action.target else "")
              + (f" counts={action.counts}" if action.counts else ""))
    print(f"rules -> {out}")
    _write_snapshot(args, Path(args.out_dir))
    return 0


def cmd_join(args):
    ruleset = RuleSet.from_json(Path(args.rules).read_text())
    ds = _dataset_from_flag(args.dataset)
    polylines = project_all(ds, ruleset.projection)
    joined = join_rules(ruleset, polylines)
    out = Path(args.out or args.rules)
    out.write_text(joined.to_json())
    print(joined.render_text())
    print(f"rules -> {out}")
    _write_snapshot(args, Path(args.out_dir))
    return 0


def cmd_eval(args):
    ruleset = RuleSet.from_json(Path(args.rules).read_text())
    ds = _dataset_from_flag(args.dataset)
    report = evaluate_ruleset(ruleset, ds, args.split)
    print(f"{'rule':<12} {'class':<12} {'cases':>6} {'correct':>8} {'precision':>10} {'recall':>8}")
    for o in report.outcomes:
        if o.classified_cases == 0:
            continue
        print(f"{o.rule_id:<12} {o.predicted_class:<12} {o.classified_cases:>6} {o.correct:>8}"
              f" {o.precision * 100:>9.2f}% {o.recall * 100 if o.recall is not None else 0:>7.2f}%")
    if report.weighted_precision is not None:
        print(f"weighted precision: {report.weighted_precision * 100:.2f}%"
              f"  refused: {report.refused}/{report.total}")
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=1))
        print(f"report -> {args.json}")
    _write_snapshot(args, Path(args.out_dir))
    return 0


def cmd_fit_linear(args):
    from .boxes import REFUSE, classify
    from .linear import LinearSearchConfig, fit_linear

    ds = _dataset_from_flag(args.dataset)
    spec = _spec_for(ds, args.mode)
    if args.rules:
        # chain: keep only the cases an existing rule file refuses
        ruleset = RuleSet.from_json(Path(args.rules).read_text())
        spec = ruleset.projection
        refusals = [i for i, case in enumerate(ds.cases)
                    if classify(ruleset, case) == REFUSE]
        if not refusals:
            print("rule file refuses nothing; fitting on the full dataset")
        else:
            ds = ds.subset(refusals, "/refused")
    report = fit_linear(ds, spec, args.form, positive_class=args.positive_class,
                        config=LinearSearchConfig(min_recall=args.min_recall))
    out = Path(args.out or f"{ds.name.replace('/', '_')}_linear.json")
    out.write_text(json.dumps(report.model.to_dict(), indent=1, sort_keys=True))
    print(f"form={args.form} precision={report.precision * 100:.2f}% "
          f"recall={report.recall * 100:.2f}% accuracy={report.accuracy * 100:.2f}%")
    print(f"model -> {out}")
    _write_snapshot(args, Path(args.out_dir))
    return 0


def cmd_cv(args):
    ds = _dataset_from_flag(args.dataset)
    plan = SplitPlan(kind="stratified_kfold", fractions=(0.9, 0.1, 0.0),
                     fold_count=args.folds, seed=args.seed)
    if args.guide == "dt":
        pipeline = lambda train: dc_fit(train).ruleset
    else:
        spec = _spec_for(ds, args.mode)
        grid = GridParams(cell_width=args.cell, cell_height=args.cell,
                          coverage_fraction=args.coverage, purity_threshold=args.purity)
        pipeline = lambda train: bc_fit(train, spec, grid)
    report = cross_validate(ds, pipeline, plan)
    print(report.render_text())
    hits = report.class_hit_folds(ds.classes)
    print("folds with >=1 correct test case per class:", hits)
    _write_snapshot(args, Path(args.out_dir))
    return 0


def cmd_explain(args):
    ds = _dataset_from_flag(args.dataset)
    ruleset = RuleSet.from_json(Path(args.rules).read_text())
    point = tuple(float(v) for v in args.point.split(","))
    request = ExplanationRequest(point=point, predictor=ruleset,
                                 purity_threshold=args.purity,
                                 initial_resolution=args.resolution,
                                 decrement=args.decrement,
                                 min_resolution=args.floor)
    result = explain_local(request, ds, ruleset.projection)
    print(json.dumps(result.payload(ruleset.projection, point), indent=1))
    if args.plot:
        plot_explanation(result, ruleset.projection, point, args.plot)
        print(f"plot -> {args.plot}")
    _write_snapshot(args, Path(args.out_dir))
    return 0


def cmd_reproduce(args):
    ok = repro.run_target(args.target)
    _write_snapshot(args, Path(args.out_dir))
    return 0 if ok else 1


def cmd_serve(args):
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(log_dir=args.log_dir), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ilcbox",
                                     description="2-D box/interval machine learning in lossless in-line coordinates")
    parser.add_argument("--out-dir", default="runs", help="where config snapshots land")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read a CSV into a dataset snapshot")
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", type=int, default=-1)
    p.add_argument("--skip-column", type=int, action="append", default=[])
    p.add_argument("--header", action="store_true")
    p.add_argument("--missing-marker", default="?")
    p.add_argument("--missing-policy", choices=("drop_row", "error"), default="drop_row")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("project", help="emit polylines (and optionally a plot)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", default="ilc2_partial_dynamic")
    p.add_argument("--mirror", choices=("none", "by_class"), default="none")
    p.add_argument("--out")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("fit", help="fit box rules (grid search or DT-guided)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", default="ilc2_partial_dynamic")
    p.add_argument("--guide", choices=("none", "dt"), default="none")
    p.add_argument("--cell", type=float, default=0.5)
    p.add_argument("--coverage", type=float, default=0.1)
    p.add_argument("--purity", type=float, default=1.0)
    p.add_argument("--max-rules", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("prune", help="prune mini rules")
    p.add_argument("--rules", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--min-cases", type=int, required=True)
    p.add_argument("--mode", choices=("refuse", "associate"), default="refuse")
    p.add_argument("--out")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("join", help="join rules into unions and else branches")
    p.add_argument("--rules", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_join)

    p = sub.add_parser("eval", help="evaluate a rule file on a dataset")
    p.add_argument("--rules", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fit-linear", help="fit a projection-line threshold model, "
                                          "optionally on a rule file's refusals")
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", default="ilc2_fully_dynamic")
    p.add_argument("--form", choices=("one_sided", "two_sided"), default="one_sided")
    p.add_argument("--positive-class", required=True)
    p.add_argument("--min-recall", type=float, default=0.5)
    p.add_argument("--rules", help="existing rule file; fit only on its refusals")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_linear)

    p = sub.add_parser("cv", help="stratified k-fold cross validation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--guide", choices=("none", "dt"), default="dt")
    p.add_argument("--mode", default="ilc2_partial_dynamic")
    p.add_argument("--cell", type=float, default=0.5)
    p.add_argument("--coverage", type=float, default=0.1)
    p.add_argument("--purity", type=float, default=1.0)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("explain", help="explain one point against a rule file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--point", required=True, help="comma separated values")
    p.add_argument("--purity", type=float, default=1.0)
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--decrement", type=float, default=0.25)
    p.add_argument("--floor", type=float, default=0.25)
    p.add_argument("--plot")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("reproduce", help="check a published-result target")
    p.add_argument("target", choices=sorted(repro.TARGETS))
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--log-dir", default="runs/sessions",
                   help="per-session append-only action logs")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
