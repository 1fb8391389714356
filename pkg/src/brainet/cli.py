"""Command-line interface.

Subcommands mirror the pipeline stages (preprocess, select, train, explain,
graph, compare, synth, report) and `run` executes the whole pipeline from a
JSON config. Flag precedence is flags > config > defaults; BRAINET_JOBS is
the fallback for --jobs.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure,
5 I/O failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import feature_select, graph as graph_mod, pipeline, report as report_mod, synth
from .attribution import SelectionConfig, aggregate_importance, attribute_test_rows, select_pool
from .errors import BrainetError, ConfigError, DataError, NumericError
from .models import ModelConfig, load_model, save_model
from .models.grid_search import HyperparameterGrid, grid_search_cv, train_model
from .preprocess import load_matrix, load_schema, parse_csv, preprocess, save_matrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


def _jobs_default() -> int:
    env = os.environ.get("BRAINET_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"BRAINET_JOBS must be an integer, got {env!r}") from None
    return 1


def _add_run(sub):
    p = sub.add_parser("run", help="execute the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides config.paths.output_dir)")
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--jobs", type=int, help="parallel bootstrap workers")
    p.add_argument("--alpha", type=float, help="override graph.alpha")
    p.add_argument("--mode", choices=("signed", "absolute"), help="override graph.mode")
    p.add_argument("--top-n", type=int, help="override attribution.top_n")
    p.add_argument("--iterations", type=int, help="override evaluation.B")
    p.add_argument("--estimator", choices=("exact", "sampled"), help="override attribution.estimator")


def _add_preprocess(sub):
    p = sub.add_parser("preprocess", help="clean a cohort CSV into a normalized matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k-impute", type=int, default=5)


def _add_select(sub):
    p = sub.add_parser("select", help="rank features by quotient-form greedy selection")
    p.add_argument("--matrix", required=True, help="matrix CSV from preprocess")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", required=True)


def _add_train(sub):
    p = sub.add_parser("train", help="train one model, optionally tuning on a grid")
    p.add_argument("--matrix", required=True)
    p.add_argument("--kind", required=True, choices=("elastic_net_logistic", "gradient_boosted_trees", "shallow_mlp"))
    p.add_argument("--params", help="JSON object of hyperparameters")
    p.add_argument("--grid", help="JSON file mapping axis name to value list")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON path")


def _add_explain(sub):
    p = sub.add_parser("explain", help="Shapley importance tables for trained models")
    p.add_argument("--matrix", required=True)
    p.add_argument("--models", nargs="+", required=True, help="model JSON paths")
    p.add_argument("--estimator", choices=("exact", "sampled"), default="exact")
    p.add_argument("--n-coalitions", type=int)
    p.add_argument("--background-size", type=int, default=100)
    p.add_argument("--top-n", type=int, default=30)
    p.add_argument("--exclude", nargs="*", default=[], help="name patterns to drop from the pool")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")


def _add_graph(sub):
    p = sub.add_parser("graph", help="threshold a correlation CSV into a graph")
    p.add_argument("--corr", required=True, help="correlation CSV with header row/column")
    p.add_argument("--alpha", type=float, default=0.45)
    p.add_argument("--mode", choices=("signed", "absolute"), default="signed")
    p.add_argument("--group", choices=("combined", "case", "control"), default="combined")
    p.add_argument("--formats", default="json,dot,graphml")
    p.add_argument("--out", required=True, help="output directory")


def _add_compare(sub):
    p = sub.add_parser("compare", help="degree table and diff of two graph JSON files")
    p.add_argument("case", help="case graph JSON")
    p.add_argument("control", help="control graph JSON")
    p.add_argument("--out", required=True, help="output directory")


def _add_synth(sub):
    p = sub.add_parser("synth", help="generate a ground-truth cohort")
    p.add_argument("--preset", choices=sorted(synth.PRESETS))
    p.add_argument("--spec", help="JSON spec file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")


def _add_report(sub):
    p = sub.add_parser("report", help="render a run directory to markdown + figures")
    p.add_argument("--run", required=True, help="pipeline output directory")
    p.add_argument("--out", help="report directory (defaults to the run directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brainet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_run, _add_preprocess, _add_select, _add_train, _add_explain,
                _add_graph, _add_compare, _add_synth, _add_report):
        add(sub)
    return parser


def _cmd_run(args) -> int:
    cfg = pipeline.load_config(args.config)
    if args.seed is not None:
        cfg["base_seed"] = args.seed
    if args.alpha is not None:
        cfg["graph"]["alpha"] = args.alpha
    if args.mode is not None:
        cfg["graph"]["mode"] = args.mode
    if args.top_n is not None:
        cfg["attribution"]["top_n"] = args.top_n
    if args.iterations is not None:
        cfg["evaluation"]["B"] = args.iterations
    if args.estimator is not None:
        cfg["attribution"]["estimator"] = args.estimator
    jobs = args.jobs if args.jobs is not None else _jobs_default()
    out = pipeline.run_pipeline(cfg, out_dir=args.out, jobs=jobs)
    print(f"pipeline complete: {out}")
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    schema = load_schema(args.schema)
    table = parse_csv(args.input, schema)
    matrix = preprocess(table, k=args.k_impute)
    os.makedirs(args.out, exist_ok=True)
    save_matrix(matrix, os.path.join(args.out, "matrix.csv"), os.path.join(args.out, "matrix_norm.json"))
    print(f"wrote matrix.csv ({matrix.values.shape[0]} x {matrix.values.shape[1]}) to {args.out}")
    return EXIT_OK


def _cmd_select(args) -> int:
    matrix = load_matrix(args.matrix)
    result = feature_select.mrmr_select(matrix, args.m, bins=args.bins)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "mrmr.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "order": list(result.order),
                "names": [matrix.feature_names[i] for i in result.order],
                "gains": list(result.gains),
                "relevance": list(result.relevance_cache),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    with open(os.path.join(args.out, "mrmr_rank.csv"), "w", encoding="utf-8") as fh:
        fh.write("rank,feature,gain\n")
        for r, (i, gain) in enumerate(zip(result.order, result.gains)):
            fh.write(f"{r + 1},{matrix.feature_names[i]},{gain!r}\n")
    print(f"selected {len(result.order)} features; first: {matrix.feature_names[result.order[0]]}")
    return EXIT_OK


def _cmd_train(args) -> int:
    matrix = load_matrix(args.matrix)
    params = json.loads(args.params) if args.params else {}
    if args.grid:
        with open(args.grid, "r", encoding="utf-8") as fh:
            axes = json.load(fh)
        config = grid_search_cv(matrix, args.kind, HyperparameterGrid(axes=axes), args.folds, args.seed)
    else:
        config = ModelConfig(kind=args.kind, hyperparameters=params, seed=args.seed)
    model = train_model(matrix, config)
    save_model(model, args.out)
    report = model.training_report
    print(
        f"trained {args.kind}: converged={report.converged} iterations={report.iterations} "
        f"final_loss={report.final_loss:.6f} -> {args.out}"
    )
    return EXIT_OK


def _cmd_explain(args) -> int:
    matrix = load_matrix(args.matrix)
    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    size = min(args.background_size, matrix.values.shape[0])
    background = matrix.values[rng.choice(matrix.values.shape[0], size=size, replace=False)]
    aggregates = []
    kinds = []
    for path in args.models:
        model = load_model(path)
        attr = attribute_test_rows(
            model,
            matrix.values,
            background,
            estimator=args.estimator,
            n_coalitions=args.n_coalitions,
            seed=args.seed,
            feature_names=matrix.feature_names,
        )
        agg = aggregate_importance([attr])
        aggregates.append(agg)
        kinds.append(model.config.kind)
        table = os.path.join(args.out, f"importance_{model.config.kind}.csv")
        with open(table, "w", encoding="utf-8") as fh:
            fh.write("feature,score\n")
            for name, score in zip(matrix.feature_names, agg.scores):
                fh.write(f"{name},{float(score)!r}\n")
    cfg = SelectionConfig(
        top_n=min(args.top_n, len(matrix.feature_names)),
        exclusion_patterns=tuple(args.exclude),
    )
    pool, per_model_top, excluded = select_pool(aggregates, matrix.feature_names, cfg)
    with open(os.path.join(args.out, "pool.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "pool": pool,
                "per_model_top": {kinds[k]: v for k, v in per_model_top.items()},
                "excluded": excluded,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"pool of {len(pool)} biomarkers ({len(excluded)} excluded) -> {args.out}")
    return EXIT_OK


def _cmd_graph(args) -> int:
    corr = pipeline.read_correlation_csv(args.corr)
    g = graph_mod.prune_isolated(graph_mod.build_graph(corr, args.alpha, args.mode, group_tag=args.group))
    os.makedirs(args.out, exist_ok=True)
    for fmt in args.formats.split(","):
        fmt = fmt.strip()
        graph_mod.export_graph(g, fmt, os.path.join(args.out, f"graph_{args.group}.{fmt}"))
    comp = graph_mod.connected_components(g)
    print(
        f"graph {args.group}: {len(g.nodes)} nodes, {len(g.edges)} edges, "
        f"{len(comp.sizes)} components {list(comp.sizes)}"
    )
    return EXIT_OK


def _cmd_compare(args) -> int:
    case = graph_mod.load_graph_json(args.case)
    control = graph_mod.load_graph_json(args.control)
    rows = graph_mod.degree_table(case, control)
    diff = graph_mod.diff_graphs(case, control)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "degree_table.csv"), "w", encoding="utf-8") as fh:
        fh.write("name,degree_case,degree_control,present_only_in_case\n")
        for r in rows:
            fh.write(f"{r.name},{r.degree_case},{r.degree_control},{r.present_only_in_case}\n")
    with open(os.path.join(args.out, "diff.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "edges_gained": [list(e) for e in diff.edges_gained],
                "edges_lost": [list(e) for e in diff.edges_lost],
                "weight_deltas": [[list(k), d] for k, d in diff.weight_deltas],
                "nodes_gained": list(diff.nodes_gained),
                "nodes_lost": list(diff.nodes_lost),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    only_case = sum(1 for r in rows if r.present_only_in_case)
    print(f"degree table: {len(rows)} biomarkers, {only_case} present only in case -> {args.out}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    if bool(args.preset) == bool(args.spec):
        raise ConfigError("synth: provide exactly one of --preset or --spec")
    if args.preset:
        spec = synth.PRESETS[args.preset]
    else:
        with open(args.spec, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        spec = synth.SynthSpec(
            n_per_group=raw["n_per_group"],
            blocks=tuple(synth.BlockSpec(**b) for b in raw.get("blocks", [])),
            informative=tuple((int(i), float(e)) for i, e in raw.get("informative", [])),
            noise_features=raw.get("noise_features", 0),
            missing_rate=raw.get("missing_rate", 0.0),
            intercept=raw.get("intercept", 0.0),
            seed=raw.get("seed", 0),
        )
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    table, truth = synth.generate_cohort(spec)
    paths = synth.save_cohort(table, truth, args.out)
    if args.preset:
        cfg_path = os.path.join(args.out, "pipeline_config.json")
        with open(cfg_path, "w", encoding="utf-8") as fh:
            json.dump(synth.demo_pipeline_config(paths["cohort"], paths["schema"]), fh, indent=2)
            fh.write("\n")
        print(f"pipeline config -> {cfg_path}")
    print(f"cohort: {table.n_rows} rows, {len(table.columns) - 1} features -> {paths['cohort']}")
    return EXIT_OK


def _cmd_report(args) -> int:
    path = report_mod.render_report(args.run, args.out)
    print(f"report written to {path}")
    return EXIT_OK


_HANDLERS = {
    "run": _cmd_run,
    "preprocess": _cmd_preprocess,
    "select": _cmd_select,
    "train": _cmd_train,
    "explain": _cmd_explain,
    "graph": _cmd_graph,
    "compare": _cmd_compare,
    "synth": _cmd_synth,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"brainet: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"brainet: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"brainet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BrainetError as exc:
        print(f"brainet: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"brainet: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
