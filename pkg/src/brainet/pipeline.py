"""End-to-end pipeline: preprocess -> optional mRMR report -> bootstrapped
multi-model evaluation with attributions -> importance pooling -> per-group
correlation graphs -> structural comparison -> deterministic exports plus a
manifest of config hash, seed, and output checksums.
"""

import csv
import hashlib
import json
import os
import shutil
from dataclasses import dataclass

import numpy as np

from . import feature_select, graph as graph_mod
from .attribution import SelectionConfig, aggregate_importance, select_pool
from .errors import BrainetError, ConfigError
from .evaluation import AttributionSettings, SplitSpec, bootstrap_run
from .models import DEFAULT_GRIDS, MODEL_KINDS, ModelConfig
from .models.grid_search import HyperparameterGrid
from .preprocess import BiomarkerMatrix, load_schema, parse_csv, preprocess, save_matrix
from .stats import correlation_matrix

CONFIG_DEFAULTS = {
    "paths": {"input_csv": None, "schema": None, "output_dir": None},
    "preprocess": {"k_impute": 5},
    "select": {"mrmr_m": None, "bins": 10},
    "models": {"grids": None},  # None -> built-in default grids for every kind
    "attribution": {
        "top_n": 30,
        "exclusion_patterns": [],
        "background_size": 100,
        "estimator": "exact",
        "n_coalitions": None,
    },
    "graph": {"alpha": 0.45, "mode": "signed"},
    "evaluation": {"B": 20, "folds": 5, "test_fraction": 0.2, "hoist_grid_search": False},
    "base_seed": 0,
}

METRIC_FIELDS = ("accuracy", "precision", "recall", "micro_f1", "sensitivity", "specificity", "auc")


def _merge(defaults, override, path="config"):
    if override is None:
        return json.loads(json.dumps(defaults))
    if not isinstance(override, dict):
        raise ConfigError(f"{path}: expected an object")
    out = {}
    for key, default in defaults.items():
        if key in override:
            if isinstance(default, dict) and default:
                out[key] = _merge(default, override[key], f"{path}.{key}")
            else:
                out[key] = override[key]
        else:
            out[key] = json.loads(json.dumps(default))
    unknown = set(override) - set(defaults)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return out


def resolve_config(raw: dict | None) -> dict:
    """Apply defaults and validate ranges; returns the fully resolved config."""
    cfg = _merge(CONFIG_DEFAULTS, raw or {})
    if not 0.0 < cfg["graph"]["alpha"] < 1.0:
        raise ConfigError("graph.alpha must be in (0, 1)")
    if cfg["graph"]["mode"] not in ("signed", "absolute"):
        raise ConfigError("graph.mode must be 'signed' or 'absolute'")
    if cfg["attribution"]["estimator"] not in ("exact", "sampled"):
        raise ConfigError("attribution.estimator must be 'exact' or 'sampled'")
    if cfg["evaluation"]["B"] < 1:
        raise ConfigError("evaluation.B must be >= 1")
    if not 0.0 < cfg["evaluation"]["test_fraction"] < 1.0:
        raise ConfigError("evaluation.test_fraction must be in (0, 1)")
    if cfg["preprocess"]["k_impute"] < 1:
        raise ConfigError("preprocess.k_impute must be >= 1")
    grids = cfg["models"]["grids"]
    if grids is not None:
        unknown = set(grids) - set(MODEL_KINDS)
        if unknown:
            raise ConfigError(f"models.grids: unknown kinds {sorted(unknown)}")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return resolve_config(raw)


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    return repr(float(value))


@dataclass
class _Outputs:
    out_dir: str
    files: list

    def path(self, name: str) -> str:
        self.files.append(name)
        return os.path.join(self.out_dir, name)


def write_correlation_csv(path, corr) -> None:
    rows = [[name] + [_fmt(v) for v in corr.r[i]] for i, name in enumerate(corr.names)]
    _write_csv(path, [""] + list(corr.names), rows)


def read_correlation_csv(path):
    from .stats import CorrelationMatrix

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = tuple(header[1:])
        rows = []
        for record in reader:
            rows.append([float(v) for v in record[1:]])
    return CorrelationMatrix(names=names, r=np.array(rows))


def _metrics_rows(result):
    rows = []
    for kind in sorted(result.metrics):
        for b, report in enumerate(result.metrics[kind]):
            (tn, fp), (fn, tp) = report.confusion
            rows.append(
                [b, kind]
                + [_fmt(getattr(report, f)) for f in METRIC_FIELDS]
                + [tn, fp, fn, tp]
            )
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def _summarize(result) -> dict:
    summary = {}
    for kind, reports in result.metrics.items():
        summary[kind] = {}
        for fieldname in METRIC_FIELDS:
            vals = np.array([getattr(r, fieldname) for r in reports])
            summary[kind][fieldname] = {
                "median": float(np.median(vals)),
                "q1": float(np.percentile(vals, 25)),
                "q3": float(np.percentile(vals, 75)),
            }
    return summary


def _constant_free(matrix_values, names):
    keep = [name for name, col in zip(names, matrix_values.T) if col.std() > 0.0]
    dropped = [name for name in names if name not in keep]
    return keep, dropped


def run_pipeline(cfg: dict, out_dir=None, jobs: int = 1) -> str:
    """Execute every stage; returns the output directory. On failure the
    outputs written so far move to <out_dir>/partial and the error is
    re-raised with the stage name attached."""
    cfg = resolve_config(cfg)
    paths = cfg["paths"]
    if not paths.get("input_csv") or not paths.get("schema"):
        raise ConfigError("config.paths must provide input_csv and schema")
    out_dir = out_dir or paths.get("output_dir")
    if not out_dir:
        raise ConfigError("no output directory: set config.paths.output_dir or pass --out")
    os.makedirs(out_dir, exist_ok=True)
    outputs = _Outputs(out_dir=out_dir, files=[])
    stages_done = []
    stage = "preprocess"
    try:
        schema = load_schema(paths["schema"])
        table = parse_csv(paths["input_csv"], schema)
        matrix = preprocess(table, k=cfg["preprocess"]["k_impute"])
        save_matrix(matrix, outputs.path("matrix.csv"), outputs.path("matrix_norm.json"))
        stages_done.append(stage)

        stage = "select"
        if cfg["select"]["mrmr_m"]:
            result = feature_select.mrmr_select(matrix, cfg["select"]["mrmr_m"], bins=cfg["select"]["bins"])
            with open(outputs.path("mrmr.json"), "w", encoding="utf-8") as fh:
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
            _write_csv(
                outputs.path("mrmr_rank.csv"),
                ["rank", "feature", "gain"],
                [[r + 1, matrix.feature_names[i], _fmt(gain)] for r, (i, gain) in enumerate(zip(result.order, result.gains))],
            )
            stages_done.append(stage)

        stage = "bootstrap"
        grids_cfg = cfg["models"]["grids"]
        grids = {
            kind: HyperparameterGrid(axes=dict(axes))
            for kind, axes in (grids_cfg or DEFAULT_GRIDS).items()
        }
        configs = [ModelConfig(kind=kind, hyperparameters={}, seed=cfg["base_seed"]) for kind in MODEL_KINDS]
        spec = SplitSpec(
            test_fraction=cfg["evaluation"]["test_fraction"],
            folds=cfg["evaluation"]["folds"],
            bootstrap_iterations=cfg["evaluation"]["B"],
            base_seed=cfg["base_seed"],
        )
        attribution_settings = AttributionSettings(
            estimator=cfg["attribution"]["estimator"],
            n_coalitions=cfg["attribution"]["n_coalitions"],
            background_size=cfg["attribution"]["background_size"],
        )
        result = bootstrap_run(
            matrix,
            configs,
            spec,
            grids=grids,
            attribution=attribution_settings,
            hoist_grid_search=cfg["evaluation"]["hoist_grid_search"],
            jobs=jobs,
        )
        _write_csv(
            outputs.path("metrics.csv"),
            ["iteration", "model"] + list(METRIC_FIELDS) + ["tn", "fp", "fn", "tp"],
            _metrics_rows(result),
        )
        with open(outputs.path("summary.json"), "w", encoding="utf-8") as fh:
            json.dump(_summarize(result), fh, indent=2, sort_keys=True)
            fh.write("\n")
        stages_done.append(stage)

        stage = "importance"
        per_model_aggregates = []
        for kind in MODEL_KINDS:
            agg = aggregate_importance(result.attributions[kind])
            per_model_aggregates.append(agg)
            _write_csv(
                outputs.path(f"importance_{kind}.csv"),
                ["feature", "score"],
                [[name, _fmt(s)] for name, s in zip(matrix.feature_names, agg.scores)],
            )
        pooled = aggregate_importance([a for kind in MODEL_KINDS for a in result.attributions[kind]])
        _write_csv(
            outputs.path("importance_pooled.csv"),
            ["feature", "score"],
            [[name, _fmt(s)] for name, s in zip(matrix.feature_names, pooled.scores)],
        )
        selection = SelectionConfig(
            top_n=min(cfg["attribution"]["top_n"], len(matrix.feature_names)),
            exclusion_patterns=tuple(cfg["attribution"]["exclusion_patterns"]),
        )
        pool, per_model_top, excluded = select_pool(per_model_aggregates, matrix.feature_names, selection)
        with open(outputs.path("pool.json"), "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "pool": pool,
                    "per_model_top": {kind: per_model_top[k] for k, kind in enumerate(MODEL_KINDS)},
                    "excluded": excluded,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        stages_done.append(stage)

        stage = "graph"
        groups = {
            "combined": np.ones(matrix.values.shape[0], dtype=bool),
            "case": matrix.labels == 1,
            "control": matrix.labels == 0,
        }
        graphs = {}
        components_doc = {}
        distribution_rows = []
        for group, mask in groups.items():
            sub_values = matrix.values[mask]
            index = {name: i for i, name in enumerate(matrix.feature_names)}
            keep, dropped = _constant_free(sub_values[:, [index[n] for n in pool]], pool)
            sub_matrix = BiomarkerMatrix(
                feature_names=tuple(keep),
                values=sub_values[:, [index[n] for n in keep]],
                labels=matrix.labels[mask],
                normalization=None,
            )
            corr = correlation_matrix(sub_matrix, keep)
            write_correlation_csv(outputs.path(f"corr_{group}.csv"), corr)
            g = graph_mod.prune_isolated(
                graph_mod.build_graph(corr, cfg["graph"]["alpha"], cfg["graph"]["mode"], group_tag=group)
            )
            graphs[group] = g
            for fmt in ("json", "dot", "graphml"):
                graph_mod.export_graph(g, fmt, outputs.path(f"graph_{group}.{fmt}"))
            comp = graph_mod.connected_components(g)
            components_doc[group] = {
                "sizes": list(comp.sizes),
                "members": [[g.nodes[i] for i in c] for c in comp.components],
                "dropped_constant": dropped,
            }
            for degree, count in graph_mod.degree_distribution(g).items():
                distribution_rows.append([group, degree, count])
        with open(outputs.path("components.json"), "w", encoding="utf-8") as fh:
            json.dump(components_doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_csv(
            outputs.path("degree_distribution.csv"),
            ["group", "degree", "count"],
            distribution_rows,
        )
        rows = graph_mod.degree_table(graphs["case"], graphs["control"])
        _write_csv(
            outputs.path("degree_table.csv"),
            ["name", "degree_case", "degree_control", "present_only_in_case"],
            [[r.name, r.degree_case, r.degree_control, r.present_only_in_case] for r in rows],
        )
        diff = graph_mod.diff_graphs(graphs["case"], graphs["control"])
        with open(outputs.path("diff.json"), "w", encoding="utf-8") as fh:
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
        stages_done.append(stage)

        stage = "manifest"
        manifest = {
            "config": cfg,
            "config_sha256": config_hash(cfg),
            "base_seed": cfg["base_seed"],
            "stages": stages_done,
            "outputs": {name: _sha256(os.path.join(out_dir, name)) for name in sorted(outputs.files)},
        }
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return out_dir
    except BrainetError as exc:
        partial = os.path.join(out_dir, "partial")
        os.makedirs(partial, exist_ok=True)
        for name in outputs.files:
            src = os.path.join(out_dir, name)
            if os.path.exists(src):
                shutil.move(src, os.path.join(partial, name))
        raise type(exc)(f"stage {stage}: {exc}") from exc
