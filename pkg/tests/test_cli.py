import json
import os

import numpy as np
import pytest

from brainet.cli import main


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    assert main(["synth", "--preset", "demo", "--out", str(out / "cohort")]) == 0
    return out


@pytest.fixture(scope="module")
def run_dir(demo_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rc = main(["run", "--config", str(demo_dir / "cohort" / "pipeline_config.json"), "--out", str(out)])
    assert rc == 0
    return out


class TestSynthCommand:
    def test_emits_cohort_files(self, demo_dir):
        for name in ("cohort.csv", "schema.json", "truth.json", "pipeline_config.json"):
            assert (demo_dir / "cohort" / name).exists()

    def test_spec_file_mode(self, tmp_path):
        spec = {"n_per_group": 20, "blocks": [{"member_count": 2, "rho_case": 0.5, "rho_control": 0.5}],
                "noise_features": 1, "seed": 3}
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        assert main(["synth", "--spec", str(spec_path), "--out", str(tmp_path / "c")]) == 0
        assert (tmp_path / "c" / "cohort.csv").exists()

    def test_preset_and_spec_conflict(self, tmp_path):
        assert main(["synth", "--preset", "demo", "--spec", "x.json", "--out", str(tmp_path)]) == 2


class TestPreprocessSelectTrainExplain:
    def test_stage_chain(self, demo_dir, tmp_path):
        cohort = demo_dir / "cohort"
        pre = tmp_path / "pre"
        assert main(["preprocess", "--input", str(cohort / "cohort.csv"),
                     "--schema", str(cohort / "schema.json"), "--out", str(pre)]) == 0
        assert (pre / "matrix.csv").exists() and (pre / "matrix_norm.json").exists()

        sel = tmp_path / "sel"
        assert main(["select", "--matrix", str(pre / "matrix.csv"), "--m", "5", "--out", str(sel)]) == 0
        doc = json.loads((sel / "mrmr.json").read_text())
        assert len(doc["order"]) == 5
        assert (sel / "mrmr_rank.csv").read_text().splitlines()[0] == "rank,feature,gain"

        model_path = tmp_path / "model.json"
        assert main(["train", "--matrix", str(pre / "matrix.csv"), "--kind", "gradient_boosted_trees",
                     "--params", '{"rounds": 10, "max_depth": 2, "learning_rate": 0.3}',
                     "--out", str(model_path)]) == 0
        assert model_path.exists()

        exp = tmp_path / "explain"
        assert main(["explain", "--matrix", str(pre / "matrix.csv"), "--models", str(model_path),
                     "--estimator", "sampled", "--n-coalitions", "40", "--background-size", "15",
                     "--top-n", "6", "--exclude", "bio_011", "--out", str(exp)]) == 0
        pool = json.loads((exp / "pool.json").read_text())
        assert "bio_011" not in pool["pool"]
        assert (exp / "importance_gradient_boosted_trees.csv").exists()

    def test_train_with_grid(self, demo_dir, tmp_path):
        cohort = demo_dir / "cohort"
        pre = tmp_path / "pre"
        main(["preprocess", "--input", str(cohort / "cohort.csv"),
              "--schema", str(cohort / "schema.json"), "--out", str(pre)])
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"lambda": [0.01, 0.1], "l1_ratio": [0.5]}))
        out = tmp_path / "enet.json"
        assert main(["train", "--matrix", str(pre / "matrix.csv"), "--kind", "elastic_net_logistic",
                     "--grid", str(grid), "--folds", "3", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["hyperparameters"]["lambda"] in (0.01, 0.1)


class TestGraphCompare:
    def test_graph_subcommand_on_correlation_csv(self, run_dir, tmp_path):
        out = tmp_path / "g"
        assert main(["graph", "--corr", str(run_dir / "corr_combined.csv"),
                     "--alpha", "0.45", "--mode", "signed", "--out", str(out)]) == 0
        for fmt in ("json", "dot", "graphml"):
            assert (out / f"graph_combined.{fmt}").exists()

    def test_compare_subcommand(self, run_dir, tmp_path):
        out = tmp_path / "cmp"
        assert main(["compare", str(run_dir / "graph_case.json"),
                     str(run_dir / "graph_control.json"), "--out", str(out)]) == 0
        table = (out / "degree_table.csv").read_text().splitlines()
        assert table[0] == "name,degree_case,degree_control,present_only_in_case"
        assert len(table) > 1
        diff = json.loads((out / "diff.json").read_text())
        assert "edges_lost" in diff


class TestRunAndReport:
    def test_outputs_complete(self, run_dir):
        expected = [
            "matrix.csv", "matrix_norm.json", "mrmr.json", "mrmr_rank.csv",
            "metrics.csv", "summary.json", "pool.json",
            "importance_elastic_net_logistic.csv", "importance_gradient_boosted_trees.csv",
            "importance_shallow_mlp.csv", "importance_pooled.csv",
            "corr_combined.csv", "corr_case.csv", "corr_control.csv",
            "degree_table.csv", "degree_distribution.csv", "diff.json",
            "components.json", "manifest.json",
        ] + [f"graph_{g}.{f}" for g in ("combined", "case", "control") for f in ("json", "dot", "graphml")]
        for name in expected:
            assert (run_dir / name).exists(), name

    def test_manifest_records_checksums(self, run_dir):
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["outputs"]
        assert all(len(v) == 64 for v in manifest["outputs"].values())
        assert manifest["config_sha256"]

    def test_excluded_confounds_absent_from_graphs(self, run_dir):
        pool = json.loads((run_dir / "pool.json").read_text())
        assert pool["excluded"] == ["bio_011", "bio_012"]
        g = json.loads((run_dir / "graph_combined.json").read_text())
        assert not set(g["nodes"]) & {"bio_011", "bio_012"}

    def test_report_renders_markdown_and_figures(self, run_dir, tmp_path):
        out = tmp_path / "rep"
        assert main(["report", "--run", str(run_dir), "--out", str(out)]) == 0
        assert (out / "report.md").exists()
        assert (out / "metrics_boxplot.png").stat().st_size > 1000
        assert (out / "degree_distribution.png").stat().st_size > 1000
        text = (out / "report.md").read_text()
        assert "## Classification metrics" in text and "## Network structure" in text

    def test_flag_overrides_config(self, demo_dir, tmp_path):
        out = tmp_path / "run99"
        rc = main(["run", "--config", str(demo_dir / "cohort" / "pipeline_config.json"),
                   "--out", str(out), "--alpha", "0.99", "--iterations", "2"])
        assert rc == 0
        g = json.loads((out / "graph_combined.json").read_text())
        assert g["alpha"] == 0.99 and g["edges"] == []  # empty graphs still export

    def test_env_var_jobs_fallback(self, demo_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("BRAINET_JOBS", "2")
        out = tmp_path / "runenv"
        rc = main(["run", "--config", str(demo_dir / "cohort" / "pipeline_config.json"),
                   "--out", str(out), "--iterations", "2"])
        assert rc == 0


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_data_error_is_3(self, tmp_path):
        csv_path = tmp_path / "d.csv"
        csv_path.write_text("a,y\nfoo,0\n")
        schema_path = tmp_path / "s.json"
        schema_path.write_text(json.dumps([{"name": "a", "kind": "continuous"}, {"name": "y", "kind": "label"}]))
        assert main(["preprocess", "--input", str(csv_path), "--schema", str(schema_path),
                     "--out", str(tmp_path / "o")]) == 3

    def test_missing_run_dir_is_data_error(self, tmp_path):
        assert main(["report", "--run", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 3

    def test_io_error_is_5(self, tmp_path):
        assert main(["graph", "--corr", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 5

    def test_partial_outputs_on_failure(self, demo_dir, tmp_path):
        cfg = json.loads((demo_dir / "cohort" / "pipeline_config.json").read_text())
        cfg["evaluation"]["folds"] = 50  # unstratifiable -> bootstrap stage fails
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "broken"
        rc = main(["run", "--config", str(cfg_path), "--out", str(out)])
        assert rc == 3
        assert (out / "partial" / "matrix.csv").exists()
        assert not (out / "manifest.json").exists()
