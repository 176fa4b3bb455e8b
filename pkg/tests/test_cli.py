"""
Command-line harness: config loading, dispatch, exit codes and report files
"""

import json
import os
import sys

import pandas as pd
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.config import ExperimentConfig, apply_overrides, load_config, parse_config
from app.core.exceptions import ConfigError
from app.experiments.base_experiment import BaseExperiment
from app.experiments.registry import experiment_registry
from app.main import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main, run


def write_config(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


class TestConfig:
    def test_defaults(self):
        config = load_config()
        assert config.params.z == 0.5
        assert config.ensemble.m == 4

    def test_repo_default_config_is_valid(self):
        root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        config = load_config(os.path.join(root, "configs", "default.json"))
        assert config.chain.K == 200
        assert config.verify.grid == "default"

    def test_json_syntax_error_has_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "seed": 1,\n  "params": {"z": }\n}', encoding="utf-8")
        with pytest.raises(ConfigError, match=r"bad.json:3:\d+"):
            load_config(str(path))

    def test_field_errors_name_the_path(self):
        with pytest.raises(ConfigError, match="params"):
            parse_config({"params": {"z": 1.5}})
        with pytest.raises(ConfigError, match="unknown_key"):
            parse_config({"unknown_key": 1})
        with pytest.raises(ConfigError, match="ldp"):
            parse_config({"ldp": {"u": 1.0, "v": 2.0}})
        with pytest.raises(ConfigError, match="ensemble"):
            parse_config({"ensemble": {"kind": "both", "m": 3, "k": 4}})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "missing.json"))

    def test_overrides(self):
        config = apply_overrides(ExperimentConfig(), seed=5, out="/tmp/x", threads=3, csv_report=False,
                                 ldp={"u": 2.0, "v": None})
        assert config.seed == 5
        assert config.output.dir == "/tmp/x"
        assert config.threads == 3
        assert not config.output.csv_report
        assert config.ldp.u == 2.0

    def test_resolved_config_ignores_runtime_settings(self):
        a = apply_overrides(ExperimentConfig(), out="/tmp/a", threads=1).resolved()
        b = apply_overrides(ExperimentConfig(), out="/tmp/b", threads=8).resolved()
        assert a == b
        assert "threads" not in a and "dir" not in a["output"]


class TestRegistry:
    def test_subcommands(self):
        assert set(experiment_registry.get_experiment_names()) == {
            "sample", "selfcheck-combinatorics", "ensemble", "boundary", "ldp", "verify", "posterior", "dist-check",
        }

    def test_info(self):
        info = {i["name"]: i for i in experiment_registry.get_experiments_info()}
        assert "properties" in info["verify"]["options"]

    def test_unknown_subcommand(self):
        assert run("plot", ExperimentConfig()) == EXIT_CONFIG


class TestCommands:
    def test_selfcheck(self, tmp_path):
        assert main(["selfcheck-combinatorics", "--out", str(tmp_path), "--m-max", "6"]) == EXIT_OK
        report = json.loads((tmp_path / "selfcheck_combinatorics.json").read_text())
        assert report["passed"]
        assert report["seed"] == report["config"]["seed"]
        assert all(e["status"] == "pass" for e in report["identities"])
        assert (tmp_path / "selfcheck_combinatorics_identities.csv").exists()

    def test_sample_reports_are_byte_identical(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        args = ["sample", "--seed", "17", "--count", "4", "--method", "urn"]
        assert main(args + ["--out", str(first), "--threads", "1"]) == EXIT_OK
        assert main(args + ["--out", str(second), "--threads", "4"]) == EXIT_OK
        for name in ("sample.json", "sample.jsonl"):
            assert (first / name).read_bytes() == (second / name).read_bytes()
        lines = (first / "sample.jsonl").read_text().splitlines()
        assert len(lines) == 4
        assert json.loads(lines[0])["provenance"] == "urn"

    def test_seed_changes_report(self, tmp_path):
        assert main(["sample", "--seed", "1", "--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(["sample", "--seed", "2", "--out", str(tmp_path / "b")]) == EXIT_OK
        assert (tmp_path / "a" / "sample.jsonl").read_bytes() != (tmp_path / "b" / "sample.jsonl").read_bytes()

    def test_boundary_csv(self, tmp_path):
        config = write_config(tmp_path / "cfg.json", {
            "chain": {"delta": 1000.0, "K": 5},
            "replicas": 4,
            "boundary": {"ensembles": ["height"]},
        })
        assert main(["boundary", "--config", config, "--out", str(tmp_path)]) == EXIT_OK
        frame = pd.read_csv(tmp_path / "boundary_series_height.csv")
        assert list(frame.columns) == ["k", "u_k", "v_k", "w_hat_k", "z_hat_k"]
        assert frame["k"].tolist() == [1, 2, 3, 4, 5]
        report = json.loads((tmp_path / "boundary.json").read_text())
        assert report["inverse_map"]["passed"]

    def test_ldp(self, tmp_path):
        options = {"concentration_replicas": 60, "limit_ks": [1, 100], "limit_replicas": 400}
        config = write_config(tmp_path / "cfg.json", {"ldp": options})
        code = main(["ldp", "--config", config, "--u", "1.0", "--v", "0.6931471805599453", "--out", str(tmp_path)])
        assert code == EXIT_OK
        report = json.loads((tmp_path / "ldp.json").read_text())
        assert report["errors"]["l1_numeric_vs_analytic"] < 1e-8
        assert (tmp_path / "ldp_minimizer.csv").exists()
        assert (tmp_path / "ldp_concentration.csv").exists()
        limit = pd.read_csv(tmp_path / "ldp_kernel_limit.csv")
        assert limit["k"].tolist() == [1, 100]
        assert limit["k_k"].tolist() == [1, 69]
        assert report["kernel_limit"]["kernel"] == "both" and report["kernel_limit"]["converged"]

    def test_verify_small_grid(self, tmp_path):
        config = write_config(tmp_path / "cfg.json", {"verify": {"grid": [[0.5, 1.0]], "size": 200000}})
        assert main(["verify", "--config", config, "--out", str(tmp_path)]) == EXIT_OK
        report = json.loads((tmp_path / "verify.json").read_text())
        assert report["overall_status"] == "pass"
        assert report["components"]["negative_control"]["detected"]

    def test_posterior(self, tmp_path):
        config = write_config(tmp_path / "cfg.json", {
            "posterior": {"rho": 40.0, "K": 40},
            "replicas": 20,
        })
        assert main(["posterior", "--config", config, "--out", str(tmp_path), "--statistic", "sites"]) == EXIT_OK
        for name in ("w", "z"):
            frame = pd.read_csv(tmp_path / f"posterior_checkpoints_{name}.csv")
            assert frame["k"].tolist() == [5, 10, 20, 40]
            assert frame["rho_b"].tolist() == [5.0, 10.0, 20.0, 40.0]
        report = json.loads((tmp_path / "posterior.json").read_text())
        assert report["config"]["posterior"]["rho"] == 40.0
        assert set(report["priors"]) == {"w", "z"}

    def test_posterior_scale_flags(self, tmp_path):
        config = write_config(tmp_path / "cfg.json", {
            "posterior": {"priors": [{"name": "point", "support": [{"z": 0.5, "w": 1.0}]}]},
            "replicas": 3,
        })
        args = ["posterior", "--config", config, "--out", str(tmp_path), "--rho", "16", "--K", "8"]
        assert main(args) == EXIT_OK
        frame = pd.read_csv(tmp_path / "posterior_checkpoints_point.csv")
        assert frame["rho_b"].tolist() == [2.0, 4.0, 8.0, 16.0]
        assert (frame["median_mass_on_truth"] == 1.0).all()

    def test_ensemble(self, tmp_path):
        args = ["ensemble", "--kind", "both", "--m", "4", "--k", "2", "--samples", "3000", "--out", str(tmp_path)]
        assert main(args) == EXIT_OK
        report = json.loads((tmp_path / "ensemble.json").read_text())
        assert report["condition"] == {"kind": "both", "window": {"lo": 0.0, "hi": 1.0}, "m": 4, "k": 2}
        exact = {row["profile"]: row["exact"] for row in report["partition_law"]}
        assert exact["{2:2}"] == "3/11"

    def test_dist_check(self, tmp_path):
        config = write_config(tmp_path / "cfg.json", {"dist_check": {"size": 20000, "alpha": 0.001}})
        assert main(["dist-check", "--config", config, "--out", str(tmp_path), "--no-csv"]) == EXIT_OK
        assert (tmp_path / "dist_check.json").exists()
        assert not (tmp_path / "dist_check_tests.csv").exists()

    def test_no_json(self, tmp_path):
        assert main(["sample", "--out", str(tmp_path), "--no-json"]) == EXIT_OK
        assert not (tmp_path / "sample.json").exists()


class TestExitCodes:
    def test_malformed_config(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{ not json", encoding="utf-8")
        assert main(["sample", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "broken.json:1:" in capsys.readouterr().err

    def test_invalid_field(self, tmp_path):
        config = write_config(tmp_path / "cfg.json", {"params": {"z": 1.5}})
        assert main(["sample", "--config", config, "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_infeasible_flag_value(self, tmp_path):
        assert main(["ldp", "--u", "0.5", "--v", "1.0", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_failed_check(self, tmp_path):
        # a chain too short for the occupied-sites estimate to land within 5%
        config = write_config(tmp_path / "cfg.json", {
            "chain": {"delta": 1.0, "K": 5},
            "replicas": 30,
            "boundary": {"ensembles": ["sites"]},
        })
        assert main(["boundary", "--config", config, "--out", str(tmp_path)]) == EXIT_FAILED
        assert (tmp_path / "boundary.json").exists()

    def test_unexpected_error_is_reported(self, tmp_path, caplog):
        class BrokenExperiment(BaseExperiment):
            def __init__(self):
                super().__init__(name="broken", description="raises a plain RuntimeError")

            def execute(self, config):
                raise RuntimeError("boom")

        experiment_registry.register_experiment(BrokenExperiment())
        try:
            config = apply_overrides(ExperimentConfig(), out=str(tmp_path))
            result = experiment_registry.get_experiment("broken").run(config)
            assert not result["success"]
            assert result["error_type"] == "unexpected"
            assert run("broken", config) == EXIT_FAILED
            assert "boom" in caplog.text
            assert not (tmp_path / "broken.json").exists()
        finally:
            experiment_registry.experiments.pop("broken", None)
