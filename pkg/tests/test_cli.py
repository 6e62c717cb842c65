import json

import pytest

from skewlab.cli import main
from skewlab.config import ExperimentConfig, build_family, build_skew_product
from skewlab.errors import ConfigError


class TestConfig:
    def test_defaults_roundtrip(self):
        cfg = ExperimentConfig()
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg
        assert ExperimentConfig.from_json(cfg.to_json()) == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            ExperimentConfig.from_dict({"scenario": "certify", "bogus": 1})

    def test_nested_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            ExperimentConfig.from_dict({"quad": {"wat": 2}})

    def test_invalid_scenario(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"scenario": "frobnicate"})

    def test_tolerances_positive(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"tolerances": {"scan_tol": 0.0}})

    def test_budgets_capped(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"ergodic": {"n": 10**9}})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"classify": {"K": 10**7}})

    def test_bad_json_diagnostic(self):
        with pytest.raises(ConfigError, match="line"):
            ExperimentConfig.from_json("{not json")

    def test_family_builders(self):
        for kind in ("identity", "translation", "lewowicz_constant"):
            fam = build_family(ExperimentConfig.from_dict({"family": {"kind": kind}}).family)
            assert fam.descriptor()["kind"] == "constant"
        cfg = ExperimentConfig.from_dict({"family": {
            "kind": "rotation_field", "base_value": [0.0, 0.0],
            "bumps": [{"center": [0.3, 0.7], "inner": 0.05, "outer": 0.15,
                       "amplitude": [0.2, 0.0]}]}})
        assert build_family(cfg.family).descriptor()["kind"] == "rotation"

    def test_base_power(self):
        cfg = ExperimentConfig.from_dict({"base": {"power": 3}})
        sp = build_skew_product(cfg)
        assert sp.base.lambda_u == pytest.approx(((3 + 5**0.5) / 2) ** 3, rel=1e-12)


def run_cli(tmp_path, *args):
    return main(["--out", str(tmp_path), *args])


class TestScenarios:
    def test_certify(self, tmp_path):
        assert run_cli(tmp_path, "certify") == 0
        summary = json.loads((tmp_path / "certify_summary.json").read_text())
        assert summary["result"]["estimates"]["dominated"] is True
        assert (tmp_path / "certify.csv").read_text().startswith("lambda_s,")

    def test_holonomy(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "family": {"kind": "rotation_field",
                       "bumps": [{"center": [0.31, 0.64], "inner": 0.07,
                                  "outer": 0.22, "amplitude": [0.2, -0.1]}]},
            "quad": {"x": [0.13, 0.41]}}))
        assert run_cli(tmp_path, "--config", str(cfg), "holonomy") == 0
        summary = json.loads((tmp_path / "holonomy_summary.json").read_text())
        assert summary["result"]["truncation_n"] <= 40
        assert "cauchy_increment" in (tmp_path / "holonomy.csv").read_text()

    def test_sweep_reports_elliptic_window(self, tmp_path):
        assert run_cli(tmp_path, "sweep") == 0
        summary = json.loads((tmp_path / "sweep_summary.json").read_text())
        assert summary["result"]["elliptic_window"] == ["3/2", "3", "49/10"]

    def test_pbb(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"pbb": {"instances": 8}}))
        assert run_cli(tmp_path, "--config", str(cfg), "pbb") == 0
        summary = json.loads((tmp_path / "pbb_summary.json").read_text())
        assert summary["result"]["search_exhausted"] == 0
        assert summary["result"]["all_verified"] is True

    def test_ergodic_small(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"ergodic": {"n": 2000, "m_ics": 10}}))
        assert run_cli(tmp_path, "--config", str(cfg), "ergodic") == 0
        summary = json.loads((tmp_path / "ergodic_summary.json").read_text())
        assert summary["result"]["verdict"] == "NON-ERGODIC-LIKE"

    def test_classify_trivial_system(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"classify": {"n_seeds": 6, "K": 100,
                                                "word_length": 6}}))
        assert run_cli(tmp_path, "--config", str(cfg), "classify") == 0
        summary = json.loads((tmp_path / "classify_summary.json").read_text())
        assert summary["result"]["verdict_counts"] == {"Trivial": 6}
        header = (tmp_path / "classify.csv").read_text().splitlines()[0]
        assert header == "seed_u,seed_v,verdict,diameter,dim_estimate,n_points"

    def test_malformed_config_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"scenario\": ")
        assert main(["--config", str(bad), "--out", str(tmp_path), "certify"]) == 1
        assert "config error" in capsys.readouterr().err

    def test_unknown_key_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"nope": 1}))
        assert main(["--config", str(bad), "--out", str(tmp_path), "certify"]) == 1

    def test_seed_override_and_determinism(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"ergodic": {"n": 500, "m_ics": 5}}))
        out = tmp_path / "run"
        assert main(["--config", str(cfg), "--seed", "9", "--out", str(out),
                     "ergodic"]) == 0
        csv1 = (out / "ergodic.csv").read_bytes()
        s1 = json.loads((out / "ergodic_summary.json").read_text())
        assert main(["--config", str(cfg), "--seed", "9", "--out", str(out),
                     "ergodic"]) == 0
        assert (out / "ergodic.csv").read_bytes() == csv1
        s2 = json.loads((out / "ergodic_summary.json").read_text())
        s1.pop("wall_time_seconds"), s2.pop("wall_time_seconds")
        assert s1 == s2

    def test_thread_count_does_not_change_results(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"classify": {"n_seeds": 5, "K": 80,
                                                "word_length": 5}}))
        out1, out2 = tmp_path / "t1", tmp_path / "t2"
        assert main(["--config", str(cfg), "--threads", "1", "--out", str(out1),
                     "classify"]) == 0
        assert main(["--config", str(cfg), "--threads", "3", "--out", str(out2),
                     "classify"]) == 0
        assert (out1 / "classify.csv").read_bytes() == (out2 / "classify.csv").read_bytes()

    def test_summary_echoes_all_defaults(self, tmp_path):
        assert run_cli(tmp_path, "certify") == 0
        summary = json.loads((tmp_path / "certify_summary.json").read_text())
        assert summary["config"] == ExperimentConfig.from_dict(
            {"scenario": "certify", "out_dir": str(tmp_path)}).to_dict()
        assert "wall_time_seconds" in summary
