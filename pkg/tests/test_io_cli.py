import json
from pathlib import Path

import numpy as np
import pytest

from jcnl.cli import main
from jcnl.diagnostics import MetricsRecord
from jcnl.experiment import ExperimentConfig, preset_config, run_experiment, summarize_runs
from jcnl.io import (
    METRICS_COLUMNS,
    ParseError,
    ValidationError,
    load_metrics,
    load_scenario,
    save_metrics,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from jcnl.model import NoiseModel, SyntheticConfig, generate_synthetic
from jcnl.scnl import ScnlParams
from jcnl.solver import SolverParams, run_jcnl

FIXTURE = Path(__file__).parent / "fixtures" / "two_node.json"


def _scn(seed=0):
    return generate_synthetic(SyntheticConfig(8, 2, comm_range=0.6, noise=NoiseModel("range", 0.05), seed=seed))


class TestScenarioFiles:
    def test_round_trip(self, tmp_path):
        scn = _scn()
        save_scenario(tmp_path / "s.json", scn)
        back = load_scenario(tmp_path / "s.json")
        assert scenario_to_dict(back) == scenario_to_dict(scn)
        assert back.edge_distances == scn.edge_distances
        assert np.array_equal(back.true_positions, scn.true_positions)

    def test_hand_written_fixture(self):
        scn = load_scenario(FIXTURE)
        assert scn.dimension == 2 and scn.num_nodes == 2
        assert scn.graph.anchor_ids == (1,)
        assert scn.distance(1, 0) == 5.0
        assert scn.target_ranges == {0: 1.0, 1: 4.5}
        assert np.array_equal(scn.anchor_positions[1], [3.0, 4.0])
        assert np.array_equal(scn.true_target, [1.0, 0.0])

    def test_missing_edge_distance_is_validation_error(self):
        data = scenario_to_dict(_scn())
        del data["edges"][0]["distance"]
        with pytest.raises(ValidationError, match="edges\\[0\\]"):
            scenario_from_dict(data)
        data["edges"][0]["distance"] = None
        with pytest.raises(ValidationError):
            scenario_from_dict(data)

    def test_parse_errors(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"dimension": 2,\n "nodes": [}')
        with pytest.raises(ParseError, match="line 2"):
            load_scenario(bad)
        data = json.loads(FIXTURE.read_text())
        data["edges"][0]["distance"] = "far"
        with pytest.raises(ParseError, match="distance"):
            scenario_from_dict(data)
        del data["edges"][0]["j"]
        with pytest.raises(ParseError, match="'j'"):
            scenario_from_dict(data)

    def test_invalid_graph_is_validation_error(self):
        data = json.loads(FIXTURE.read_text())
        data["nodes"][1]["kind"] = "agent"
        with pytest.raises(ValidationError):
            scenario_from_dict(data)

    def test_truth_optional(self):
        data = json.loads(FIXTURE.read_text())
        del data["nodes"][0]["position"]
        del data["target_true"]
        scn = scenario_from_dict(data)
        assert scn.true_positions is None and scn.true_target is None


class TestMetricsFiles:
    def test_empty_trace_header_only(self, tmp_path):
        save_metrics(tmp_path / "m.csv", [])
        assert (tmp_path / "m.csv").read_text() == ",".join(METRICS_COLUMNS) + "\n"

    def test_record_round_trip(self, tmp_path):
        rec = MetricsRecord(3, 0.1 + 0.2, None, 1e-300, 2.5, 0.0, 1 / 3, None, 12345)
        save_metrics(tmp_path / "m.csv", [rec])
        assert load_metrics(tmp_path / "m.csv") == [rec]

    def test_column_order(self, tmp_path):
        res = run_jcnl(_scn(), SolverParams(max_iters=3))
        save_metrics(tmp_path / "m.csv", res.trace)
        header = (tmp_path / "m.csv").read_text().splitlines()[0]
        assert header == "iter,rmse_sensor,rmse_target,S,W,P,G,potential,wall_nanos"

    def test_bad_header(self, tmp_path):
        (tmp_path / "m.csv").write_text("a,b\n")
        with pytest.raises(ParseError):
            load_metrics(tmp_path / "m.csv")


class TestExperiment:
    def test_single_trial_equals_direct_run(self):
        scn = _scn(1)
        params = SolverParams(max_iters=20, seed=4, record_wall_time=False)
        res = run_experiment(ExperimentConfig(scenario=scn, solver=params, base_seed=4))
        direct = run_jcnl(scn, params)
        assert res.runs["jcnl"][0].trace == direct.trace
        assert res.summary["jcnl"]["final_rmse_sensor"]["mean"] == direct.trace[-1].rmse_sensor

    def test_identical_trials_average_to_single_value(self):
        res = run_jcnl(_scn(1), SolverParams(max_iters=10))
        summary = summarize_runs([res, res, res], 10)
        assert summary["final_rmse_target"] == {"mean": res.trace[-1].rmse_target, "std": 0.0}
        assert summary["trials"] == 3

    def test_comparison_shares_budget_and_writes_files(self, tmp_path):
        cfg = ExperimentConfig(
            scenario=SyntheticConfig(8, 2, comm_range=0.6), algorithm="both",
            solver=SolverParams(max_iters=40), scnl=ScnlParams(stage1_iters=20, stage2_iters=20),
            trials=2, base_seed=10, output_dir=tmp_path,
        )
        res = run_experiment(cfg)
        assert res.summary["jcnl"]["iterations"] == res.summary["scnl"]["iterations"] == 40
        assert "mean_stage_seconds" in res.summary["scnl"]
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["jcnl_trial000.csv", "jcnl_trial001.csv", "scnl_trial000.csv", "scnl_trial001.csv",
                         "summary.json"]

    def test_presets(self):
        cfg = preset_config("synthetic-100", seed=3, noise="range")
        assert cfg.num_agents == 100 and cfg.num_anchors == 8 and cfg.noise.kind == "range"
        assert preset_config("benchmark-like").num_agents + preset_config("benchmark-like").num_anchors == 500
        with pytest.raises(ValueError):
            preset_config("nope")

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(scenario=FIXTURE, algorithm="sdp")
        with pytest.raises(ValueError):
            ExperimentConfig(scenario=FIXTURE, trials=0)


class TestCLI:
    def test_generate_solve_compare_thresholds(self, tmp_path, capsys):
        scn = tmp_path / "s.json"
        assert main(["generate", "--agents", "8", "--anchors", "2", "--comm-range", "0.6", "--seed", "1",
                     "--out", str(scn)]) == 0
        assert load_scenario(scn).num_nodes == 10

        out = tmp_path / "run"
        assert main(["solve", str(scn), "--iters", "15", "--no-timing", "--out", str(out)]) == 0
        recs = load_metrics(out / "metrics.csv")
        assert len(recs) == 15 and recs[-1].wall_nanos is None
        payload = json.loads((out / "result.json").read_text())
        assert payload["iterations"] == 15 and len(payload["positions"]) == 10

        assert main(["solve", str(scn), "--algo", "scnl", "--stage1-iters", "5", "--stage2-iters", "5",
                     "--out", str(tmp_path / "two")]) == 0
        assert len(load_metrics(tmp_path / "two" / "metrics.csv")) == 10

        assert main(["compare", str(scn), "--iters", "10", "--stage1-iters", "5", "--stage2-iters", "5",
                     "--out", str(tmp_path / "cmp")]) == 0
        assert (tmp_path / "cmp" / "summary.json").exists()

        capsys.readouterr()
        assert main(["thresholds", str(scn), "--c", "0.11", "--rho", "0.11"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["satisfied"] == {"rho": False}

    def test_generate_preset(self, tmp_path):
        assert main(["generate", "--preset", "synthetic-100", "--seed", "2", "--out", str(tmp_path / "p.json")]) == 0
        assert load_scenario(tmp_path / "p.json").num_nodes == 108

    def test_errors_exit_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        assert main(["solve", str(bad), "--out", str(tmp_path / "o")]) == 1
        assert "error" in capsys.readouterr().err
        assert main(["solve", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 1
        assert main(["generate", "--agents", "50", "--anchors", "1", "--comm-range", "0.01",
                     "--out", str(tmp_path / "x.json")]) == 1
        with pytest.raises(SystemExit):
            main(["bogus"])
