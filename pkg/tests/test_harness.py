"""
Tests for the experiment harness: config parsing, scoring, trials, sweeps
and the CLI.
"""
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

import main
from coarray.emvs_model import ANGLE_FIELDS
from coarray.errors import ConfigError, ReportIOError
from harness.config import load_config
from harness.metrics import bias, match_to_truth, rmse, summarize_point
from harness.report_writer import save_frame, sidecar_path
from harness.runner import run_crb_sweep, run_sweep
from harness.scenarios import scene_degrees, standard_arrays, table2_targets, targets_from_degrees
from harness.trial_executor import run_trial
from harness.utils import parse_bool, parse_int, parse_range, parse_values, trial_seed

SMALL = {"m1": "2", "m2": "3", "n1": "2", "n2": "5"}
TINY = {"m1": "1", "m2": "2", "n1": "1", "n2": "2"}
CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def crowded_grid(k):
    return {name: "1:1:{}".format(k) for name in ANGLE_FIELDS}


class TestParsing:
    """Value parsers for hand-written config files."""

    def test_table_ranges_have_13_values(self):
        for text in ("10:5:70", "5:3.75:50", "20:3.75:65", "3:5:63"):
            assert len(parse_values(text)) == 13

    def test_range_endpoints(self):
        vals = parse_range("5:3.75:50")
        assert vals[0] == 5.0
        assert vals[-1] == pytest.approx(50.0)
        assert parse_range("2:4") == [2.0, 3.0, 4.0]

    def test_mixed_and_bracketed(self):
        assert parse_values("[1, 3:5]") == [1.0, 3.0, 4.0, 5.0]
        assert parse_values("40, 20, 30") == [40.0, 20.0, 30.0]
        assert parse_values(7) == [7.0]
        assert parse_values("") == []

    @pytest.mark.parametrize("text", ["a", "1:0:5", "5:1:1", "1:2:3:4"])
    def test_bad_values(self, text):
        with pytest.raises(ConfigError):
            parse_values(text)

    def test_scalars(self):
        assert parse_int("200", "snapshots") == 200
        assert parse_bool("Yes", "noiseless") is True
        assert parse_bool("off", "noiseless") is False
        with pytest.raises(ConfigError):
            parse_int("2.5", "trials")
        with pytest.raises(ConfigError):
            parse_bool("maybe", "with_crb")

    def test_trial_seed(self):
        assert trial_seed(5, 3) == 6
        assert trial_seed(0, 17) == 17


class TestScenarios:

    def test_table2(self):
        targets = table2_targets()
        assert len(targets) == 13
        assert np.degrees(targets[-1].theta_t) == pytest.approx(70.0)
        assert np.degrees(targets[-1].gamma_t) == pytest.approx(50.0)
        assert len(table2_targets(5)) == 5

    def test_unknown_scene(self):
        with pytest.raises(ConfigError):
            scene_degrees("crowded")

    def test_grid_checks(self):
        grids = scene_degrees("close_pair")
        with pytest.raises(ConfigError):
            targets_from_degrees(grids, powers=[1.0, 2.0, 3.0], k=3)
        with pytest.raises(ConfigError):
            targets_from_degrees({**grids, "eta_r": [10.0]})
        del grids["phi_t"]
        with pytest.raises(ConfigError):
            targets_from_degrees(grids)

    def test_standard_arrays(self):
        tx, rx = standard_arrays()
        assert (tx.size, rx.size) == (9, 10)


class TestConfig:
    """load_config precedence and validation."""

    def test_defaults_to_three_targets(self):
        cfg = load_config()
        assert cfg.scene_name == "three_targets"
        assert cfg.k == 3

    def test_experiment_defaults(self):
        cfg = load_config(experiment="sweep-snr")
        assert cfg.sweep == "snr_db"
        assert cfg.sweep_values == (0.0, 5.0, 10.0, 15.0, 20.0)
        assert [v for v, _ in cfg.sweep_points()] == [0.0, 5.0, 10.0, 15.0, 20.0]

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("m1=2\nm2=3\nscene=close_pair\nsnr_db=5\n", encoding="utf-8")
        cfg = load_config(path)
        assert (cfg.m1, cfg.m2, cfg.k, cfg.snr_db) == (2, 3, 2, 5.0)
        assert load_config(path, overrides={"snr_db": "15"}).snr_db == 15.0

    def test_inline_grids(self, tmp_path):
        path = tmp_path / "grid.cfg"
        lines = ["{}=10, 20".format(name) for name in ANGLE_FIELDS] + ["power=1, 2"]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        cfg = load_config(path)
        assert cfg.k == 2
        assert cfg.scene().powers().tolist() == [1.0, 2.0]

    def test_env_workers(self, monkeypatch):
        monkeypatch.setenv("COARRAY_WORKERS", "3")
        assert load_config().workers == 3
        assert load_config(overrides={"workers": 1}).workers == 1

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("colour=red\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.cfg")

    def test_non_monotone_sweep(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"sweep": "snr_db", "sweep_values": "0, 10, 5"})

    def test_k_sweep_beyond_scene(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"sweep": "k", "sweep_values": "2:1:20"})

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            load_config(experiment="sweep-everything")


class TestMetrics:
    """Matching, group RMSE and bias."""

    @pytest.fixture
    def truth(self):
        return np.radians(np.array([
            [10, 20, 30], [11, 21, 31], [12, 22, 32], [13, 23, 33],
            [14, 24, 34], [15, 25, 35], [16, 26, 36], [17, 27, 37],
        ], dtype=float))

    def test_match_undoes_permutation(self, truth):
        np.testing.assert_array_equal(match_to_truth(truth[:, [2, 0, 1]], truth), truth)

    def test_nan_column_matched_last(self, truth):
        est = truth[:, [1, 0]].copy()
        est[0, 0] = np.nan
        got = match_to_truth(est, truth[:, :2])
        np.testing.assert_array_equal(got[:, 0], truth[:, 0])
        assert np.isnan(got[0, 1])

    def test_rmse_exact(self, truth):
        assert rmse(truth, truth) == (0.0, 0.0)

    def test_one_degree_error(self, truth):
        t = truth[:, :1]
        est = t.copy()
        est[0, 0] += np.radians(1.0)
        score = rmse(est, t)
        assert score.angle == pytest.approx(0.5)
        assert score.polarization == 0.0

    def test_rmse_over_trials(self, truth, rng):
        est = truth[None] + np.radians(rng.normal(scale=0.3, size=(20, 8, 3)))
        err = np.degrees(est - truth[None])
        score = rmse(est, np.broadcast_to(truth, est.shape))
        assert score.angle == pytest.approx(np.sqrt(np.mean(err[:, [0, 1, 4, 5]] ** 2)))
        assert score.polarization == pytest.approx(np.sqrt(np.mean(err[:, [2, 3, 6, 7]] ** 2)))

    def test_empty_stack(self):
        assert np.isnan(rmse(np.empty((0, 8, 2)), np.empty((0, 8, 2))).angle)

    def test_bias(self, truth):
        est = np.stack([truth, truth])
        est[0, 1, 0] += np.radians(1.0)
        est[1, 1, 0] += np.radians(3.0)
        b = bias(est, np.stack([truth, truth]))
        assert b[1, 0] == pytest.approx(2.0)
        assert np.count_nonzero(np.abs(b) > 1e-12) == 1

    def test_summary_counts_failures(self, truth):
        ok = {"trial": 0, "ok": True, "estimates": truth, "truth": truth}
        bad = {"trial": 1, "ok": False, "estimates": None, "truth": truth, "category": "convergence"}
        row = summarize_point("snr_db", 10.0, [ok, bad])
        assert (row["successes"], row["failures"], row["trials"]) == (1, 1, 2)
        assert row["rmse_angle"] == 0.0


class TestTrials:

    def test_deterministic(self):
        cfg = load_config(overrides={**SMALL, "snapshots": "100"})
        first, second = run_trial(cfg, 4), run_trial(cfg, 4)
        assert first["seed"] == 4
        np.testing.assert_array_equal(first["estimates"], second["estimates"])

    def test_exact_covariance_accuracy(self):
        cfg = load_config(overrides={**SMALL, "exact_covariance": "true", "noiseless": "true", "tals_tol": "1e-12"})
        record = run_trial(cfg, 0)
        assert record["ok"], record["error"]
        err = np.degrees(np.abs(record["estimates"] - record["truth"]))
        assert err.max() < 1e-3

    def test_table2_noiseless_config(self):
        """The shipped 13-target config recovers every parameter from the exact covariance."""
        cfg = load_config(CONFIG_DIR / "table2_noiseless.cfg")
        assert cfg.tals_init == "gevd"
        record = run_trial(cfg, 0)
        assert record["ok"], record["error"]
        assert record["truth"].shape == (8, 13)
        assert np.degrees(np.abs(record["estimates"] - record["truth"])).max() < 1e-3

    def test_too_many_targets_recorded(self):
        cfg = load_config(overrides={**TINY, **crowded_grid(25), "snapshots": "50"})
        record = run_trial(cfg, 0)
        assert not record["ok"]
        assert record["category"] == "identifiability"
        assert record["truth"].shape == (8, 25)

    def test_point_override(self):
        cfg = load_config(overrides={**TINY, "snapshots": "20"})
        record = run_trial(cfg, 1, {"snapshots": 40})
        assert record["trial"] == 1
        assert record["truth"].shape == (8, 3)


class TestSweeps:
    """Event stream and deterministic output."""

    def sweep_config(self, workers):
        return load_config(overrides={
            **SMALL, "sweep": "snr_db", "sweep_values": "10, 20", "trials": "2",
            "snapshots": "100", "workers": str(workers), "seed": "9",
        })

    def test_event_sequence(self, tmp_path):
        events = list(run_sweep(self.sweep_config(1), tmp_path / "snr.csv"))
        kinds = [kind for kind, _ in events]
        assert kinds[0] == "status"
        assert kinds.count("point_start") == 2
        assert kinds.count("trial_done") == 4
        assert kinds[-1] == "complete"
        report = events[-1][1]
        assert [row["snr_db"] for row in report.rows] == [10.0, 20.0]
        sidecar = json.loads((tmp_path / "snr.json").read_text(encoding="utf-8"))
        assert sidecar["points"] == 2

    def test_csv_identical_across_runs_and_workers(self, tmp_path):
        list(run_sweep(self.sweep_config(1), tmp_path / "a.csv", with_trials=True))
        list(run_sweep(self.sweep_config(1), tmp_path / "b.csv", with_trials=True))
        list(run_sweep(self.sweep_config(2), tmp_path / "c.csv", with_trials=True))
        a = (tmp_path / "a.csv").read_bytes()
        assert a == (tmp_path / "b.csv").read_bytes()
        assert a == (tmp_path / "c.csv").read_bytes()
        assert (tmp_path / "a_trials.csv").read_bytes() == (tmp_path / "c_trials.csv").read_bytes()
        frame = pd.read_csv(tmp_path / "a_trials.csv")
        assert len(frame) == 2 * 2 * 3

    def test_identifiability_stops_sweep(self):
        cfg = load_config(overrides={**TINY, **crowded_grid(25)})
        events = list(run_sweep(cfg))
        assert events[-1][0] == "error"
        assert events[-1][1].category == "identifiability"
        assert not any(kind == "trial_done" for kind, _ in events)

    def test_crb_sweep(self, tmp_path):
        cfg = load_config(overrides={**TINY, "sweep": "snr_db", "sweep_values": "0, 10"})
        events = list(run_crb_sweep(cfg, tmp_path / "crb.csv"))
        report = events[-1][1]
        low, high = report.rows
        assert low["crb_angle"] > high["crb_angle"] > 0
        assert pd.read_csv(tmp_path / "crb.csv").shape == (2, 4)


class TestReports:

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("x", encoding="utf-8")
        with pytest.raises(ReportIOError) as info:
            save_frame(pd.DataFrame({"a": [1.0]}), blocker / "out.csv")
        assert info.value.category == "io"
        assert info.value.to_dict()["path"].endswith("out.csv")

    def test_sidecar_path(self):
        assert sidecar_path("out/snr.csv", "_trials.csv").replace("\\", "/") == "out/snr_trials.csv"


class TestCli:

    def test_simulate(self, tmp_path):
        out = tmp_path / "y.npy"
        argv = ["simulate", "--out", str(out), "--seed", "3"]
        for key, val in TINY.items():
            argv += ["--set", "{}={}".format(key, val)]
        main.main(argv)
        assert np.load(out).shape == (324, 200)
        summary = json.loads((tmp_path / "y.json").read_text(encoding="utf-8"))
        assert summary["k"] == 3
        assert summary["k_max"] == 24
        assert summary["transmit_aperture"]["num_contiguous"] == 5

    def test_config_error_exit_code(self, capsys):
        with pytest.raises(SystemExit) as info:
            main.main(["sweep-snr", "--set", "colour=red"])
        assert info.value.code == 2
        line = capsys.readouterr().err.strip().splitlines()[-1]
        assert json.loads(line)["category"] == "config"

    def test_malformed_set(self):
        with pytest.raises(SystemExit) as info:
            main.main(["estimate", "--set", "snr_db"])
        assert info.value.code == 2
