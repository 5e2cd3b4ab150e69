import json
import os

import numpy as np
import pandas as pd
import pytest

from repex.figures import replicate_figure
from repex.harness import (ExperimentConfig, maximin_lhs, run_experiment,
                           run_seed, truth_cache)


def _cfg(tmp_path, **kw):
    base = dict(simulator="forrester", mean_family="gaussian", init_n=8,
                n_max=24, h=0, seeds=[0], metric_cadence=8,
                out_dir=str(tmp_path / "run"))
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_roundtrip(self, tmp_path):
        cfg = _cfg(tmp_path, h=3, seeds=[1, 2])
        back = ExperimentConfig.from_json(cfg.to_json())
        assert back == cfg

    def test_validation(self, tmp_path):
        with pytest.raises(ValueError):
            _cfg(tmp_path, seeds=[])
        with pytest.raises(ValueError):
            _cfg(tmp_path, n_max=4, init_n=8)
        with pytest.raises(ValueError):
            _cfg(tmp_path, model="bayes")


class TestMaximinLhs:
    def test_marginal_coverage(self, rng):
        pts = maximin_lhs(20, 2, rng)
        for p in range(2):
            bins = np.floor(pts[:, p] * 20).astype(int)
            assert sorted(bins) == list(range(20))

    def test_better_than_random_spread(self, rng):
        pts = maximin_lhs(15, 2, rng, candidates=100)
        rand = rng.uniform(0, 1, (15, 2))

        def min_dist(x):
            d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
            np.fill_diagonal(d, np.inf)
            return d.min()

        assert min_dist(pts) > min_dist(rand)


class TestRunSeed:
    def test_trace_accounting(self, tmp_path):
        cfg = _cfg(tmp_path)
        out = run_seed(cfg, 0)
        tr = pd.read_csv(out["trace"])
        assert len(tr) == cfg.n_max - cfg.init_n
        assert tr["N"].iloc[-1] == cfg.n_max
        assert (tr["N"].values == cfg.init_n + tr["iter"].values).all()
        des = json.load(open(os.path.join(cfg.out_dir, "design_0.json")))
        assert out["n"] == len(des["design"]["xbar"])

    def test_zero_iteration_budget(self, tmp_path):
        cfg = _cfg(tmp_path, n_max=8)
        out = run_seed(cfg, 0)
        tr = pd.read_csv(out["trace"])
        mt = pd.read_csv(out["metrics"])
        assert len(tr) == 0
        assert len(mt) == 1 and mt["iter"].iloc[0] == 0

    def test_deterministic_given_seed(self, tmp_path):
        cfg1 = _cfg(tmp_path, out_dir=str(tmp_path / "a"))
        cfg2 = _cfg(tmp_path, out_dir=str(tmp_path / "b"))
        r1, r2 = run_seed(cfg1, 3), run_seed(cfg2, 3)
        t1 = pd.read_csv(r1["trace"]).drop(columns=["elapsed_ms"])
        t2 = pd.read_csv(r2["trace"]).drop(columns=["elapsed_ms"])
        pd.testing.assert_frame_equal(t1, t2)

    def test_checkpoint_resume_matches_uninterrupted(self, tmp_path):
        # with n <= 50 every iteration refits, so any stop point is a
        # canonical checkpoint and the resumed path replays exactly
        full = run_seed(_cfg(tmp_path, out_dir=str(tmp_path / "full"), n_max=26), 0)
        part_cfg = _cfg(tmp_path, out_dir=str(tmp_path / "part"), n_max=18)
        run_seed(part_cfg, 0)
        resumed_cfg = _cfg(tmp_path, out_dir=str(tmp_path / "part"), n_max=26)
        run_seed(resumed_cfg, 0, resume=True)
        t_full = pd.read_csv(full["trace"]).drop(columns=["elapsed_ms"])
        t_res = pd.read_csv(os.path.join(part_cfg.out_dir, "trace_0.csv")).drop(
            columns=["elapsed_ms"])
        pd.testing.assert_frame_equal(t_full, t_res)

    def test_decision_log_written_at_verbosity(self, tmp_path):
        cfg = _cfg(tmp_path, verbosity=1)
        run_seed(cfg, 0)
        path = os.path.join(cfg.out_dir, "decisions_0.jsonl")
        lines = [json.loads(l) for l in open(path)]
        assert len(lines) == cfg.n_max - cfg.init_n
        assert {"kind", "path_values", "horizon"} <= set(lines[0])


class TestRunExperiment:
    def test_summary_written(self, tmp_path):
        cfg = _cfg(tmp_path, seeds=[0, 1])
        summary = run_experiment(cfg)
        assert len(summary["per_seed"]) == 2
        assert os.path.exists(os.path.join(cfg.out_dir, "summary.json"))
        assert "median_rmse" in summary

    def test_target_and_adapt_modes_run(self, tmp_path):
        for mode in ("target", "adapt"):
            cfg = _cfg(tmp_path, horizon_mode=mode,
                       out_dir=str(tmp_path / mode))
            out = run_seed(cfg, 0)
            assert out["N"] == cfg.n_max


class TestTruthCache:
    def test_writes_grid_and_manifest(self, tmp_path):
        path = truth_cache("forrester", {}, grid=5, reps=50, seed=0,
                           out_dir=str(tmp_path))
        df = pd.read_csv(path)
        assert len(df) == 5 and {"x1", "mean", "variance"} <= set(df.columns)
        man = json.load(open(os.path.join(tmp_path, "truth_forrester_manifest.json")))
        assert man["reps"] == 50


class TestFigures:
    def test_fig1_emits_profiles_and_png(self, tmp_path):
        out = replicate_figure("fig1", str(tmp_path))
        df = pd.read_csv(out["csv"])
        assert len(df) == 512
        assert {"x", "I_low", "I_high", "threshold", "r_low", "r_high"} <= set(df.columns)
        assert os.path.exists(out["png"])

    def test_fig2_path_count(self, tmp_path):
        out = replicate_figure("fig2", str(tmp_path))
        assert len(out["path_values"]) == 4
        df = pd.read_csv(out["csv"])
        assert set(df["path"]) == {0, 1, 2, 3}
        assert os.path.exists(out["png"])

    def test_fig3_allocation(self, tmp_path):
        out = replicate_figure("fig3", str(tmp_path))
        df = pd.read_csv(out["csv"])
        assert len(df) == 21
        assert out["batch_below_initial"] > 0
        assert os.path.exists(out["png"])

    def test_unknown_figure_id(self, tmp_path):
        with pytest.raises(ValueError):
            replicate_figure("fig9", str(tmp_path))


class TestCli:
    def test_run_and_figure_commands(self, tmp_path, capsys):
        from repex.cli import main
        cfg = _cfg(tmp_path, n_max=16)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(cfg.to_json())
        rc = main(["run", "--config", str(cfg_path), "--out",
                   str(tmp_path / "cli_run")])
        assert rc == 0
        assert os.path.exists(tmp_path / "cli_run" / "summary.json")
        rc = main(["figure", "fig1", "--out", str(tmp_path / "figs")])
        assert rc == 0
        rc = main(["truth-cache", "--simulator", "forrester", "--grid", "3",
                   "--reps", "10", "--out", str(tmp_path / "truth")])
        assert rc == 0
