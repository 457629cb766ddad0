"""Tests for the command-line interface and its orchestration paths."""

import argparse
import json

import numpy as np
import pytest

from streamblocks import InputError
from streamblocks.cli import RunConfig, build_run_config, cmd_simulate, main
from streamblocks.events import WindowConfig
from streamblocks.io import (
    load_edge_csv,
    parse_events,
    read_fit_json,
    read_trace_csv,
    read_truth_json,
    stream_windows,
    write_events_csv,
)
from streamblocks.online import StepSchedule, run_online
from streamblocks.params import HomPoissonParams
from streamblocks.simulate import (
    DEFAULT_PI_K3,
    DEFAULT_RATES_K3,
    EvenDegrees,
    simulate_ground_truth,
)


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = run_cli(
        "simulate", "--model", "hom-poisson", "--m", 40, "--k", 3, "--t", 60,
        "--seed", 7, "--degree", 10, "--out", out,
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def online_dir(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("online")
    code = run_cli(
        "fit-online", sim_dir / "events.csv", "--edges", sim_dir / "edges.csv",
        "--model", "hom-poisson", "--k", 3, "--dt", 5, "--t", 60, "--seed", 1,
        "--out", out,
    )
    assert code == 0
    return out


class TestRunConfig:
    def test_defaults_validate(self):
        cfg = RunConfig()
        assert cfg.model == "hom-poisson"
        assert cfg.train_fraction == 0.85
        assert cfg.schedule == "power-law"

    def test_rejects_bad_values(self):
        with pytest.raises(InputError, match="model"):
            RunConfig(model="markov")
        with pytest.raises(InputError, match="dt"):
            RunConfig(dt=0.0)
        with pytest.raises(InputError, match="fraction"):
            RunConfig(train_fraction=1.5)
        with pytest.raises(InputError, match="rate_range"):
            RunConfig(rate_range=(0.6, 0.4))

    def test_flag_beats_config_file_beats_default(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("seed=5\ndt=2.5\n", encoding="utf-8")
        args = argparse.Namespace(config=str(cfg_path), seed=9, dt=None)
        cfg = build_run_config(args)
        assert cfg.seed == 9  # flag wins
        assert cfg.dt == 2.5  # file beats default
        assert cfg.k == 3  # default survives

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("warp=9\n", encoding="utf-8")
        with pytest.raises(InputError, match="warp"):
            build_run_config(argparse.Namespace(config=str(cfg_path)))

    def test_inhom_models_get_a_basis(self):
        cfg = RunConfig(model="inhom-poisson", h=4, dt=3.0)
        basis = cfg.basis()
        assert basis.H == 4
        assert basis.period == 3.0  # defaults to one window
        assert RunConfig(model="hom-poisson").basis() is None


class TestSimulate:
    def test_writes_the_three_files(self, sim_dir):
        events = parse_events(str(sim_dir / "events.csv"))
        edges = load_edge_csv(str(sim_dir / "edges.csv"))
        truth = read_truth_json(str(sim_dir / "truth.json"))
        assert len(events) > 0
        assert edges.m == 40
        assert truth.z_star.shape == (40,)
        assert truth.config["m"] == 40

    def test_deterministic_under_seed(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run_cli(
                "simulate", "--model", "hom-hawkes", "--m", 25, "--k", 3,
                "--t", 30, "--seed", 11, "--degree", 6, "--out", out,
            ) == 0
            outs.append(out)
        for fname in ("events.csv", "edges.csv", "truth.json"):
            a = (outs[0] / fname).read_bytes()
            b = (outs[1] / fname).read_bytes()
            assert a == b, f"{fname} differs between identical invocations"

    def test_requires_horizon_and_nodes(self, tmp_path):
        assert run_cli("simulate", "--m", 10, "--out", tmp_path) == 2
        assert run_cli("simulate", "--t", 10, "--out", tmp_path) == 2

    def test_uneven_scenario_records_dense_nodes(self, tmp_path):
        out = tmp_path / "uneven"
        assert run_cli(
            "simulate", "--model", "hom-poisson", "--m", 60, "--k", 3, "--t", 10,
            "--seed", 3, "--scenario", "uneven", "--n-dense", 6, "--out", out,
        ) == 0
        truth = read_truth_json(str(out / "truth.json"))
        assert truth.dense_nodes.shape == (6,)
        assert truth.config["scenario"] == "uneven"
        assert truth.config["sparse_degree"] == 3


class TestFitOnline:
    def test_outputs_exist_with_schema(self, online_dir):
        doc = read_fit_json(str(online_dir / "fit.json"))
        assert doc.model == "hom-poisson"
        assert doc.tau.shape == (40, 3)
        np.testing.assert_allclose(doc.tau.sum(axis=1), 1.0, atol=1e-9)
        trace = read_trace_csv(str(online_dir / "trace.csv"))
        assert trace["window"].tolist() == list(range(1, 13))
        assert np.all(trace["eta"] > 0)

    def test_byte_identical_reruns(self, sim_dir, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run_cli(
                "fit-online", sim_dir / "events.csv", "--edges",
                sim_dir / "edges.csv", "--model", "hom-poisson", "--k", 3,
                "--dt", 5, "--t", 60, "--seed", 2, "--out", out,
            ) == 0
            outs.append(out)
        for fname in ("fit.json", "trace.csv"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_horizon_inferred_when_omitted(self, sim_dir, tmp_path):
        out = tmp_path / "auto"
        assert run_cli(
            "fit-online", sim_dir / "events.csv", "--edges", sim_dir / "edges.csv",
            "--model", "hom-poisson", "--k", 3, "--dt", 5, "--seed", 1,
            "--out", out,
        ) == 0
        cfg = read_fit_json(str(out / "fit.json")).config
        events = parse_events(str(sim_dir / "events.csv"))
        assert cfg["t"] == pytest.approx(float(events.t[-1]))

    def test_snap_ingestion(self, tmp_path):
        truth = simulate_ground_truth(
            HomPoissonParams(DEFAULT_RATES_K3), 12, DEFAULT_PI_K3,
            EvenDegrees(4), 20.0, 5,
        )
        snap = tmp_path / "ev.snap"
        with open(snap, "w", encoding="utf-8") as fh:
            fh.write("# src dst unix-time\n")
            for s, d, t in zip(truth.events.src, truth.events.dst, truth.events.t):
                fh.write(f"{s} {d} {repr(1.5e9 + float(t))}\n")
        out = tmp_path / "fit"
        assert run_cli(
            "fit-online", snap, "--format", "snap", "--model", "hom-poisson",
            "--k", 3, "--dt", 4, "--seed", 0, "--out", out,
        ) == 0
        doc = read_fit_json(str(out / "fit.json"))
        assert doc.tau.shape == (12, 3)

    def test_constant_memory_across_stream_scales(self, tmp_path):
        """Peak working state must not grow with the total event count."""
        peaks = []
        for T in (20.0, 200.0):
            truth = simulate_ground_truth(
                HomPoissonParams(DEFAULT_RATES_K3), 20, DEFAULT_PI_K3,
                EvenDegrees(6), T, 3,
            )
            path = tmp_path / f"ev{int(T)}.csv"
            write_events_csv(str(path), truth.events)
            cfg = WindowConfig(dT=2.0, T=T)
            fit = run_online(
                stream_windows(str(path), cfg),
                truth.edges, 3, cfg,
                StepSchedule("power-law", alpha=0.5, c=0.5),
                "hom-poisson", 0,
            )
            peaks.append(fit.peak_state_nbytes)
        assert peaks[1] == peaks[0]


class TestFitBatch:
    def test_outputs_and_monotone_trace(self, sim_dir, tmp_path):
        out = tmp_path / "batch"
        assert run_cli(
            "fit-batch", sim_dir / "events.csv", "--edges", sim_dir / "edges.csv",
            "--model", "hom-poisson", "--k", 3, "--dt", 5, "--t", 60, "--seed", 1,
            "--out", out,
        ) == 0
        doc = read_fit_json(str(out / "fit.json"))
        assert doc.tau.shape == (40, 3)
        trace = read_trace_csv(str(out / "trace.csv"))
        assert np.all(np.diff(trace["elbo_norm"]) >= -1e-8)
        assert np.all(trace["eta"] == 0.0)


class TestPredict:
    def test_matches_library_counts(self, sim_dir, online_dir, tmp_path):
        from streamblocks.metrics import predict_counts

        out = tmp_path / "pred.csv"
        assert run_cli(
            "predict", "--fit", online_dir / "fit.json", "--edges",
            sim_dir / "edges.csv", "--from", 50, "--to", 60, "--out", out,
        ) == 0
        rows = np.loadtxt(out, delimiter=",", skiprows=1)
        doc = read_fit_json(str(online_dir / "fit.json"))
        edges = load_edge_csv(str(sim_dir / "edges.csv"))
        want = predict_counts(doc.params, doc.tau, edges, (50.0, 60.0))
        np.testing.assert_allclose(rows[:, 2], want, rtol=1e-12)

    def test_supercritical_fit_exits_3(self, sim_dir, tmp_path):
        bad = {
            "model": "hom-hawkes",
            "params": {
                "baseline": np.full((3, 3), 0.3).tolist(),
                "excite": np.full((3, 3), 1.2).tolist(),
                "decay": 1.0,
            },
            "pi": [1 / 3] * 3,
            "tau": np.full((40, 3), 1 / 3).tolist(),
            "z_hat": [0] * 40,
            "config": {},
        }
        fit_path = tmp_path / "bad.json"
        fit_path.write_text(json.dumps(bad), encoding="utf-8")
        code = run_cli(
            "predict", "--fit", fit_path, "--edges", sim_dir / "edges.csv",
            "--from", 0, "--to", 10, "--out", tmp_path / "p.csv",
        )
        assert code == 3

    def test_reversed_horizon_exits_2(self, sim_dir, online_dir, tmp_path):
        code = run_cli(
            "predict", "--fit", online_dir / "fit.json", "--edges",
            sim_dir / "edges.csv", "--from", 10, "--to", 5,
            "--out", tmp_path / "p.csv",
        )
        assert code == 2


class TestEvaluate:
    def test_truth_report_with_figures(self, sim_dir, online_dir, tmp_path):
        out = tmp_path / "ev"
        assert run_cli(
            "evaluate", "--fit", online_dir / "fit.json", "--truth",
            sim_dir / "truth.json", "--trace", online_dir / "trace.csv",
            "--out", out,
        ) == 0
        report = json.loads((out / "report.json").read_text())
        assert 0.0 <= report["nmi"] <= 1.0
        assert report["intensity_recovery"] >= 0.0
        for fname in (
            "report_cells.csv",
            "report_rates.png",
            "report_membership.png",
            "report_trace.png",
        ):
            assert (out / fname).exists(), fname

    def test_heldout_rmse_path(self, sim_dir, online_dir, tmp_path):
        events = parse_events(str(sim_dir / "events.csv"))
        hi = int(np.searchsorted(events.t, 50.0))
        test_path = tmp_path / "test.csv"
        write_events_csv(str(test_path), events[hi:])
        out = tmp_path / "ev"
        assert run_cli(
            "evaluate", "--fit", online_dir / "fit.json", "--test", test_path,
            "--edges", sim_dir / "edges.csv", "--from", 50, "--to", 60,
            "--out", out,
        ) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["rmse"] >= 0.0
        pred = np.loadtxt(out / "predictions.csv", delimiter=",", skiprows=1)
        assert pred.shape[1] == 4

    def test_needs_truth_or_test(self, online_dir, tmp_path):
        assert run_cli(
            "evaluate", "--fit", online_dir / "fit.json", "--out", tmp_path
        ) == 2


class TestCompare:
    def test_table_and_figure(self, sim_dir, tmp_path):
        out = tmp_path / "cmp"
        assert run_cli(
            "compare", sim_dir / "events.csv", "--model", "hom-poisson",
            "--k", 3, "--dt", 5, "--seed", 3, "--out", out,
        ) == 0
        lines = (out / "compare.csv").read_text().strip().splitlines()
        assert lines[0] == "method,wall_time_s,link_rmse,loglik"
        assert [l.split(",")[0] for l in lines[1:]] == ["online", "batch"]
        summary = json.loads((out / "compare_summary.json").read_text())
        assert "loglik_ratio_online_over_batch" in summary
        assert summary["n_train"] + summary["n_test"] > 0
        assert (out / "compare.png").exists()
        for fname in ("fit_online.json", "fit_batch.json"):
            read_fit_json(str(out / fname))  # parses cleanly


class TestExitCodes:
    def test_missing_file_is_input_error(self, tmp_path):
        assert run_cli(
            "fit-online", tmp_path / "nope.csv", "--t", 10, "--out", tmp_path
        ) == 2

    def test_unknown_subcommand_usage_exit(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_flag_usage_exit(self):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--warp", "9"])
        assert exc.value.code == 2


class TestPipeline:
    def test_simulate_fit_evaluate_wiring(self, tmp_path):
        sim = tmp_path / "sim"
        fit = tmp_path / "fit"
        ev = tmp_path / "ev"
        assert run_cli(
            "simulate", "--model", "hom-poisson", "--m", 30, "--k", 3, "--t", 40,
            "--seed", 0, "--degree", 8, "--out", sim,
        ) == 0
        assert run_cli(
            "fit-online", sim / "events.csv", "--edges", sim / "edges.csv",
            "--model", "hom-poisson", "--k", 3, "--dt", 4, "--t", 40, "--seed", 1,
            "--out", fit,
        ) == 0
        assert run_cli(
            "evaluate", "--fit", fit / "fit.json", "--truth", sim / "truth.json",
            "--out", ev,
        ) == 0
        assert "nmi" in json.loads((ev / "report.json").read_text())
