"""Tests for the file formats and streaming readers."""

import warnings

import numpy as np
import pytest

from streamblocks import InputError
from streamblocks.basis import StepBasis
from streamblocks.events import EventBatch, WindowConfig, partition_windows
from streamblocks.io import (
    derive_edge_list,
    derive_edge_list_from_file,
    infer_horizon,
    iter_event_rows,
    load_edge_csv,
    params_from_dict,
    params_to_dict,
    parse_config_file,
    parse_events,
    peek_time_range,
    read_fit_json,
    read_trace_csv,
    read_truth_json,
    split_train_test,
    stream_windows,
    write_edge_csv,
    write_events_csv,
    write_fit_json,
    write_trace_csv,
    write_truth_json,
)
from streamblocks.params import (
    HomHawkesParams,
    HomPoissonParams,
    InhomHawkesParams,
    InhomPoissonParams,
)
from streamblocks.simulate import (
    DEFAULT_PI_K3,
    DEFAULT_RATES_K3,
    EvenDegrees,
    simulate_ground_truth,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestParseEvents:
    def test_two_row_file(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n0,1,0.5\n1,0,0.7\n")
        batch = parse_events(path)
        assert len(batch) == 2
        np.testing.assert_array_equal(batch.src, [0, 1])
        np.testing.assert_allclose(batch.t, [0.5, 0.7])

    def test_header_only_is_empty(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n")
        assert len(parse_events(path)) == 0

    def test_missing_header_rejected(self, tmp_path):
        path = write(tmp_path, "ev.csv", "0,1,0.5\n")
        with pytest.raises(InputError, match="header"):
            parse_events(path)

    def test_malformed_row_cites_line(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n0,1,0.5\n0,oops,0.7\n")
        with pytest.raises(InputError, match="line 3"):
            parse_events(path)

    def test_wrong_field_count_cites_line(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n0,1\n")
        with pytest.raises(InputError, match="line 2"):
            parse_events(path)

    def test_unsorted_cites_position(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n0,1,0.5\n1,0,0.3\n")
        with pytest.raises(InputError, match="line 3.*out of order"):
            parse_events(path)

    def test_negative_id_rejected(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n-1,1,0.5\n")
        with pytest.raises(InputError, match="negative"):
            parse_events(path)

    def test_non_finite_timestamp_rejected(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n0,1,nan\n")
        with pytest.raises(InputError, match="line 2"):
            parse_events(path)

    def test_unknown_format_rejected(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n")
        with pytest.raises(InputError, match="format"):
            parse_events(path, fmt="tsv")


class TestSnapFormat:
    def test_shifted_to_seconds_from_first(self, tmp_path):
        path = write(
            tmp_path, "ev.snap", "# comment\n5 9 1100000000\n2 5 1100000007\n5 9 1100000033\n"
        )
        batch = parse_events(path, fmt="snap")
        raw = np.array([1100000000.0, 1100000007.0, 1100000033.0])
        np.testing.assert_allclose(batch.t, raw - raw.min())
        np.testing.assert_array_equal(batch.src, [5, 2, 5])

    def test_infer_horizon_accounts_for_shift(self, tmp_path):
        path = write(tmp_path, "ev.snap", "0 1 1000\n1 0 1150\n")
        assert infer_horizon(path, "snap") == 150.0

    def test_unsorted_snap_rejected(self, tmp_path):
        path = write(tmp_path, "ev.snap", "0 1 1000\n1 0 900\n")
        with pytest.raises(InputError, match="out of order"):
            parse_events(path, fmt="snap")


class TestRoundTrip:
    def test_write_then_parse_is_identical(self, tmp_path):
        rng = np.random.default_rng(3)
        t = np.sort(rng.uniform(0, 100, 500))
        batch = EventBatch(
            rng.integers(0, 20, 500), rng.integers(0, 20, 500), t
        )
        path = str(tmp_path / "ev.csv")
        write_events_csv(path, batch)
        back = parse_events(path)
        np.testing.assert_array_equal(back.src, batch.src)
        np.testing.assert_array_equal(back.dst, batch.dst)
        assert np.array_equal(back.t, batch.t)  # bitwise, via repr round-trip


class TestStreamWindows:
    def test_matches_in_memory_partition(self, tmp_path):
        for seed in range(3):
            truth = simulate_ground_truth(
                HomPoissonParams(DEFAULT_RATES_K3), 15, DEFAULT_PI_K3,
                EvenDegrees(5), 23.0, seed,
            )
            path = str(tmp_path / f"ev{seed}.csv")
            write_events_csv(path, truth.events)
            cfg = WindowConfig(dT=4.0, T=23.0)
            streamed = list(stream_windows(path, cfg))
            direct = list(partition_windows(truth.events, cfg))
            assert [n for n, _ in streamed] == [n for n, _ in direct]
            for (_, a), (_, b) in zip(streamed, direct):
                np.testing.assert_array_equal(a.src, b.src)
                np.testing.assert_array_equal(a.dst, b.dst)
                assert np.array_equal(a.t, b.t)

    def test_boundary_timestamps(self, tmp_path):
        path = write(
            tmp_path, "ev.csv",
            "src,dst,t\n0,1,0.0\n0,1,2.0\n0,1,4.0\n0,1,5.0\n",
        )
        cfg = WindowConfig(dT=2.0, T=5.0)
        wins = dict(stream_windows(path, cfg))
        assert sorted(wins) == [1, 2, 3]
        np.testing.assert_allclose(wins[1].t, [0.0])  # t=2.0 starts window 2
        np.testing.assert_allclose(wins[2].t, [2.0])
        np.testing.assert_allclose(wins[3].t, [4.0, 5.0])  # final keeps t == T

    def test_empty_and_trailing_windows_emitted(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n0,1,0.5\n")
        cfg = WindowConfig(dT=1.0, T=4.0)
        wins = list(stream_windows(path, cfg))
        assert [n for n, _ in wins] == [1, 2, 3, 4]
        assert [len(b) for _, b in wins] == [1, 0, 0, 0]

    def test_event_beyond_horizon_rejected(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n0,1,9.5\n")
        with pytest.raises(InputError, match="horizon"):
            list(stream_windows(path, WindowConfig(dT=1.0, T=4.0)))


class TestPeek:
    def test_reads_both_ends_of_a_long_file(self, tmp_path):
        rng = np.random.default_rng(1)
        t = np.sort(rng.uniform(5.0, 400.0, 5000))
        batch = EventBatch(
            rng.integers(0, 50, 5000), rng.integers(0, 50, 5000), t
        )
        path = str(tmp_path / "ev.csv")
        write_events_csv(path, batch)
        first, last = peek_time_range(path)
        assert first == batch.t[0]
        assert last == batch.t[-1]
        assert infer_horizon(path) == batch.t[-1]

    def test_header_only_rejected(self, tmp_path):
        path = write(tmp_path, "ev.csv", "src,dst,t\n")
        with pytest.raises(InputError, match="no events"):
            peek_time_range(path)


class TestEdgeCsv:
    def test_round_trip(self, tmp_path):
        truth = simulate_ground_truth(
            HomPoissonParams(DEFAULT_RATES_K3), 12, DEFAULT_PI_K3,
            EvenDegrees(4), 5.0, 0,
        )
        path = str(tmp_path / "edges.csv")
        write_edge_csv(path, truth.edges)
        back = load_edge_csv(path)
        assert back.m == truth.edges.m
        np.testing.assert_array_equal(back.src, truth.edges.src)
        np.testing.assert_array_equal(back.dst, truth.edges.dst)

    def test_missing_header_rejected(self, tmp_path):
        path = write(tmp_path, "edges.csv", "0,1\n")
        with pytest.raises(InputError, match="header"):
            load_edge_csv(path)

    def test_empty_rejected(self, tmp_path):
        path = write(tmp_path, "edges.csv", "src,dst\n")
        with pytest.raises(InputError, match="empty"):
            load_edge_csv(path)

    def test_bad_row_cites_line(self, tmp_path):
        path = write(tmp_path, "edges.csv", "src,dst\n0,1\n2\n")
        with pytest.raises(InputError, match="line 3"):
            load_edge_csv(path)


class TestDeriveEdges:
    def test_distinct_pairs_and_m(self):
        ev = EventBatch.from_events([(0, 1, 0.1), (0, 1, 0.2), (2, 0, 0.3)])
        edges = derive_edge_list(ev)
        assert edges.n_pairs == 2
        assert edges.m == 3

    def test_empty_rejected(self):
        with pytest.raises(InputError, match="empty"):
            derive_edge_list(EventBatch.empty())

    def test_self_loops_dropped_with_warning(self):
        ev = EventBatch.from_events([(0, 0, 0.1), (0, 1, 0.2)])
        with pytest.warns(UserWarning, match="self-loop"):
            edges = derive_edge_list(ev)
        assert edges.n_pairs == 1

    def test_streaming_variant_agrees(self, tmp_path):
        truth = simulate_ground_truth(
            HomPoissonParams(DEFAULT_RATES_K3), 20, DEFAULT_PI_K3,
            EvenDegrees(6), 10.0, 4,
        )
        path = str(tmp_path / "ev.csv")
        write_events_csv(path, truth.events)
        a = derive_edge_list(truth.events)
        b = derive_edge_list_from_file(path)
        assert a.m == b.m
        np.testing.assert_array_equal(a.src, b.src)
        np.testing.assert_array_equal(a.dst, b.dst)


class TestSplit:
    def make_events(self, n, seed=0):
        rng = np.random.default_rng(seed)
        t = np.sort(rng.uniform(0, 50, n))
        return EventBatch(rng.integers(0, 9, n), rng.integers(0, 9, n), t)

    def test_85_15(self):
        ev = self.make_events(100)
        train, test, t_split = split_train_test(ev, 0.85)
        assert len(train) == 85
        assert len(test) == 15
        assert t_split == ev.t[84]
        assert np.all(train.t <= t_split)
        assert np.all(test.t > t_split)

    def test_ties_at_split_go_to_train(self):
        ev = EventBatch.from_events(
            [(0, 1, 1.0), (0, 1, 2.0), (0, 1, 2.0), (0, 1, 3.0)]
        )
        train, test, t_split = split_train_test(ev, 0.5)
        assert t_split == 2.0
        assert len(train) == 3  # both t=2.0 events stay on the train side
        assert len(test) == 1

    def test_full_fraction_warns_and_is_idempotent(self):
        ev = self.make_events(40, seed=2)
        with pytest.warns(UserWarning, match="empty"):
            train, test, _ = split_train_test(ev, 1.0)
        assert len(train) == 40 and len(test) == 0
        with pytest.warns(UserWarning):
            again, _, _ = split_train_test(train, 1.0)
        assert np.array_equal(again.t, train.t)

    def test_invalid_fraction_rejected(self):
        ev = self.make_events(10)
        with pytest.raises(InputError, match="fraction"):
            split_train_test(ev, 0.0)
        with pytest.raises(InputError, match="fraction"):
            split_train_test(ev, 1.2)

    def test_empty_stream_rejected(self):
        with pytest.raises(InputError, match="empty"):
            split_train_test(EventBatch.empty(), 0.85)


class TestParamsDocuments:
    def all_params(self):
        rng = np.random.default_rng(0)
        basis = StepBasis(3, period=2.0)
        return [
            HomPoissonParams(rng.uniform(0.1, 1.0, (2, 2))),
            InhomPoissonParams(rng.uniform(0.1, 1.0, (2, 2, 3)), basis),
            HomHawkesParams(
                rng.uniform(0.1, 0.5, (2, 2)), rng.uniform(0.1, 0.4, (2, 2)), 1.3
            ),
            InhomHawkesParams(
                rng.uniform(0.1, 0.5, (2, 2, 3)), basis,
                rng.uniform(0.1, 0.4, (2, 2)), 0.8,
            ),
        ]

    def test_round_trip_each_kind(self):
        for params in self.all_params():
            back = params_from_dict(params.kind, params_to_dict(params))
            assert back.kind == params.kind
            for name in ("rates", "coefs", "baseline", "excite"):
                if hasattr(params, name):
                    np.testing.assert_array_equal(
                        getattr(back, name), getattr(params, name)
                    )
            if hasattr(params, "decay"):
                assert back.decay == params.decay
            if hasattr(params, "basis"):
                assert back.basis.H == params.basis.H
                assert back.basis.period == params.basis.period

    def test_missing_key_rejected(self):
        with pytest.raises(InputError, match="missing"):
            params_from_dict("hom-hawkes", {"baseline": [[0.5]]})

    def test_unknown_model_rejected(self):
        with pytest.raises(InputError, match="unknown model"):
            params_from_dict("semi-markov", {})


class TestFitJson:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        params = HomPoissonParams(rng.uniform(0.1, 1.0, (3, 3)))
        tau = rng.dirichlet(np.ones(3), size=8)
        pi = tau.mean(axis=0)
        path = str(tmp_path / "fit.json")
        write_fit_json(path, params, pi, tau, {"seed": 4, "dt": 2.0})
        doc = read_fit_json(path)
        assert doc.model == "hom-poisson"
        np.testing.assert_allclose(doc.tau, tau)
        np.testing.assert_allclose(doc.pi, pi)
        np.testing.assert_array_equal(doc.z_hat, tau.argmax(axis=1))
        assert doc.config["seed"] == 4

    def test_missing_key_rejected(self, tmp_path):
        path = write(tmp_path, "fit.json", '{"model": "hom-poisson"}')
        with pytest.raises(InputError, match="missing key"):
            read_fit_json(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = write(tmp_path, "fit.json", "{nope")
        with pytest.raises(InputError, match="invalid JSON"):
            read_fit_json(path)


class TestTruthJson:
    def test_round_trip_with_dense_nodes(self, tmp_path):
        params = HomHawkesParams(
            np.full((2, 2), 0.3), np.full((2, 2), 0.2), 1.0
        )
        path = str(tmp_path / "truth.json")
        write_truth_json(
            path, params, np.array([0.6, 0.4]), np.array([0, 1, 1]),
            np.array([0, 2]), 12.0, 9, config={"m": 3},
        )
        doc = read_truth_json(path)
        assert doc.model == "hom-hawkes"
        np.testing.assert_array_equal(doc.z_star, [0, 1, 1])
        np.testing.assert_array_equal(doc.dense_nodes, [0, 2])
        assert doc.T == 12.0 and doc.seed == 9

    def test_dense_nodes_optional(self, tmp_path):
        params = HomPoissonParams(np.full((2, 2), 0.5))
        path = str(tmp_path / "truth.json")
        write_truth_json(
            path, params, np.array([0.5, 0.5]), np.array([0, 1]), None, 5.0, 0
        )
        assert read_truth_json(path).dense_nodes is None


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        from types import SimpleNamespace

        rng = np.random.default_rng(8)
        records = [
            SimpleNamespace(
                n=i + 1,
                n_events=int(rng.integers(0, 50)),
                eta=float(rng.uniform(1e-4, 1e-2)),
                elbo_norm=float(rng.normal()),
                loglik_norm=float(rng.normal()),
            )
            for i in range(6)
        ]
        path = str(tmp_path / "trace.csv")
        write_trace_csv(path, records)
        cols = read_trace_csv(path)
        np.testing.assert_array_equal(cols["window"], [r.n for r in records])
        assert np.array_equal(cols["eta"], [r.eta for r in records])
        assert np.array_equal(cols["elbo_norm"], [r.elbo_norm for r in records])

    def test_missing_header_rejected(self, tmp_path):
        path = write(tmp_path, "trace.csv", "1,2,3,4,5\n")
        with pytest.raises(InputError, match="header"):
            read_trace_csv(path)


class TestConfigFile:
    def test_grammar(self, tmp_path):
        path = write(
            tmp_path, "run.cfg",
            "# full-line comment\n"
            "model = hom-poisson\n"
            "\n"
            "k=3   # trailing comment\n"
            "train-fraction = 0.85\n"
            "k=4\n",
        )
        cfg = parse_config_file(path)
        assert cfg == {"model": "hom-poisson", "k": "4", "train_fraction": "0.85"}

    def test_missing_equals_cites_line(self, tmp_path):
        path = write(tmp_path, "run.cfg", "model = ok\njust words\n")
        with pytest.raises(InputError, match="line 2"):
            parse_config_file(path)

    def test_empty_key_rejected(self, tmp_path):
        path = write(tmp_path, "run.cfg", "= value\n")
        with pytest.raises(InputError, match="empty key"):
            parse_config_file(path)
