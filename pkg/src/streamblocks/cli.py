"""Command-line entry point and experiment orchestration.

Subcommands: simulate | fit-online | fit-batch | predict | evaluate | compare.

Options can come from three places, in decreasing precedence: explicit
CLI flags, a ``--config`` file of ``key=value`` lines (keys are the long
option names, hyphen/underscore equivalent), and built-in defaults.
Structured outputs are JSON, traces and tables are CSV, and the report
paths (evaluate, compare) render PNG figures next to the delimited
files. Exit codes: 0 success, 2 input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from . import io
from .basis import StepBasis
from .batch import batch_fit
from .errors import InputError, NumericError
from .events import EventBatch, WindowConfig, partition_windows
from .history import QUEUES, HistoryStore, trim_history
from .likelihood import full_loglik
from .metrics import (
    EvalReport,
    align_labels,
    aligned_mae,
    intensity_recovery,
    nmi,
    observed_counts,
    predict_counts,
    r_dense,
    rmse_link_prediction,
)
from .online import StepSchedule, run_online
from .params import (
    EPS_FLOOR,
    HAWKES_KINDS,
    InitRanges,
    ModelParams,
)
from .simulate import (
    DEFAULT_HAWKES_BASELINE_K3,
    DEFAULT_HAWKES_DECAY,
    DEFAULT_HAWKES_EXCITE_K3,
    DEFAULT_PI_K3,
    DEFAULT_RATES_K3,
    EvenDegrees,
    UnevenDegrees,
    simulate_ground_truth,
)

MODEL_KINDS = ("hom-poisson", "inhom-poisson", "hom-hawkes", "inhom-hawkes")
SCHEDULE_KINDS = ("power-law", "algorithm-default", "flat-sqrt-t")
INIT_MODES = ("one-hot", "soft-jitter")


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    """Validated knobs shared by the fitting subcommands."""

    model: str = "hom-poisson"
    k: int = 3
    dt: float = 5.0
    t: float | None = None  # horizon; inferred from the data when absent
    schedule: str = "power-law"
    alpha: float = 0.5
    c: float = 0.5
    h: int = 7
    period: float | None = None  # basis period; defaults to one dt
    r: float | None = None  # trim radius; defaults to ceil(10 / initial decay)
    seed: int = 0
    train_fraction: float = 0.85
    pi_freeze: bool = False
    epsilon_floor: float = EPS_FLOOR
    init: str | None = None  # per-command default (online one-hot, batch soft-jitter)
    rate_range: tuple = (0.4, 0.6)
    excite_range: tuple = (0.25, 0.40)
    decay_range: tuple = (0.9, 1.1)

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise InputError(f"unknown model {self.model!r}; expected one of {MODEL_KINDS}")
        if self.k < 1:
            raise InputError(f"class count k must be >= 1, got {self.k}")
        if self.dt <= 0:
            raise InputError(f"window length dt must be positive, got {self.dt}")
        if self.t is not None and self.t <= 0:
            raise InputError(f"horizon t must be positive, got {self.t}")
        StepSchedule(self.schedule, alpha=self.alpha, c=self.c)  # validates
        if self.h < 1:
            raise InputError(f"basis size h must be >= 1, got {self.h}")
        if self.period is not None and self.period <= 0:
            raise InputError(f"basis period must be positive, got {self.period}")
        if self.r is not None and self.r <= 0:
            raise InputError(f"trim radius r must be positive, got {self.r}")
        if not 0 < self.train_fraction <= 1:
            raise InputError(
                f"train fraction must be in (0, 1], got {self.train_fraction}"
            )
        if self.epsilon_floor <= 0:
            raise InputError(
                f"epsilon floor must be positive, got {self.epsilon_floor}"
            )
        if self.init is not None and self.init not in INIT_MODES:
            raise InputError(f"unknown init mode {self.init!r}")
        for name in ("rate_range", "excite_range", "decay_range"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (float(lo), float(hi)))
            if not lo <= hi:
                raise InputError(f"{name} must satisfy lo <= hi, got ({lo}, {hi})")
            floor = 0.0 if name == "excite_range" else 1e-12
            if lo < floor:
                raise InputError(f"{name} lower bound must be >= {floor}")

    def basis(self) -> StepBasis | None:
        if self.model in ("inhom-poisson", "inhom-hawkes"):
            return StepBasis(self.h, self.period if self.period is not None else self.dt)
        return None

    def ranges(self) -> InitRanges:
        return InitRanges(
            rate=self.rate_range, excite=self.excite_range, decay=self.decay_range
        )

    def step_schedule(self) -> StepSchedule:
        return StepSchedule(self.schedule, alpha=self.alpha, c=self.c)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "k": self.k,
            "dt": self.dt,
            "t": self.t,
            "schedule": self.schedule,
            "alpha": self.alpha,
            "c": self.c,
            "h": self.h,
            "period": self.period,
            "r": self.r,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "pi_freeze": self.pi_freeze,
            "epsilon_floor": self.epsilon_floor,
            "init": self.init,
            "rate_range": list(self.rate_range),
            "excite_range": list(self.excite_range),
            "decay_range": list(self.decay_range),
        }


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise InputError(f"expected a boolean, got {text!r}")


def _parse_pair(text: str) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise InputError(f"expected two numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


_CONFIG_PARSERS = {
    "model": str,
    "k": int,
    "dt": float,
    "t": float,
    "schedule": str,
    "alpha": float,
    "c": float,
    "h": int,
    "period": float,
    "r": float,
    "seed": int,
    "train_fraction": float,
    "pi_freeze": _parse_bool,
    "epsilon_floor": float,
    "init": str,
    "rate_range": _parse_pair,
    "excite_range": _parse_pair,
    "decay_range": _parse_pair,
}


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge CLI flags over config-file values over defaults."""
    from_file: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        for key, text in io.parse_config_file(config_path).items():
            if key not in _CONFIG_PARSERS:
                raise InputError(
                    f"{config_path}: unknown config key {key!r}; "
                    f"known keys: {', '.join(sorted(_CONFIG_PARSERS))}"
                )
            try:
                from_file[key] = _CONFIG_PARSERS[key](text)
            except ValueError as exc:
                raise InputError(f"{config_path}: key {key!r}: {exc}") from None
    kwargs = {}
    for key in _CONFIG_PARSERS:
        value = getattr(args, key, None)
        if value is None:
            value = from_file.get(key)
        if value is not None:
            if key.endswith("_range"):
                value = tuple(value)
            kwargs[key] = value
    return RunConfig(**kwargs)


# ---------------------------------------------------------------------------
# shared helpers


def _ensure_outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _select_events(events: EventBatch, mask: np.ndarray) -> EventBatch:
    idx = np.nonzero(mask)[0]
    return EventBatch(events.src[idx], events.dst[idx], events.t[idx])


def _primary_matrix(params: ModelParams) -> np.ndarray:
    """The K x K base-rate summary a fit is judged on.

    Homogeneous families expose it directly; the inhomogeneous ones are
    summarized by the time-averaged base rate (the basis steps have
    equal measure over a period).
    """
    if params.kind == "hom-poisson":
        return params.rates
    if params.kind == "hom-hawkes":
        return params.baseline
    return params.coefs.mean(axis=2)


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _history_store(model: str, edges, events_path, fmt, t0):
    """All-history store holding the pre-horizon events of a file."""
    if model not in HAWKES_KINDS:
        return None
    store = HistoryStore.for_edges(edges, QUEUES, R=np.inf)
    if events_path:
        hist = io.parse_events(events_path, fmt)
        hi = int(np.searchsorted(hist.t, t0, side="left"))
        pre = hist[:hi]
        if len(pre):
            keep = edges.contains(pre.src, pre.dst)
            if not np.all(keep):
                warnings.warn(
                    f"ignoring {int((~keep).sum())} history events on pairs "
                    "outside the edge list"
                )
                pre = _select_events(pre, keep)
            trim_history(store, np.inf, t0, pre)
    return store


# ---------------------------------------------------------------------------
# simulate


def _default_truth_params(cfg: RunConfig) -> ModelParams:
    K = cfg.k
    basis = cfg.basis()
    if K == 3:
        rates = DEFAULT_RATES_K3
        baseline = DEFAULT_HAWKES_BASELINE_K3
        excite = DEFAULT_HAWKES_EXCITE_K3
    else:
        rates = np.full((K, K), 0.1) + 0.5 * np.eye(K)
        baseline = np.full((K, K), 0.05) + 0.25 * np.eye(K)
        excite = np.full((K, K), 0.1) + 0.2 * np.eye(K)
    if cfg.model == "hom-poisson":
        return io.params_from_dict("hom-poisson", {"rates": rates.tolist()})
    if cfg.model == "hom-hawkes":
        return io.params_from_dict(
            "hom-hawkes",
            {
                "baseline": baseline.tolist(),
                "excite": excite.tolist(),
                "decay": DEFAULT_HAWKES_DECAY,
            },
        )
    factors = np.linspace(0.5, 1.5, basis.H) if basis.H > 1 else np.ones(1)
    if cfg.model == "inhom-poisson":
        coefs = rates[:, :, None] * factors
        return io.params_from_dict(
            "inhom-poisson",
            {"coefs": coefs.tolist(), "H": basis.H, "period": basis.period},
        )
    coefs = baseline[:, :, None] * factors
    return io.params_from_dict(
        "inhom-hawkes",
        {
            "coefs": coefs.tolist(),
            "H": basis.H,
            "period": basis.period,
            "excite": excite.tolist(),
            "decay": DEFAULT_HAWKES_DECAY,
        },
    )


def cmd_simulate(args: argparse.Namespace) -> None:
    cfg = build_run_config(args)
    if cfg.t is None:
        raise InputError("simulate needs an explicit horizon: pass --t")
    if args.m is None or args.m < 2:
        raise InputError("simulate needs --m >= 2")
    if args.params:
        with open(args.params, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{args.params}: invalid JSON: {exc}") from None
        params = io.params_from_dict(cfg.model, doc.get("params", doc))
    else:
        params = _default_truth_params(cfg)
    if params.K != cfg.k:
        raise InputError(f"params have K={params.K} but k={cfg.k} was requested")
    if args.pi is not None:
        pi = np.asarray([float(p) for p in args.pi.split(",")])
    elif cfg.k == 3:
        pi = DEFAULT_PI_K3
    else:
        pi = np.full(cfg.k, 1.0 / cfg.k)
    if args.scenario == "even":
        scenario = EvenDegrees(args.degree)
        scenario_doc = {"scenario": "even", "degree": args.degree}
    else:
        scenario = UnevenDegrees(
            N_u=args.n_dense, d_dense=args.dense_degree, d_sparse=args.sparse_degree
        )
        d_dense, d_sparse = scenario.resolve(args.m)
        scenario_doc = {
            "scenario": "uneven",
            "n_dense": args.n_dense,
            "dense_degree": d_dense,
            "sparse_degree": d_sparse,
        }
    truth = simulate_ground_truth(params, args.m, pi, scenario, cfg.t, cfg.seed)
    out = _ensure_outdir(args.out)
    io.write_events_csv(os.path.join(out, "events.csv"), truth.events)
    io.write_edge_csv(os.path.join(out, "edges.csv"), truth.edges)
    io.write_truth_json(
        os.path.join(out, "truth.json"),
        params,
        pi,
        truth.z_star,
        truth.dense_nodes,
        cfg.t,
        cfg.seed,
        config={**cfg.to_dict(), "m": args.m, **scenario_doc},
    )
    print(
        f"simulate: {len(truth.events)} events on {truth.edges.n_pairs} pairs "
        f"(m={args.m}, T={cfg.t:g}, model={cfg.model}) -> {out}"
    )


# ---------------------------------------------------------------------------
# fitting


def cmd_fit_online(args: argparse.Namespace) -> None:
    cfg = build_run_config(args)
    fmt = args.format
    T = cfg.t if cfg.t is not None else io.infer_horizon(args.events, fmt)
    wcfg = WindowConfig(cfg.dt, T)
    derived = args.edges is None
    edges = (
        io.derive_edge_list_from_file(args.events, fmt)
        if derived
        else io.load_edge_csv(args.edges)
    )
    stream = io.stream_windows(args.events, wcfg, fmt, drop_self_loops=derived)
    fit = run_online(
        stream,
        edges,
        cfg.k,
        wcfg,
        cfg.step_schedule(),
        cfg.model,
        cfg.seed,
        init_mode=cfg.init or "one-hot",
        basis=cfg.basis(),
        ranges=cfg.ranges(),
        R=cfg.r,
        eps=cfg.epsilon_floor,
        pi_freeze=cfg.pi_freeze,
    )
    out = _ensure_outdir(args.out)
    config_doc = {**cfg.to_dict(), "t": T, "n_windows": wcfg.N}
    io.write_fit_json(
        os.path.join(out, "fit.json"), fit.params, fit.state.pi, fit.state.tau,
        config_doc,
    )
    io.write_trace_csv(os.path.join(out, "trace.csv"), fit.trace.records)
    print(
        f"fit-online: {wcfg.N} windows, m={edges.m}, |A|={edges.n_pairs}, "
        f"wall {fit.wall_time_s:.2f}s -> {out}"
    )


def cmd_fit_batch(args: argparse.Namespace) -> None:
    cfg = build_run_config(args)
    fmt = args.format
    derived = args.edges is None
    events = io.parse_events(args.events, fmt, drop_self_loops=derived)
    T = cfg.t if cfg.t is not None else (float(events.t[-1]) if len(events) else 0.0)
    if T <= 0:
        raise InputError("cannot fit an empty stream without an explicit --t")
    wcfg = WindowConfig(cfg.dt, T)
    edges = io.derive_edge_list(events) if derived else io.load_edge_csv(args.edges)
    rep = batch_fit(
        events,
        edges,
        cfg.k,
        wcfg,
        model_kind=cfg.model,
        seed=cfg.seed,
        max_iters=args.max_iters,
        tol=args.tol,
        basis=cfg.basis(),
        ranges=cfg.ranges(),
        init_mode=cfg.init or "soft-jitter",
        restarts=args.restarts,
        eps=cfg.epsilon_floor,
    )
    out = _ensure_outdir(args.out)
    config_doc = {**cfg.to_dict(), "t": T, "max_iters": rep.n_iters, "converged": rep.converged}
    io.write_fit_json(
        os.path.join(out, "fit.json"), rep.params, rep.pi, rep.tau, config_doc
    )
    rows = [
        SimpleNamespace(
            n=i,
            n_events=len(events),
            eta=0.0,
            elbo_norm=e / edges.n_pairs,
            loglik_norm=l / edges.n_pairs,
        )
        for i, (e, l) in enumerate(zip(rep.elbo_trace, rep.loglik_trace))
    ]
    io.write_trace_csv(os.path.join(out, "trace.csv"), rows)
    print(
        f"fit-batch: {rep.n_iters} iterations "
        f"({'converged' if rep.converged else 'iteration cap'}), m={edges.m}, "
        f"|A|={edges.n_pairs}, wall {rep.wall_time_s:.2f}s -> {out}"
    )


# ---------------------------------------------------------------------------
# predict / evaluate / compare


def cmd_predict(args: argparse.Namespace) -> None:
    doc = io.read_fit_json(args.fit)
    edges = io.load_edge_csv(args.edges)
    if doc.tau.shape[0] != edges.m:
        raise InputError(
            f"fit document has m={doc.tau.shape[0]} nodes but the edge list has "
            f"m={edges.m}"
        )
    t0, t1 = args.t_from, args.t_to
    if t1 <= t0:
        raise InputError(f"prediction horizon reversed: ({t0:g}, {t1:g})")
    store = _history_store(doc.model, edges, args.events, args.format, t0)
    pred = predict_counts(
        doc.params,
        doc.tau,
        edges,
        (t0, t1),
        store=store,
        mode=args.mode,
        n_paths=args.paths,
        seed=args.seed if args.seed is not None else 0,
    )
    out_path = args.out
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("src,dst,predicted\n")
        for s, d, c in zip(edges.src, edges.dst, pred):
            fh.write(f"{int(s)},{int(d)},{repr(float(c))}\n")
    print(f"predict: {edges.n_pairs} pairs over [{t0:g}, {t1:g}) -> {out_path}")


def cmd_evaluate(args: argparse.Namespace) -> None:
    if not args.truth and not args.test:
        raise InputError("evaluate needs --truth and/or --test")
    from . import figures

    doc = io.read_fit_json(args.fit)
    out = _ensure_outdir(args.out)
    report: dict = {}
    summary_bits = []

    if args.truth:
        tr = io.read_truth_json(args.truth)
        if tr.z_star.shape[0] != doc.z_hat.shape[0]:
            raise InputError(
                f"truth has {tr.z_star.shape[0]} nodes but the fit has "
                f"{doc.z_hat.shape[0]}"
            )
        report["nmi"] = nmi(doc.z_hat, tr.z_star)
        summary_bits.append(f"NMI {report['nmi']:.3f}")
        B_true = _primary_matrix(tr.params)
        B_hat = _primary_matrix(doc.params)
        if B_true.shape == B_hat.shape:
            K = B_true.shape[0]
            report["intensity_recovery"] = intensity_recovery(B_true, B_hat)
            perm = align_labels(doc.z_hat, tr.z_star, K)
            report["aligned_mae"] = aligned_mae(B_true, B_hat, perm)
            inv = np.argsort(perm)
            aligned = B_hat[inv][:, inv]
            with open(os.path.join(out, "report_cells.csv"), "w", encoding="utf-8") as fh:
                fh.write("k,l,true,fitted\n")
                for k in range(K):
                    for l in range(K):
                        fh.write(
                            f"{k},{l},{repr(float(B_true[k, l]))},"
                            f"{repr(float(aligned[k, l]))}\n"
                        )
            figures.render_rate_matrices(
                aligned, os.path.join(out, "report_rates.png"), B_true=B_true
            )
        if tr.dense_nodes is not None and len(tr.dense_nodes):
            report["r_dense"] = r_dense(doc.z_hat, tr.z_star, tr.dense_nodes)
            summary_bits.append(f"R_dense {report['r_dense']:.3f}")
        figures.render_membership(doc.tau, os.path.join(out, "report_membership.png"))

    if args.test:
        if not args.edges:
            raise InputError("evaluate --test needs --edges for the pair set")
        edges = io.load_edge_csv(args.edges)
        if doc.tau.shape[0] != edges.m:
            raise InputError(
                f"fit document has m={doc.tau.shape[0]} nodes but the edge list "
                f"has m={edges.m}"
            )
        test = io.parse_events(args.test, args.format)
        if not len(test):
            raise InputError(f"{args.test}: no events to evaluate against")
        keep = edges.contains(test.src, test.dst)
        if not np.all(keep):
            warnings.warn(
                f"ignoring {int((~keep).sum())} test events on pairs outside "
                "the edge list"
            )
            test = _select_events(test, keep)
        t0 = args.t_from if args.t_from is not None else float(test.t[0])
        t1 = (
            args.t_to
            if args.t_to is not None
            else float(np.nextafter(test.t[-1], np.inf))
        )
        store = _history_store(doc.model, edges, args.events, args.format, t0)
        pred = predict_counts(doc.params, doc.tau, edges, (t0, t1), store=store)
        obs = observed_counts(test, edges, (t0, t1))
        report["rmse"] = rmse_link_prediction(pred, obs)
        summary_bits.append(f"RMSE {report['rmse']:.4f}")
        with open(os.path.join(out, "predictions.csv"), "w", encoding="utf-8") as fh:
            fh.write("src,dst,predicted,observed\n")
            for s, d, p, o in zip(edges.src, edges.dst, pred, obs):
                fh.write(f"{int(s)},{int(d)},{repr(float(p))},{repr(float(o))}\n")

    if args.trace:
        trace = io.read_trace_csv(args.trace)
        figures.render_trace(trace, os.path.join(out, "report_trace.png"))

    EvalReport(
        nmi=report.get("nmi"),
        intensity_recovery=report.get("intensity_recovery"),
        rmse=report.get("rmse"),
        r_dense=report.get("r_dense"),
        aligned_mae=report.get("aligned_mae"),
    )
    _write_json(os.path.join(out, "report.json"), report)
    print(f"evaluate: {', '.join(summary_bits) or 'no scores'} -> {out}")


def cmd_compare(args: argparse.Namespace) -> None:
    cfg = build_run_config(args)
    from . import figures

    fmt = args.format
    derived = args.edges is None
    events = io.parse_events(args.events, fmt, drop_self_loops=derived)
    if not len(events):
        raise InputError(f"{args.events}: no events")
    train, test, t_split = io.split_train_test(events, cfg.train_fraction)
    edges = io.derive_edge_list(train) if derived else io.load_edge_csv(args.edges)
    wcfg = WindowConfig(cfg.dt, t_split)

    onfit = run_online(
        partition_windows(train, wcfg),
        edges,
        cfg.k,
        wcfg,
        cfg.step_schedule(),
        cfg.model,
        cfg.seed,
        init_mode=cfg.init or "one-hot",
        basis=cfg.basis(),
        ranges=cfg.ranges(),
        R=cfg.r,
        eps=cfg.epsilon_floor,
        pi_freeze=cfg.pi_freeze,
    )
    brep = batch_fit(
        train,
        edges,
        cfg.k,
        wcfg,
        model_kind=cfg.model,
        seed=cfg.seed,
        max_iters=args.max_iters,
        tol=args.tol,
        basis=cfg.basis(),
        ranges=cfg.ranges(),
        init_mode="soft-jitter",
        restarts=args.restarts,
        eps=cfg.epsilon_floor,
    )
    z_on = np.argmax(onfit.state.tau, axis=1)
    ll_on = full_loglik(onfit.params, z_on, train, edges, t_split)
    ll_b = full_loglik(brep.params, brep.z_hat, train, edges, t_split)
    ratio = ll_on / ll_b if ll_b != 0 else float("nan")

    rmse_on = rmse_b = float("nan")
    if len(test):
        keep = edges.contains(test.src, test.dst)
        if not np.all(keep):
            warnings.warn(
                f"ignoring {int((~keep).sum())} held-out events on pairs outside "
                "the training edge set"
            )
            test = _select_events(test, keep)
    if len(test):
        t0 = float(np.nextafter(t_split, np.inf))  # boundary events are history
        t1 = float(np.nextafter(test.t[-1], np.inf))
        store = None
        if cfg.model in HAWKES_KINDS:
            store = HistoryStore.for_edges(edges, QUEUES, R=np.inf)
            trim_history(store, np.inf, t0, train)
        obs = observed_counts(test, edges, (t0, t1))
        pred_on = predict_counts(onfit.params, onfit.state.tau, edges, (t0, t1), store=store)
        pred_b = predict_counts(brep.params, brep.tau, edges, (t0, t1), store=store)
        rmse_on = rmse_link_prediction(pred_on, obs)
        rmse_b = rmse_link_prediction(pred_b, obs)
    else:
        warnings.warn("empty held-out split; link-prediction RMSE not computed")

    out = _ensure_outdir(args.out)
    rows = [
        ("online", onfit.wall_time_s, rmse_on, ll_on),
        ("batch", brep.wall_time_s, rmse_b, ll_b),
    ]
    with open(os.path.join(out, "compare.csv"), "w", encoding="utf-8") as fh:
        fh.write("method,wall_time_s,link_rmse,loglik\n")
        for name, wall, rmse, ll in rows:
            fh.write(f"{name},{repr(float(wall))},{repr(float(rmse))},{repr(float(ll))}\n")
    _write_json(
        os.path.join(out, "compare_summary.json"),
        {
            "loglik_ratio_online_over_batch": ratio,
            "online_faster": onfit.wall_time_s < brep.wall_time_s,
            "t_split": t_split,
            "n_train": len(train),
            "n_test": len(test),
        },
    )
    config_doc = {**cfg.to_dict(), "t": t_split}
    io.write_fit_json(
        os.path.join(out, "fit_online.json"), onfit.params, onfit.state.pi,
        onfit.state.tau, config_doc,
    )
    io.write_fit_json(
        os.path.join(out, "fit_batch.json"), brep.params, brep.pi, brep.tau,
        config_doc,
    )
    figures.render_compare(rows, os.path.join(out, "compare.png"))
    for name, wall, rmse, ll in rows:
        print(f"{name:>7}: time {wall:8.2f}s | link-pred {rmse:10.4f} | log-lik {ll:14.2f}")
    print(f"log-lik ratio online/batch: {ratio:.4f} -> {out}")


# ---------------------------------------------------------------------------
# parser


def _add_run_options(p: argparse.ArgumentParser, *, online: bool) -> None:
    g = p.add_argument_group("model configuration")
    g.add_argument("--config", metavar="FILE", help="key=value config file")
    g.add_argument("--model", choices=MODEL_KINDS, help="intensity family")
    g.add_argument("--k", type=int, help="number of latent classes")
    g.add_argument("--dt", type=float, help="window length")
    g.add_argument("--t", type=float, help="horizon (default: inferred from data)")
    g.add_argument("--seed", type=int, help="seed for all randomness")
    g.add_argument("--h", type=int, help="step-basis size for inhom models")
    g.add_argument("--period", type=float, help="step-basis period (default: one dt)")
    g.add_argument("--epsilon-floor", type=float, dest="epsilon_floor")
    g.add_argument("--init", choices=INIT_MODES, help="responsibility init mode")
    g.add_argument("--rate-range", type=float, nargs=2, dest="rate_range",
                   metavar=("LO", "HI"), help="uniform init range for base rates")
    g.add_argument("--excite-range", type=float, nargs=2, dest="excite_range",
                   metavar=("LO", "HI"))
    g.add_argument("--decay-range", type=float, nargs=2, dest="decay_range",
                   metavar=("LO", "HI"))
    if online:
        g.add_argument("--schedule", choices=SCHEDULE_KINDS, help="step-size schedule")
        g.add_argument("--alpha", type=float, help="power-law schedule exponent")
        g.add_argument("--c", type=float, help="schedule scale constant")
        g.add_argument("--r", type=float, help="history trim radius (time units)")
        g.add_argument("--pi-freeze", action="store_const", const=True, default=None,
                       dest="pi_freeze", help="keep the class weights at their init")


def _add_batch_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("batch fitting")
    g.add_argument("--max-iters", type=int, default=None, dest="max_iters")
    g.add_argument("--tol", type=float, default=1e-3)
    g.add_argument("--restarts", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamblocks",
        description="Streaming community detection for timestamped interaction events.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a ground-truth instance and its events")
    _add_run_options(p, online=False)
    p.add_argument("--m", type=int, help="number of nodes")
    p.add_argument("--scenario", choices=("even", "uneven"), default="even")
    p.add_argument("--degree", type=int, default=40, help="out-degree (even scenario)")
    p.add_argument("--n-dense", type=int, default=100, dest="n_dense")
    p.add_argument("--dense-degree", type=int, default=None, dest="dense_degree",
                   help="default: ceil(m^0.7)")
    p.add_argument("--sparse-degree", type=int, default=3, dest="sparse_degree")
    p.add_argument("--params", metavar="FILE", help="JSON params block for the truth")
    p.add_argument("--pi", help="comma-separated class weights")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-online", help="one-pass windowed variational fit")
    p.add_argument("events", help="events CSV (or snap file with --format snap)")
    p.add_argument("--format", choices=io.EVENT_FORMATS, default="csv")
    p.add_argument("--edges", metavar="FILE", help="edge CSV (default: derive from data)")
    _add_run_options(p, online=True)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_fit_online)

    p = sub.add_parser("fit-batch", help="full-data variational EM fit")
    p.add_argument("events")
    p.add_argument("--format", choices=io.EVENT_FORMATS, default="csv")
    p.add_argument("--edges", metavar="FILE")
    _add_run_options(p, online=False)
    _add_batch_options(p)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_fit_batch)

    p = sub.add_parser("predict", help="expected counts per pair over a horizon")
    p.add_argument("--fit", required=True, metavar="FILE", help="fit-output JSON")
    p.add_argument("--edges", required=True, metavar="FILE")
    p.add_argument("--events", metavar="FILE", help="history stream (Hawkes models)")
    p.add_argument("--format", choices=io.EVENT_FORMATS, default="csv")
    p.add_argument("--from", type=float, required=True, dest="t_from")
    p.add_argument("--to", type=float, required=True, dest="t_to")
    p.add_argument("--mode", choices=("analytic", "monte-carlo"), default="analytic")
    p.add_argument("--paths", type=int, default=10**4, help="monte-carlo sample paths")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="predictions.csv", help="output CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a fit against truth and/or held-out data")
    p.add_argument("--fit", required=True, metavar="FILE")
    p.add_argument("--truth", metavar="FILE", help="ground-truth JSON")
    p.add_argument("--test", metavar="FILE", help="held-out events CSV")
    p.add_argument("--edges", metavar="FILE", help="edge CSV (needed with --test)")
    p.add_argument("--events", metavar="FILE", help="history stream (Hawkes models)")
    p.add_argument("--trace", metavar="FILE", help="fit trace CSV to render")
    p.add_argument("--format", choices=io.EVENT_FORMATS, default="csv")
    p.add_argument("--from", type=float, default=None, dest="t_from")
    p.add_argument("--to", type=float, default=None, dest="t_to")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="online vs batch on one split input")
    p.add_argument("events")
    p.add_argument("--format", choices=io.EVENT_FORMATS, default="csv")
    p.add_argument("--edges", metavar="FILE")
    _add_run_options(p, online=True)
    _add_batch_options(p)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
