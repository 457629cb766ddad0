"""One-pass online variational inference over time windows.

Each window n is processed in two moves. The approximation move folds
the window's expected conditional log-likelihood increments into the
per-node cumulative evidence logS and refreshes the responsibilities

    tau_ik  ∝  pi_k * exp(logS_ik),

then the mixing weights pi. The update move ascends the expected
window log-likelihood in the parameters with a decaying step, projected
back to the positive floor. Evidence is kept in log space and each row
of logS is re-centered at its maximum after every window; the shift is
a per-row constant, cancels exactly in the normalization, and keeps the
state finite on arbitrarily long streams.

The two moves want different responsibilities: the evidence increment
is contracted with the pre-update tau, the gradient with the freshly
updated one. The window kernel returns tau-independent tensors, so both
contractions share a single pass over the events.

Memory never grows with the stream: the state is (m x K) twice, pi,
the parameters, and the history store (per-pair counts for Poisson,
R-recent timestamp queues for Hawkes).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .basis import StepBasis
from .errors import InputError, NumericError
from .events import EdgeList, EventBatch, WindowConfig, partition_windows
from .history import COUNTS, QUEUES, HistoryStore, trim_history
from .likelihood import (
    contract_dlogs,
    contract_grads,
    contract_value,
    step_params,
    window_terms,
)
from .params import EPS_FLOOR, InitRanges, ModelParams, init_params, is_hawkes

_SUB_INIT = 3


@dataclass
class LatentState:
    """Variational state: responsibilities, cumulative log-evidence, weights."""

    tau: np.ndarray  # (m, K), rows on the simplex
    logS: np.ndarray  # (m, K), finite
    pi: np.ndarray  # (K,), on the simplex
    n_processed: int = 0

    @property
    def m(self) -> int:
        return self.tau.shape[0]

    @property
    def K(self) -> int:
        return self.tau.shape[1]

    def copy(self) -> "LatentState":
        return LatentState(
            self.tau.copy(), self.logS.copy(), self.pi.copy(), self.n_processed
        )

    def z_hat(self) -> np.ndarray:
        """Hard memberships: argmax responsibilities, lowest index on ties."""
        return np.argmax(self.tau, axis=1)

    def nbytes(self) -> int:
        return self.tau.nbytes + self.logS.nbytes + self.pi.nbytes


@dataclass(frozen=True)
class StepSchedule:
    """Learning-rate schedule for the parameter update step.

    algorithm-default: eta = K^2 / (sqrt(n) * n_events), the event-count
    normalization standing in for the 1/|A| scaling (empty windows use
    n_events = 1 so eta stays finite).
    power-law: eta = c / (n^alpha * |A|).
    flat-sqrt-t: eta = c / (sqrt(T) * |A|), the constant rate tied to
    the horizon that the averaged-regret guarantee assumes.
    """

    kind: str = "algorithm-default"
    alpha: float = 0.5
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("algorithm-default", "power-law", "flat-sqrt-t"):
            raise InputError(f"unknown schedule kind {self.kind!r}")
        if not 0 < self.alpha <= 1:
            raise InputError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.c <= 0:
            raise InputError(f"c must be positive, got {self.c}")

    def eta(self, n: int, n_events: int, K: int, n_pairs: int, T: float) -> float:
        if self.kind == "algorithm-default":
            return K * K / (math.sqrt(n) * max(n_events, 1))
        if self.kind == "power-law":
            return self.c / (n**self.alpha * n_pairs)
        return self.c / (math.sqrt(T) * n_pairs)


@dataclass
class WindowRecord:
    """Per-window trace entry.

    elbo_norm is the window's variational objective (expected window
    log-likelihood plus the prior/entropy term) divided by |A|;
    loglik_norm is the expected window log-likelihood alone divided by
    |A|. Both are evaluated with the post-update responsibilities and
    the pre-update parameters (the ones the window was processed with).
    """

    n: int
    n_events: int
    eta: float
    elbo_norm: float
    loglik_norm: float


@dataclass
class WindowTrace:
    records: list = field(default_factory=list)
    param_snapshots: list = field(default_factory=list)  # (n, ModelParams)
    tau_snapshots: list = field(default_factory=list)  # (n, ndarray)

    def final_params(self) -> ModelParams:
        return self.param_snapshots[-1][1]


@dataclass
class OnlineFit:
    params: ModelParams
    state: LatentState
    trace: WindowTrace
    store: HistoryStore
    peak_state_nbytes: int
    wall_time_s: float


def params_nbytes(params: ModelParams) -> int:
    total = 0
    for name in ("rates", "coefs", "baseline", "excite"):
        if hasattr(params, name):
            total += getattr(params, name).nbytes
    if hasattr(params, "decay"):
        total += 8
    return total


def init_state(
    m: int,
    K: int,
    seed: int,
    mode: str = "one-hot",
    model_kind: str = "hom-poisson",
    basis: StepBasis | None = None,
    ranges: InitRanges = InitRanges(),
) -> tuple:
    """Draw the initial variational state and parameters.

    one-hot: each tau row is a uniform-random vertex of the simplex.
    soft-jitter: rows are 1/K plus uniform(+-0.01/K) noise, renormalized.
    logS starts at log(1/K), pi at 1/K, parameters uniform in the
    configured ranges.
    """
    if K < 1:
        raise InputError(f"K must be >= 1, got {K}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, _SUB_INIT)))
    if mode == "one-hot":
        tau = np.zeros((m, K))
        tau[np.arange(m), rng.integers(0, K, m)] = 1.0
    elif mode == "soft-jitter":
        tau = 1.0 / K + rng.uniform(-0.01 / K, 0.01 / K, (m, K))
        tau /= tau.sum(axis=1, keepdims=True)
    else:
        raise InputError(f"unknown init mode {mode!r}")
    state = LatentState(
        tau=tau,
        logS=np.full((m, K), -math.log(K)),
        pi=np.full(K, 1.0 / K),
    )
    params = init_params(model_kind, K, rng, basis=basis, ranges=ranges)
    return state, params


def default_trim_radius(params: ModelParams) -> float:
    """Queue truncation radius: kernel weight beyond it is e^-10 < 5e-5."""
    if not is_hawkes(params):
        return math.inf
    return float(math.ceil(10.0 / params.decay))


def _entropy_prior_term(tau: np.ndarray, pi: np.ndarray) -> float:
    # sum tau * (log pi - log tau) with the 0 log 0 = 0 convention
    with np.errstate(divide="ignore", invalid="ignore"):
        term = tau * (np.log(pi)[None, :] - np.log(tau))
    return float(np.sum(np.where(tau > 0, term, 0.0)))


def _process(
    state: LatentState,
    params: ModelParams,
    store: HistoryStore,
    batch: EventBatch,
    edges: EdgeList,
    schedule: StepSchedule,
    n: int,
    cfg: WindowConfig,
    eps: float = EPS_FLOOR,
    pi_freeze: bool = False,
):
    if n != state.n_processed + 1:
        raise InputError(
            f"window {n} out of order; expected {state.n_processed + 1}"
        )
    bounds = cfg.bounds(n)
    hawkes = is_hawkes(params)
    if hawkes:
        trim_history(store, store.R, bounds[1], batch)
    terms = window_terms(
        params, batch, edges, bounds, store=store if hawkes else None
    )

    # approximation move: evidence with the pre-update tau, then tau, then pi
    dlogs = contract_dlogs(terms, params, state.tau, edges)
    logS = state.logS + dlogs
    logS -= logS.max(axis=1, keepdims=True)
    u = np.log(np.maximum(state.pi, 1e-300))[None, :] + logS
    u -= u.max(axis=1, keepdims=True)
    tau = np.exp(u)
    tau /= tau.sum(axis=1, keepdims=True)
    pi = state.pi if pi_freeze else tau.mean(axis=0)

    # update move: ascend the expected window log-likelihood at the new tau
    eta = schedule.eta(n, len(batch), state.K, edges.n_pairs, cfg.T)
    grads = contract_grads(terms, params, tau, edges)
    new_params = step_params(params, grads, eta, eps)

    if not hawkes and store.kind == COUNTS:
        store.add_counts(batch.src, batch.dst)

    if not np.all(np.isfinite(tau)) or not np.all(np.isfinite(logS)):
        raise NumericError(f"non-finite variational state after window {n}")

    new_state = LatentState(tau=tau, logS=logS, pi=pi, n_processed=n)
    value = contract_value(terms, params, tau, edges)
    record = WindowRecord(
        n=n,
        n_events=len(batch),
        eta=eta,
        elbo_norm=(value + _entropy_prior_term(tau, pi)) / edges.n_pairs,
        loglik_norm=value / edges.n_pairs,
    )
    return new_state, new_params, store, record


def process_window(
    state: LatentState,
    params: ModelParams,
    store: HistoryStore,
    batch: EventBatch,
    edges: EdgeList,
    schedule: StepSchedule,
    n: int,
    cfg: WindowConfig,
    eps: float = EPS_FLOOR,
    pi_freeze: bool = False,
):
    """Process window n: evidence and tau/pi refresh, then a gradient step.

    Returns the updated (state, params, store). Windows must arrive in
    order n = 1..N; the store is mutated in place.
    """
    new_state, new_params, store, _ = _process(
        state, params, store, batch, edges, schedule, n, cfg, eps, pi_freeze
    )
    return new_state, new_params, store


def run_online(
    events,
    edges: EdgeList,
    K: int,
    cfg: WindowConfig,
    schedule: StepSchedule,
    model_kind: str,
    seed: int,
    *,
    init_mode: str = "one-hot",
    basis: StepBasis | None = None,
    ranges: InitRanges = InitRanges(),
    params0: ModelParams | None = None,
    state0: LatentState | None = None,
    R: float | None = None,
    eps: float = EPS_FLOOR,
    pi_freeze: bool = False,
    param_snapshot_every: int = 1,
    tau_snapshot_every: int | None = None,
) -> OnlineFit:
    """Single pass over the windows of an event stream.

    `events` is either an in-memory EventBatch (windowed here) or an
    iterable of (window-index, EventBatch) pairs from a streaming
    reader. Peak working-state size is tracked per window; it depends on
    m, K, |A| and (for Hawkes) the R-recent event counts, never on the
    total stream length.

    `params0` / `state0` override the seeded random initialization with
    an explicit warm start (e.g. for local-convergence experiments or
    resuming a fit); whatever is not overridden is still drawn from the
    seed as usual.
    """
    t_start = time.perf_counter()
    state, params = init_state(
        edges.m, K, seed, mode=init_mode, model_kind=model_kind,
        basis=basis, ranges=ranges,
    )
    if params0 is not None:
        if params0.kind != model_kind or params0.K != K:
            raise InputError(
                f"params0 is {params0.kind} with K={params0.K}, "
                f"expected {model_kind} with K={K}"
            )
        params = params0.copy()
    if state0 is not None:
        if state0.tau.shape != (edges.m, K):
            raise InputError(
                f"state0 tau has shape {state0.tau.shape}, "
                f"expected {(edges.m, K)}"
            )
        state = state0.copy()
    hawkes = is_hawkes(params)
    if R is None:
        R = default_trim_radius(params)
    store = HistoryStore.for_edges(edges, QUEUES if hawkes else COUNTS, R=R)
    if tau_snapshot_every is None:
        tau_snapshot_every = max(1, cfg.N // 20)
    trace = WindowTrace()
    peak = 0
    if isinstance(events, EventBatch):
        window_iter = partition_windows(events, cfg)
    else:
        window_iter = events
    for n, batch in window_iter:
        state, params, store, record = _process(
            state, params, store, batch, edges, schedule, n, cfg, eps, pi_freeze
        )
        trace.records.append(record)
        if n % param_snapshot_every == 0 or n == cfg.N:
            trace.param_snapshots.append((n, params.copy()))
        if n % tau_snapshot_every == 0 or n == cfg.N:
            trace.tau_snapshots.append((n, state.tau.copy()))
        size = state.nbytes() + params_nbytes(params) + store.state_nbytes()
        peak = max(peak, size)
    if state.n_processed != cfg.N:
        raise InputError(
            f"stream ended at window {state.n_processed}, expected {cfg.N}"
        )
    return OnlineFit(
        params=params,
        state=state,
        trace=trace,
        store=store,
        peak_state_nbytes=peak,
        wall_time_s=time.perf_counter() - t_start,
    )
