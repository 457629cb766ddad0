"""Full-data variational EM baseline and an exact small-instance oracle.

The fitter here sees the whole event set at once and alternates coordinate
sweeps over the responsibilities with full-horizon parameter maximization.
It is the classical comparator for the streaming fitter: slower, revisits
every event each iteration, but climbs an explicit evidence lower bound.
A brute-force enumeration of the latent configurations backs both fitters
on instances small enough to enumerate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .basis import StepBasis
from .errors import InputError
from .events import EdgeList, EventBatch, WindowConfig
from .likelihood import (
    contract_grads,
    contract_value,
    pair_loglik_tensor,
    step_params,
    window_terms,
)
from .params import (
    EPS_FLOOR,
    HomHawkesParams,
    HomPoissonParams,
    InhomHawkesParams,
    InitRanges,
    ModelParams,
)
from .online import init_state

ENUMERATION_LIMIT = 10**6


def _check_tau(tau: np.ndarray, m: int, K: int) -> np.ndarray:
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape != (m, K):
        raise InputError(f"tau has shape {tau.shape}, expected {(m, K)}")
    if np.any(tau < -1e-12) or np.any(np.abs(tau.sum(axis=1) - 1.0) > 1e-6):
        raise InputError("tau rows must lie on the probability simplex")
    return np.clip(tau, 0.0, None)


def _mixing_term(tau: np.ndarray, pi: np.ndarray) -> float:
    """sum_ik tau_ik log(pi_k / tau_ik) with the 0 log(pi/0) = 0 convention."""
    log_pi = np.log(np.maximum(pi, 1e-300))
    safe = np.where(tau > 0.0, tau, 1.0)
    return float(np.sum(np.where(tau > 0.0, tau * (log_pi[None, :] - np.log(safe)), 0.0)))


def _pair_term(L: np.ndarray, tau: np.ndarray, edges: EdgeList) -> float:
    return float(np.einsum("pk,pl,pkl->", tau[edges.src], tau[edges.dst], L))


def elbo(
    params: ModelParams,
    tau: np.ndarray,
    pi: np.ndarray,
    events: EventBatch,
    edges: EdgeList,
    T: float,
    L: np.ndarray | None = None,
) -> float:
    """Evidence lower bound of the full horizon at (params, tau, pi).

    The expected conditional log-likelihood contracts the per-pair
    class-combination tensor with the responsibilities; the remaining
    term is the mixing entropy/prior sum. `L` lets callers reuse a
    precomputed tensor.
    """
    tau = _check_tau(tau, edges.m, params.K)
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (params.K,):
        raise InputError(f"pi has shape {pi.shape}, expected ({params.K},)")
    if L is None:
        L = pair_loglik_tensor(params, events, edges, T)
    return _pair_term(L, tau, edges) + _mixing_term(tau, pi)


def marginal_loglik_bruteforce(
    params: ModelParams,
    pi: np.ndarray,
    events: EventBatch,
    edges: EdgeList | None,
    T: float,
) -> float:
    """Exact marginal log-likelihood by enumerating all K^m assignments.

    log sum_z prod_i pi_{z_i} L(theta | z), computed as a log-sum-exp over
    the K^m configurations. Pass edges=None for an empty pair set (the
    conditional part is then log 1 for every configuration). Guarded to
    K^m <= 10^6.
    """
    pi = np.asarray(pi, dtype=np.float64)
    K = params.K
    if edges is None:
        if len(events):
            raise InputError("events supplied with an empty pair set")
        # conditional part is log 1 for every configuration; the prior
        # marginalizes to sum_k pi_k per node
        return float(np.log(np.maximum(pi.sum(), 1e-300)))
    m = edges.m
    n_configs = K**m
    if n_configs > ENUMERATION_LIMIT:
        raise InputError(
            f"K^m = {n_configs} configurations exceeds the enumeration bound {ENUMERATION_LIMIT}"
        )
    L = pair_loglik_tensor(params, events, edges, T)
    log_pi = np.log(np.maximum(pi, 1e-300))
    radix = K ** np.arange(m, dtype=np.int64)
    per_config = np.empty(n_configs)
    pair_index = np.arange(edges.n_pairs)
    chunk = max(1, min(n_configs, 4096))
    for lo in range(0, n_configs, chunk):
        idx = np.arange(lo, min(lo + chunk, n_configs), dtype=np.int64)
        z = (idx[:, None] // radix[None, :]) % K  # (C, m) mixed-radix digits
        cond = L[pair_index[None, :], z[:, edges.src], z[:, edges.dst]].sum(axis=1)
        per_config[lo : lo + idx.shape[0]] = cond + log_pi[z].sum(axis=1)
    return float(logsumexp(per_config))


@dataclass
class BatchFitReport:
    """Outcome of a variational EM run on the full horizon."""

    params: ModelParams
    tau: np.ndarray
    pi: np.ndarray
    elbo_trace: np.ndarray  # position 0 is the pre-iteration value
    loglik_trace: np.ndarray  # expected-log-likelihood part of each entry
    n_iters: int
    wall_time_s: float
    converged: bool

    @property
    def z_hat(self) -> np.ndarray:
        return self.tau.argmax(axis=1)


def _sweep_tau(
    L: np.ndarray, tau: np.ndarray, log_pi: np.ndarray, edges: EdgeList
) -> np.ndarray:
    """One sequential pass of responsibility updates (in place).

    Each row is the exact maximizer of the bound given every other row,
    so the sweep never decreases the objective.
    """
    src, dst = edges.src, edges.dst
    for i in range(edges.m):
        out = edges.out_pair_indices(i)
        inc = edges.in_pair_indices(i)
        ev = log_pi.copy()
        if out.size:
            ev += np.einsum("pkl,pl->k", L[out], tau[dst[out]])
        if inc.size:
            ev += np.einsum("plk,pl->k", L[inc], tau[src[inc]])
        ev -= ev.max()
        w = np.exp(ev)
        tau[i] = w / w.sum()
    return tau


def _poisson_mstep(
    counts: np.ndarray, tau: np.ndarray, edges: EdgeList, T: float, eps: float,
    previous: HomPoissonParams,
) -> HomPoissonParams:
    """Closed-form rate update B_kl = sum ττ N / (T sum ττ), floored at eps."""
    W = np.einsum("p,pk,pl->kl", counts.astype(np.float64), tau[edges.src], tau[edges.dst])
    Q = tau.T @ (edges.adjacency @ tau)
    denom = T * Q
    rates = np.where(denom > 1e-12, W / np.maximum(denom, 1e-12), previous.rates)
    return HomPoissonParams(np.maximum(rates, eps))


def _expected_loglik(
    params: ModelParams,
    batch: EventBatch,
    edges: EdgeList,
    T: float,
    tau: np.ndarray,
    want_grads: bool,
):
    terms = window_terms(
        params, batch, edges, (0.0, T), store=None, pair_space="all", want_grads=want_grads
    )
    value = contract_value(terms, params, tau, edges)
    if not want_grads:
        return value, None
    return value, contract_grads(terms, params, tau, edges)


def _gradient_mstep(
    params: ModelParams,
    batch: EventBatch,
    edges: EdgeList,
    T: float,
    tau: np.ndarray,
    eps: float,
    substeps: int,
    eta_state: dict,
) -> ModelParams:
    """Projected gradient ascent with backtracking on the expected log-lik.

    Accepts a step only when the objective does not drop, which keeps the
    outer EM trace monotone for the families without a closed form. The
    last accepted step size is remembered in `eta_state` so later calls
    skip most of the halving search.
    """
    f, grads = _expected_loglik(params, batch, edges, T, tau, want_grads=True)
    for _ in range(substeps):
        gmax = max(float(np.max(np.abs(np.asarray(g)))) for g in grads.values())
        if gmax == 0.0:
            break
        theta_scale = 1.0 + max(
            float(np.max(np.abs(base))) for base in _param_arrays(params)
        )
        cap = 0.2 * theta_scale / gmax
        eta = cap if eta_state.get("eta") is None else min(4.0 * eta_state["eta"], cap)
        accepted = None
        for _ in range(30):
            cand = step_params(params, grads, eta, eps)
            f_new, _ = _expected_loglik(cand, batch, edges, T, tau, want_grads=False)
            if f_new >= f:
                accepted = (cand, f_new)
                break
            eta *= 0.5
        if accepted is None:
            break
        eta_state["eta"] = eta
        params, f = accepted
        f, grads = _expected_loglik(params, batch, edges, T, tau, want_grads=True)
    return params


def _hawkes_mstep(
    params: ModelParams,
    batch: EventBatch,
    edges: EdgeList,
    T: float,
    tau: np.ndarray,
    eps: float,
    eta_state: dict,
) -> tuple:
    """M-step for the Hawkes families: curvature-scaled projected ascent.

    One pass over the events fixes the kernel sums (they depend only on
    the decay), after which the base and excitation blocks have cheap
    exact first and second derivatives; each block takes damped Newton
    steps accepted only when the objective does not drop. The decay then
    takes a single backtracked gradient step (each trial needs a fresh
    kernel pass). Returns the new params together with the per-pair
    log-likelihood tensor at those params, so the caller skips a rebuild.
    """
    K = params.K
    inhom = params.kind == "inhom-hawkes"
    terms = window_terms(
        params, batch, edges, (0.0, T), store=None, pair_space="all", want_grads=False
    )
    E = len(batch)
    Pn = edges.n_pairs
    ev_pair, g, i12 = terms.ev_pair, terms.ev_g, terms.ev_i12
    exc_int, exc_dint = terms.exc_int, terms.exc_dint
    src, dst = edges.src, edges.dst
    w_pair = tau[src][:, :, None] * tau[dst][:, None, :]  # (P, K, K)
    Q = tau.T @ (edges.adjacency @ tau)
    W2 = np.einsum("p,pkl->kl", exc_int, w_pair)
    W2d = np.einsum("p,pkl->kl", exc_dint, w_pair)
    if inhom:
        meas = params.basis.segment_measures(0.0, T)
        h_ev = params.basis.active_index(batch.t) if E else np.empty(0, dtype=np.int64)
        base = params.coefs.copy()  # (K, K, H)
    else:
        meas = np.array([T - 0.0])
        h_ev = np.zeros(E, dtype=np.int64)
        base = params.baseline[:, :, None].copy()  # (K, K, 1)
    H = base.shape[2]
    excite = params.excite.copy()
    decay = float(params.decay)

    def rebuild(decay_val: float) -> ModelParams:
        if inhom:
            return InhomHawkesParams(base.copy(), params.basis, excite.copy(), decay_val)
        return HomHawkesParams(base[:, :, 0].copy(), excite.copy(), decay_val)

    def scatter_pairs(values: np.ndarray) -> np.ndarray:
        """(E, K, K) -> (P, K, K) sums grouped by the event's pair."""
        flat = values.reshape(E, K * K)
        out = np.empty((Pn, K * K))
        for c in range(K * K):
            out[:, c] = np.bincount(ev_pair, flat[:, c], minlength=Pn)
        return out.reshape(Pn, K, K)

    def scatter_h(values: np.ndarray) -> np.ndarray:
        """(E, K, K) -> (K, K, H) sums grouped by the event's basis segment."""
        flat = values.reshape(E, K * K)
        out = np.empty((H, K * K))
        for c in range(K * K):
            out[:, c] = np.bincount(h_ev, flat[:, c], minlength=H)
        return np.moveaxis(out.reshape(H, K, K), 0, 2)

    if E == 0:
        # no evidence: bases go to the floor, nothing else moves
        base[:] = eps
        new = rebuild(decay)
        L = -np.einsum("klh,h->kl", base, meas)[None, :, :] * np.ones((Pn, 1, 1))
        return new, L

    w_ev = w_pair[ev_pair]  # (E, K, K)

    def lam_at(base_: np.ndarray, excite_: np.ndarray) -> np.ndarray:
        base_ev = np.moveaxis(base_[:, :, h_ev], 2, 0)  # (E, K, K)
        return base_ev + excite_[None, :, :] * g[:, None, None]

    def comp_of(base_: np.ndarray, excite_: np.ndarray) -> float:
        return float(np.einsum("klh,h,kl->", base_, meas, Q)) + float(
            np.sum(excite_ * W2)
        )

    def value(base_: np.ndarray, excite_: np.ndarray, lam: np.ndarray) -> float:
        return float(np.sum(w_ev * np.log(lam))) - comp_of(base_, excite_)

    tiny = 1e-18
    lam = lam_at(base, excite)
    f = value(base, excite, lam)
    for _ in range(3):
        # base block: each (k, l, h) coordinate is an independent concave 1D problem
        inv = w_ev / lam
        grad = scatter_h(inv) - Q[:, :, None] * meas[None, None, :]
        curv = scatter_h(inv / lam)
        delta = grad / np.maximum(curv, tiny)
        for _ in range(8):
            cand = np.maximum(base + delta, eps)
            lam_c = lam_at(cand, excite)
            f_c = value(cand, excite, lam_c)
            if f_c >= f:
                base, lam, f = cand, lam_c, f_c
                break
            delta *= 0.5
        # excitation block
        inv = w_ev / lam
        grad_e = np.einsum("ekl,e->kl", inv, g) - W2
        curv_e = np.einsum("ekl,e->kl", inv / lam, g * g)
        delta_e = grad_e / np.maximum(curv_e, tiny)
        for _ in range(8):
            cand = np.maximum(excite + delta_e, 0.0)
            lam_c = lam_at(base, cand)
            f_c = value(base, cand, lam_c)
            if f_c >= f:
                excite, lam, f = cand, lam_c, f_c
                break
            delta_e *= 0.5

    def tensor_from(s_log, exc_int_, comp_base_):
        return s_log - excite[None, :, :] * exc_int_[:, None, None] - comp_base_[None]

    comp_base = np.einsum("klh,h->kl", base, meas)
    L_cur = tensor_from(scatter_pairs(np.log(lam)), exc_int, comp_base)
    pair_cur = float(np.einsum("pk,pl,pkl->", tau[src], tau[dst], L_cur))

    # decay: one projected gradient step, backtracked against the same
    # pair-tensor objective the ELBO trace is computed from
    gd = float(np.sum(excite * (np.einsum("ekl,e->kl", w_ev / lam, i12) - W2d)))
    if gd != 0.0:
        cap = 0.2 * (decay + 1.0) / abs(gd)
        remembered = eta_state.get("decay_eta")
        eta = cap if remembered is None else min(2.0 * remembered, cap)
        for _ in range(4):
            d_new = max(decay + eta * gd, eps)
            if d_new == decay:
                break
            trial = rebuild(d_new)
            t2 = window_terms(
                trial, batch, edges, (0.0, T), store=None, pair_space="all", want_grads=False
            )
            L2 = tensor_from(t2.s_log, t2.exc_int, t2.comp_base)
            pair2 = float(np.einsum("pk,pl,pkl->", tau[src], tau[dst], L2))
            if pair2 >= pair_cur:
                decay, L_cur, pair_cur = d_new, L2, pair2
                eta_state["decay_eta"] = eta
                break
            eta *= 0.5
        else:
            eta_state["decay_eta"] = eta
    return rebuild(decay), L_cur


def _param_arrays(params: ModelParams):
    if params.kind == "hom-poisson":
        return (params.rates,)
    if params.kind == "inhom-poisson":
        return (params.coefs,)
    if params.kind == "hom-hawkes":
        return (params.baseline, params.excite, np.asarray(params.decay))
    return (params.coefs, params.excite, np.asarray(params.decay))


def batch_fit(
    events: EventBatch,
    edges: EdgeList,
    K: int,
    cfg: WindowConfig,
    model_kind: str = "hom-poisson",
    seed: int = 0,
    max_iters: int | None = None,
    tol: float = 1e-3,
    *,
    basis: StepBasis | None = None,
    ranges: InitRanges = InitRanges(),
    init_mode: str = "soft-jitter",
    tau0: np.ndarray | None = None,
    params0: ModelParams | None = None,
    m_substeps: int = 3,
    restarts: int = 3,
    eps: float = EPS_FLOOR,
) -> BatchFitReport:
    """Variational EM on the full horizon [0, T].

    Alternates a sequential responsibility sweep (with the mixing weights
    refreshed to the responsibility means) against a parameter M-step:
    closed form for constant Poisson rates, projected gradient ascent for
    the other families. Stops when the bound moves by less than `tol` or
    after `max_iters` iterations (default: the window count T/dT).

    The bound is multimodal, so the fit is repeated from `restarts`
    derived seeds and the run with the best final bound is kept. A fully
    pinned start (both `tau0` and `params0`) runs once.
    """
    t_start = time.perf_counter()
    if restarts < 1:
        raise InputError(f"restarts must be >= 1, got {restarts}")
    if tau0 is not None and params0 is not None:
        restarts = 1
    best = None
    for r in range(restarts):
        rep = _fit_single(
            events, edges, K, cfg, model_kind, seed + 7919 * r, max_iters, tol,
            basis=basis, ranges=ranges, init_mode=init_mode, tau0=tau0,
            params0=params0, m_substeps=m_substeps, eps=eps,
        )
        if best is None or rep.elbo_trace[-1] > best.elbo_trace[-1]:
            best = rep
    best.wall_time_s = time.perf_counter() - t_start
    return best


def _fit_single(
    events: EventBatch,
    edges: EdgeList,
    K: int,
    cfg: WindowConfig,
    model_kind: str,
    seed: int,
    max_iters: int | None,
    tol: float,
    *,
    basis: StepBasis | None,
    ranges: InitRanges,
    init_mode: str,
    tau0: np.ndarray | None,
    params0: ModelParams | None,
    m_substeps: int,
    eps: float,
) -> BatchFitReport:
    t_start = time.perf_counter()
    T = cfg.T
    if max_iters is None:
        max_iters = max(cfg.N, 1)
    if max_iters < 1:
        raise InputError(f"max_iters must be >= 1, got {max_iters}")
    if len(events):
        tmin, tmax = float(events.t.min()), float(events.t.max())
        if tmin < 0.0 or tmax > T:
            raise InputError(
                f"events span [{tmin}, {tmax}] outside the horizon [0, {T}]"
            )
    state0, params = init_state(
        edges.m, K, seed, mode=init_mode, model_kind=model_kind, basis=basis, ranges=ranges
    )
    tau = state0.tau
    if params0 is not None:
        if params0.kind != model_kind or params0.K != K:
            raise InputError(
                f"params0 is {params0.kind} with K={params0.K}, expected {model_kind} with K={K}"
            )
        params = params0.copy()
    if tau0 is not None:
        tau = _check_tau(tau0, edges.m, K).copy()
        tau /= tau.sum(axis=1, keepdims=True)
    pi = tau.mean(axis=0)

    eta_state: dict = {"eta": None}
    counts = None
    if model_kind == "hom-poisson":
        base_terms = window_terms(
            params, events, edges, (0.0, T), pair_space="all", want_grads=False
        )
        counts = base_terms.counts

    L = pair_loglik_tensor(params, events, edges, T)
    trace = [elbo(params, tau, pi, events, edges, T, L=L)]
    ll_trace = [trace[0] - _mixing_term(tau, pi)]
    converged = False
    n_iters = 0
    for _ in range(max_iters):
        log_pi = np.log(np.maximum(pi, 1e-300))
        tau = _sweep_tau(L, tau, log_pi, edges)
        pi = tau.mean(axis=0)
        if model_kind == "hom-poisson":
            params = _poisson_mstep(counts, tau, edges, T, eps, params)
            L = pair_loglik_tensor(params, events, edges, T)
        elif model_kind == "inhom-poisson":
            params = _gradient_mstep(
                params, events, edges, T, tau, eps, m_substeps, eta_state
            )
            L = pair_loglik_tensor(params, events, edges, T)
        else:
            params, L = _hawkes_mstep(params, events, edges, T, tau, eps, eta_state)
        trace.append(elbo(params, tau, pi, events, edges, T, L=L))
        ll_trace.append(trace[-1] - _mixing_term(tau, pi))
        n_iters += 1
        if abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    return BatchFitReport(
        params=params,
        tau=tau,
        pi=pi,
        elbo_trace=np.asarray(trace),
        loglik_trace=np.asarray(ll_trace),
        n_iters=n_iters,
        wall_time_s=time.perf_counter() - t_start,
        converged=converged,
    )
