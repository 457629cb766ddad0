"""Intensity evaluation and windowed log-likelihood machinery.

Two routes through the same math live here on purpose. The reference
route (`intensity`, `window_loglik`) evaluates pair by pair, event by
event, straight from the model definitions; it is quadratic but easy to
audit, and the tests hold the fast route to it. The kernel route
(`window_terms` + the `contract_*` functions) computes, in one pass
over a window's events, per-pair sufficient tensors that are
independent of the variational responsibilities tau, so the same pass
serves the evidence update (contracted with the pre-update tau), the
gradient step (contracted with the post-update tau), trace values, and
the batch EM objective (one giant window covering [0, T]).

Windowed conditional log-likelihood of a class assignment z, for the
window [t0, t1] with per-pair history H_ij(t):

    sum_{(i,j) in A} [ sum_{events of (i,j)} log lambda_{z_i z_j}(t_e)
                       - int_{t0}^{t1} lambda_{z_i z_j}(t) dt ]

Poisson compensators are closed-form (rate times window measure). The
exponential Hawkes kernel gives closed forms too: an event at s < t0
contributes b*(exp(-decay (t0-s)) - exp(-decay (t1-s))) to the
integral, an in-window event s contributes b*(1 - exp(-decay (t1-s))).

Gradient of the expected window log-likelihood for the self-exciting
families (needed because the update step ascends it): with
Lambda_kl(t) = base_kl(t) + excite_kl * g(t), g(t) = decay * I1(t),
I1(t) = sum_s exp(-decay (t-s)), I2(t) = sum_s decay (t-s) exp(-decay (t-s)),

    d log Lambda / d base_kl(h) = f_h(t) / Lambda,
    d log Lambda / d excite_kl  = g(t) / Lambda,
    d log Lambda / d decay      = excite_kl * (I1 - I2) / Lambda,

and the compensator derivatives follow by differentiating the closed
forms above; the time-varying-baseline case only swaps the constant
baseline for the active basis coefficient, leaving the excitation
terms untouched. All of these are validated against central finite
differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import StepBasis
from .errors import InputError
from .events import EdgeList, EventBatch
from .history import HistoryStore
from .params import (
    HomHawkesParams,
    HomPoissonParams,
    InhomHawkesParams,
    InhomPoissonParams,
    ModelParams,
    is_hawkes,
    is_inhom,
)

__all__ = [
    "intensity",
    "window_loglik",
    "full_loglik",
    "window_terms",
    "WindowTerms",
    "contract_dlogs",
    "contract_grads",
    "contract_value",
    "value_at_assignment",
    "pair_loglik_tensor",
    "step_params",
]


# ---------------------------------------------------------------------------
# reference route


def intensity(params: ModelParams, k: int, l: int, t: float, history=()) -> float:
    """Conditional intensity lambda_kl(t) for one pair, directly from the model.

    `history` holds the pair's event times strictly before t (Hawkes
    families only; ignored for Poisson).
    """
    if t < 0:
        raise InputError(f"time must be nonnegative, got {t}")
    hist = np.asarray(history, dtype=np.float64)
    if hist.size and hist.max() > t:
        raise InputError("history contains events at or after evaluation time")
    if isinstance(params, HomPoissonParams):
        return float(params.rates[k, l])
    if isinstance(params, InhomPoissonParams):
        return float(params.coefs[k, l, int(params.basis.active_index(t))])
    if isinstance(params, HomHawkesParams):
        base = float(params.baseline[k, l])
    elif isinstance(params, InhomHawkesParams):
        base = float(params.coefs[k, l, int(params.basis.active_index(t))])
    else:
        raise InputError(f"unknown params type {type(params).__name__}")
    lam = params.decay
    excitation = float(np.sum(lam * np.exp(-lam * (t - hist)))) if hist.size else 0.0
    return base + float(params.excite[k, l]) * excitation


def _base_compensator(params: ModelParams, t0: float, t1: float) -> np.ndarray:
    """(K, K) integral of the base rate over [t0, t1]."""
    if isinstance(params, HomPoissonParams):
        return params.rates * (t1 - t0)
    if isinstance(params, HomHawkesParams):
        return params.baseline * (t1 - t0)
    meas = params.basis.segment_measures(t0, t1)
    return np.einsum("klh,h->kl", params.coefs, meas)


def _excitation_integral(decay, t0, t1, pre, ts):
    """Integral of sum_s decay*exp(-decay (t-s)) over [t0, t1], unit weight."""
    total = 0.0
    if pre.size:
        total += float(np.sum(np.exp(-decay * (t0 - pre)) - np.exp(-decay * (t1 - pre))))
    if ts.size:
        total += float(np.sum(1.0 - np.exp(-decay * (t1 - ts))))
    return total


def window_loglik(
    params: ModelParams,
    z: np.ndarray,
    batch: EventBatch,
    edges: EdgeList,
    bounds: tuple,
    store: HistoryStore | None = None,
) -> float:
    """Conditional log-likelihood of assignment z over one window.

    Reference implementation: loops pairs and events with direct
    intensity sums. Dominated by clarity, not speed; the streaming and
    batch paths use the vectorized kernel, which the tests pin to this.
    """
    z = np.asarray(z, dtype=np.int64)
    if z.shape[0] != edges.m:
        raise InputError(f"z has length {z.shape[0]}, expected m={edges.m}")
    t0, t1 = bounds
    if len(batch):
        ok = edges.contains(batch.src, batch.dst)
        if not np.all(ok):
            i = int(np.nonzero(~ok)[0][0])
            raise InputError(
                f"event on pair ({batch.src[i]}, {batch.dst[i]}) not in the edge list"
            )
        if batch.t.min() < t0 or batch.t.max() > t1:
            raise InputError("window slice contains events outside the bounds")
    comp_base = _base_compensator(params, t0, t1)
    hawkes = is_hawkes(params)
    total = 0.0
    for p, (i, j) in enumerate(edges.pairs()):
        k, l = int(z[i]), int(z[j])
        mask = (batch.src == i) & (batch.dst == j)
        ts = batch.t[mask]
        pre = np.empty(0)
        if hawkes and store is not None:
            q = store.queue_array((i, j))
            pre = q[q < t0]
        for r in range(ts.shape[0]):
            hist = np.concatenate([pre, ts[:r]])
            total += math.log(intensity(params, k, l, float(ts[r]), hist))
        total -= float(comp_base[k, l])
        if hawkes:
            total -= float(params.excite[k, l]) * _excitation_integral(
                params.decay, t0, t1, pre, ts
            )
    return total


def full_loglik(
    params: ModelParams, z: np.ndarray, batch: EventBatch, edges: EdgeList, T: float
) -> float:
    """Conditional log-likelihood over the whole horizon [0, T] (no truncation)."""
    terms = window_terms(params, batch, edges, (0.0, T), store=None, pair_space="all")
    return value_at_assignment(terms, params, z, edges)


# ---------------------------------------------------------------------------
# kernel route


@dataclass
class WindowTerms:
    """Per-pair sufficient tensors for one window, independent of tau.

    `pair_pos` indexes into the edge list's pair arrays; only pairs that
    can contribute (events in the window, or for Hawkes a live history
    queue) appear unless pair_space="all" was requested. Poisson
    families carry event counts only; Hawkes families carry per-pair
    (K, K) event sums because the log-intensity couples base and
    excitation nonlinearly.
    """

    bounds: tuple
    pair_pos: np.ndarray  # (P,)
    pair_src: np.ndarray  # (P,) node ids
    pair_dst: np.ndarray  # (P,)
    n_events: int
    counts: np.ndarray  # (P,)
    comp_base: np.ndarray  # (K, K) base-rate integral over the window
    base_measures: np.ndarray | None = None  # (H,) inhomogeneous only
    counts_h: np.ndarray | None = None  # (P, H) inhom-poisson
    s_log: np.ndarray | None = None  # (P, K, K) sum log Lambda
    s_binv: np.ndarray | None = None  # (P, K, K) or (P, H, K, K) sum f_h/Lambda
    s_einv: np.ndarray | None = None  # (P, K, K) sum g/Lambda
    s_dinv: np.ndarray | None = None  # (P, K, K) sum (I1-I2)/Lambda
    exc_int: np.ndarray | None = None  # (P,) excitation compensator, unit weight
    exc_dint: np.ndarray | None = None  # (P,) its decay derivative
    ev_pair: np.ndarray | None = None  # (E,) event -> pair position (Hawkes)
    ev_g: np.ndarray | None = None  # (E,) kernel sum at each event
    ev_i12: np.ndarray | None = None  # (E,) decay derivative of the kernel sum


def _queue_prefix(store: HistoryStore | None, pair: tuple, t0: float) -> np.ndarray:
    if store is None:
        return np.empty(0)
    q = store.queue_array(pair)
    if q.size == 0:
        return q
    return q[: int(np.searchsorted(q, t0))]


def window_terms(
    params: ModelParams,
    batch: EventBatch,
    edges: EdgeList,
    bounds: tuple,
    store: HistoryStore | None = None,
    pair_space: str = "active",
    want_grads: bool = True,
) -> WindowTerms:
    """One pass over a window's events producing tau-independent tensors.

    pair_space "active" restricts per-pair arrays to pairs with events
    in the window (plus pairs with pre-window history for Hawkes);
    "all" uses the full edge list order, which the batch path needs.
    """
    t0, t1 = bounds
    if t1 < t0:
        raise InputError(f"window bounds reversed: {bounds}")
    K = params.K
    positions = edges.pair_positions(batch.src, batch.dst)
    if len(batch) and (batch.t.min() < t0 or batch.t.max() > t1):
        raise InputError("window slice contains events outside the bounds")
    hawkes = is_hawkes(params)
    inhom = is_inhom(params)
    comp_base = _base_compensator(params, t0, t1)
    meas = params.basis.segment_measures(t0, t1) if inhom else None

    if pair_space == "all":
        pair_pos = np.arange(edges.n_pairs)
        ev_pair = positions
        counts = np.bincount(positions, minlength=edges.n_pairs).astype(np.int64)
    elif pair_space == "active":
        extra = []
        if hawkes and store is not None:
            # queue-only pairs still owe excitation compensator
            for pair, q in store.queues.items():
                if q and q[0] < t0:
                    extra.append(pair)
        if extra:
            ex = np.asarray(extra, dtype=np.int64)
            epos = edges.pair_positions(ex[:, 0], ex[:, 1])
        else:
            epos = np.empty(0, dtype=np.int64)
        pair_pos = np.union1d(np.unique(positions), epos)
        ev_pair = np.searchsorted(pair_pos, positions)
        counts = np.bincount(ev_pair, minlength=pair_pos.shape[0]).astype(np.int64)
    else:
        raise InputError(f"unknown pair_space {pair_space!r}")

    P = pair_pos.shape[0]
    pair_src = edges.src[pair_pos]
    pair_dst = edges.dst[pair_pos]
    terms = WindowTerms(
        bounds=(float(t0), float(t1)),
        pair_pos=pair_pos,
        pair_src=pair_src,
        pair_dst=pair_dst,
        n_events=len(batch),
        counts=counts,
        comp_base=comp_base,
        base_measures=meas,
    )

    if not hawkes:
        if inhom:
            H = params.basis.H
            ev_h = params.basis.active_index(batch.t)
            ch = np.zeros((P, H))
            np.add.at(ch, (ev_pair, ev_h), 1.0)
            terms.counts_h = ch
        return terms

    # Hawkes: per-event impact statistics via the exponential recursion,
    # seeded from each pair's pre-window queue.
    decay = params.decay
    E = len(batch)
    I1 = np.zeros(E)
    I2 = np.zeros(E)
    exc_int = np.zeros(P)
    exc_dint = np.zeros(P)
    order = np.argsort(ev_pair, kind="stable") if E else np.empty(0, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(counts)]) if P else np.array([0])
    t_all = batch.t
    for p in range(P):
        pair = (int(pair_src[p]), int(pair_dst[p]))
        pre = _queue_prefix(store, pair, t0)
        idx = order[starts[p] : starts[p + 1]]
        ts = t_all[idx]
        if pre.size:
            d0 = decay * (t0 - pre)
            d1 = decay * (t1 - pre)
            e1 = np.exp(-d1)
            exc_int[p] += float(np.sum(np.exp(-d0) - e1))
            exc_dint[p] += float(np.sum((t1 - pre) * e1 - (t0 - pre) * np.exp(-d0)))
        if ts.size:
            d1 = decay * (t1 - ts)
            e1 = np.exp(-d1)
            exc_int[p] += float(np.sum(1.0 - e1))
            exc_dint[p] += float(np.sum((t1 - ts) * e1))
            a1 = 0.0
            a2 = 0.0
            last = None
            if pre.size:
                rel = decay * (pre[-1] - pre)
                er = np.exp(-rel)
                a1 = float(np.sum(er))
                a2 = float(np.sum(rel * er))
                last = float(pre[-1])
            for r in range(ts.shape[0]):
                u = float(ts[r])
                if last is not None:
                    d = decay * (u - last)
                    e = math.exp(-d)
                    a2 = e * (a2 + d * a1)
                    a1 = e * a1
                j = int(idx[r])
                I1[j] = a1
                I2[j] = a2
                a1 += 1.0
                last = u
    terms.exc_int = exc_int
    terms.exc_dint = exc_dint

    g = decay * I1
    i12 = I1 - I2
    terms.ev_pair = ev_pair
    terms.ev_g = g
    terms.ev_i12 = i12
    excite = params.excite
    s_log = np.zeros((P, K, K))
    s_einv = np.zeros((P, K, K)) if want_grads else None
    s_dinv = np.zeros((P, K, K)) if want_grads else None
    if inhom:
        H = params.basis.H
        ev_h = params.basis.active_index(batch.t)
        s_binv = np.zeros((P, H, K, K)) if want_grads else None
        key = ev_pair * H + ev_h if E else np.empty(0, dtype=np.int64)
    else:
        ev_h = None
        s_binv = np.zeros((P, K, K)) if want_grads else None
        key = ev_pair
    if E:
        for k in range(K):
            for l in range(K):
                if inhom:
                    base = params.coefs[k, l, ev_h]
                else:
                    base = float(params.baseline[k, l])
                lam = base + excite[k, l] * g
                s_log[:, k, l] = np.bincount(ev_pair, np.log(lam), minlength=P)
                if want_grads:
                    inv = 1.0 / lam
                    if inhom:
                        s_binv[:, :, k, l] = np.bincount(
                            key, inv, minlength=P * H
                        ).reshape(P, H)
                    else:
                        s_binv[:, k, l] = np.bincount(ev_pair, inv, minlength=P)
                    s_einv[:, k, l] = np.bincount(ev_pair, g * inv, minlength=P)
                    s_dinv[:, k, l] = np.bincount(ev_pair, i12 * inv, minlength=P)
    terms.s_log = s_log
    terms.s_binv = s_binv
    terms.s_einv = s_einv
    terms.s_dinv = s_dinv
    return terms


def _scatter_rows(values: np.ndarray, index: np.ndarray, m: int) -> np.ndarray:
    """Sum rows of `values` (P, K) into an (m, K) array by `index`."""
    out = np.zeros((m, values.shape[1]))
    for k in range(values.shape[1]):
        out[:, k] = np.bincount(index, values[:, k], minlength=m)
    return out


def _quad_form(edges: EdgeList, tau: np.ndarray) -> tuple:
    """(A @ tau, A.T @ tau, tau.T A tau) for the compensator contractions."""
    At = edges.adjacency @ tau
    ATt = edges.adjacency_t @ tau
    return At, ATt, tau.T @ At


def contract_dlogs(
    terms: WindowTerms, params: ModelParams, tau: np.ndarray, edges: EdgeList
) -> np.ndarray:
    """Per-node, per-class evidence increment E_{q(z_-i)}[window loglik | z_i=k].

    Only terms involving node i are accumulated; the remaining terms are
    constant across classes and cancel in the responsibility update.
    Events credit both their source (outbound) and destination (inbound).
    """
    m, K = tau.shape
    out = np.zeros((m, K))
    At, ATt, _ = _quad_form(edges, tau)
    comp = terms.comp_base
    src, dst = terms.pair_src, terms.pair_dst
    tau_s = tau[src]
    tau_d = tau[dst]
    if params.kind == "hom-poisson":
        logB = np.log(params.rates)
        M_out = _scatter_rows(terms.counts[:, None] * tau_d, src, m)
        M_in = _scatter_rows(terms.counts[:, None] * tau_s, dst, m)
        out += M_out @ logB.T + M_in @ logB
    elif params.kind == "inhom-poisson":
        logA = np.log(params.coefs)  # (K, K, H)
        H = params.basis.H
        ch = terms.counts_h  # (P, H)
        M_out = np.zeros((m, H, K))
        M_in = np.zeros((m, H, K))
        contrib_out = ch[:, :, None] * tau_d[:, None, :]
        contrib_in = ch[:, :, None] * tau_s[:, None, :]
        np.add.at(M_out, src, contrib_out)
        np.add.at(M_in, dst, contrib_in)
        out += np.einsum("ihl,klh->ik", M_out, logA)
        out += np.einsum("ihk,klh->il", M_in, logA)
    else:
        ev_out = np.einsum("pl,pkl->pk", tau_d, terms.s_log)
        ev_in = np.einsum("pk,pkl->pl", tau_s, terms.s_log)
        ex_out = np.einsum("pl,kl,p->pk", tau_d, params.excite, terms.exc_int)
        ex_in = np.einsum("pk,kl,p->pl", tau_s, params.excite, terms.exc_int)
        out += _scatter_rows(ev_out - ex_out, src, m)
        out += _scatter_rows(ev_in - ex_in, dst, m)
    # base compensator: every pair of A contributes, events or not
    out -= At @ comp.T + ATt @ comp
    return out


def contract_grads(
    terms: WindowTerms, params: ModelParams, tau: np.ndarray, edges: EdgeList
) -> dict:
    """Gradient of the expected window log-likelihood wrt the parameters."""
    src, dst = terms.pair_src, terms.pair_dst
    tau_s = tau[src]
    tau_d = tau[dst]
    _, _, quad = _quad_form(edges, tau)
    t0, t1 = terms.bounds
    if params.kind == "hom-poisson":
        W = np.einsum("p,pk,pl->kl", terms.counts.astype(np.float64), tau_s, tau_d)
        return {"rates": W / params.rates - quad * (t1 - t0)}
    if params.kind == "inhom-poisson":
        Wh = np.einsum("ph,pk,pl->klh", terms.counts_h, tau_s, tau_d)
        comp = quad[:, :, None] * terms.base_measures[None, None, :]
        return {"coefs": Wh / params.coefs - comp}
    if params.kind == "hom-hawkes":
        base_grad = np.einsum("pk,pl,pkl->kl", tau_s, tau_d, terms.s_binv)
        base_grad -= quad * (t1 - t0)
        base_key = "baseline"
    else:
        bg = np.einsum("pk,pl,phkl->klh", tau_s, tau_d, terms.s_binv)
        bg -= quad[:, :, None] * terms.base_measures[None, None, :]
        base_grad = bg
        base_key = "coefs"
    w_exc = np.einsum("pk,pl,p->kl", tau_s, tau_d, terms.exc_int)
    grad_excite = np.einsum("pk,pl,pkl->kl", tau_s, tau_d, terms.s_einv) - w_exc
    w_dexc = np.einsum("pk,pl,p->kl", tau_s, tau_d, terms.exc_dint)
    grad_decay = float(
        np.sum(
            params.excite
            * (np.einsum("pk,pl,pkl->kl", tau_s, tau_d, terms.s_dinv) - w_dexc)
        )
    )
    return {base_key: base_grad, "excite": grad_excite, "decay": grad_decay}


def contract_value(
    terms: WindowTerms, params: ModelParams, tau: np.ndarray, edges: EdgeList
) -> float:
    """Expected window conditional log-likelihood E_q[l_n(theta | z)]."""
    src, dst = terms.pair_src, terms.pair_dst
    tau_s = tau[src]
    tau_d = tau[dst]
    _, _, quad = _quad_form(edges, tau)
    total = -float(np.sum(quad * terms.comp_base))
    if params.kind == "hom-poisson":
        total += float(
            np.einsum(
                "p,pk,pl,kl->",
                terms.counts.astype(np.float64),
                tau_s,
                tau_d,
                np.log(params.rates),
            )
        )
    elif params.kind == "inhom-poisson":
        total += float(
            np.einsum("ph,pk,pl,klh->", terms.counts_h, tau_s, tau_d, np.log(params.coefs))
        )
    else:
        total += float(np.einsum("pk,pl,pkl->", tau_s, tau_d, terms.s_log))
        total -= float(
            np.einsum("pk,pl,kl,p->", tau_s, tau_d, params.excite, terms.exc_int)
        )
    return total


def value_at_assignment(
    terms: WindowTerms, params: ModelParams, z: np.ndarray, edges: EdgeList
) -> float:
    """Window conditional log-likelihood at a hard assignment z."""
    z = np.asarray(z, dtype=np.int64)
    onehot = np.zeros((edges.m, params.K))
    onehot[np.arange(edges.m), z] = 1.0
    return contract_value(terms, params, onehot, edges)


def pair_loglik_tensor(
    params: ModelParams,
    batch: EventBatch,
    edges: EdgeList,
    T: float,
    store: HistoryStore | None = None,
    bounds: tuple | None = None,
) -> np.ndarray:
    """(|A|, K, K) log-likelihood of each pair under every class combination.

    Full-horizon by default (bounds (0, T)); the batch E-step contracts
    this tensor with responsibilities instead of revisiting events.
    """
    if bounds is None:
        bounds = (0.0, T)
    terms = window_terms(
        params, batch, edges, bounds, store=store, pair_space="all", want_grads=False
    )
    if params.kind == "hom-poisson":
        ll = terms.counts[:, None, None] * np.log(params.rates)[None, :, :]
    elif params.kind == "inhom-poisson":
        ll = np.einsum("ph,klh->pkl", terms.counts_h, np.log(params.coefs))
    else:
        ll = terms.s_log - params.excite[None, :, :] * terms.exc_int[:, None, None]
    return ll - terms.comp_base[None, :, :]


def step_params(params: ModelParams, grads: dict, eta: float, eps: float) -> ModelParams:
    """Projected ascent step: params + eta * grads, clipped to the floor."""
    if params.kind == "hom-poisson":
        new = HomPoissonParams(params.rates + eta * grads["rates"])
    elif params.kind == "inhom-poisson":
        new = InhomPoissonParams(params.coefs + eta * grads["coefs"], params.basis)
    elif params.kind == "hom-hawkes":
        new = HomHawkesParams(
            params.baseline + eta * grads["baseline"],
            params.excite + eta * grads["excite"],
            max(params.decay + eta * grads["decay"], eps),
        )
    else:
        new = InhomHawkesParams(
            params.coefs + eta * grads["coefs"],
            params.basis,
            params.excite + eta * grads["excite"],
            max(params.decay + eta * grads["decay"], eps),
        )
    return new.project(eps)
