"""Evaluation suite: recovery scores, link prediction, regret, baselines.

Everything here is a pure function of immutable inputs. The only source
of randomness is the Monte Carlo predictor and the k-means restarts of
the spectral baseline, both driven by explicit seeds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InputError, NumericError
from .events import EdgeList, EventBatch, WindowConfig, partition_windows
from .history import QUEUES, HistoryStore, trim_history
from .likelihood import value_at_assignment, window_terms
from .params import ModelParams, is_hawkes, is_inhom


# ---------------------------------------------------------------------------
# partition scores


def _as_labels(z, name: str) -> np.ndarray:
    z = np.asarray(z)
    if z.ndim != 1:
        raise InputError(f"{name} must be a 1-d label vector, got shape {z.shape}")
    return z


def nmi(z_a, z_b) -> float:
    """Normalized mutual information I(a;b) / sqrt(H(a) H(b)), natural logs.

    Equals 1 exactly when the partitions coincide up to relabeling. Two
    single-cluster partitions count as identical (1.0); if only one side
    is a single cluster the score is 0.
    """
    z_a = _as_labels(z_a, "z_a")
    z_b = _as_labels(z_b, "z_b")
    if z_a.shape[0] != z_b.shape[0]:
        raise InputError(
            f"label vectors differ in length: {z_a.shape[0]} vs {z_b.shape[0]}"
        )
    n = z_a.shape[0]
    if n == 0:
        raise InputError("label vectors must be nonempty")
    _, ia = np.unique(z_a, return_inverse=True)
    _, ib = np.unique(z_b, return_inverse=True)
    ka, kb = ia.max() + 1, ib.max() + 1
    joint = np.zeros((ka, kb))
    np.add.at(joint, (ia, ib), 1.0)
    joint /= n
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    ha = -float(np.sum(pa[pa > 0] * np.log(pa[pa > 0])))
    hb = -float(np.sum(pb[pb > 0] * np.log(pb[pb > 0])))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    nz = joint > 0
    outer = pa[:, None] * pb[None, :]
    info = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    return max(0.0, min(1.0, info / math.sqrt(ha * hb)))


def intensity_recovery(B_true, B_hat) -> float:
    """(1/K^2) |sum_ij B_ij - sum_ij Bhat_ij|.

    A sum comparison, hence invariant to any simultaneous permutation of
    the estimate's rows and columns (it cannot see elementwise error
    that cancels in the total; see aligned_mae for that).
    """
    B_true = np.asarray(B_true, dtype=np.float64)
    B_hat = np.asarray(B_hat, dtype=np.float64)
    if B_true.shape != B_hat.shape:
        raise InputError(f"shape mismatch: {B_true.shape} vs {B_hat.shape}")
    K = B_true.shape[0]
    return float(abs(B_true.sum() - B_hat.sum()) / K**2)


def align_labels(z_hat, z_ref, K: int) -> np.ndarray:
    """Permutation p maximizing agreement of p[z_hat] with z_ref."""
    z_hat = _as_labels(z_hat, "z_hat")
    z_ref = _as_labels(z_ref, "z_ref")
    if z_hat.shape[0] != z_ref.shape[0]:
        raise InputError("label vectors differ in length")
    overlap = np.zeros((K, K))
    np.add.at(overlap, (z_hat, z_ref), 1.0)
    rows, cols = linear_sum_assignment(-overlap)
    perm = np.empty(K, dtype=np.int64)
    perm[rows] = cols
    return perm


def r_dense(z_hat, z_star, dense_nodes) -> float:
    """Fraction of correctly classified dense nodes, best label alignment."""
    z_hat = _as_labels(z_hat, "z_hat")
    z_star = _as_labels(z_star, "z_star")
    dense = np.asarray(dense_nodes, dtype=np.int64)
    if dense.size == 0:
        raise InputError("dense node set must be nonempty")
    K = int(max(z_hat.max(), z_star.max())) + 1
    perm = align_labels(z_hat[dense], z_star[dense], K)
    return float(np.mean(perm[z_hat[dense]] == z_star[dense]))


def aligned_mae(B_true, B_hat, perm) -> float:
    """Elementwise mean absolute error after applying a label permutation.

    `perm` is the mapping returned by align_labels(z_hat, z_star, K):
    estimate label k corresponds to true label perm[k]. Secondary
    diagnostic only: the sum-based recovery score above is the headline
    metric, this one resolves compensating elementwise errors.
    """
    B_true = np.asarray(B_true, dtype=np.float64)
    B_hat = np.asarray(B_hat, dtype=np.float64)
    inv = np.argsort(np.asarray(perm, dtype=np.int64))
    aligned = B_hat[inv][:, inv]
    return float(np.mean(np.abs(B_true - aligned)))


def frobenius_error(B_true, B_hat) -> float:
    return float(np.linalg.norm(np.asarray(B_true) - np.asarray(B_hat)))


# ---------------------------------------------------------------------------
# link prediction


def _cell_expected_counts(
    params: ModelParams, horizon: tuple, S0: float
) -> np.ndarray:
    """(K, K) expected event count per class combination on the horizon.

    Poisson: the base integral. Hawkes: exact conditional mean of the
    cluster process with exponential kernel — stationary part plus the
    transient that relaxes from the time-zero intensity (which includes
    the stored history's excitation) at rate decay*(1-b).
    """
    t0, t1 = horizon
    delta = t1 - t0
    K = params.K
    if params.kind == "hom-poisson":
        return params.rates * delta
    if params.kind == "inhom-poisson":
        meas = params.basis.segment_measures(t0, t1)
        return np.einsum("klh,h->kl", params.coefs, meas)
    if np.any(params.excite >= 1.0):
        worst = float(params.excite.max())
        raise NumericError(
            f"excitation {worst} >= 1 is non-stationary; expected counts diverge"
        )
    if is_inhom(params):
        meas = params.basis.segment_measures(t0, t1)
        base_int = np.einsum("klh,h->kl", params.coefs, meas)
        mu_bar = base_int / delta if delta > 0 else np.zeros((K, K))
    else:
        mu_bar = params.baseline
        base_int = mu_bar * delta
    b = params.excite
    decay = params.decay
    if delta <= 0:
        return np.zeros((K, K))
    kappa = decay * (1.0 - b)
    m_inf = mu_bar / (1.0 - b)
    m_start = mu_bar + b * decay * S0
    relax = (1.0 - np.exp(-kappa * delta)) / kappa
    return m_inf * delta + (m_start - m_inf) * relax


def _mc_cell_counts(
    params: ModelParams, horizon: tuple, pre: np.ndarray, k: int, l: int,
    n_paths: int, rng: np.random.Generator,
) -> float:
    """Monte Carlo mean count for one class combination via thinning."""
    t0, t1 = horizon
    decay = params.decay
    b = float(params.excite[k, l])
    if is_inhom(params):
        basis = params.basis
        coefs = params.coefs[k, l]
        base_fn = lambda t: float(coefs[int(basis.active_index(t))])
        base_max = float(coefs.max())
    else:
        mu = float(params.baseline[k, l])
        base_fn = lambda t: mu
        base_max = mu
    g0 = float(np.sum(np.exp(-decay * (t0 - pre)))) if pre.size else 0.0
    total = 0
    for _ in range(n_paths):
        t = t0
        g = g0
        count = 0
        while True:
            bound = base_max + b * decay * g
            if bound <= 0:
                break
            t_next = t + rng.exponential(1.0 / bound)
            if t_next >= t1:
                break
            g *= math.exp(-decay * (t_next - t))
            lam = base_fn(t_next) + b * decay * g
            t = t_next
            if rng.uniform() * bound <= lam:
                count += 1
                g += 1.0
        total += count
    return total / n_paths


def predict_counts(
    params: ModelParams,
    tau: np.ndarray,
    edges: EdgeList,
    horizon: tuple,
    store: HistoryStore | None = None,
    *,
    mode: str = "analytic",
    n_paths: int = 10**4,
    seed: int = 0,
) -> np.ndarray:
    """Expected event count per pair of A over [t0, t1).

    Soft class assignments are averaged over: entry p is
    sum_kl tau[src_p, k] tau[dst_p, l] E[N_kl]. The Hawkes expectation
    conditions on the stored pre-horizon history. mode="monte-carlo"
    replaces the closed form with thinning-simulated sample paths (the
    reference estimator; much slower).
    """
    t0, t1 = horizon
    if t1 < t0:
        raise InputError(f"horizon reversed: {horizon}")
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape != (edges.m, params.K):
        raise InputError(f"tau has shape {tau.shape}, expected {(edges.m, params.K)}")
    if mode not in ("analytic", "monte-carlo"):
        raise InputError(f"unknown mode {mode!r}")
    hawkes = is_hawkes(params)
    K = params.K
    out = np.zeros(edges.n_pairs)
    if mode == "analytic" and not hawkes:
        cell = _cell_expected_counts(params, horizon, 0.0)
        return np.einsum("pk,pl,kl->p", tau[edges.src], tau[edges.dst], cell)
    rng = np.random.default_rng(seed)
    if mode == "monte-carlo" and hawkes and np.any(params.excite >= 1.0):
        raise NumericError("excitation >= 1 is non-stationary; expected counts diverge")
    for p in range(edges.n_pairs):
        pair = (int(edges.src[p]), int(edges.dst[p]))
        if hawkes and store is not None:
            q = store.queue_array(pair)
            pre = q[q < t0]
        else:
            pre = np.empty(0)
        w = tau[pair[0]][:, None] * tau[pair[1]][None, :]
        if mode == "analytic":
            S0 = float(np.sum(np.exp(-params.decay * (t0 - pre)))) if pre.size else 0.0
            cell = _cell_expected_counts(params, horizon, S0)
            out[p] = float(np.sum(w * cell))
        else:
            total = 0.0
            for k in range(K):
                for l in range(K):
                    if w[k, l] < 1e-12:
                        continue
                    if hawkes:
                        total += w[k, l] * _mc_cell_counts(
                            params, horizon, pre, k, l, n_paths, rng
                        )
                    else:
                        cell = _cell_expected_counts(params, horizon, 0.0)
                        total += w[k, l] * cell[k, l]
            out[p] = total
    return out


def rmse_link_prediction(predicted, actual) -> float:
    """Root mean squared error over the common pair support."""
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise InputError(
            f"prediction support mismatch: {predicted.shape} vs {actual.shape}"
        )
    if predicted.size == 0:
        raise InputError("empty pair support")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


def observed_counts(events: EventBatch, edges: EdgeList, horizon: tuple) -> np.ndarray:
    """Actual event count per pair on [t0, t1)."""
    t0, t1 = horizon
    keep = (events.t >= t0) & (events.t < t1)
    pos = edges.pair_positions(events.src[keep], events.dst[keep])
    out = np.zeros(edges.n_pairs)
    np.add.at(out, pos, 1.0)
    return out


# ---------------------------------------------------------------------------
# regret


def regret_trace(
    theta_snapshots,
    theta_star: ModelParams,
    z_star,
    events: EventBatch,
    edges: EdgeList,
    cfg: WindowConfig,
) -> np.ndarray:
    """Partial sums of the per-window loss gap against the true parameters.

    The loss of window n is the negative window log-likelihood at the
    true assignment, normalized by |A|. The parameters charged to window
    n are the latest snapshot taken strictly before it: snapshots are
    (n, params) pairs meaning "state after window n" (0 = the initial
    guess), so a full trace needs snapshots 0..N-1 at minimum cadence.
    History for the Hawkes conditional is propagated exactly (untrimmed).
    """
    z_star = _as_labels(z_star, "z_star")
    snaps = sorted(theta_snapshots, key=lambda item: item[0])
    if not snaps:
        raise InputError("no parameter snapshots supplied")
    hawkes = is_hawkes(theta_star)
    # Both losses condition on the actual history, so one store serves.
    store = HistoryStore.for_edges(edges, QUEUES, R=np.inf) if hawkes else None
    n_pairs = edges.n_pairs
    out = []
    running = 0.0
    idx = 0
    current = None
    for n, batch in partition_windows(events, cfg):
        while idx < len(snaps) and snaps[idx][0] <= n - 1:
            current = snaps[idx][1]
            idx += 1
        if current is None:
            raise InputError(f"no snapshot at or before window {n - 1}")
        bounds = cfg.bounds(n)
        terms_hat = window_terms(
            current, batch, edges, bounds, store=store, pair_space="all",
            want_grads=False,
        )
        ll_hat = value_at_assignment(terms_hat, current, z_star, edges)
        terms_star = window_terms(
            theta_star, batch, edges, bounds, store=store, pair_space="all",
            want_grads=False,
        )
        ll_star = value_at_assignment(terms_star, theta_star, z_star, edges)
        running += (-ll_hat / n_pairs) - (-ll_star / n_pairs)
        out.append(running)
        if hawkes:
            trim_history(store, np.inf, bounds[1], batch)
    return np.asarray(out)


# ---------------------------------------------------------------------------
# spectral baseline


def _kmeans(X: np.ndarray, K: int, seed: int, restarts: int = 20) -> np.ndarray:
    """Plain Lloyd's with k-means++ seeding; best SSE over restarts."""
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    best_labels = None
    best_sse = np.inf
    for _ in range(restarts):
        centers = np.empty((K, X.shape[1]))
        centers[0] = X[rng.integers(n)]
        d2 = np.sum((X - centers[0]) ** 2, axis=1)
        for k in range(1, K):
            probs = d2 / d2.sum() if d2.sum() > 0 else np.full(n, 1.0 / n)
            centers[k] = X[rng.choice(n, p=probs)]
            d2 = np.minimum(d2, np.sum((X - centers[k]) ** 2, axis=1))
        labels = None
        for _it in range(100):
            dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = dist.argmin(axis=1)
            if labels is not None and np.array_equal(new_labels, labels):
                break
            labels = new_labels
            for k in range(K):
                mask = labels == k
                if mask.any():
                    centers[k] = X[mask].mean(axis=0)
                else:
                    centers[k] = X[rng.integers(n)]
        sse = float(((X - centers[labels]) ** 2).sum())
        if sse < best_sse:
            best_sse = sse
            best_labels = labels.copy()
    return best_labels


def spectral_count_baseline(
    events: EventBatch, edges: EdgeList, m: int, K: int, seed: int = 0
) -> np.ndarray:
    """Spectral clustering on the aggregate count matrix.

    Builds the m x m total-count matrix, symmetrizes it, embeds nodes by
    the top-K eigenvectors and clusters the rows with seeded k-means.
    """
    if K > m:
        raise InputError(f"K={K} exceeds node count m={m}")
    if K < 1:
        raise InputError(f"K must be >= 1, got {K}")
    if K == 1:
        return np.zeros(m, dtype=np.int64)
    C = np.zeros((m, m))
    if len(events):
        np.add.at(C, (events.src, events.dst), 1.0)
    S = C + C.T
    if not np.any(S):
        warnings.warn("all-zero count matrix; returning a random partition")
        return np.random.default_rng(seed).integers(0, K, m)
    vals, vecs = np.linalg.eigh(S)
    X = vecs[:, -K:]
    return _kmeans(X, K, seed)


# ---------------------------------------------------------------------------
# report container


@dataclass
class EvalReport:
    """Bundle of evaluation scores; traces optional.

    aligned_mae is a secondary diagnostic (elementwise, permutation
    aligned); the headline parameter-recovery score is the sum-based one.
    """

    nmi: float | None = None
    intensity_recovery: float | None = None
    rmse: float | None = None
    frobenius_trace: np.ndarray | None = None
    r_dense: float | None = None
    regret_trace: np.ndarray | None = None
    aligned_mae: float | None = None

    def __post_init__(self):
        for name in ("nmi", "r_dense"):
            v = getattr(self, name)
            if v is not None and not (-1e-9 <= v <= 1.0 + 1e-9):
                raise InputError(f"{name}={v} outside [0, 1]")
        for name in ("intensity_recovery", "rmse"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InputError(f"{name}={v} must be nonnegative")
