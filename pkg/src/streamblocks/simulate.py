"""Ground-truth generators for the four block point-process families.

Memberships, edge lists, and event streams are drawn from independent,
tagged RNG substreams of a single seed, and events are simulated pair
by pair from per-pair substreams keyed by (seed, src, dst). Pair
simulations are therefore order-independent, reproducible
byte-for-byte, and embarrassingly parallel; the only sequential step is
the final merge sort.

Poisson pairs draw a Poisson count and sorted uniform timestamps
(exact), the inhomogeneous variant thins against the maximum
coefficient. Hawkes pairs use thinning with the O(1) exponential-kernel
recursion for the running excitation, which requires subcriticality
(all branching ratios < 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .events import EdgeList, EventBatch
from .params import (
    HomHawkesParams,
    HomPoissonParams,
    InhomHawkesParams,
    InhomPoissonParams,
    ModelParams,
    is_hawkes,
)

# substream tags so the three sampling stages never share a stream
_SUB_MEMBERS = 0
_SUB_EDGES = 1
_SUB_EVENTS = 2

# default three-class demonstration setting used by the CLI when K=3
DEFAULT_PI_K3 = np.array([0.4, 0.3, 0.3])
DEFAULT_RATES_K3 = np.array(
    [[0.6, 0.2, 0.3], [0.1, 1.0, 0.4], [0.5, 0.4, 0.8]]
)
DEFAULT_HAWKES_BASELINE_K3 = np.array(
    [[0.6, 0.2, 0.3], [0.1, 1.0, 0.4], [0.5, 0.2, 0.75]]
)
DEFAULT_HAWKES_EXCITE_K3 = np.array(
    [[0.5, 0.1, 0.3], [0.4, 0.4, 0.4], [0.2, 0.6, 0.2]]
)
DEFAULT_HAWKES_DECAY = 1.0


@dataclass(frozen=True)
class EvenDegrees:
    """Every node gets exactly d_m random distinct out-partners."""

    d_m: int


@dataclass(frozen=True)
class UnevenDegrees:
    """N_u dense nodes get d_dense out-partners, the rest d_sparse.

    Defaults follow the dense-vs-bounded-degree regime: d_dense grows
    as ceil(m^0.7), d_sparse stays at 3.
    """

    N_u: int
    d_dense: int | None = None
    d_sparse: int = 3

    def resolve(self, m: int) -> tuple:
        d_dense = self.d_dense if self.d_dense is not None else math.ceil(m**0.7)
        return d_dense, self.d_sparse


DegreeScenario = EvenDegrees | UnevenDegrees


@dataclass(frozen=True)
class GroundTruth:
    """Everything the evaluation needs about a simulated instance."""

    z_star: np.ndarray
    params_star: ModelParams
    edges: EdgeList
    events: EventBatch
    pi: np.ndarray
    dense_nodes: np.ndarray | None = None


def sample_memberships(m: int, pi, seed: int) -> np.ndarray:
    """i.i.d. class draws from the simplex vector pi; labels are 0-based."""
    pi = np.asarray(pi, dtype=np.float64)
    if abs(pi.sum() - 1.0) > 1e-9 or np.any(pi < 0):
        raise InputError(f"pi must lie on the simplex, got {pi} (sum {pi.sum()})")
    rng = np.random.default_rng(np.random.SeedSequence((seed, _SUB_MEMBERS)))
    return rng.choice(pi.shape[0], size=m, p=pi)


def sample_dense_nodes(m: int, scenario: DegreeScenario, seed: int) -> np.ndarray | None:
    """The dense-node ids an uneven scenario will use (None when even)."""
    if not isinstance(scenario, UnevenDegrees):
        return None
    if scenario.N_u > m:
        raise InputError(f"N_u={scenario.N_u} exceeds m={m}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, _SUB_EDGES, 0)))
    return np.sort(rng.choice(m, size=scenario.N_u, replace=False))


def sample_edge_list(m: int, scenario: DegreeScenario, seed: int) -> EdgeList:
    """Random directed edge list with the scenario's out-degrees."""
    if isinstance(scenario, EvenDegrees):
        degrees = np.full(m, scenario.d_m, dtype=np.int64)
    elif isinstance(scenario, UnevenDegrees):
        d_dense, d_sparse = scenario.resolve(m)
        degrees = np.full(m, d_sparse, dtype=np.int64)
        degrees[sample_dense_nodes(m, scenario, seed)] = d_dense
    else:
        raise InputError(f"unknown degree scenario {scenario!r}")
    if degrees.max() >= m:
        raise InputError(f"out-degree {degrees.max()} must be < m={m}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, _SUB_EDGES, 1)))
    src_parts = []
    dst_parts = []
    for i in range(m):
        d = int(degrees[i])
        others = rng.choice(m - 1, size=d, replace=False)
        others = np.where(others >= i, others + 1, others)  # skip self
        src_parts.append(np.full(d, i, dtype=np.int64))
        dst_parts.append(others)
    return EdgeList.from_arrays(np.concatenate(src_parts), np.concatenate(dst_parts), m=m)


def _pair_rng(seed: int, i: int, j: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, _SUB_EVENTS, i, j)))


def _simulate_poisson_pair(rng, rate: float, T: float) -> np.ndarray:
    n = rng.poisson(rate * T)
    return np.sort(rng.uniform(0.0, T, n))


def _simulate_inhom_poisson_pair(rng, coefs_kl: np.ndarray, basis, T: float) -> np.ndarray:
    rmax = float(coefs_kl.max())
    if rmax == 0.0:
        return np.empty(0)
    n = rng.poisson(rmax * T)
    ts = np.sort(rng.uniform(0.0, T, n))
    u = rng.uniform(0.0, 1.0, n)
    keep = u < coefs_kl[basis.active_index(ts)] / rmax
    return ts[keep]


def _simulate_hawkes_pair(rng, base_of, base_max, b, decay, T: float) -> np.ndarray:
    """Thinning with the exponential-kernel running-excitation recursion.

    g carries sum_s decay*exp(-decay (t - s)); between candidates it only
    decays, so base_max + b*g bounds the intensity ahead of time.
    """
    out = []
    t = 0.0
    g = 0.0
    while True:
        M = base_max + b * g
        if M <= 0.0:
            break
        w = rng.exponential(1.0 / M)
        t_new = t + w
        if t_new > T:
            break
        g *= math.exp(-decay * w)
        lam_t = base_of(t_new) + b * g
        if rng.uniform() * M <= lam_t:
            out.append(t_new)
            g += decay
        t = t_new
    return np.asarray(out)


def simulate(
    params_star: ModelParams, edges: EdgeList, z_star, T: float, seed: int
) -> EventBatch:
    """Simulate all pair processes over [0, T] and merge-sort the result."""
    z = np.asarray(z_star, dtype=np.int64)
    if z.shape[0] != edges.m:
        raise InputError(f"z_star has length {z.shape[0]}, expected m={edges.m}")
    if T < 0:
        raise InputError(f"horizon T must be nonnegative, got {T}")
    if is_hawkes(params_star) and params_star.excite.max() >= 1.0:
        raise InputError(
            f"branching ratio {params_star.excite.max():g} >= 1: "
            "the self-exciting cascade is non-stationary"
        )
    src_parts, dst_parts, t_parts = [], [], []
    for i, j in edges.pairs():
        k, l = int(z[i]), int(z[j])
        rng = _pair_rng(seed, i, j)
        if isinstance(params_star, HomPoissonParams):
            ts = _simulate_poisson_pair(rng, float(params_star.rates[k, l]), T)
        elif isinstance(params_star, InhomPoissonParams):
            ts = _simulate_inhom_poisson_pair(
                rng, params_star.coefs[k, l], params_star.basis, T
            )
        elif isinstance(params_star, HomHawkesParams):
            mu = float(params_star.baseline[k, l])
            ts = _simulate_hawkes_pair(
                rng, lambda t: mu, mu,
                float(params_star.excite[k, l]), params_star.decay, T,
            )
        elif isinstance(params_star, InhomHawkesParams):
            ckl = params_star.coefs[k, l]
            basis = params_star.basis
            ts = _simulate_hawkes_pair(
                rng,
                lambda t: float(ckl[int(basis.active_index(t))]),
                float(ckl.max()),
                float(params_star.excite[k, l]),
                params_star.decay,
                T,
            )
        else:
            raise InputError(f"unknown params type {type(params_star).__name__}")
        if ts.size:
            src_parts.append(np.full(ts.size, i, dtype=np.int64))
            dst_parts.append(np.full(ts.size, j, dtype=np.int64))
            t_parts.append(ts)
    if not t_parts:
        return EventBatch.empty()
    batch = EventBatch.from_arrays(
        np.concatenate(src_parts), np.concatenate(dst_parts), np.concatenate(t_parts)
    )
    return batch.sorted_by_time()


def simulate_ground_truth(
    kind_params: ModelParams,
    m: int,
    pi,
    scenario: DegreeScenario,
    T: float,
    seed: int,
) -> GroundTruth:
    """Convenience wrapper: memberships + edges + events from one seed."""
    z = sample_memberships(m, pi, seed)
    edges = sample_edge_list(m, scenario, seed)
    dense = sample_dense_nodes(m, scenario, seed)
    events = simulate(kind_params, edges, z, T, seed)
    return GroundTruth(
        z_star=z,
        params_star=kind_params,
        edges=edges,
        events=events,
        pi=np.asarray(pi, dtype=np.float64),
        dense_nodes=dense,
    )
