"""Model parameters for the four block point-process families.

Every family assigns each directed pair (i, j) an intensity that
depends only on the latent classes (k, l) of its endpoints:

  hom-poisson    lambda_kl(t) = rates[k, l]
  inhom-poisson  lambda_kl(t) = coefs[k, l, h(t)]            (step basis)
  hom-hawkes     lambda_kl(t) = baseline[k, l]
                                + excite[k, l] * sum_s decay * exp(-decay (t - s))
  inhom-hawkes   as hom-hawkes with coefs[k, l, h(t)] in place of baseline

The exponential kernel integrates to 1, so excite[k, l] is the
branching ratio of pair-level cascades; subcriticality (excite < 1) is
required for simulation and stationary prediction but not for fitting.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .basis import StepBasis
from .errors import InputError

EPS_FLOOR = 1e-6

MODEL_KINDS = ("hom-poisson", "inhom-poisson", "hom-hawkes", "inhom-hawkes")


def _as_square(x, name) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise InputError(f"{name} must be a square matrix, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class HomPoissonParams:
    kind = "hom-poisson"
    rates: np.ndarray  # (K, K) positive

    def __post_init__(self):
        object.__setattr__(self, "rates", _as_square(self.rates, "rates"))

    @property
    def K(self) -> int:
        return self.rates.shape[0]

    def project(self, eps: float = EPS_FLOOR) -> "HomPoissonParams":
        return HomPoissonParams(np.maximum(self.rates, eps))

    def copy(self) -> "HomPoissonParams":
        return HomPoissonParams(self.rates.copy())


@dataclass(frozen=True)
class InhomPoissonParams:
    kind = "inhom-poisson"
    coefs: np.ndarray  # (K, K, H) nonnegative
    basis: StepBasis

    def __post_init__(self):
        c = np.array(self.coefs, dtype=np.float64)
        if c.ndim != 3 or c.shape[0] != c.shape[1]:
            raise InputError(f"coefs must have shape (K, K, H), got {c.shape}")
        if c.shape[2] != self.basis.H:
            raise InputError(
                f"coefs last axis {c.shape[2]} != basis size {self.basis.H}"
            )
        object.__setattr__(self, "coefs", c)

    @property
    def K(self) -> int:
        return self.coefs.shape[0]

    def project(self, eps: float = EPS_FLOOR) -> "InhomPoissonParams":
        return replace(self, coefs=np.maximum(self.coefs, eps))

    def copy(self) -> "InhomPoissonParams":
        return replace(self, coefs=self.coefs.copy())


@dataclass(frozen=True)
class HomHawkesParams:
    kind = "hom-hawkes"
    baseline: np.ndarray  # (K, K) positive
    excite: np.ndarray  # (K, K) nonnegative branching ratios
    decay: float  # > 0, shared exponential kernel rate

    def __post_init__(self):
        object.__setattr__(self, "baseline", _as_square(self.baseline, "baseline"))
        object.__setattr__(self, "excite", _as_square(self.excite, "excite"))
        if self.baseline.shape != self.excite.shape:
            raise InputError("baseline and excite must have the same shape")
        if self.decay <= 0:
            raise InputError(f"decay must be positive, got {self.decay}")
        object.__setattr__(self, "decay", float(self.decay))

    @property
    def K(self) -> int:
        return self.baseline.shape[0]

    def project(self, eps: float = EPS_FLOOR) -> "HomHawkesParams":
        return HomHawkesParams(
            np.maximum(self.baseline, eps),
            np.maximum(self.excite, 0.0),
            max(self.decay, eps),
        )

    def copy(self) -> "HomHawkesParams":
        return HomHawkesParams(self.baseline.copy(), self.excite.copy(), self.decay)


@dataclass(frozen=True)
class InhomHawkesParams:
    kind = "inhom-hawkes"
    coefs: np.ndarray  # (K, K, H) nonnegative
    basis: StepBasis
    excite: np.ndarray  # (K, K)
    decay: float

    def __post_init__(self):
        c = np.array(self.coefs, dtype=np.float64)
        if c.ndim != 3 or c.shape[0] != c.shape[1]:
            raise InputError(f"coefs must have shape (K, K, H), got {c.shape}")
        if c.shape[2] != self.basis.H:
            raise InputError(
                f"coefs last axis {c.shape[2]} != basis size {self.basis.H}"
            )
        object.__setattr__(self, "coefs", c)
        object.__setattr__(self, "excite", _as_square(self.excite, "excite"))
        if self.excite.shape[0] != c.shape[0]:
            raise InputError("excite and coefs disagree on K")
        if self.decay <= 0:
            raise InputError(f"decay must be positive, got {self.decay}")
        object.__setattr__(self, "decay", float(self.decay))

    @property
    def K(self) -> int:
        return self.coefs.shape[0]

    def project(self, eps: float = EPS_FLOOR) -> "InhomHawkesParams":
        return replace(
            self,
            coefs=np.maximum(self.coefs, eps),
            excite=np.maximum(self.excite, 0.0),
            decay=max(self.decay, eps),
        )

    def copy(self) -> "InhomHawkesParams":
        return replace(self, coefs=self.coefs.copy(), excite=self.excite.copy())


ModelParams = HomPoissonParams | InhomPoissonParams | HomHawkesParams | InhomHawkesParams

POISSON_KINDS = ("hom-poisson", "inhom-poisson")
HAWKES_KINDS = ("hom-hawkes", "inhom-hawkes")


def is_hawkes(params: ModelParams) -> bool:
    return params.kind in HAWKES_KINDS


def is_inhom(params: ModelParams) -> bool:
    return params.kind in ("inhom-poisson", "inhom-hawkes")


def base_matrix(params: ModelParams, h: int | None = None) -> np.ndarray:
    """The (K, K) base-rate matrix, for basis bucket h when inhomogeneous."""
    if params.kind == "hom-poisson":
        return params.rates
    if params.kind == "hom-hawkes":
        return params.baseline
    if h is None:
        raise InputError(f"{params.kind} base rate needs a basis bucket h")
    return params.coefs[:, :, h]


@dataclass(frozen=True)
class InitRanges:
    """Uniform draw ranges for parameter initialization.

    The defaults are deliberately narrow. Starting all rate cells near a
    common value keeps the per-class evidence profiles nearly identical
    at the beginning of a stream, so the responsibility updates break
    symmetry along directions supported by the data instead of locking
    onto whichever random initial rate row happens to look best. Wide
    ranges make single-class collapse in the first windows likely.
    """

    rate: tuple = (0.4, 0.6)
    excite: tuple = (0.25, 0.40)
    decay: tuple = (0.9, 1.1)


def init_params(
    kind: str,
    K: int,
    rng: np.random.Generator,
    basis: StepBasis | None = None,
    ranges: InitRanges = InitRanges(),
) -> ModelParams:
    """Draw initial parameters uniformly in the configured positive ranges."""
    if kind not in MODEL_KINDS:
        raise InputError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    lo, hi = ranges.rate
    if kind == "hom-poisson":
        return HomPoissonParams(rng.uniform(lo, hi, (K, K)))
    if kind in ("inhom-poisson", "inhom-hawkes") and basis is None:
        raise InputError(f"{kind} requires a basis")
    if kind == "inhom-poisson":
        return InhomPoissonParams(rng.uniform(lo, hi, (K, K, basis.H)), basis)
    blo, bhi = ranges.excite
    dlo, dhi = ranges.decay
    decay = float(rng.uniform(dlo, dhi))
    if kind == "hom-hawkes":
        return HomHawkesParams(
            rng.uniform(lo, hi, (K, K)), rng.uniform(blo, bhi, (K, K)), decay
        )
    return InhomHawkesParams(
        rng.uniform(lo, hi, (K, K, basis.H)),
        basis,
        rng.uniform(blo, bhi, (K, K)),
        decay,
    )
