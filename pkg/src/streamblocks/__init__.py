"""Streaming community detection for timestamped interaction networks.

Block point-process models (Poisson and Hawkes, homogeneous and
inhomogeneous) fitted by one-pass online variational inference over
time windows, with a ground-truth simulator, a full-data variational
EM baseline, an exact small-instance oracle, and evaluation metrics.
"""

from .basis import StepBasis
from .errors import InputError, NumericError, StreamBlocksError
from .events import EdgeList, Event, EventBatch, WindowConfig, partition_windows
from .history import HistoryStore, trim_history
from .likelihood import full_loglik, intensity, window_loglik
from .params import (
    EPS_FLOOR,
    HomHawkesParams,
    HomPoissonParams,
    InhomHawkesParams,
    InhomPoissonParams,
    InitRanges,
    ModelParams,
)

__version__ = "0.1.0"

__all__ = [
    "StepBasis",
    "InputError",
    "NumericError",
    "StreamBlocksError",
    "EdgeList",
    "Event",
    "EventBatch",
    "WindowConfig",
    "partition_windows",
    "HistoryStore",
    "trim_history",
    "full_loglik",
    "intensity",
    "window_loglik",
    "EPS_FLOOR",
    "HomHawkesParams",
    "HomPoissonParams",
    "InhomHawkesParams",
    "InhomPoissonParams",
    "InitRanges",
    "ModelParams",
]
