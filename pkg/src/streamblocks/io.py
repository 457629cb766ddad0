"""File formats: event/edge CSV, fit and truth JSON, trace CSV, key=value config.

All event ingestion is streaming (constant memory in the stream length);
the in-memory helpers exist for the batch fitter and the tests. Formats:

- events CSV: header ``src,dst,t``; integer ids, real timestamps; UTF-8, LF.
- snap format: header-less whitespace ``src dst unix-time`` rows (``#``
  comment lines skipped); timestamps are shifted so the first event is
  at 0, units preserved.
- edge list CSV: header ``src,dst``.
- fit output JSON: {model, params{...}, pi[], tau[[...]], z_hat[], config{...}}.
- trace CSV: ``window,n_events,eta,elbo_norm,loglik_norm``.
- config files: one ``key=value`` per line, ``#`` comments, blank lines
  ignored; keys are the CLI long-option names (hyphen/underscore
  equivalent); the last assignment to a key wins.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .basis import StepBasis
from .errors import InputError
from .events import EdgeList, EventBatch, WindowConfig
from .params import (
    HomHawkesParams,
    HomPoissonParams,
    InhomHawkesParams,
    InhomPoissonParams,
    ModelParams,
)

EVENT_FORMATS = ("csv", "snap")
EVENTS_HEADER = ["src", "dst", "t"]
EDGES_HEADER = ["src", "dst"]
TRACE_HEADER = ["window", "n_events", "eta", "elbo_norm", "loglik_norm"]


# ---------------------------------------------------------------------------
# event streams


def _parse_event_fields(fields, line_no: int, path: str):
    if len(fields) != 3:
        raise InputError(
            f"{path}: line {line_no}: expected 3 fields src,dst,t, got {len(fields)}"
        )
    try:
        src = int(fields[0])
        dst = int(fields[1])
        t = float(fields[2])
    except ValueError as exc:
        raise InputError(f"{path}: line {line_no}: {exc}") from None
    if src < 0 or dst < 0:
        raise InputError(f"{path}: line {line_no}: negative node id")
    if not math.isfinite(t):
        raise InputError(f"{path}: line {line_no}: non-finite timestamp")
    return src, dst, t


def iter_event_rows(path: str, fmt: str = "csv", drop_self_loops: bool = False):
    """Yield validated (src, dst, t) rows from an event file, in file order.

    Timestamps must be nondecreasing (error cites the offending line).
    snap rows are shifted so the stream starts at t = 0. Self-loop rows
    are dropped (with one summary warning) only when asked — the model
    has no self-interactions, so a derived edge set cannot contain them.
    """
    if fmt not in EVENT_FORMATS:
        raise InputError(f"unknown event format {fmt!r}; expected one of {EVENT_FORMATS}")
    prev_t = -math.inf
    shift = None
    n_self = 0
    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            reader = csv.reader(fh)
            rows = ((i, row) for i, row in enumerate(reader, start=1))
            first = next(rows, None)
            if first is None or [c.strip() for c in first[1]] != EVENTS_HEADER:
                raise InputError(f"{path}: missing events header 'src,dst,t'")
            source = ((i, row) for i, row in rows if row)
        else:
            source = (
                (i, line.split())
                for i, line in enumerate(fh, start=1)
                if line.strip() and not line.lstrip().startswith("#")
            )
        for line_no, fields in source:
            src, dst, t = _parse_event_fields(fields, line_no, path)
            if t < prev_t:
                raise InputError(
                    f"{path}: line {line_no}: events out of order "
                    f"(t={t:g} after t={prev_t:g})"
                )
            prev_t = t
            if fmt == "snap":
                if shift is None:
                    shift = t
                t -= shift
            if drop_self_loops and src == dst:
                n_self += 1
                continue
            yield src, dst, t
    if n_self:
        warnings.warn(f"dropped {n_self} self-loop events from {path}")


def parse_events(path: str, fmt: str = "csv", drop_self_loops: bool = False) -> EventBatch:
    """Read a whole event file into a sorted in-memory batch."""
    src, dst, t = [], [], []
    for s, d, ts in iter_event_rows(path, fmt, drop_self_loops):
        src.append(s)
        dst.append(d)
        t.append(ts)
    return EventBatch(
        np.asarray(src, dtype=np.int64),
        np.asarray(dst, dtype=np.int64),
        np.asarray(t, dtype=np.float64),
    )


def stream_windows(
    path: str, cfg: WindowConfig, fmt: str = "csv", drop_self_loops: bool = False
):
    """Yield (window-index, EventBatch) pairs from a file, 1-based.

    Constant memory in the stream length: holds one window at a time.
    Window boundaries are computed exactly as the in-memory partition
    does (event enters window n while t < n*dT, final window keeps the
    remainder up to T); empty windows are emitted, and windows after the
    last event are emitted empty so every run sees all N windows.
    """
    n = 1
    buf_src, buf_dst, buf_t = [], [], []

    def flush():
        return EventBatch(
            np.asarray(buf_src, dtype=np.int64),
            np.asarray(buf_dst, dtype=np.int64),
            np.asarray(buf_t, dtype=np.float64),
        )

    for src, dst, t in iter_event_rows(path, fmt, drop_self_loops):
        if t < 0:
            raise InputError(f"negative timestamp t={t:g} in {path}")
        if t > cfg.T:
            raise InputError(f"event at t={t:g} beyond horizon T={cfg.T:g}")
        while n < cfg.N and t >= n * cfg.dT:
            yield n, flush()
            buf_src, buf_dst, buf_t = [], [], []
            n += 1
        buf_src.append(src)
        buf_dst.append(dst)
        buf_t.append(t)
    while n <= cfg.N:
        yield n, flush()
        buf_src, buf_dst, buf_t = [], [], []
        n += 1


def peek_time_range(path: str, fmt: str = "csv") -> tuple:
    """(first, last) raw timestamps of an event file, reading only its ends.

    Used to infer the horizon without a full pass; the streaming pass
    still validates every row. Assumes the file is well formed at both
    ends (a later full read reports precise line numbers if not).
    """

    def parse_line(text: str, line_no: int):
        text = text.strip()
        if not text:
            return None
        if fmt == "snap":
            if text.startswith("#"):
                return None
            fields = text.split()
        else:
            fields = next(csv.reader([text]))
            if [c.strip() for c in fields] == EVENTS_HEADER:
                return None
        return _parse_event_fields(fields, line_no, path)

    with open(path, newline="", encoding="utf-8") as fh:
        first = None
        for i, line in enumerate(fh, start=1):
            first = parse_line(line, i)
            if first is not None:
                break
        if first is None:
            raise InputError(f"{path}: no events")
    with open(path, "rb") as fb:
        fb.seek(0, 2)
        size = fb.tell()
        block = 1 << 16
        last = None
        while last is None:
            take = min(size, block)
            fb.seek(size - take)
            lines = fb.read(take).decode("utf-8", errors="replace").splitlines()
            if take < size:
                lines = lines[1:]  # first line may be a partial row
            for line in reversed(lines):
                last = parse_line(line, -1)
                if last is not None:
                    break
            if take == size:
                break
            block *= 4
    if last is None:
        last = first
    return first[2], last[2]


def infer_horizon(path: str, fmt: str = "csv") -> float:
    """Largest timestamp the stream will produce (snap shift applied)."""
    first, last = peek_time_range(path, fmt)
    return last - first if fmt == "snap" else last


def write_events_csv(path: str, events: EventBatch) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENTS_HEADER)
        for s, d, t in zip(events.src, events.dst, events.t):
            writer.writerow([int(s), int(d), repr(float(t))])


# ---------------------------------------------------------------------------
# edge lists


def load_edge_csv(path: str, m: int | None = None) -> EdgeList:
    pairs = []
    max_id = -1
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != EDGES_HEADER:
            raise InputError(f"{path}: missing edge header 'src,dst'")
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise InputError(f"{path}: line {i}: expected 2 fields src,dst")
            try:
                s, d = int(row[0]), int(row[1])
            except ValueError as exc:
                raise InputError(f"{path}: line {i}: {exc}") from None
            if s < 0 or d < 0:
                raise InputError(f"{path}: line {i}: negative node id")
            pairs.append((s, d))
            max_id = max(max_id, s, d)
    if not pairs:
        raise InputError(f"{path}: empty edge list")
    return EdgeList.from_pairs(pairs, m=max_id + 1 if m is None else m)


def write_edge_csv(path: str, edges: EdgeList) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EDGES_HEADER)
        for s, d in zip(edges.src, edges.dst):
            writer.writerow([int(s), int(d)])


def derive_edge_list(events: EventBatch, m: int | None = None) -> EdgeList:
    """Distinct (src, dst) pairs seen in the data; m = 1 + max id.

    Self-loops cannot enter the pair set (the models have none) and are
    dropped with a warning.
    """
    if not len(events):
        raise InputError("cannot derive an edge list from an empty stream")
    loops = int(np.sum(events.src == events.dst))
    if loops:
        warnings.warn(f"ignoring {loops} self-loop events while deriving edges")
    keep = events.src != events.dst
    if not np.any(keep):
        raise InputError("no non-self-loop events to derive an edge list from")
    pairs = np.unique(np.stack([events.src[keep], events.dst[keep]], axis=1), axis=0)
    inferred = int(max(events.src.max(), events.dst.max())) + 1
    return EdgeList.from_pairs(
        [(int(s), int(d)) for s, d in pairs], m=inferred if m is None else m
    )


def derive_edge_list_from_file(path: str, fmt: str = "csv") -> EdgeList:
    """Streaming variant of derive_edge_list: memory O(|A|), one pass."""
    pairs = set()
    max_id = -1
    loops = 0
    for s, d, _ in iter_event_rows(path, fmt):
        max_id = max(max_id, s, d)
        if s == d:
            loops += 1
        else:
            pairs.add((s, d))
    if loops:
        warnings.warn(f"ignoring {loops} self-loop events while deriving edges")
    if not pairs:
        raise InputError(f"{path}: no non-self-loop events to derive an edge list from")
    return EdgeList.from_pairs(sorted(pairs), m=max_id + 1)


# ---------------------------------------------------------------------------
# train/test split


def split_train_test(events: EventBatch, train_fraction: float):
    """Time-based split at the ceil(fraction * N)-th event's timestamp.

    Returns (train, test, t_split) with train = events at t <= t_split
    (ties included) and test the remainder. An empty test side warns.
    """
    if not 0 < train_fraction <= 1:
        raise InputError(
            f"train fraction must be in (0, 1], got {train_fraction:g}"
        )
    n = len(events)
    if n == 0:
        raise InputError("cannot split an empty event stream")
    idx = math.ceil(train_fraction * n)  # 1-based rank of the split event
    t_split = float(events.t[idx - 1])
    hi = int(np.searchsorted(events.t, t_split, side="right"))
    train, test = events[:hi], events[hi:]
    if len(test) == 0:
        warnings.warn("train/test split left the test side empty")
    return train, test, t_split


# ---------------------------------------------------------------------------
# parameter and fit documents


def params_to_dict(params: ModelParams) -> dict:
    if params.kind == "hom-poisson":
        return {"rates": params.rates.tolist()}
    if params.kind == "inhom-poisson":
        return {
            "coefs": params.coefs.tolist(),
            "H": params.basis.H,
            "period": params.basis.period,
        }
    if params.kind == "hom-hawkes":
        return {
            "baseline": params.baseline.tolist(),
            "excite": params.excite.tolist(),
            "decay": params.decay,
        }
    return {
        "coefs": params.coefs.tolist(),
        "H": params.basis.H,
        "period": params.basis.period,
        "excite": params.excite.tolist(),
        "decay": params.decay,
    }


def params_from_dict(model: str, d: dict) -> ModelParams:
    try:
        if model == "hom-poisson":
            return HomPoissonParams(np.asarray(d["rates"], dtype=np.float64))
        if model == "inhom-poisson":
            return InhomPoissonParams(
                np.asarray(d["coefs"], dtype=np.float64),
                StepBasis(int(d["H"]), float(d["period"])),
            )
        if model == "hom-hawkes":
            return HomHawkesParams(
                np.asarray(d["baseline"], dtype=np.float64),
                np.asarray(d["excite"], dtype=np.float64),
                float(d["decay"]),
            )
        if model == "inhom-hawkes":
            return InhomHawkesParams(
                np.asarray(d["coefs"], dtype=np.float64),
                StepBasis(int(d["H"]), float(d["period"])),
                np.asarray(d["excite"], dtype=np.float64),
                float(d["decay"]),
            )
    except KeyError as exc:
        raise InputError(f"params block for {model!r} is missing key {exc}") from None
    raise InputError(f"unknown model kind {model!r}")


@dataclass
class FitDocument:
    """Parsed form of the fit-output JSON."""

    model: str
    params: ModelParams
    pi: np.ndarray
    tau: np.ndarray
    z_hat: np.ndarray
    config: dict


def write_fit_json(
    path: str,
    params: ModelParams,
    pi: np.ndarray,
    tau: np.ndarray,
    config: dict,
) -> None:
    doc = {
        "model": params.kind,
        "params": params_to_dict(params),
        "pi": np.asarray(pi, dtype=np.float64).tolist(),
        "tau": np.asarray(tau, dtype=np.float64).tolist(),
        "z_hat": np.argmax(tau, axis=1).tolist(),
        "config": config,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_fit_json(path: str) -> FitDocument:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from None
    for key in ("model", "params", "pi", "tau", "z_hat"):
        if key not in doc:
            raise InputError(f"{path}: fit document is missing key {key!r}")
    return FitDocument(
        model=doc["model"],
        params=params_from_dict(doc["model"], doc["params"]),
        pi=np.asarray(doc["pi"], dtype=np.float64),
        tau=np.asarray(doc["tau"], dtype=np.float64),
        z_hat=np.asarray(doc["z_hat"], dtype=np.int64),
        config=doc.get("config", {}),
    )


def write_truth_json(
    path: str,
    params: ModelParams,
    pi: np.ndarray,
    z_star: np.ndarray,
    dense_nodes: np.ndarray | None,
    T: float,
    seed: int,
    config: dict | None = None,
) -> None:
    doc = {
        "model": params.kind,
        "params": params_to_dict(params),
        "pi": np.asarray(pi, dtype=np.float64).tolist(),
        "z_star": np.asarray(z_star, dtype=np.int64).tolist(),
        "dense_nodes": None
        if dense_nodes is None
        else np.asarray(dense_nodes, dtype=np.int64).tolist(),
        "T": float(T),
        "seed": int(seed),
        "config": config or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


@dataclass
class TruthDocument:
    model: str
    params: ModelParams
    pi: np.ndarray
    z_star: np.ndarray
    dense_nodes: np.ndarray | None
    T: float
    seed: int
    config: dict


def read_truth_json(path: str) -> TruthDocument:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from None
    for key in ("model", "params", "pi", "z_star", "T"):
        if key not in doc:
            raise InputError(f"{path}: truth document is missing key {key!r}")
    dense = doc.get("dense_nodes")
    return TruthDocument(
        model=doc["model"],
        params=params_from_dict(doc["model"], doc["params"]),
        pi=np.asarray(doc["pi"], dtype=np.float64),
        z_star=np.asarray(doc["z_star"], dtype=np.int64),
        dense_nodes=None if dense is None else np.asarray(dense, dtype=np.int64),
        T=float(doc["T"]),
        seed=int(doc.get("seed", 0)),
        config=doc.get("config", {}),
    )


# ---------------------------------------------------------------------------
# trace CSV


def write_trace_csv(path: str, records) -> None:
    """records: iterable with n, n_events, eta, elbo_norm, loglik_norm fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for rec in records:
            writer.writerow(
                [
                    int(rec.n),
                    int(rec.n_events),
                    repr(float(rec.eta)),
                    repr(float(rec.elbo_norm)),
                    repr(float(rec.loglik_norm)),
                ]
            )


def read_trace_csv(path: str) -> dict:
    """Columns of a trace CSV as arrays, keyed by header name."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != TRACE_HEADER:
            raise InputError(
                f"{path}: missing trace header {','.join(TRACE_HEADER)!r}"
            )
        cols = {name: [] for name in TRACE_HEADER}
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRACE_HEADER):
                raise InputError(f"{path}: line {i}: expected {len(TRACE_HEADER)} fields")
            for name, cell in zip(TRACE_HEADER, row):
                cols[name].append(float(cell))
    out = {name: np.asarray(vals) for name, vals in cols.items()}
    out["window"] = out["window"].astype(np.int64)
    out["n_events"] = out["n_events"].astype(np.int64)
    return out


# ---------------------------------------------------------------------------
# config files


def parse_config_file(path: str) -> dict:
    """Flat key=value config; '#' comments, blank lines, last key wins.

    Keys are returned underscore-normalized; values stay strings (the
    CLI applies per-option typing).
    """
    out = {}
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}: line {i}: expected key=value")
            key, value = line.split("=", 1)
            key = key.strip().lower().replace("-", "_")
            if not key:
                raise InputError(f"{path}: line {i}: empty key")
            out[key] = value.strip()
    return out
