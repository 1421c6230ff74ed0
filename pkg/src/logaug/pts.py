"""Probabilistic transition system: multi-perspective model of an event log.

Three history-bounded transition tables (control-flow over activity-lifecycle
pairs, resource-aware, attribute-aware) carry empirical transition
probabilities; a temporal model maps every activity-lifecycle pair to a
fitted inter-execution time distribution and holds the fitted case
inter-arrival distribution.

Trace termination is modeled as a reserved virtual successor counted like any
activity, so each state's outgoing mass (including ending) sums to one and
generation terminates stochastically.
"""

from __future__ import annotations

import gzip
import json
import logging
from dataclasses import dataclass

from . import distfit
from .distfit import FittedDistribution
from .log_model import EventLog, inter_arrival_times, inter_execution_samples

logger = logging.getLogger(__name__)

FORMAT_NAME = "pts"
FORMAT_VERSION = 1

# Virtual end-of-trace successor; "⊣" cannot be a real activity label.
END_KEY = ("⊣", "complete")


class ModelFormatError(ValueError):
    """Raised when serialized model bytes cannot be decoded."""


@dataclass(frozen=True)
class CfTransitionTable:
    """Control-flow table over windows of (activity, lifecycle) pairs."""

    k: int
    counts: dict        # state -> {(activity, lifecycle) | END_KEY: count}
    transitions: dict   # state -> {same keys: probability}
    support: dict       # state -> total observations
    final_states: frozenset


@dataclass(frozen=True)
class ConditionalTransitionTable:
    """Resource- or attribute-aware table.

    States are windows of (activity, lifecycle, annotation) triples, where
    the annotation is a resource label (or None) or an attribute-value tuple.
    ``transitions[state][(a, l)]`` is the distribution over the annotation of
    the next event, given the window and the already-chosen next pair.
    ``global_by_activity`` is the per-activity annotation frequency used as a
    last resort when a combination was never observed.
    """

    k: int
    counts: dict        # state -> {(a, l): {annotation: count}}
    transitions: dict   # state -> {(a, l): {annotation: probability}}
    global_by_activity: dict  # activity -> {annotation: probability}


@dataclass(frozen=True)
class TemporalModel:
    per_activity: dict  # (activity, lifecycle) -> FittedDistribution
    inter_arrival: FittedDistribution


@dataclass(frozen=True)
class ProbabilisticTransitionSystem:
    cf: CfTransitionTable
    res: ConditionalTransitionTable
    attr: ConditionalTransitionTable
    temporal: TemporalModel
    k: int
    schema: dict
    max_trace_len: int

    def summary(self) -> dict:
        """Sizes and temporal fits, for discovery reports."""
        return {
            "k": self.k,
            "cf_states": len(self.cf.transitions),
            "resource_states": len(self.res.transitions),
            "attribute_states": len(self.attr.transitions),
            "final_states": len(self.cf.final_states),
            "max_trace_len": self.max_trace_len,
            "inter_arrival": self.temporal.inter_arrival.to_dict(),
            "per_activity_fits": {
                _pair_key(pair): dist.to_dict()
                for pair, dist in sorted(self.temporal.per_activity.items())
            },
        }


def _attr_vector(event, names) -> tuple:
    return tuple(event.attributes.get(name) for name in names)


def discover(train: EventLog, k: int) -> ProbabilisticTransitionSystem:
    """Learn the full transition system from a training log.

    Probabilities are raw empirical frequencies: for each observed window the
    share of times each successor (or trace end) followed it. Temporal
    distributions are fitted on inter-execution gaps pooled by the successor's
    activity-lifecycle pair; trace-initial events contribute no gap.
    """
    if len(train) == 0:
        raise ValueError("cannot discover a transition system from an empty log")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if any(e.activity == END_KEY[0] for t in train for e in t):
        raise ValueError(f"activity label {END_KEY[0]!r} is reserved")

    attr_names = sorted(train.attribute_schema)
    cf_counts: dict = {}
    res_counts: dict = {}
    attr_counts: dict = {}
    res_global: dict = {}
    attr_global: dict = {}
    final_states = set()
    max_len = 0

    for trace in train:
        events = trace.events
        max_len = max(max_len, len(events))
        cf_items = [(e.activity, e.lifecycle) for e in events]
        res_items = [(e.activity, e.lifecycle, e.resource) for e in events]
        attr_items = [
            (e.activity, e.lifecycle, _attr_vector(e, attr_names)) for e in events
        ]
        for i, event in enumerate(events):
            pair = cf_items[i]
            lo = max(0, i - k)
            _bump(cf_counts, tuple(cf_items[lo:i]), pair)
            _bump_inner(res_counts, tuple(res_items[lo:i]), pair, event.resource)
            _bump_inner(attr_counts, tuple(attr_items[lo:i]), pair, attr_items[i][2])
            _bump(res_global, event.activity, event.resource)
            _bump(attr_global, event.activity, attr_items[i][2])
        terminal = tuple(cf_items[max(0, len(events) - k):])
        _bump(cf_counts, terminal, END_KEY)
        final_states.add(terminal)

    per_activity = {
        pair: distfit.fit_best(gaps)
        for pair, gaps in sorted(inter_execution_samples(train).items())
    }
    if len(train) >= 2:
        inter_arrival = distfit.fit_best(inter_arrival_times(train))
    else:
        logger.warning("single-trace log: inter-arrival model falls back to constant 0")
        inter_arrival = distfit.constant(0.0)

    return ProbabilisticTransitionSystem(
        cf=_freeze_cf(k, cf_counts, final_states),
        res=_freeze_conditional(k, res_counts, res_global),
        attr=_freeze_conditional(k, attr_counts, attr_global),
        temporal=TemporalModel(per_activity=per_activity, inter_arrival=inter_arrival),
        k=k,
        schema=dict(train.attribute_schema),
        max_trace_len=max_len,
    )


def _bump(table, key, inner_key):
    bucket = table.setdefault(key, {})
    bucket[inner_key] = bucket.get(inner_key, 0) + 1


def _bump_inner(table, state, pair, annotation):
    by_pair = table.setdefault(state, {})
    bucket = by_pair.setdefault(pair, {})
    bucket[annotation] = bucket.get(annotation, 0) + 1


def _normalized(counts: dict) -> dict:
    total = sum(counts.values())
    return {key: count / total for key, count in counts.items()}


def _freeze_cf(k, counts, final_states) -> CfTransitionTable:
    return CfTransitionTable(
        k=k,
        counts=counts,
        transitions={state: _normalized(bucket) for state, bucket in counts.items()},
        support={state: sum(bucket.values()) for state, bucket in counts.items()},
        final_states=frozenset(final_states),
    )


def _freeze_conditional(k, counts, global_counts) -> ConditionalTransitionTable:
    return ConditionalTransitionTable(
        k=k,
        counts=counts,
        transitions={
            state: {pair: _normalized(bucket) for pair, bucket in by_pair.items()}
            for state, by_pair in counts.items()
        },
        global_by_activity={
            activity: _normalized(bucket) for activity, bucket in global_counts.items()
        },
    )


def lookup_cf(table: CfTransitionTable, state) -> tuple:
    """Successor distribution for a window, backing off by dropping the
    oldest element until an observed window matches. Returns (distribution
    including the end entry, the window actually used)."""
    s = tuple(state)[-table.k:] if table.k else ()
    while True:
        found = table.transitions.get(s)
        if found is not None:
            return found, s
        if not s:
            raise AssertionError("empty window missing from a non-empty model")
        s = s[1:]


def lookup_conditional(table: ConditionalTransitionTable, state, pair) -> dict | None:
    """Annotation distribution given a window and the chosen next pair, with
    the same oldest-first back-off; None when even the empty window never saw
    this pair (caller falls back to the per-activity global frequency)."""
    s = tuple(state)[-table.k:] if table.k else ()
    while True:
        by_pair = table.transitions.get(s)
        if by_pair is not None and pair in by_pair:
            return by_pair[pair]
        if not s:
            return None
        s = s[1:]


def next_activity_distribution(pts: ProbabilisticTransitionSystem, state) -> tuple:
    """(successor distribution over (activity, lifecycle), end probability)
    for a control-flow window, applying back-off for unobserved windows.

    The end probability is nonzero exactly when the matched window was
    trace-final in training."""
    dist, _ = lookup_cf(pts.cf, state)
    end_prob = dist.get(END_KEY, 0.0)
    return {key: p for key, p in dist.items() if key != END_KEY}, end_prob


# --- serialization (versioned gzip JSON envelope) ---

def _pair_key(pair) -> str:
    return json.dumps(list(pair), ensure_ascii=True, separators=(",", ":"))

def _state_key(state) -> str:
    return json.dumps([list(item) for item in state], ensure_ascii=True,
                      separators=(",", ":"))

def _annot_key(annotation) -> str:
    return json.dumps(annotation, ensure_ascii=True, separators=(",", ":"))


def _pair_from_key(key: str) -> tuple:
    return tuple(json.loads(key))

def _state_from_key(key: str) -> tuple:
    return tuple(_item_from_raw(item) for item in json.loads(key))

def _item_from_raw(item):
    # Window items are [a, l] or [a, l, annotation]; attribute annotations
    # are themselves arrays.
    if len(item) == 3 and isinstance(item[2], list):
        return (item[0], item[1], tuple(item[2]))
    return tuple(item)

def _annot_from_key(key: str):
    value = json.loads(key)
    return tuple(value) if isinstance(value, list) else value


def serialize(pts: ProbabilisticTransitionSystem) -> bytes:
    """Lossless gzip-JSON encoding; byte-stable for a fixed model."""
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "k": pts.k,
        "schema": pts.schema,
        "max_trace_len": pts.max_trace_len,
        "cf": {
            "counts": {
                _state_key(state): {_pair_key(p): n for p, n in bucket.items()}
                for state, bucket in pts.cf.counts.items()
            },
            "final_states": sorted(_state_key(s) for s in pts.cf.final_states),
        },
        "res": _conditional_payload(pts.res),
        "attr": _conditional_payload(pts.attr),
        "temporal": {
            "per_activity": {
                _pair_key(pair): dist.to_dict()
                for pair, dist in pts.temporal.per_activity.items()
            },
            "inter_arrival": pts.temporal.inter_arrival.to_dict(),
        },
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return gzip.compress(body, mtime=0)


def _conditional_payload(table: ConditionalTransitionTable) -> dict:
    return {
        "counts": {
            _state_key(state): {
                _pair_key(pair): {_annot_key(a): n for a, n in bucket.items()}
                for pair, bucket in by_pair.items()
            }
            for state, by_pair in table.counts.items()
        },
        "global": {
            activity: {_annot_key(a): n for a, n in bucket.items()}
            for activity, bucket in table.global_by_activity.items()
        },
    }


def deserialize(data: bytes) -> ProbabilisticTransitionSystem:
    try:
        body = gzip.decompress(data)
        payload = json.loads(body)
    except (OSError, EOFError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"cannot decode model bytes: {exc}") from exc
    if payload.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"not a transition-system model: {payload.get('format')!r}")
    if payload.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model version {payload.get('version')!r}, "
            f"expected {FORMAT_VERSION}"
        )
    k = payload["k"]
    cf_counts = {
        _state_from_key(key): {_pair_from_key(p): n for p, n in bucket.items()}
        for key, bucket in payload["cf"]["counts"].items()
    }
    final_states = {_state_from_key(key) for key in payload["cf"]["final_states"]}
    return ProbabilisticTransitionSystem(
        cf=_freeze_cf(k, cf_counts, final_states),
        res=_conditional_from_payload(k, payload["res"]),
        attr=_conditional_from_payload(k, payload["attr"]),
        temporal=TemporalModel(
            per_activity={
                _pair_from_key(key): FittedDistribution.from_dict(raw)
                for key, raw in payload["temporal"]["per_activity"].items()
            },
            inter_arrival=FittedDistribution.from_dict(payload["temporal"]["inter_arrival"]),
        ),
        k=k,
        schema=dict(payload["schema"]),
        max_trace_len=payload["max_trace_len"],
    )


def _conditional_from_payload(k, payload) -> ConditionalTransitionTable:
    counts = {
        _state_from_key(key): {
            _pair_from_key(p): {_annot_from_key(a): n for a, n in bucket.items()}
            for p, bucket in by_pair.items()
        }
        for key, by_pair in payload["counts"].items()
    }
    global_counts = {
        activity: {_annot_from_key(a): n for a, n in bucket.items()}
        for activity, bucket in payload["global"].items()
    }
    return _freeze_conditional(k, counts, global_counts)


def save_pts(pts: ProbabilisticTransitionSystem, path) -> None:
    with open(path, "wb") as handle:
        handle.write(serialize(pts))


def load_pts(path) -> ProbabilisticTransitionSystem:
    with open(path, "rb") as handle:
        return deserialize(handle.read())
