"""Event-log data model and derived per-log quantities.

Timestamps are stored as integer milliseconds since the Unix epoch so that
ordering and arithmetic are exact and deterministic. Resources are optional:
several real-world logs only annotate a subset of events, so operations that
need resources skip resource-less events instead of failing.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

MS_PER_HOUR = 3_600_000
MS_PER_SECOND = 1_000

LIFECYCLE_START = "start"
LIFECYCLE_COMPLETE = "complete"
LIFECYCLE_SCHEDULE = "schedule"

NUMERIC = "numeric"
CATEGORICAL = "categorical"

AttrValue = "str | float"


@dataclass(frozen=True)
class Event:
    """One recorded step of a process execution.

    ``lifecycle`` defaults to ``complete`` when the source log omits it; any
    other label (``start``, ``schedule``, custom ones) is kept verbatim in
    lowercase. ``attributes`` maps attribute names to either a categorical
    label (str) or a numeric value (float).
    """

    case_id: str
    activity: str
    timestamp_ms: int
    resource: str | None = None
    lifecycle: str = LIFECYCLE_COMPLETE
    attributes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Trace:
    """Timestamp-ordered sequence of events sharing one case id."""

    case_id: str
    events: tuple

    def __post_init__(self):
        for e in self.events:
            if e.case_id != self.case_id:
                raise ValueError(
                    f"trace {self.case_id!r} contains event of case {e.case_id!r}"
                )
        times = [e.timestamp_ms for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError(f"trace {self.case_id!r} events are not time-ordered")

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def start_ms(self) -> int:
        return self.events[0].timestamp_ms

    @property
    def end_ms(self) -> int:
        return self.events[-1].timestamp_ms

    def duration_ms(self) -> int:
        """Cycle time: last timestamp minus first."""
        return self.end_ms - self.start_ms

    def activities(self) -> tuple:
        """The activity-label sequence (the trace's control-flow variant)."""
        return tuple(e.activity for e in self.events)


@dataclass(frozen=True)
class EventLog:
    """Multiset of traces plus the attribute typing schema.

    ``attribute_schema`` maps every attribute name appearing in any event to
    ``"numeric"`` or ``"categorical"``. Immutable after construction; safe to
    share across threads.
    """

    traces: tuple
    attribute_schema: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = set()
        for trace in self.traces:
            for event in trace:
                missing.update(
                    name for name in event.attributes if name not in self.attribute_schema
                )
        if missing:
            raise ValueError(f"attribute_schema misses names: {sorted(missing)}")

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    @property
    def epoch_ms(self) -> int:
        """Earliest event timestamp in the log."""
        return min(t.start_ms for t in self.traces if len(t))

    def has_resources(self) -> bool:
        return any(e.resource is not None for t in self.traces for e in t)

    def activity_set(self) -> set:
        return {e.activity for t in self.traces for e in t}


@dataclass(frozen=True)
class SplitPair:
    """Temporal train/test split: every train trace starts no later than any test trace."""

    train: EventLog
    test: EventLog


def make_trace(case_id: str, events) -> Trace:
    """Build a trace, sorting events by timestamp (stable, so equal timestamps
    keep their source order)."""
    ordered = tuple(sorted(events, key=lambda e: e.timestamp_ms))
    return Trace(case_id=case_id, events=ordered)


def make_log(traces, attribute_schema=None) -> EventLog:
    """Build an EventLog, inferring the schema from event values when not given.

    Inference rule: an attribute is numeric iff every observed value is a
    number, otherwise categorical.
    """
    traces = tuple(traces)
    if attribute_schema is None:
        attribute_schema = infer_schema(traces)
    return EventLog(traces=traces, attribute_schema=dict(attribute_schema))


def infer_schema(traces) -> dict:
    numeric_so_far = {}
    for trace in traces:
        for event in trace:
            for name, value in event.attributes.items():
                is_num = isinstance(value, (int, float)) and not isinstance(value, bool)
                numeric_so_far[name] = numeric_so_far.get(name, True) and is_num
    return {
        name: (NUMERIC if is_num else CATEGORICAL)
        for name, is_num in sorted(numeric_so_far.items())
    }


def temporal_split(log: EventLog, train_fraction: float) -> SplitPair:
    """Split a log temporally: the earliest-starting fraction of traces
    (rounded down) goes to train, the rest to test.

    Traces are ordered by first-event timestamp; equal start times are broken
    by case id so the split is deterministic.
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0,1), got {train_fraction}")
    if len(log) < 2:
        raise ValueError("temporal_split needs at least 2 traces")
    ordered = sorted(log.traces, key=lambda t: (t.start_ms, t.case_id))
    n_train = int(len(ordered) * train_fraction)
    schema = dict(log.attribute_schema)
    return SplitPair(
        train=make_log(ordered[:n_train], schema),
        test=make_log(ordered[n_train:], schema),
    )


def k_prefixes(trace: Trace, k: int) -> list:
    """All history windows of a trace under a history bound of k events.

    Returns the empty window followed, for each position i, by the window of
    the last min(i, k) events ending at i. Always yields len(trace) + 1
    windows; for k >= len(trace) this is the plain prefix set.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    events = trace.events
    out = [()]
    for i in range(1, len(events) + 1):
        out.append(tuple(events[max(0, i - k):i]))
    return out


def activity_duration(event: Event, trace: Trace) -> float | None:
    """Duration of an activity instance, in seconds.

    A start event is paired with the complete event of the same activity whose
    timestamp is nearest in time (and vice versa); the signed difference
    complete-minus-start is returned. None when no counterpart exists.
    Ties on |time difference| go to the counterpart occurring earlier.
    """
    if event.lifecycle == LIFECYCLE_START:
        wanted = LIFECYCLE_COMPLETE
    elif event.lifecycle == LIFECYCLE_COMPLETE:
        wanted = LIFECYCLE_START
    else:
        return None
    best = None
    best_gap = None
    for other in trace:
        if other is event:
            continue
        if other.activity != event.activity or other.lifecycle != wanted:
            continue
        gap = abs(other.timestamp_ms - event.timestamp_ms)
        if best_gap is None or gap < best_gap:
            best, best_gap = other, gap
    if best is None:
        return None
    if event.lifecycle == LIFECYCLE_START:
        delta_ms = best.timestamp_ms - event.timestamp_ms
    else:
        delta_ms = event.timestamp_ms - best.timestamp_ms
    return delta_ms / MS_PER_SECOND


def log_activity_durations(log: EventLog) -> dict:
    """Per-activity multisets of measured durations (seconds), from start
    events only so each start/complete pairing is counted once."""
    out = {}
    for trace in log:
        for event in trace:
            if event.lifecycle != LIFECYCLE_START:
                continue
            dur = activity_duration(event, trace)
            if dur is not None:
                out.setdefault(event.activity, []).append(dur)
    return out


def handover_counts(log: EventLog) -> Counter:
    """Directed handover-of-work counts: (r_i, r_j) -> number of consecutive
    event pairs across all traces where r_i directly precedes r_j.

    Events without resources cannot take part in a handover and are skipped
    as pair endpoints.
    """
    counts = Counter()
    for trace in log:
        for prev, nxt in zip(trace.events, trace.events[1:]):
            if prev.resource is None or nxt.resource is None:
                continue
            counts[(prev.resource, nxt.resource)] += 1
    return counts


def inter_arrival_times(log: EventLog) -> list:
    """Gaps (ms) between consecutive case arrivals, ordered by first-event
    timestamp. Length is len(log) - 1."""
    if len(log) < 2:
        raise ValueError("inter_arrival_times needs at least 2 traces")
    starts = sorted(t.start_ms for t in log)
    return [b - a for a, b in zip(starts, starts[1:])]


def inter_execution_samples(log: EventLog) -> dict:
    """(activity, lifecycle) -> gaps (ms) between each matching event and its
    immediate predecessor within the trace. Trace-initial events contribute
    no sample."""
    samples = {}
    for trace in log:
        for prev, nxt in zip(trace.events, trace.events[1:]):
            key = (nxt.activity, nxt.lifecycle)
            samples.setdefault(key, []).append(nxt.timestamp_ms - prev.timestamp_ms)
    return samples
