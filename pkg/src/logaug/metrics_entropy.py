"""Log-variability measures: trace/prefix entropy over control-flow variants
and discretized entropy of time distributions.

All entropies use the natural logarithm; the normalized trace entropy divides
by ln(number of traces), its maximum. Variant identity defaults to activity
labels only, ignoring lifecycle and resources.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .log_model import EventLog, MS_PER_HOUR, log_activity_durations

_SCOTT_FACTOR = 3.49


@dataclass(frozen=True)
class EntropyReport:
    """Variability summary of one log. ``activity_duration_entropy`` is None
    for logs without measurable (start, complete) pairs."""

    trace_entropy: float
    prefix_entropy: float
    cycle_time_entropy: float
    activity_duration_entropy: float | None
    normalized_trace_entropy: float

    def to_dict(self) -> dict:
        return {
            "trace_entropy": self.trace_entropy,
            "prefix_entropy": self.prefix_entropy,
            "cycle_time_entropy": self.cycle_time_entropy,
            "activity_duration_entropy": self.activity_duration_entropy,
            "normalized_trace_entropy": self.normalized_trace_entropy,
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2).encode("utf-8")

    def to_table(self) -> str:
        act = ("-" if self.activity_duration_entropy is None
               else f"{self.activity_duration_entropy:.4g}")
        columns = [
            ("Trace", f"{self.trace_entropy:.4g}"),
            ("Prefix", f"{self.prefix_entropy:.4g}"),
            ("Act", act),
            ("CycleTime", f"{self.cycle_time_entropy:.4g}"),
        ]
        widths = [max(len(h), len(v)) for h, v in columns]
        head = "  ".join(h.rjust(w) for (h, _), w in zip(columns, widths))
        row = "  ".join(v.rjust(w) for (_, v), w in zip(columns, widths))
        return head + "\n" + row


def _entropy_of_counts(counts) -> float:
    total = sum(counts)
    out = 0.0
    for count in counts:
        if count:
            share = count / total
            out -= share * math.log(share)
    return out


def _variant(trace, include_lifecycle: bool):
    if include_lifecycle:
        return tuple((e.activity, e.lifecycle) for e in trace)
    return trace.activities()


def trace_entropy(log: EventLog, include_lifecycle: bool = False) -> float:
    """Shannon entropy of the control-flow variant distribution."""
    if len(log) == 0:
        raise ValueError("trace_entropy needs a non-empty log")
    variants = Counter(_variant(t, include_lifecycle) for t in log)
    return _entropy_of_counts(variants.values())


def prefix_entropy(log: EventLog, include_lifecycle: bool = False) -> float:
    """Shannon entropy of the multiset pooling every prefix (including the
    empty one) of every trace, in activity-sequence form."""
    if len(log) == 0:
        raise ValueError("prefix_entropy needs a non-empty log")
    prefixes = Counter()
    for trace in log:
        variant = _variant(trace, include_lifecycle)
        for length in range(len(variant) + 1):
            prefixes[variant[:length]] += 1
    return _entropy_of_counts(prefixes.values())


def normalized_trace_entropy(log: EventLog, include_lifecycle: bool = False) -> float:
    """Trace entropy rescaled to [0, 1] by its maximum ln(number of traces);
    0 for a single-trace log."""
    value = trace_entropy(log, include_lifecycle)
    if len(log) < 2:
        return 0.0
    return value / math.log(len(log))


def scott_bin_width(values) -> float:
    """Scott's reference bin width 3.49 * s * n^(-1/3) with the unbiased
    sample standard deviation; 0 when the sample cannot spread (n < 2 or
    zero variance)."""
    values = np.asarray(list(values), dtype=float)
    if values.size < 2:
        return 0.0
    std = float(values.std(ddof=1))
    return _SCOTT_FACTOR * std * values.size ** (-1.0 / 3.0)


def discretized_entropy(values) -> float:
    """Entropy of a histogram over the value range with the bin count chosen
    by Scott's rule; 0 when all values coincide."""
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        raise ValueError("discretized_entropy needs a non-empty sample")
    low, high = float(values.min()), float(values.max())
    width = scott_bin_width(values)
    if width <= 0 or high <= low:
        return 0.0
    n_bins = max(1, math.ceil((high - low) / width))
    counts, _ = np.histogram(values, bins=n_bins, range=(low, high))
    return _entropy_of_counts(counts.tolist())


def cycle_time_entropy(log: EventLog) -> float:
    """Discretized entropy of the trace duration distribution."""
    if len(log) == 0:
        raise ValueError("cycle_time_entropy needs a non-empty log")
    return discretized_entropy([t.duration_ms() / MS_PER_HOUR for t in log])


def activity_duration_entropy(log: EventLog) -> float | None:
    """Unweighted mean, over activities with at least one measurable
    duration, of the discretized entropy of that activity's durations.

    None when no start/complete pair exists, so per-activity variability is
    unmeasurable. Averaging per activity (rather than pooling all durations)
    makes constant per-activity durations score exactly zero.
    """
    durations = log_activity_durations(log)
    if not durations:
        return None
    values = [
        discretized_entropy(samples) for _, samples in sorted(durations.items())
    ]
    return sum(values) / len(values)


def entropy_report(log: EventLog, include_lifecycle: bool = False) -> EntropyReport:
    return EntropyReport(
        trace_entropy=trace_entropy(log, include_lifecycle),
        prefix_entropy=prefix_entropy(log, include_lifecycle),
        cycle_time_entropy=cycle_time_entropy(log),
        activity_duration_entropy=activity_duration_entropy(log),
        normalized_trace_entropy=normalized_trace_entropy(log, include_lifecycle),
    )
