"""Synthetic log generation by seeded random walks over a transition system,
plus rare-activity rebalancing of a training log.

Every trace draws from its own RNG stream keyed by (seed, trace index), so
output is reproducible regardless of scheduling and a 10-trace generation is
a prefix of a 20-trace one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import distfit
from .log_model import Event, EventLog, make_log, make_trace
from .pts import (
    END_KEY,
    ProbabilisticTransitionSystem,
    lookup_cf,
    lookup_conditional,
)

_SEED_MASK = (1 << 64) - 1


class BalanceError(RuntimeError):
    """Rejection budget exhausted before reaching the target fraction."""

    def __init__(self, message: str, achieved_fraction: float):
        super().__init__(message)
        self.achieved_fraction = achieved_fraction


@dataclass(frozen=True)
class GenerationConfig:
    """Settings for one generation run.

    ``max_trace_length`` caps the random walk; None means five times the
    longest training trace.
    """

    n_traces: int
    seed: int
    start_time_ms: int = 0
    max_trace_length: int | None = None

    def __post_init__(self):
        if self.n_traces < 0:
            raise ValueError("n_traces must be >= 0")
        if self.max_trace_length is not None and self.max_trace_length < 1:
            raise ValueError("max_trace_length must be >= 1")


@dataclass(frozen=True)
class BalanceConfig:
    """Target for rare-activity rebalancing: the share of traces that must
    contain ``target_activity`` after augmentation."""

    target_activity: str
    target_fraction: float = 0.5
    max_rejections_per_trace: int = 1000

    def __post_init__(self):
        if not 0 < self.target_fraction < 1:
            raise ValueError("target_fraction must be in (0,1)")
        if self.max_rejections_per_trace < 1:
            raise ValueError("max_rejections_per_trace must be >= 1")


@dataclass
class GenerationReport:
    seed: int
    n_traces: int
    truncated_cases: list = field(default_factory=list)
    rejections: int = 0
    notices: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_traces": self.n_traces,
            "truncated_cases": list(self.truncated_cases),
            "rejections": self.rejections,
            "notices": list(self.notices),
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2).encode("utf-8")


def _trace_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=(seed & _SEED_MASK, index)))
    )


def _order_token(key) -> str:
    return json.dumps(key, ensure_ascii=True)


def _draw(distribution: dict, rng: np.random.Generator):
    """Sample a key from a probability dict, iterating keys in a canonical
    order so the draw depends only on the RNG state."""
    u = rng.random()
    items = sorted(distribution.items(), key=lambda kv: _order_token(kv[0]))
    acc = 0.0
    for key, prob in items:
        acc += prob
        if u < acc:
            return key
    return items[-1][0]


def _cap(pts: ProbabilisticTransitionSystem, config: GenerationConfig) -> int:
    if config.max_trace_length is not None:
        return config.max_trace_length
    return max(1, 5 * pts.max_trace_len)


def _walk_trace(pts, rng, case_id, arrival_ms, cap):
    """One random walk from the initial state until the end marker or the
    length cap. Returns (events, truncated)."""
    attr_names = sorted(pts.schema)
    events = []
    cf_window = ()
    res_window = ()
    attr_window = ()
    current_ms = arrival_ms
    while True:
        successors, _ = lookup_cf(pts.cf, cf_window)
        choice = _draw(successors, rng)
        if choice == END_KEY:
            return events, False
        if len(events) >= cap:
            return events, True
        activity, lifecycle = choice

        res_dist = lookup_conditional(pts.res, res_window, choice)
        if res_dist is None:
            res_dist = pts.res.global_by_activity[activity]
        resource = _draw(res_dist, rng)

        attr_dist = lookup_conditional(pts.attr, attr_window, choice)
        if attr_dist is None:
            attr_dist = pts.attr.global_by_activity[activity]
        vector = _draw(attr_dist, rng)

        if events:
            gap_dist = pts.temporal.per_activity.get(choice)
            if gap_dist is not None:
                current_ms += max(0, int(round(distfit.sample(gap_dist, rng))))
        events.append(
            Event(
                case_id=case_id,
                activity=activity,
                timestamp_ms=current_ms,
                resource=resource,
                lifecycle=lifecycle,
                attributes={n: v for n, v in zip(attr_names, vector) if v is not None},
            )
        )
        k = pts.k
        cf_window = (cf_window + (choice,))[-k:]
        res_window = (res_window + ((activity, lifecycle, resource),))[-k:]
        attr_window = (attr_window + ((activity, lifecycle, vector),))[-k:]


def generate_log(pts: ProbabilisticTransitionSystem,
                 config: GenerationConfig) -> tuple:
    """Generate a synthetic log of ``config.n_traces`` traces.

    Case arrivals are cumulative inter-arrival draws from the start time; each
    trace is then walked independently, sampling the next activity-lifecycle
    pair, its resource, its attributes, and the inter-event gap.
    Returns (EventLog, GenerationReport).
    """
    report = GenerationReport(seed=config.seed, n_traces=config.n_traces)
    cap = _cap(pts, config)
    traces = []
    arrival_ms = config.start_time_ms
    for index in range(config.n_traces):
        rng = _trace_rng(config.seed, index)
        arrival_ms += max(0, int(round(distfit.sample(pts.temporal.inter_arrival, rng))))
        case_id = f"gen-{index:06d}"
        events, truncated = _walk_trace(pts, rng, case_id, arrival_ms, cap)
        if truncated:
            report.truncated_cases.append(case_id)
        traces.append(make_trace(case_id, events))
    return make_log(traces, dict(pts.schema)), report


def generate_balanced(pts: ProbabilisticTransitionSystem, train: EventLog,
                      config: GenerationConfig, balance: BalanceConfig) -> tuple:
    """Rebalance a training log so the target activity appears in the target
    fraction of traces (nearest integer count).

    Synthetic traces containing the activity are produced by rejection
    sampling and replace the latest-starting traces that lack it, keeping the
    trace count unchanged. Returns (EventLog, GenerationReport).
    """
    target = balance.target_activity
    contains = [
        any(e.activity == target for e in trace) for trace in train
    ]
    if not any(contains):
        raise ValueError(
            f"activity {target!r} never occurs in the training log; "
            "the model cannot emit it"
        )
    total = len(train)
    target_count = int(balance.target_fraction * total + 0.5)
    have = sum(contains)
    report = GenerationReport(seed=config.seed, n_traces=total)
    if have >= target_count:
        report.notices.append(
            f"activity {target!r} already present in {have}/{total} traces "
            f"(target {target_count}); log returned unchanged"
        )
        return train, report

    need = target_count - have
    order = sorted(
        range(total),
        key=lambda i: (train.traces[i].start_ms, train.traces[i].case_id),
    )
    lacking_by_start = [i for i in order if not contains[i]]
    dropped = set(lacking_by_start[-need:])

    cap = _cap(pts, config)
    synthetic = []
    arrival_ms = config.start_time_ms
    attempt = 0
    for slot in range(need):
        accepted = None
        rejections = 0
        while accepted is None:
            if rejections >= balance.max_rejections_per_trace:
                achieved = (have + len(synthetic)) / total
                raise BalanceError(
                    f"rejection budget ({balance.max_rejections_per_trace}) exhausted "
                    f"for synthetic trace {slot}; achieved fraction {achieved:.4f} "
                    f"of target {balance.target_fraction}",
                    achieved_fraction=achieved,
                )
            rng = _trace_rng(config.seed, attempt)
            attempt += 1
            gap = max(0, int(round(distfit.sample(pts.temporal.inter_arrival, rng))))
            case_id = f"genbal-{slot:06d}"
            events, truncated = _walk_trace(pts, rng, case_id, arrival_ms + gap, cap)
            if any(e.activity == target for e in events):
                accepted = (events, truncated, gap)
            else:
                rejections += 1
                report.rejections += 1
        events, truncated, gap = accepted
        arrival_ms += gap
        if truncated:
            report.truncated_cases.append(f"genbal-{slot:06d}")
        synthetic.append(make_trace(f"genbal-{slot:06d}", events))

    kept = [t for i, t in enumerate(train.traces) if i not in dropped]
    schema = {**train.attribute_schema, **pts.schema}
    return make_log(kept + synthetic, schema), report
