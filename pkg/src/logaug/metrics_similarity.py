"""Distance metrics between a real and a generated event log.

Eleven log distances grouped by perspective: control-flow (trace edit
distance under optimal pairing, 2/3-gram distribution distance), temporal
(absolute, case-relative and circadian event distributions), congestion
(cycle times, case arrivals), resource (role-based circadian distance,
circadian workforce, handover-of-work) and attributes (per-attribute value
distributions). Time-valued distances are reported in hours; lower is better
and each distance is zero between a log and itself.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from .distfit import wasserstein_1d
from .log_model import EventLog, MS_PER_HOUR, handover_counts, inter_arrival_times

_MS_PER_DAY = 24 * MS_PER_HOUR
_MS_PER_WEEK = 7 * _MS_PER_DAY
# 1970-01-01 is a Thursday; offset 3 maps it to weekday index 3 (Monday = 0).
_EPOCH_WEEKDAY = 3

_NGRAM_START = "\x02"
_NGRAM_END = "\x03"

_HOUR_OF_DAY_MAX = 24.0

# Above this trace count the trace-pairing distance switches from a dense
# assignment to an equivalent variant-level transport program.
_DENSE_ASSIGNMENT_LIMIT = 1500


@dataclass
class MetricReport:
    """Full vector of similarity results for one (real, generated) pair.

    Resource and attribute metrics are None when the data needed to compute
    them is absent; ``notes`` explains each omission.
    """

    cfld: float | None = None
    two_gram: float | None = None
    three_gram: float | None = None
    aed: float | None = None
    red: float | None = None
    ced: float | None = None
    ctd: float | None = None
    car: float | None = None
    rbced: float | None = None
    cwd: float | None = None
    hwd: float | None = None
    dad: float | None = None
    notes: dict = field(default_factory=dict)

    _COLUMNS = (
        ("CFLD", "cfld"),
        ("2-Gram", "two_gram"),
        ("3-Gram", "three_gram"),
        ("AED", "aed"),
        ("RED", "red"),
        ("CED", "ced"),
        ("CTD", "ctd"),
        ("CAR", "car"),
        ("RBCED", "rbced"),
        ("CWD", "cwd"),
        ("HWD", "hwd"),
        ("DAD", "dad"),
    )

    def to_dict(self) -> dict:
        out = {attr: getattr(self, attr) for _, attr in self._COLUMNS}
        out["notes"] = dict(sorted(self.notes.items()))
        return out

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2).encode("utf-8")

    def to_table(self) -> str:
        headers = [name for name, _ in self._COLUMNS]
        values = [
            "-" if getattr(self, attr) is None else f"{getattr(self, attr):.4g}"
            for _, attr in self._COLUMNS
        ]
        widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
        head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
        row = "  ".join(v.rjust(w) for v, w in zip(values, widths))
        return head + "\n" + row


@dataclass(frozen=True)
class RoleAssignment:
    """Partition of resources into named roles, plus the owning role of each
    activity, as produced by originator-profile merging."""

    roles: dict          # role name -> frozenset of resources
    activity_role: dict  # activity -> role name


def _require_nonempty(*logs):
    for log in logs:
        if len(log) == 0:
            raise ValueError("metric needs non-empty logs")


# --- control flow ---

def levenshtein(a, b) -> int:
    """Plain edit distance (insert/delete/substitute) between two sequences."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) > len(a):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, item_a in enumerate(a, 1):
        current = [i]
        append = current.append
        for j, item_b in enumerate(b, 1):
            append(min(previous[j] + 1,
                       current[j - 1] + 1,
                       previous[j - 1] + (item_a != item_b)))
        previous = current
    return previous[-1]


def normalized_levenshtein(a, b) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest


def _variant_index(log: EventLog, alphabet: dict):
    variants = []
    seen = {}
    trace_variant = []
    for trace in log:
        key = tuple(alphabet.setdefault(act, len(alphabet)) for act in trace.activities())
        if key not in seen:
            seen[key] = len(variants)
            variants.append(key)
        trace_variant.append(seen[key])
    return variants, np.asarray(trace_variant, dtype=np.int64)


def cfld(a: EventLog, b: EventLog) -> float:
    """Control-flow log distance: minimum-cost one-to-one pairing of the two
    trace multisets under normalized edit distance of activity sequences,
    averaged over the pairs.

    When trace counts differ, leftover traces of the larger log pair with the
    empty sequence at cost 1 each. Value in [0, 1]; 0 iff the variant
    multisets coincide.
    """
    _require_nonempty(a, b)
    alphabet: dict = {}
    variants_a, idx_a = _variant_index(a, alphabet)
    variants_b, idx_b = _variant_index(b, alphabet)
    cost = np.empty((len(variants_a), len(variants_b)))
    for i, va in enumerate(variants_a):
        for j, vb in enumerate(variants_b):
            cost[i, j] = normalized_levenshtein(va, vb)

    n_a, n_b = len(a), len(b)
    if max(n_a, n_b) <= _DENSE_ASSIGNMENT_LIMIT:
        full = cost[idx_a][:, idx_b]
        if n_a < n_b:
            to_empty = np.array([normalized_levenshtein((), v) for v in variants_b])
            full = np.vstack([full, np.tile(to_empty[idx_b], (n_b - n_a, 1))])
        elif n_b < n_a:
            to_empty = np.array([normalized_levenshtein(v, ()) for v in variants_a])
            full = np.hstack([full, np.tile(to_empty[idx_a][:, None], (1, n_a - n_b))])
        rows, cols = linear_sum_assignment(full)
        return float(full[rows, cols].mean())
    return _transport_mean_cost(cost, np.bincount(idx_a, minlength=len(variants_a)),
                                np.bincount(idx_b, minlength=len(variants_b)),
                                variants_a, variants_b)


def _transport_mean_cost(cost, mass_a, mass_b, variants_a, variants_b) -> float:
    """Exact optimal trace pairing solved as a balanced transport program on
    variant multiplicities (equivalent to the dense assignment by LP
    integrality)."""
    mass_a = mass_a.astype(float)
    mass_b = mass_b.astype(float)
    total_a, total_b = mass_a.sum(), mass_b.sum()
    if total_a < total_b:
        pad = np.array([normalized_levenshtein((), v) for v in variants_b])
        cost = np.vstack([cost, pad[None, :]])
        mass_a = np.append(mass_a, total_b - total_a)
    elif total_b < total_a:
        pad = np.array([normalized_levenshtein(v, ()) for v in variants_a])
        cost = np.hstack([cost, pad[:, None]])
        mass_b = np.append(mass_b, total_a - total_b)
    n_rows, n_cols = cost.shape
    n_vars = n_rows * n_cols
    row_idx = np.repeat(np.arange(n_rows), n_cols)
    col_idx = np.tile(np.arange(n_cols), n_rows) + n_rows
    a_eq = sparse.csr_matrix(
        (np.ones(2 * n_vars),
         (np.concatenate([row_idx, col_idx]),
          np.concatenate([np.arange(n_vars), np.arange(n_vars)]))),
        shape=(n_rows + n_cols, n_vars),
    )
    b_eq = np.concatenate([mass_a, mass_b])
    result = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, method="highs")
    if not result.success:
        raise RuntimeError(f"transport program failed: {result.message}")
    return float(result.fun / max(mass_a.sum(), mass_b.sum()))


def _gram_distribution(log: EventLog, n: int) -> dict:
    counts = Counter()
    pad_start = (_NGRAM_START,) * (n - 1)
    pad_end = (_NGRAM_END,) * (n - 1)
    for trace in log:
        seq = pad_start + trace.activities() + pad_end
        for i in range(len(seq) - n + 1):
            counts[seq[i:i + n]] += 1
    total = sum(counts.values())
    return {gram: count / total for gram, count in counts.items()}


def ngram_distance(a: EventLog, b: EventLog, n: int) -> float:
    """Total-variation distance between the padded activity n-gram frequency
    distributions of two logs (half the L1 of the normalized vectors).

    Sequences are padded with n-1 start and end sentinels so boundary
    behavior counts. Value in [0, 1]; 1 for disjoint activity alphabets.
    """
    if n not in (2, 3):
        raise ValueError(f"n must be 2 or 3, got {n}")
    _require_nonempty(a, b)
    freq_a = _gram_distribution(a, n)
    freq_b = _gram_distribution(b, n)
    grams = set(freq_a) | set(freq_b)
    return 0.5 * sum(abs(freq_a.get(g, 0.0) - freq_b.get(g, 0.0)) for g in grams)


# --- temporal / congestion ---

def _hours(ms_values) -> list:
    return [ms / MS_PER_HOUR for ms in ms_values]


def aed(a: EventLog, b: EventLog) -> float:
    """Absolute event distribution distance: earth mover's distance (hours)
    between all event timestamps, each log taken relative to its own earliest
    timestamp."""
    _require_nonempty(a, b)
    return wasserstein_1d(
        _hours(e.timestamp_ms - a.epoch_ms for t in a for e in t),
        _hours(e.timestamp_ms - b.epoch_ms for t in b for e in t),
    )


def red(a: EventLog, b: EventLog) -> float:
    """Relative event distribution distance: earth mover's distance (hours)
    between event timestamps relative to their own case start."""
    _require_nonempty(a, b)
    return wasserstein_1d(
        _hours(e.timestamp_ms - t.start_ms for t in a for e in t),
        _hours(e.timestamp_ms - t.start_ms for t in b for e in t),
    )


def ctd(a: EventLog, b: EventLog) -> float:
    """Cycle time distribution distance: earth mover's distance (hours)
    between the trace duration multisets."""
    _require_nonempty(a, b)
    return wasserstein_1d(
        _hours(t.duration_ms() for t in a),
        _hours(t.duration_ms() for t in b),
    )


def car(a: EventLog, b: EventLog) -> float:
    """Case arrival rate distance: earth mover's distance (hours) between the
    case inter-arrival time multisets. Needs at least two traces per log."""
    return wasserstein_1d(
        _hours(inter_arrival_times(a)),
        _hours(inter_arrival_times(b)),
    )


def _weekday(ms: int) -> int:
    return (ms // _MS_PER_DAY + _EPOCH_WEEKDAY) % 7


def _hour_of_day(ms: int) -> float:
    return (ms % _MS_PER_DAY) / MS_PER_HOUR


def _ced_from_times(times_a, times_b) -> float:
    by_day_a = [[] for _ in range(7)]
    by_day_b = [[] for _ in range(7)]
    for ms in times_a:
        by_day_a[_weekday(ms)].append(_hour_of_day(ms))
    for ms in times_b:
        by_day_b[_weekday(ms)].append(_hour_of_day(ms))
    distances = []
    for day in range(7):
        hours_a, hours_b = by_day_a[day], by_day_b[day]
        if not hours_a and not hours_b:
            distances.append(0.0)
        elif not hours_a or not hours_b:
            distances.append(_HOUR_OF_DAY_MAX)
        else:
            distances.append(wasserstein_1d(hours_a, hours_b))
    return sum(distances) / 7.0


def ced(a: EventLog, b: EventLog) -> float:
    """Circadian event distribution distance: events are split by weekday and
    the earth mover's distance between the hour-of-day distributions is
    averaged over the seven weekdays. A weekday populated in exactly one log
    contributes the maximum in-day distance of 24."""
    _require_nonempty(a, b)
    return _ced_from_times(
        [e.timestamp_ms for t in a for e in t],
        [e.timestamp_ms for t in b for e in t],
    )


# --- resource perspective ---

def _resourced(log: EventLog) -> bool:
    return log.has_resources()


def _workforce_profile(log: EventLog) -> dict:
    """(weekday, hour) -> average number of distinct active resources per
    week spanned by the log."""
    active = {}
    weeks = set()
    for trace in log:
        for event in trace:
            weeks.add(event.timestamp_ms // _MS_PER_WEEK)
            if event.resource is None:
                continue
            bucket = (_weekday(event.timestamp_ms),
                      int(_hour_of_day(event.timestamp_ms)))
            active.setdefault(bucket, set()).add(
                (event.resource, event.timestamp_ms // _MS_PER_WEEK)
            )
    span = max(weeks) - min(weeks) + 1
    return {bucket: len(entries) / span for bucket, entries in active.items()}


def cwd(a: EventLog, b: EventLog) -> float:
    """Circadian workforce distribution distance: mean absolute difference,
    over the 168 weekday-hour buckets, of the average count of distinct
    resources active in the bucket per week."""
    _require_nonempty(a, b)
    if not _resourced(a) or not _resourced(b):
        raise ValueError("cwd needs resources in both logs")
    profile_a = _workforce_profile(a)
    profile_b = _workforce_profile(b)
    total = 0.0
    for day in range(7):
        for hour in range(24):
            bucket = (day, hour)
            total += abs(profile_a.get(bucket, 0.0) - profile_b.get(bucket, 0.0))
    return total / 168.0


def _cosine(u: Counter, v: Counter) -> float:
    dot = sum(count * v.get(key, 0) for key, count in u.items())
    norm_u = math.sqrt(sum(c * c for c in u.values()))
    norm_v = math.sqrt(sum(c * c for c in v.values()))
    if norm_u == 0 or norm_v == 0:
        return 0.0
    return dot / (norm_u * norm_v)


def discover_roles(log: EventLog, threshold: float = 0.7) -> RoleAssignment:
    """Group activities into roles by merging originator profiles.

    Each activity starts as its own role carrying the count vector of its
    performers; the pair of roles with the highest cosine similarity at or
    above the threshold is merged (vectors summed) until no pair qualifies.
    Every resource is then assigned to the role under which it worked most.
    """
    if not _resourced(log):
        raise ValueError("role discovery needs resources")
    profiles = {}
    for trace in log:
        for event in trace:
            if event.resource is None:
                continue
            profiles.setdefault(event.activity, Counter())[event.resource] += 1
    for activity in sorted(log.activity_set()):
        profiles.setdefault(activity, Counter())

    groups = {(activity,): vector for activity, vector in profiles.items()}
    while True:
        best = None
        names = sorted(groups)
        for i, left in enumerate(names):
            for right in names[i + 1:]:
                similarity = _cosine(groups[left], groups[right])
                if similarity >= threshold and (
                    best is None or similarity > best[0]
                ):
                    best = (similarity, left, right)
        if best is None:
            break
        _, left, right = best
        merged = tuple(sorted(left + right))
        vector = groups.pop(left) + groups.pop(right)
        groups[merged] = vector

    role_names = {}
    activity_role = {}
    for index, activities in enumerate(sorted(groups)):
        name = f"role_{index:03d}"
        role_names[name] = activities
        for activity in activities:
            activity_role[activity] = name

    by_resource = {}
    for name, activities in role_names.items():
        vector = groups[activities]
        for resource, count in vector.items():
            by_resource.setdefault(resource, Counter())[name] += count
    members = {name: set() for name in role_names}
    for resource, counts in by_resource.items():
        top = max(sorted(counts), key=lambda n: counts[n])
        members[top].add(resource)
    return RoleAssignment(
        roles={name: frozenset(group) for name, group in members.items()},
        activity_role=dict(activity_role),
    )


def map_resources(roles: RoleAssignment, log: EventLog) -> dict:
    """Resource -> role name for every resource in a log.

    Resources already in the assignment keep their role; new ones take the
    role they carry most often through their activities, falling back to the
    role of the known resource with the most similar activity profile.
    """
    mapping = {}
    for name, group in roles.roles.items():
        for resource in group:
            mapping[resource] = name
    activity_counts = {}
    for trace in log:
        for event in trace:
            if event.resource is None or event.resource in mapping:
                continue
            activity_counts.setdefault(event.resource, Counter())[event.activity] += 1
    known_profiles = {}
    for trace in log:
        for event in trace:
            if event.resource in mapping and event.resource is not None:
                known_profiles.setdefault(event.resource, Counter())[event.activity] += 1
    for resource, counts in sorted(activity_counts.items()):
        role_votes = Counter()
        for activity, count in counts.items():
            role = roles.activity_role.get(activity)
            if role is not None:
                role_votes[role] += count
        if role_votes:
            mapping[resource] = max(sorted(role_votes), key=lambda n: role_votes[n])
            continue
        best = None
        for known, profile in sorted(known_profiles.items()):
            similarity = _cosine(counts, profile)
            if best is None or similarity > best[0]:
                best = (similarity, known)
        if best is not None:
            mapping[resource] = mapping[best[1]]
        else:
            mapping[resource] = sorted(roles.roles)[0]
    return mapping


def rbced(a: EventLog, b: EventLog, roles: RoleAssignment) -> float:
    """Role-based circadian event distance: the circadian distance computed
    per role over the events performed by that role's resources, averaged
    over roles. A role active in exactly one log contributes the penalty-only
    circadian value."""
    _require_nonempty(a, b)
    map_a = map_resources(roles, a)
    map_b = map_resources(roles, b)
    values = []
    for role in sorted(roles.roles):
        times_a = [
            e.timestamp_ms for t in a for e in t
            if e.resource is not None and map_a.get(e.resource) == role
        ]
        times_b = [
            e.timestamp_ms for t in b for e in t
            if e.resource is not None and map_b.get(e.resource) == role
        ]
        if not times_a and not times_b:
            values.append(0.0)
        else:
            values.append(_ced_from_times(times_a, times_b))
    return sum(values) / len(values)


def hwd(a: EventLog, b: EventLog) -> int:
    """Handover-of-work distance: sum of absolute differences of the directed
    handover counts over all resource pairs seen in either log."""
    _require_nonempty(a, b)
    if not _resourced(a) or not _resourced(b):
        raise ValueError("hwd needs resources in both logs")
    counts_a = handover_counts(a)
    counts_b = handover_counts(b)
    return sum(
        abs(counts_a.get(pair, 0) - counts_b.get(pair, 0))
        for pair in set(counts_a) | set(counts_b)
    )


# --- attributes ---

def _pooled_values(log: EventLog, name: str) -> list:
    return [e.attributes[name] for t in log for e in t if name in e.attributes]


def _total_variation(values_a, values_b) -> float:
    counts_a = Counter(values_a)
    counts_b = Counter(values_b)
    total_a = sum(counts_a.values())
    total_b = sum(counts_b.values())
    keys = set(counts_a) | set(counts_b)
    return 0.5 * sum(
        abs(counts_a.get(k, 0) / total_a - counts_b.get(k, 0) / total_b) for k in keys
    )


def dad(a: EventLog, b: EventLog, notes: dict | None = None) -> float:
    """Data attribute distribution distance: per shared attribute, the earth
    mover's distance between the pooled value multisets (total variation for
    categorical attributes), averaged over attributes."""
    _require_nonempty(a, b)
    shared = [n for n in sorted(a.attribute_schema) if n in b.attribute_schema]
    if not shared:
        raise ValueError("dad needs a shared attribute schema")
    distances = []
    for name in shared:
        values_a = _pooled_values(a, name)
        values_b = _pooled_values(b, name)
        if not values_a or not values_b:
            if notes is not None:
                notes[f"dad:{name}"] = "attribute has no values in one log; skipped"
            continue
        numeric = (
            a.attribute_schema[name] == "numeric"
            and b.attribute_schema[name] == "numeric"
        )
        if numeric:
            distances.append(wasserstein_1d(values_a, values_b))
        else:
            distances.append(_total_variation(
                [str(v) for v in values_a], [str(v) for v in values_b]
            ))
    if not distances:
        raise ValueError("no shared attribute carries values in both logs")
    return sum(distances) / len(distances)


# --- composite ---

def evaluate_all(real: EventLog, gen: EventLog, roles: RoleAssignment | None = None,
                 workers: int | None = None) -> MetricReport:
    """Compute every applicable distance between a real and a generated log.

    Resource metrics are skipped with a note when either log lacks resources;
    the attribute metric when no attribute is shared. Roles for the
    role-based distance are discovered on the real log unless given.
    Results are independent of the worker count.
    """
    _require_nonempty(real, gen)
    report = MetricReport()
    tasks = {
        "cfld": lambda: cfld(real, gen),
        "two_gram": lambda: ngram_distance(real, gen, 2),
        "three_gram": lambda: ngram_distance(real, gen, 3),
        "aed": lambda: aed(real, gen),
        "red": lambda: red(real, gen),
        "ced": lambda: ced(real, gen),
        "ctd": lambda: ctd(real, gen),
    }
    if len(real) >= 2 and len(gen) >= 2:
        tasks["car"] = lambda: car(real, gen)
    else:
        report.notes["car"] = "needs at least 2 traces per log"
    if _resourced(real) and _resourced(gen):
        if roles is None:
            roles = discover_roles(real)
        fixed_roles = roles
        tasks["rbced"] = lambda: rbced(real, gen, fixed_roles)
        tasks["cwd"] = lambda: cwd(real, gen)
        tasks["hwd"] = lambda: hwd(real, gen)
    else:
        message = "resources absent from one of the logs"
        report.notes["rbced"] = message
        report.notes["cwd"] = message
        report.notes["hwd"] = message
    shared_attrs = set(real.attribute_schema) & set(gen.attribute_schema)
    if shared_attrs:
        tasks["dad"] = lambda: dad(real, gen, notes=report.notes)
    else:
        report.notes["dad"] = "no shared attributes"

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {name: pool.submit(fn) for name, fn in tasks.items()}
            results = {name: future.result() for name, future in futures.items()}
    else:
        results = {name: fn() for name, fn in tasks.items()}
    for name, value in results.items():
        setattr(report, name, float(value))
    return report
