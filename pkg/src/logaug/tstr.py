"""Train-on-synthetic-test-on-real evaluation.

A predictive model trained on the real training log and one trained on a
generated log are both evaluated on running traces obtained by truncating
each test trace to a random prefix (percentage uniform in [25, 75]). The
regression task predicts total trace cycle time scored by relative MAE; the
classification task predicts whether a target activity still occurs in the
remaining suffix, scored by macro F1 over both classes (the unweighted mean
of the two per-class F1 values).
"""

from __future__ import annotations

import json
import math
import subprocess
from dataclasses import dataclass, field

import numpy as np

from .log_model import EventLog, MS_PER_HOUR, make_log, make_trace
from .metrics_similarity import RoleAssignment, discover_roles, map_resources


@dataclass(frozen=True)
class FeatureSchema:
    """Fixed feature layout derived from the training log and frozen for
    evaluation; unseen activities, resources and roles at test time land in
    reserved slots."""

    activities: tuple
    numeric_attrs: tuple
    resource_role: dict | None   # resource -> role name; None when train has no resources
    role_names: tuple

    @classmethod
    def build(cls, train: EventLog, roles: RoleAssignment | None = None) -> "FeatureSchema":
        activities = tuple(sorted(train.activity_set()))
        numeric = tuple(
            name for name, kind in sorted(train.attribute_schema.items())
            if kind == "numeric"
        )
        if train.has_resources():
            if roles is None:
                roles = discover_roles(train)
            mapping = map_resources(roles, train)
            role_names = tuple(sorted(roles.roles))
        else:
            mapping = None
            role_names = ()
        return cls(
            activities=activities,
            numeric_attrs=numeric,
            resource_role=mapping,
            role_names=role_names,
        )

    @property
    def width(self) -> int:
        n_act = len(self.activities)
        width = (n_act + 1) + 2 + (n_act + 1) + len(self.numeric_attrs)
        if self.resource_role is not None:
            width += len(self.role_names) + 1
        return width

    def encode(self, events) -> np.ndarray:
        """Feature vector of a non-empty prefix: activity counts, elapsed
        hours, event count, role counts (when available), last-activity
        one-hot, last numeric attribute values."""
        n_act = len(self.activities)
        act_index = {a: i for i, a in enumerate(self.activities)}
        vector = np.zeros(self.width)
        for event in events:
            vector[act_index.get(event.activity, n_act)] += 1.0
        offset = n_act + 1
        vector[offset] = (events[-1].timestamp_ms - events[0].timestamp_ms) / MS_PER_HOUR
        vector[offset + 1] = float(len(events))
        offset += 2
        if self.resource_role is not None:
            role_index = {r: i for i, r in enumerate(self.role_names)}
            for event in events:
                if event.resource is None:
                    continue
                role = self.resource_role.get(event.resource)
                vector[offset + role_index.get(role, len(self.role_names))] += 1.0
            offset += len(self.role_names) + 1
        vector[offset + act_index.get(events[-1].activity, n_act)] = 1.0
        offset += n_act + 1
        last_values = {}
        for event in events:
            for name in self.numeric_attrs:
                if name in event.attributes:
                    last_values[name] = float(event.attributes[name])
        for i, name in enumerate(self.numeric_attrs):
            vector[offset + i] = last_values.get(name, 0.0)
        return vector


def regression_samples(log: EventLog, schema: FeatureSchema) -> tuple:
    """One sample per prefix of length >= 1; target is the full-trace cycle
    time in hours."""
    features, targets = [], []
    for trace in log:
        if len(trace) == 0:
            continue
        cycle = trace.duration_ms() / MS_PER_HOUR
        for length in range(1, len(trace) + 1):
            features.append(schema.encode(trace.events[:length]))
            targets.append(cycle)
    return np.asarray(features), np.asarray(targets)


def classification_samples(log: EventLog, schema: FeatureSchema, activity: str) -> tuple:
    """One sample per prefix of length >= 1; target is whether the activity
    occurs in the remaining suffix."""
    features, targets = [], []
    for trace in log:
        remaining = [e.activity for e in trace]
        for length in range(1, len(trace) + 1):
            features.append(schema.encode(trace.events[:length]))
            targets.append(activity in remaining[length:])
    return np.asarray(features), np.asarray(targets, dtype=bool)


@dataclass
class RunLog:
    """Truncated test traces plus their ground truths."""

    log: EventLog
    cycle_time_hours: dict      # case id -> full-trace cycle time
    suffix_activities: dict     # case id -> frozenset of activities after the cut
    notes: list = field(default_factory=list)


def build_run_log(test: EventLog, seed: int) -> RunLog:
    """Simulate running traces: keep a uniform 25-75% prefix of each test
    trace (at least one event, at least one removed). Length-1 traces are
    skipped with a note."""
    if len(test) == 0:
        raise ValueError("build_run_log needs a non-empty test log")
    rng = np.random.default_rng(seed)
    truncated = []
    cycle = {}
    suffixes = {}
    notes = []
    for trace in test:
        n = len(trace)
        if n < 2:
            notes.append(f"trace {trace.case_id!r} has {n} event(s); skipped")
            continue
        percent = rng.uniform(25.0, 75.0)
        keep = min(max(int(n * percent / 100.0), 1), n - 1)
        truncated.append(make_trace(trace.case_id, trace.events[:keep]))
        cycle[trace.case_id] = trace.duration_ms() / MS_PER_HOUR
        suffixes[trace.case_id] = frozenset(e.activity for e in trace.events[keep:])
    if not truncated:
        raise ValueError("every test trace was too short to truncate")
    return RunLog(
        log=make_log(truncated, dict(test.attribute_schema)),
        cycle_time_hours=cycle,
        suffix_activities=suffixes,
        notes=notes,
    )


# --- learners ---

@dataclass
class _TreeNode:
    value: float
    feature: int = -1
    threshold: float = 0.0
    left: "_TreeNode | None" = None
    right: "_TreeNode | None" = None


class BaselineTreeLearner:
    """Depth-limited binary tree grown greedily.

    Splits minimize the summed squared error of the children, which for 0/1
    targets ranks splits identically to Gini impurity; ties keep the lowest
    feature index, then the lowest threshold. Fully deterministic.
    """

    def __init__(self, kind: str, seed: int = 0, max_depth: int = 8, min_leaf: int = 5):
        if kind not in ("regression", "classification"):
            raise ValueError(f"unknown learner kind {kind!r}")
        self.kind = kind
        self.seed = seed
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, features, targets) -> _TreeNode:
        features = np.asarray(features, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if features.ndim != 2 or len(features) != len(targets):
            raise ValueError("fit expects a 2-D feature matrix and matching targets")
        return self._grow(features, targets, depth=0)

    def predict(self, model: _TreeNode, features) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        single = features.ndim == 1
        if single:
            features = features[None, :]
        out = np.array([self._predict_one(model, row) for row in features])
        if self.kind == "classification":
            out = out >= 0.5
        return out[0] if single else out

    def _leaf_value(self, targets) -> float:
        return float(targets.mean())

    def _grow(self, features, targets, depth) -> _TreeNode:
        node = _TreeNode(value=self._leaf_value(targets))
        if (
            depth >= self.max_depth
            or len(targets) < 2 * self.min_leaf
            or np.all(targets == targets[0])
        ):
            return node
        split = self._best_split(features, targets)
        if split is None:
            return node
        feature, threshold = split
        mask = features[:, feature] <= threshold
        node.feature = feature
        node.threshold = threshold
        node.left = self._grow(features[mask], targets[mask], depth + 1)
        node.right = self._grow(features[~mask], targets[~mask], depth + 1)
        return node

    def _best_split(self, features, targets):
        best_score = None
        best = None
        n = len(targets)
        for feature in range(features.shape[1]):
            order = np.argsort(features[:, feature], kind="stable")
            xs = features[order, feature]
            ys = targets[order]
            cumulative = np.cumsum(ys)
            cumulative_sq = np.cumsum(ys * ys)
            sizes = np.arange(1, n)
            valid = (
                (sizes >= self.min_leaf)
                & (n - sizes >= self.min_leaf)
                & (xs[1:] > xs[:-1])
            )
            if not valid.any():
                continue
            left_n = sizes[valid]
            left_sum = cumulative[left_n - 1]
            left_sq = cumulative_sq[left_n - 1]
            right_n = n - left_n
            right_sum = cumulative[-1] - left_sum
            right_sq = cumulative_sq[-1] - left_sq
            score = (left_sq - left_sum ** 2 / left_n) + (right_sq - right_sum ** 2 / right_n)
            at = int(np.argmin(score))
            if best_score is None or score[at] < best_score:
                best_score = float(score[at])
                cut = left_n[at]
                best = (feature, float((xs[cut - 1] + xs[cut]) / 2.0))
        return best

    def _predict_one(self, node: _TreeNode, row) -> float:
        while node.feature >= 0:
            node = node.left if row[node.feature] <= node.threshold else node.right
        return node.value


def baseline_learner(kind: str, seed: int = 0) -> BaselineTreeLearner:
    """Built-in learner with the default depth-8 / min-leaf-5 configuration."""
    return BaselineTreeLearner(kind, seed=seed)


class SubprocessLearner:
    """Adapter plugging an external learner over newline-delimited JSON.

    Requests: {"op": "fit", "samples": [{"features": [...], "target": t}],
    "seed": s} answered by {"model_id": ...}; {"op": "predict", "model_id":
    ..., "vector": [...]} answered by {"value": v}.
    """

    def __init__(self, command, seed: int = 0):
        self.seed = seed
        self._process = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )

    def _roundtrip(self, message: dict) -> dict:
        self._process.stdin.write(json.dumps(message) + "\n")
        self._process.stdin.flush()
        line = self._process.stdout.readline()
        if not line:
            raise RuntimeError("learner subprocess closed its output")
        return json.loads(line)

    def fit(self, features, targets):
        samples = [
            {"features": [float(x) for x in row], "target": float(t)}
            for row, t in zip(np.asarray(features, dtype=float), targets)
        ]
        reply = self._roundtrip({"op": "fit", "samples": samples, "seed": self.seed})
        return reply["model_id"]

    def predict(self, model_id, features) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        single = features.ndim == 1
        if single:
            features = features[None, :]
        values = [
            self._roundtrip(
                {"op": "predict", "model_id": model_id, "vector": [float(x) for x in row]}
            )["value"]
            for row in features
        ]
        out = np.asarray(values, dtype=float)
        return out[0] if single else out

    def close(self):
        if self._process.stdin:
            self._process.stdin.close()
        self._process.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# --- protocols ---

@dataclass
class TstrResult:
    rmae_real: float
    rmae_synthetic: float
    runs: int
    per_run_real: list
    per_run_synthetic: list

    def to_dict(self) -> dict:
        return {
            "rmae_real": self.rmae_real,
            "rmae_synthetic": self.rmae_synthetic,
            "runs": self.runs,
            "per_run_real": list(self.per_run_real),
            "per_run_synthetic": list(self.per_run_synthetic),
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2).encode("utf-8")

    def to_table(self) -> str:
        head = "Trained on  rMAE"
        rows = [
            f"synthetic   {self.rmae_synthetic * 100:.2f}%",
            f"real        {self.rmae_real * 100:.2f}%",
        ]
        return "\n".join([head] + rows)


def _rmae(predictions, truths) -> float:
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    mae = float(np.abs(predictions - truths).mean())
    center = float(truths.mean())
    if center == 0:
        return 0.0 if mae == 0 else math.inf
    return mae / center


def tstr_rmae(train: EventLog, gen: EventLog, test: EventLog, learner,
              runs: int = 10) -> TstrResult:
    """Relative MAE of cycle-time predictors trained on the real training log
    and on a generated log, both evaluated on truncated test traces.

    Run r builds its running log with seed r; results are averaged over runs.
    Feature encoding is frozen from the training log.
    """
    schema = FeatureSchema.build(train)
    model_real = learner.fit(*regression_samples(train, schema))
    model_gen = learner.fit(*regression_samples(gen, schema))
    per_real, per_gen = [], []
    for run in range(runs):
        running = build_run_log(test, seed=run)
        features = np.asarray(
            [schema.encode(trace.events) for trace in running.log]
        )
        truths = [running.cycle_time_hours[t.case_id] for t in running.log]
        per_real.append(_rmae(learner.predict(model_real, features), truths))
        per_gen.append(_rmae(learner.predict(model_gen, features), truths))
    return TstrResult(
        rmae_real=sum(per_real) / runs,
        rmae_synthetic=sum(per_gen) / runs,
        runs=runs,
        per_run_real=per_real,
        per_run_synthetic=per_gen,
    )


def macro_f1(truths, predictions) -> float:
    """Unweighted mean of the per-class F1 values of a binary outcome."""
    truths = [bool(t) for t in truths]
    predictions = [bool(p) for p in predictions]

    def f1(cls: bool) -> float:
        tp = sum(1 for t, p in zip(truths, predictions) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(truths, predictions) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(truths, predictions) if t == cls and p != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        if precision + recall == 0:
            return 0.0
        return 2 * precision * recall / (precision + recall)

    return (f1(True) + f1(False)) / 2.0


@dataclass
class FscoreResult:
    fscore_train: float
    fscore_balanced: float
    runs: int
    per_run_train: list
    per_run_balanced: list
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fscore_train": self.fscore_train,
            "fscore_balanced": self.fscore_balanced,
            "runs": self.runs,
            "per_run_train": list(self.per_run_train),
            "per_run_balanced": list(self.per_run_balanced),
            "notes": list(self.notes),
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2).encode("utf-8")


def rare_activity_fscore(train: EventLog, balanced: EventLog, test: EventLog,
                         activity: str, learner, runs: int = 10) -> FscoreResult:
    """Macro F1 of suffix-occurrence classifiers for a rare activity, trained
    on the original and on the rebalanced training log, evaluated on the same
    truncated test traces."""
    if not any(activity in t.activities() for t in test):
        raise ValueError(f"activity {activity!r} never occurs in the test log")
    schema = FeatureSchema.build(train)
    models = {}
    for name, log in (("train", train), ("balanced", balanced)):
        features, targets = classification_samples(log, schema, activity)
        if bool(targets.all()) or not targets.any():
            raise ValueError(
                f"classification target is single-class on the {name} log"
            )
        models[name] = learner.fit(features, targets)
    per_train, per_balanced = [], []
    notes = []
    for run in range(runs):
        running = build_run_log(test, seed=run)
        features = np.asarray(
            [schema.encode(trace.events) for trace in running.log]
        )
        truths = [
            activity in running.suffix_activities[t.case_id] for t in running.log
        ]
        if all(truths) or not any(truths):
            notes.append(f"run {run}: single-class ground truth")
        per_train.append(macro_f1(truths, learner.predict(models["train"], features)))
        per_balanced.append(macro_f1(truths, learner.predict(models["balanced"], features)))
    return FscoreResult(
        fscore_train=sum(per_train) / runs,
        fscore_balanced=sum(per_balanced) / runs,
        runs=runs,
        per_run_train=per_train,
        per_run_balanced=per_balanced,
        notes=notes,
    )
