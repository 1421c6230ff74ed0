"""History-length selection by the elbow rule.

Each candidate k is scored on two [0,1] axes: the control-flow distance of a
generated log to a validation log (similarity) and one minus the normalized
trace entropy of the generated log (loss of variability). The selected k
minimizes the Euclidean distance of that point to the origin; ties go to the
smaller k.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from . import metrics_entropy, metrics_similarity, pts as pts_module
from .generator import GenerationConfig, generate_log
from .log_model import EventLog

DEFAULT_K_CANDIDATES = (1, 2, 3, 4, 5, 6)


@dataclass(frozen=True)
class KSweepPoint:
    k: int
    cfld: float
    one_minus_norm_entropy: float

    @property
    def distance_from_origin(self) -> float:
        return math.hypot(self.cfld, self.one_minus_norm_entropy)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "cfld": self.cfld,
            "one_minus_norm_entropy": self.one_minus_norm_entropy,
            "distance_from_origin": self.distance_from_origin,
        }


@dataclass
class KSweepResult:
    selected_k: int
    points: list
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "selected_k": self.selected_k,
            "points": [p.to_dict() for p in self.points],
            "notes": list(self.notes),
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2).encode("utf-8")

    def plot_data(self) -> str:
        """Two-column table (cfld, 1 - normalized entropy) per k, for plotting."""
        lines = ["k\tcfld\tone_minus_norm_entropy"]
        for point in sorted(self.points, key=lambda p: p.k):
            lines.append(
                f"{point.k}\t{point.cfld:.6f}\t{point.one_minus_norm_entropy:.6f}"
            )
        return "\n".join(lines) + "\n"


def select_best_k(points) -> int:
    """Argmin of the distance to the origin; ties break toward smaller k."""
    points = list(points)
    if not points:
        raise ValueError("no sweep points to select from")
    best = min(points, key=lambda p: (p.distance_from_origin, p.k))
    return best.k


def optimize_k(train: EventLog, validation: EventLog, k_candidates=None,
               gen_traces: int | None = None, seed: int = 0) -> KSweepResult:
    """Sweep candidate history lengths and pick the elbow point.

    For each k a model is discovered on the training log and used to generate
    ``gen_traces`` traces (default: the validation size); the sweep point is
    (cfld(validation, generated), 1 - normalized trace entropy of generated).
    Candidates whose generation fails are excluded with a note.
    """
    if len(validation) == 0:
        raise ValueError("optimize_k needs a non-empty validation log")
    candidates = sorted(set(k_candidates or DEFAULT_K_CANDIDATES))
    if not candidates:
        raise ValueError("k_candidates must be non-empty")
    if gen_traces is None:
        gen_traces = len(validation)
    points = []
    notes = []
    for k in candidates:
        try:
            model = pts_module.discover(train, k)
            generated, _ = generate_log(
                model,
                GenerationConfig(
                    n_traces=gen_traces,
                    seed=seed,
                    start_time_ms=train.epoch_ms,
                ),
            )
            similarity = metrics_similarity.cfld(validation, generated)
            entropy = metrics_entropy.normalized_trace_entropy(generated)
        except Exception as exc:  # noqa: BLE001 - candidate-level isolation
            notes.append(f"k={k} excluded: {exc}")
            continue
        points.append(
            KSweepPoint(k=k, cfld=similarity, one_minus_norm_entropy=1.0 - entropy)
        )
    if not points:
        raise RuntimeError(f"every candidate k failed: {notes}")
    return KSweepResult(selected_k=select_best_k(points), points=points, notes=notes)


def aggregate_sweeps(sweeps) -> KSweepResult:
    """Average sweep axes over several logs per k (only ks present in every
    sweep) and select on the averaged points."""
    sweeps = list(sweeps)
    if not sweeps:
        raise ValueError("no sweeps to aggregate")
    per_k: dict = {}
    for sweep in sweeps:
        for point in sweep.points:
            per_k.setdefault(point.k, []).append(point)
    shared = {k: pts for k, pts in per_k.items() if len(pts) == len(sweeps)}
    if not shared:
        raise ValueError("no k value succeeded on every log")
    points = [
        KSweepPoint(
            k=k,
            cfld=sum(p.cfld for p in group) / len(group),
            one_minus_norm_entropy=sum(p.one_minus_norm_entropy for p in group) / len(group),
        )
        for k, group in sorted(shared.items())
    ]
    notes = [note for sweep in sweeps for note in sweep.notes]
    return KSweepResult(selected_k=select_best_k(points), points=points, notes=notes)
