"""Parametric fitting of duration samples and the shared 1-D earth mover core.

Seven candidate families (constant, normal, exponential, uniform, triangular,
lognormal, gamma) are estimated with closed-form moment/extremum estimators
and ranked by the exact Wasserstein-1 distance between the sample and an
equal-size quantile draw of the candidate, so fitting is fully deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

CONSTANT = "constant"
NORMAL = "normal"
EXPONENTIAL = "exponential"
UNIFORM = "uniform"
TRIANGULAR = "triangular"
LOGNORMAL = "lognormal"
GAMMA = "gamma"

# Selection scans in this order, so ties go to the earlier family.
FAMILIES = (CONSTANT, NORMAL, EXPONENTIAL, UNIFORM, TRIANGULAR, LOGNORMAL, GAMMA)

_DEGENERATE_VARIANCE_RATIO = 1e-9


@dataclass(frozen=True)
class FittedDistribution:
    """A fitted family with its parameters and in-sample Wasserstein-1 fit."""

    family: str
    params: dict
    fit_distance: float

    def mean(self) -> float:
        """Analytic mean of the fitted (unclamped) distribution."""
        p = self.params
        if self.family == CONSTANT:
            return p["value"]
        if self.family == NORMAL:
            return p["mean"]
        if self.family == EXPONENTIAL:
            return p["mean"]
        if self.family == UNIFORM:
            return (p["low"] + p["high"]) / 2.0
        if self.family == TRIANGULAR:
            return (p["low"] + p["mode"] + p["high"]) / 3.0
        if self.family == LOGNORMAL:
            return math.exp(p["log_mean"] + p["log_std"] ** 2 / 2.0)
        if self.family == GAMMA:
            return p["shape"] * p["scale"]
        raise ValueError(f"unknown family {self.family!r}")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": dict(self.params),
            "fit_distance": self.fit_distance,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FittedDistribution":
        return cls(
            family=raw["family"],
            params=dict(raw["params"]),
            fit_distance=raw["fit_distance"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def constant(value: float) -> FittedDistribution:
    return FittedDistribution(CONSTANT, {"value": float(value)}, 0.0)


def wasserstein_1d(a, b) -> float:
    """Exact Wasserstein-1 (earth mover's) distance between the empirical
    distributions of two non-empty value multisets.

    Computed as the integral of |F_a - F_b| over the merged support, which for
    one dimension equals the minimal-transport cost. Symmetric, zero iff the
    multisets are equal as distributions.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("wasserstein_1d needs two non-empty multisets")
    a = np.sort(a)
    b = np.sort(b)
    grid = np.concatenate([a, b])
    grid.sort(kind="mergesort")
    deltas = np.diff(grid)
    cdf_a = np.searchsorted(a, grid[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, grid[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


def quantile(dist: FittedDistribution, q):
    """Analytic quantile function of a fitted family; q may be scalar or array."""
    q = np.asarray(q, dtype=float)
    p = dist.params
    family = dist.family
    if family == CONSTANT:
        return np.full_like(q, p["value"])
    if family == NORMAL:
        return p["mean"] + p["std"] * special.ndtri(q)
    if family == EXPONENTIAL:
        return -p["mean"] * np.log1p(-q)
    if family == UNIFORM:
        return p["low"] + q * (p["high"] - p["low"])
    if family == TRIANGULAR:
        low, mode, high = p["low"], p["mode"], p["high"]
        span = high - low
        split = (mode - low) / span
        left = low + np.sqrt(np.clip(q, 0, None) * span * (mode - low))
        right = high - np.sqrt(np.clip(1 - q, 0, None) * span * (high - mode))
        return np.where(q <= split, left, right)
    if family == LOGNORMAL:
        return np.exp(p["log_mean"] + p["log_std"] * special.ndtri(q))
    if family == GAMMA:
        return p["scale"] * special.gammaincinv(p["shape"], q)
    raise ValueError(f"unknown family {family!r}")


def sample(dist: FittedDistribution, rng: np.random.Generator) -> float:
    """One draw from the fitted family via inverse-transform sampling,
    clamped at 0 so durations are never negative."""
    value = float(quantile(dist, rng.random()))
    return max(0.0, value)


def sample_many(dist: FittedDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    values = np.asarray(quantile(dist, rng.random(n)), dtype=float)
    return np.clip(values, 0.0, None)


def _estimate(family: str, values: np.ndarray) -> dict | None:
    """Closed-form parameter estimate for one family; None when the family is
    not estimable on this sample."""
    mean = float(values.mean())
    var = float(values.var())
    if family == CONSTANT:
        return {"value": float(np.median(values))}
    if family == NORMAL:
        return {"mean": mean, "std": math.sqrt(var)}
    if family == EXPONENTIAL:
        if mean <= 0:
            return None
        return {"mean": mean}
    if family == UNIFORM:
        return {"low": float(values.min()), "high": float(values.max())}
    if family == TRIANGULAR:
        low, high = float(values.min()), float(values.max())
        mode = _histogram_mode(values)
        return {"low": low, "mode": min(max(mode, low), high), "high": high}
    if family == LOGNORMAL:
        positive = values[values > 0]
        if positive.size == 0:
            return None
        shifted = np.where(values > 0, values, positive.min() / 2.0)
        logs = np.log(shifted)
        log_std = float(logs.std())
        if log_std <= 0:
            return None
        return {"log_mean": float(logs.mean()), "log_std": log_std}
    if family == GAMMA:
        if mean <= 0 or var <= 0:
            return None
        return {"shape": mean * mean / var, "scale": var / mean}
    raise ValueError(f"unknown family {family!r}")


def _histogram_mode(values: np.ndarray) -> float:
    counts, edges = np.histogram(values, bins="auto")
    peak = int(np.argmax(counts))
    return float((edges[peak] + edges[peak + 1]) / 2.0)


def fit_best(samples) -> FittedDistribution:
    """Fit every family to the sample and return the one whose equal-size
    quantile draw is Wasserstein-closest to the empirical distribution.

    Samples whose variance is below 1e-9 x mean^2 short-circuit to the
    constant family.
    """
    values = np.asarray(list(samples), dtype=float)
    if values.size == 0:
        raise ValueError("fit_best needs at least one sample")
    if np.min(values) < 0:
        raise ValueError("duration samples must be non-negative")
    mean = float(values.mean())
    var = float(values.var())
    if var <= _DEGENERATE_VARIANCE_RATIO * mean * mean:
        center = float(np.median(values))
        return FittedDistribution(
            CONSTANT, {"value": center},
            wasserstein_1d(values, np.full(values.size, center)),
        )

    midpoints = (np.arange(values.size) + 0.5) / values.size
    best = None
    for family in FAMILIES:
        params = _estimate(family, values)
        if params is None:
            continue
        candidate = FittedDistribution(family, params, 0.0)
        draw = np.asarray(quantile(candidate, midpoints), dtype=float)
        if not np.all(np.isfinite(draw)):
            continue
        distance = wasserstein_1d(values, draw)
        if best is None or distance < best.fit_distance:
            best = FittedDistribution(family, params, distance)
    assert best is not None  # constant is always estimable
    return best
