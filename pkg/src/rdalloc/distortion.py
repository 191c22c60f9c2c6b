"""Task distortion, weighted total distortion and the exponential surface model.

Distortions are dimensionless fractions (0.1 means a 10% performance drop).
Rates are in kbits per tensor throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import RdError

LN2 = math.log(2.0)


def _as_tuple(values, name: str) -> tuple[float, ...]:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise RdError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class TaskPerformance:
    task_id: int
    baseline: float
    measured: float

    def __post_init__(self):
        if self.baseline == 0:
            raise RdError(f"task {self.task_id}: baseline performance is zero")


@dataclass(frozen=True)
class WeightVector:
    weights: tuple[float, ...]

    def __init__(self, weights: Sequence[float]):
        w = _as_tuple(weights, "weights")
        if len(w) == 0:
            raise RdError("weight vector is empty")
        for i, v in enumerate(w, start=1):
            if not (v > 0 and math.isfinite(v)):
                raise RdError(f"weight w_{i}={v} is not strictly positive")
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.array(self.weights)

    @classmethod
    def ones(cls, m: int) -> "WeightVector":
        return cls([1.0] * m)


@dataclass(frozen=True)
class SurfaceParams:
    """Parameters of ``gamma + sum_j alpha_j * 2**(-beta_j * R_j)``."""

    gamma: float
    alphas: tuple[float, ...]
    betas: tuple[float, ...]

    def __init__(self, gamma: float, alphas: Sequence[float], betas: Sequence[float]):
        a = _as_tuple(alphas, "alphas")
        b = _as_tuple(betas, "betas")
        if len(a) != len(b) or len(a) == 0:
            raise RdError(
                f"alphas and betas must have equal nonzero length, got {len(a)} and {len(b)}"
            )
        for j, (aj, bj) in enumerate(zip(a, b), start=1):
            if not (aj > 0 and math.isfinite(aj)):
                raise RdError(f"alpha_{j}={aj} must be positive")
            if not (bj > 0 and math.isfinite(bj)):
                raise RdError(f"beta_{j}={bj} must be positive")
        if not math.isfinite(gamma):
            raise RdError(f"gamma={gamma} is not finite")
        object.__setattr__(self, "gamma", float(gamma))
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "betas", b)

    @property
    def n_streams(self) -> int:
        return len(self.alphas)

    @property
    def alpha(self) -> np.ndarray:
        return np.array(self.alphas)

    @property
    def beta(self) -> np.ndarray:
        return np.array(self.betas)

    def to_vector(self) -> np.ndarray:
        """Flatten as ``[gamma, alpha_1..N, beta_1..N]``."""
        return np.concatenate([[self.gamma], self.alphas, self.betas])

    @classmethod
    def from_vector(cls, x) -> "SurfaceParams":
        x = np.asarray(x, dtype=float)
        n = (x.size - 1) // 2
        return cls(x[0], x[1 : 1 + n], x[1 + n :])


@dataclass(frozen=True)
class RateVector:
    rates: tuple[float, ...]

    def __init__(self, rates: Sequence[float]):
        r = _as_tuple(rates, "rates")
        for j, v in enumerate(r, start=1):
            if not v >= 0:
                raise RdError(f"rate R_{j}={v} is negative")
        object.__setattr__(self, "rates", r)

    def __len__(self):
        return len(self.rates)

    def as_array(self) -> np.ndarray:
        return np.array(self.rates)


def task_distortion(perf: TaskPerformance) -> float:
    """Relative performance drop ``(baseline - measured) / baseline``."""
    if perf.baseline == 0:
        raise RdError(f"task {perf.task_id}: baseline performance is zero")
    return (perf.baseline - perf.measured) / perf.baseline


def total_distortion(distortions: Sequence[float], weights: WeightVector) -> float:
    d = np.asarray(distortions, dtype=float)
    if d.shape != (len(weights),):
        raise RdError(f"{d.size} task distortions but {len(weights)} weights")
    return float(math.fsum(w * di for w, di in zip(weights.weights, d)))


def _rates_array(params: SurfaceParams, rates) -> np.ndarray:
    if isinstance(rates, RateVector):
        rates = rates.rates
    r = np.asarray(rates, dtype=float)
    if r.ndim == 0 or r.shape[-1] != params.n_streams:
        raise RdError(
            f"rate dimension {r.shape[-1] if r.ndim else 0} does not match "
            f"{params.n_streams} surface streams"
        )
    return r


def eval_surface(params: SurfaceParams, rates) -> float | np.ndarray:
    """Evaluate the surface at ``rates``.

    ``rates`` may be a RateVector, a length-N sequence, or an array whose last
    axis has length N; in the last case an array of distortions is returned.
    """
    r = _rates_array(params, rates)
    terms = params.alpha * np.exp2(-params.beta * r)
    out = params.gamma + terms.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def surface_gradient(params: SurfaceParams, rates) -> np.ndarray:
    """Partial derivatives of the surface with respect to each rate."""
    r = _rates_array(params, rates)
    a, b = params.alpha, params.beta
    return -a * b * LN2 * np.exp2(-b * r)
