"""Synthetic task-performance generator and brute-force allocation oracle.

The generator replaces a real encode/decode/evaluate loop: each task's
distortion is ``g_i + sum_j a_ij * 2**(-b_ij * R_j)`` and the measured
performance is ``baseline * (1 - D_i) + baseline * noise_sigma * z`` with
``z`` standard normal.

Seed contract: noise comes from ``numpy.random.Generator(PCG64(seed))``; a
single ``standard_normal((n_points, n_tasks))`` draw is made, rows in plan
order and columns in task order, even when ``noise_sigma`` is zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .allocate import Allocation, StreamStats
from .distortion import (
    RateVector,
    SurfaceParams,
    TaskPerformance,
    WeightVector,
    eval_surface,
    task_distortion,
    total_distortion,
)
from .errors import RdError, UnsupportedDimensionError
from .fit import RdSample


@dataclass(frozen=True)
class SyntheticTaskModel:
    task_id: int
    baseline: float
    offset: float
    coeffs: tuple[float, ...]
    decays: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        decays = tuple(float(d) for d in self.decays)
        if len(coeffs) != len(decays) or not coeffs:
            raise RdError(f"task {self.task_id}: coeffs and decays must have equal nonzero length")
        if any(c < 0 for c in coeffs):
            raise RdError(f"task {self.task_id}: coefficients must be nonnegative")
        if any(not d > 0 for d in decays):
            raise RdError(f"task {self.task_id}: decays must be positive")
        if self.baseline == 0:
            raise RdError(f"task {self.task_id}: baseline performance is zero")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "decays", decays)

    @property
    def n_streams(self) -> int:
        return len(self.coeffs)

    def distortion(self, rates) -> np.ndarray:
        r = np.asarray(rates, dtype=float)
        return self.offset + (np.array(self.coeffs) * np.exp2(-np.array(self.decays) * r)).sum(axis=-1)


@dataclass(frozen=True)
class SamplingPlan:
    rate_grid: tuple[tuple[float, ...], ...]
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        grid = tuple(tuple(float(r) for r in row) for row in self.rate_grid)
        if not grid:
            raise RdError("sampling plan has an empty rate grid")
        if self.noise_sigma < 0:
            raise RdError("noise_sigma must be nonnegative")
        object.__setattr__(self, "rate_grid", grid)

    @classmethod
    def uniform_grid(cls, n_streams: int = 2, points_per_axis: int = 10, low: float = 50.0,
                     high: float = 3000.0, noise_sigma: float = 0.0, seed: int = 0) -> "SamplingPlan":
        axis = np.linspace(low, high, points_per_axis)
        mesh = np.stack(np.meshgrid(*([axis] * n_streams), indexing="ij"), axis=-1)
        return cls(tuple(map(tuple, mesh.reshape(-1, n_streams))), noise_sigma, seed)


@dataclass(frozen=True)
class PerfRow:
    rates: RateVector
    performances: tuple[TaskPerformance, ...]


def default_models() -> list[SyntheticTaskModel]:
    """Three tasks over two streams, shaped like a segmentation / disparity /
    reconstruction network whose second stream saturates much sooner.

    Decays are shared per stream, so any weighted total is an exact surface
    (see :func:`implied_surface`).
    """
    decays = (5.0e-4, 6.0e-3)
    return [
        SyntheticTaskModel(1, 0.6259, 0.002, (0.30, 0.20), decays),
        SyntheticTaskModel(2, 0.8000, 0.003, (0.20, 0.10), decays),
        SyntheticTaskModel(3, 24.00, 0.003, (0.70, 0.10), decays),
    ]


def default_stream_stats() -> StreamStats:
    # Illustrative tensor sizes and per-element variances for the two default streams.
    return StreamStats(element_counts=(98304, 65536), variances=(1.0, 2.0))


def generate_task_performances(models: Sequence[SyntheticTaskModel], plan: SamplingPlan) -> list[PerfRow]:
    if not models:
        raise RdError("no task models")
    n = models[0].n_streams
    for m in models:
        if m.n_streams != n:
            raise RdError(f"task {m.task_id} has {m.n_streams} streams, expected {n}")
    grid = np.array(plan.rate_grid, dtype=float)
    if grid.shape[1] != n:
        raise RdError(f"rate grid has {grid.shape[1]} streams, models have {n}")

    rng = np.random.Generator(np.random.PCG64(plan.seed))
    z = rng.standard_normal((grid.shape[0], len(models)))
    rows = []
    for k, rates in enumerate(grid):
        perfs = []
        for i, m in enumerate(models):
            d = float(m.distortion(rates))
            measured = m.baseline * (1.0 - d) + m.baseline * plan.noise_sigma * z[k, i]
            perfs.append(TaskPerformance(m.task_id, m.baseline, measured))
        rows.append(PerfRow(RateVector(rates), tuple(perfs)))
    return rows


def build_rd_samples(perf_table: Sequence[PerfRow], weights: WeightVector) -> list[RdSample]:
    """Scalarize each row's task distortions into one total distortion."""
    samples = []
    for k, row in enumerate(perf_table):
        if len(row.performances) != len(weights):
            raise RdError(
                f"row {k}: {len(row.performances)} task performances, {len(weights)} weights"
            )
        dists = [task_distortion(p) for p in row.performances]
        samples.append(RdSample(row.rates, total_distortion(dists, weights)))
    return samples


def implied_surface(models: Sequence[SyntheticTaskModel], weights: WeightVector) -> SurfaceParams:
    """Exact surface when every task shares the same decay per stream."""
    decays = np.array(models[0].decays)
    for m in models[1:]:
        if not np.array_equal(np.array(m.decays), decays):
            raise RdError("task decays differ; the weighted total is not an exact surface")
    w = weights.as_array()
    gamma = math.fsum(wi * m.offset for wi, m in zip(w, models))
    alphas = [math.fsum(wi * m.coeffs[j] for wi, m in zip(w, models)) for j in range(len(decays))]
    return SurfaceParams(gamma, alphas, decays)


def _lattice(budget: float, step: float) -> tuple[int, float]:
    # Shrink the spacing so the budget is a whole number of steps; the
    # simplex vertices (fully clipped allocations) then lie on the lattice.
    count = max(int(math.ceil(budget / step - 1e-9)), 1)
    return count, budget / count


def _inner_convex_argmin(f, upper: np.ndarray) -> np.ndarray:
    # Smallest m in [0, upper] with f(m+1) - f(m) >= 0, per row; f convex in m.
    lo = np.zeros_like(upper)
    hi = upper.copy()
    while np.any(lo < hi):
        active = lo < hi
        mid = (lo + hi) // 2
        rising = f(mid + 1) - f(mid) >= 0
        hi = np.where(active & rising, mid, hi)
        lo = np.where(active & ~rising, mid + 1, lo)
    return lo


def grid_search_allocation(params: SurfaceParams, budget: float, step: float,
                           exhaustive: bool | None = None) -> Allocation:
    """Minimize the surface over the step-lattice of the budget simplex.

    The spacing is ``budget / ceil(budget / step)``, never coarser than
    ``step``. The first N-1 rates take values ``k * spacing``; the last takes
    the remainder. For three streams the middle coordinate is minimized exactly
    by bisection on forward differences (valid because the surface is convex
    along every lattice line) unless ``exhaustive`` is set; the default turns
    exhaustive enumeration on only for lattices under ~2e7 points. Ties go to
    the lexicographically smallest lattice point.
    """
    n = params.n_streams
    if n > 3:
        raise UnsupportedDimensionError(f"grid search supports at most 3 streams, got {n}")
    if not step > 0:
        raise RdError(f"grid step {step} must be positive")
    budget = float(budget)
    if budget < 0 or not math.isfinite(budget):
        raise RdError(f"budget {budget} must be finite and nonnegative")

    if n == 1:
        rates = np.array([budget])
    elif n == 2:
        kmax, step = _lattice(budget, step)
        k = np.arange(kmax + 1)
        r1 = k * step
        pts = np.column_stack([r1, np.maximum(budget - r1, 0.0)])
        rates = pts[int(np.argmin(eval_surface(params, pts)))]
    else:
        kmax, step = _lattice(budget, step)
        if exhaustive is None:
            exhaustive = (kmax + 1) * (kmax + 2) // 2 <= 20_000_000
        a, b = params.alpha, params.beta
        if exhaustive:
            best_val, best = np.inf, None
            for k1 in range(kmax + 1):
                m = np.arange(kmax - k1 + 1)
                r1 = k1 * step
                r2 = m * step
                r3 = np.maximum(budget - r1 - r2, 0.0)
                vals = eval_surface(params, np.column_stack([np.full(m.size, r1), r2, r3]))
                i = int(np.argmin(vals))
                if vals[i] < best_val:
                    best_val, best = vals[i], (r1, r2[i], r3[i])
            rates = np.array(best)
        else:
            k1 = np.arange(kmax + 1)
            r1 = k1 * step

            def inner(m):
                r2 = m * step
                r3 = np.maximum(budget - r1 - r2, 0.0)
                return a[1] * np.exp2(-b[1] * r2) + a[2] * np.exp2(-b[2] * r3)

            m = _inner_convex_argmin(inner, kmax - k1)
            r2 = m * step
            r3 = np.maximum(budget - r1 - r2, 0.0)
            pts = np.column_stack([r1, r2, r3])
            rates = pts[int(np.argmin(eval_surface(params, pts)))]
    return Allocation(tuple(rates), budget, "grid_search", eval_surface(params, rates))


def models_to_json(models: Sequence[SyntheticTaskModel]) -> str:
    payload = {
        "tasks": [
            {
                "task_id": m.task_id,
                "baseline": m.baseline,
                "offset": m.offset,
                "coeffs": list(m.coeffs),
                "decays": list(m.decays),
            }
            for m in models
        ]
    }
    return json.dumps(payload, indent=2) + "\n"


def load_models(path) -> list[SyntheticTaskModel]:
    try:
        payload = json.loads(Path(path).read_text())
        return [
            SyntheticTaskModel(int(t["task_id"]), float(t["baseline"]), float(t["offset"]),
                               tuple(t["coeffs"]), tuple(t["decays"]))
            for t in payload["tasks"]
        ]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, RdError):
            raise
        raise RdError(f"{path}: invalid synthetic model file: {exc}") from exc
