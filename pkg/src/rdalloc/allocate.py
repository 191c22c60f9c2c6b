"""Rate allocation under a total budget: closed form, active-set clipping, baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .distortion import LN2, SurfaceParams, eval_surface
from .errors import RdError

METHODS = ("closed_form", "clipped", "equal", "prop_elements", "prop_variance", "grid_search")


@dataclass(frozen=True)
class Allocation:
    rates: tuple[float, ...]
    budget: float
    method: str
    predicted_distortion: Optional[float] = None
    multiplier: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise RdError(f"unknown allocation method {self.method!r}")
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))

    def as_array(self) -> np.ndarray:
        return np.array(self.rates)

    def with_distortion(self, params: SurfaceParams) -> "Allocation":
        return Allocation(
            self.rates, self.budget, self.method, eval_surface(params, self.rates), self.multiplier
        )


@dataclass(frozen=True)
class StreamStats:
    element_counts: tuple[float, ...]
    variances: tuple[float, ...]

    def __init__(self, element_counts: Sequence[float], variances: Sequence[float]):
        counts = tuple(float(c) for c in element_counts)
        var = tuple(float(v) for v in variances)
        if len(counts) != len(var) or not counts:
            raise RdError("element_counts and variances must have equal nonzero length")
        if any(c < 1 for c in counts):
            raise RdError("element counts must be >= 1")
        if any(not v >= 0 for v in var):
            raise RdError("variances must be nonnegative")
        object.__setattr__(self, "element_counts", counts)
        object.__setattr__(self, "variances", var)

    def __len__(self):
        return len(self.element_counts)


def _check_budget(budget: float, allow_negative: bool = False) -> float:
    budget = float(budget)
    if not math.isfinite(budget):
        raise RdError(f"budget {budget} is not finite")
    if budget < 0 and not allow_negative:
        raise RdError(f"budget {budget} is negative")
    return budget


def _solve_subset(a: np.ndarray, b: np.ndarray, budget: float) -> np.ndarray:
    log_ab = np.log2(a * b)
    inv_b = 1.0 / b
    shift = (math.fsum(log_ab * inv_b) - budget) / math.fsum(inv_b)
    return (log_ab - shift) / b


def marginal_slopes(params: SurfaceParams, rates) -> np.ndarray:
    """Magnitude of the distortion decrease per kbit, ``alpha*beta*ln2*2**(-beta*R)``."""
    a, b = params.alpha, params.beta
    return a * b * LN2 * np.exp2(-b * np.asarray(rates, dtype=float))


def _correct_sum(rates: np.ndarray, budget: float, free: np.ndarray) -> np.ndarray:
    # Push the rounding residue of the sum onto the largest free rate.
    if not free.any():
        return rates
    err = budget - math.fsum(rates)
    idx = np.flatnonzero(free)[np.argmax(rates[free])]
    rates[idx] += err
    return rates


def allocate_closed_form(params: SurfaceParams, budget: float) -> Allocation:
    """Stationary point of the Lagrangian over all streams.

    Rates may come out negative; use :func:`allocate_clipped` for a feasible
    allocation.
    """
    budget = _check_budget(budget, allow_negative=True)
    a, b = params.alpha, params.beta
    rates = _correct_sum(_solve_subset(a, b, budget), budget, np.ones(len(a), bool))
    lam = float(np.mean(marginal_slopes(params, rates)))
    return Allocation(tuple(rates), budget, "closed_form", eval_surface(params, rates), lam)


def allocate_clipped(params: SurfaceParams, budget: float) -> Allocation:
    """Optimal nonnegative allocation by iterative active-set re-solving.

    Streams with negative closed-form rates are pinned to zero and the closed
    form is re-solved over the rest with the full budget, until no rate is
    negative. The pinned set only grows, so at most N passes are needed.
    """
    budget = _check_budget(budget)
    a, b = params.alpha, params.beta
    n = len(a)
    if budget == 0:
        rates = np.zeros(n)
        return Allocation(tuple(rates), 0.0, "clipped", eval_surface(params, rates),
                          float(marginal_slopes(params, rates).max()))

    free = np.ones(n, dtype=bool)
    rates = np.zeros(n)
    for _ in range(n):
        rates[:] = 0.0
        rates[free] = _solve_subset(a[free], b[free], budget)
        negative = free & (rates < 0)
        if not negative.any():
            break
        if np.array_equal(negative, free):
            # Only possible through rounding when the budget is ~0.
            negative[np.flatnonzero(free)[np.argmax(rates[free])]] = False
        free &= ~negative
    rates[~free] = 0.0
    rates = _correct_sum(rates, budget, free)
    lam = float(np.mean(marginal_slopes(params, rates)[free]))
    return Allocation(tuple(rates), budget, "clipped", eval_surface(params, rates), lam)


def allocate_equal(n_streams: int, budget: float) -> Allocation:
    if n_streams < 1:
        raise RdError("need at least one stream")
    budget = _check_budget(budget)
    return Allocation((budget / n_streams,) * n_streams, budget, "equal")


def allocate_proportional(shares: Sequence[float], budget: float, method: str = "prop_elements") -> Allocation:
    """Split ``budget`` in proportion to ``shares`` (element counts or variances)."""
    s = np.asarray(shares, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise RdError("shares must be a nonempty vector")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise RdError("shares must be finite and nonnegative")
    total = math.fsum(s)
    if total == 0:
        raise RdError("all shares are zero")
    budget = _check_budget(budget)
    rates = budget * s / total
    rates = _correct_sum(rates, budget, s > 0)
    return Allocation(tuple(rates), budget, method)


@dataclass(frozen=True)
class MethodRow:
    method: str
    allocation: Allocation
    predicted_distortion: float


def compare_methods(params: SurfaceParams, stats: Optional[StreamStats], budget: float) -> list[MethodRow]:
    """Evaluate the proposed allocation and the baselines on one surface.

    Rows come in a fixed order: clipped, equal, prop_elements, prop_variance.
    Proportional rows are omitted when ``stats`` is None, and the variance row
    when every variance is zero.
    """
    n = params.n_streams
    if stats is not None and len(stats) != n:
        raise RdError(f"stream stats cover {len(stats)} streams, surface has {n}")
    allocs = [allocate_clipped(params, budget), allocate_equal(n, budget)]
    if stats is not None:
        allocs.append(allocate_proportional(stats.element_counts, budget, "prop_elements"))
        if any(v > 0 for v in stats.variances):
            allocs.append(allocate_proportional(stats.variances, budget, "prop_variance"))
    rows = []
    for alloc in allocs:
        alloc = alloc.with_distortion(params)
        rows.append(MethodRow(alloc.method, alloc, alloc.predicted_distortion))
    return rows
