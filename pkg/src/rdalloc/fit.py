"""Bounded nonlinear least-squares fit of the exponential rate-distortion surface."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .distortion import LN2, RateVector, SurfaceParams, eval_surface
from .errors import DegenerateDesignError, RdError, TooFewSamplesError, UndefinedValueError


@dataclass(frozen=True)
class RdSample:
    rates: RateVector
    total_distortion: float

    def __post_init__(self):
        if not isinstance(self.rates, RateVector):
            object.__setattr__(self, "rates", RateVector(self.rates))
        if not math.isfinite(self.total_distortion):
            raise RdError(f"non-finite distortion {self.total_distortion}")
        object.__setattr__(self, "total_distortion", float(self.total_distortion))


@dataclass(frozen=True)
class FitOptions:
    ftol: float = 1e-12
    gtol: float = 1e-10
    xtol: float = 1e-15
    max_iter: int = 500
    alpha_min: float = 1e-12
    beta_min: float = 1e-12


@dataclass(frozen=True)
class FitReport:
    """Fitted parameters with goodness-of-fit diagnostics.

    ``r_squared`` is NaN when every sample has the same distortion and the fit
    is not exact. ``stationarity`` is the scaled projected gradient of the
    least-squares cost at ``params`` (compare against ``FitOptions.gtol``).
    """

    params: SurfaceParams
    r_squared: float
    residual_mean: float
    residual_max_abs: float
    iterations: int
    converged: bool
    n_samples: int
    cost: float = 0.0
    stationarity: float = 0.0
    message: str = field(default="", compare=False)


def samples_to_arrays(samples: Sequence[RdSample]) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) == 0:
        raise RdError("no samples")
    n = len(samples[0].rates)
    for k, s in enumerate(samples):
        if len(s.rates) != n:
            raise RdError(f"sample {k} has {len(s.rates)} rates, expected {n}")
    rates = np.array([s.rates.rates for s in samples], dtype=float)
    dist = np.array([s.total_distortion for s in samples], dtype=float)
    return rates, dist


def _canonical_order(rates: np.ndarray, dist: np.ndarray):
    # Fixed sample order makes every reported number independent of input order.
    keys = [dist] + [rates[:, j] for j in reversed(range(rates.shape[1]))]
    order = np.lexsort(keys)
    return rates[order], dist[order]


def r_squared(samples: Sequence[RdSample], params: SurfaceParams) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot``.

    Constant data (``SS_tot == 0``) gives 1.0 for an exact fit and raises
    UndefinedValueError otherwise.
    """
    rates, dist = samples_to_arrays(samples)
    rates, dist = _canonical_order(rates, dist)
    return _r_squared(dist, eval_surface(params, rates))


def _r_squared(dist: np.ndarray, fitted: np.ndarray) -> float:
    ss_res = math.fsum((dist - fitted) ** 2)
    ss_tot = math.fsum((dist - math.fsum(dist) / dist.size) ** 2)
    if ss_tot == 0:
        if ss_res == 0:
            return 1.0
        raise UndefinedValueError("R^2 undefined: all sample distortions are identical")
    return 1.0 - ss_res / ss_tot


def residual_stats(samples: Sequence[RdSample], params: SurfaceParams) -> tuple[float, float]:
    """Mean and max-absolute of ``observed - fitted``."""
    rates, dist = samples_to_arrays(samples)
    rates, dist = _canonical_order(rates, dist)
    res = dist - eval_surface(params, rates)
    return math.fsum(res) / res.size, float(np.max(np.abs(res)))


def _residuals(x, rates, dist):
    n = rates.shape[1]
    gamma, a, b = x[0], x[1 : 1 + n], x[1 + n :]
    return gamma + (a * np.exp2(-b * rates)).sum(axis=1) - dist


def _jacobian(x, rates, dist):
    n = rates.shape[1]
    a, b = x[1 : 1 + n], x[1 + n :]
    e = np.exp2(-b * rates)
    jac = np.empty((rates.shape[0], 1 + 2 * n))
    jac[:, 0] = 1.0
    jac[:, 1 : 1 + n] = e
    jac[:, 1 + n :] = -a * rates * LN2 * e
    return jac


def initial_guess(rates: np.ndarray, dist: np.ndarray, opts: FitOptions = FitOptions()) -> np.ndarray:
    """Starting point from log-linear regressions on per-stream slices.

    gamma starts at the smallest observed distortion. For stream j the slice
    holds the samples whose other rates sit at their maxima, so the remaining
    variation is dominated by stream j's exponential.
    """
    n = rates.shape[1]
    gamma0 = float(dist.min())
    span = float(dist.max() - dist.min())
    eps = max(1e-3 * span, 1e-300)
    alphas, betas = np.empty(n), np.empty(n)
    for j in range(n):
        mask = np.ones(len(dist), dtype=bool)
        for k in range(n):
            if k != j:
                mask &= rates[:, k] == rates[:, k].max()
        r = rates[mask, j]
        y = np.log2(np.maximum(dist[mask] - gamma0, eps))
        rng_j = float(np.ptp(rates[:, j]))
        slope = intercept = None
        if np.unique(r).size >= 2:
            slope, intercept = np.polyfit(r, y, 1)
        if slope is None or not np.isfinite(slope) or slope >= 0:
            alphas[j] = span if span > 0 else 1.0
            betas[j] = 1.0 / rng_j
        else:
            alphas[j] = 2.0 ** min(intercept, 1000.0)
            betas[j] = -slope
    alphas = np.maximum(alphas, opts.alpha_min)
    betas = np.maximum(betas, opts.beta_min)
    return np.concatenate([[gamma0], alphas, betas])


def _linear_given_decays(rates, dist, betas, alpha_min):
    """Least-squares gamma and alphas for fixed decays; returns (x, cost)."""
    basis = np.exp2(-betas * rates)
    design = np.column_stack([np.ones(len(dist)), basis])
    coef, *_ = np.linalg.lstsq(design, dist, rcond=None)
    coef[1:] = np.maximum(coef[1:], alpha_min)
    res = design @ coef - dist
    return np.concatenate([coef, betas]), 0.5 * float(res @ res)


def decay_grid_starts(rates: np.ndarray, dist: np.ndarray, opts: FitOptions = FitOptions(), keep: int = 3, per_axis: int = 12):
    """Starting points from a log-spaced scan over the decays.

    For fixed decays the model is linear in gamma and the alphas, so each grid
    node costs one small linear solve. The ``keep`` best nodes are returned.
    """
    n = rates.shape[1]
    if per_axis ** n > 20000:
        return []
    axes = [np.geomspace(0.05, 200.0, per_axis) / np.ptp(rates[:, j]) for j in range(n)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    scored = []
    for betas in mesh:
        x, cost = _linear_given_decays(rates, dist, betas, opts.alpha_min)
        scored.append((cost, tuple(x)))
    scored.sort()
    return [np.array(x) for _, x in scored[:keep]]


def _lower_bounds(n: int, opts: FitOptions) -> np.ndarray:
    return np.concatenate([[-np.inf], np.full(n, opts.alpha_min), np.full(n, opts.beta_min)])


def _stationarity(x, rates, dist, lower) -> float:
    """Relative projected gradient of the least-squares cost.

    Each gradient component ``sum_i r_i * J_ik`` is scaled by the parameter
    magnitude (1 for gamma) and divided by ``max(1, sum_i |r_i * J_ik * s_k|)``,
    the size it would have without cancellation. The result does not depend
    on the units of rate or distortion.
    """
    res = _residuals(x, rates, dist)
    scale = np.abs(x)
    scale[0] = 1.0
    terms = _jacobian(x, rates, dist) * scale * res[:, None]
    g = terms.sum(axis=0)
    g[(x <= lower * (1 + 1e-9)) & (g > 0)] = 0.0
    return float(np.max(np.abs(g) / np.maximum(1.0, np.abs(terms).sum(axis=0))))


def _hessian(x, rates, dist):
    """Exact Hessian of ``0.5 * sum(residual**2)``."""
    n = rates.shape[1]
    a, b = x[1 : 1 + n], x[1 + n :]
    e = np.exp2(-b * rates)
    jac = _jacobian(x, rates, dist)
    res = _residuals(x, rates, dist)
    hess = jac.T @ jac
    for j in range(n):
        ia, ib = 1 + j, 1 + n + j
        cross = -(res * rates[:, j] * LN2 * e[:, j]).sum()
        hess[ia, ib] += cross
        hess[ib, ia] += cross
        hess[ib, ib] += (res * a[j] * (rates[:, j] * LN2) ** 2 * e[:, j]).sum()
    return hess, jac.T @ res


def _polish(x, rates, dist, lower, opts: FitOptions, max_steps: int = 20):
    # Newton steps on the parameters not pinned at a bound. Trust-region
    # iterations stall once cost changes reach rounding level; Newton steps
    # drive the gradient down to that level as well. A step is kept only if
    # it stays feasible, does not raise the cost beyond rounding and lowers
    # the stationarity measure.
    res = _residuals(x, rates, dist)
    cost = 0.5 * float(res @ res)
    stat = _stationarity(x, rates, dist, lower)
    steps = 0
    for _ in range(max_steps):
        if stat <= opts.gtol:
            break
        free = x > lower * (1 + 1e-9)
        hess, grad = _hessian(x, rates, dist)
        try:
            delta = np.linalg.solve(hess[np.ix_(free, free)], -grad[free])
        except np.linalg.LinAlgError:
            break
        trial = x.copy()
        trial[free] += delta
        if np.any(trial < lower) or not np.all(np.isfinite(trial)):
            break
        trial_res = _residuals(trial, rates, dist)
        trial_cost = 0.5 * float(trial_res @ trial_res)
        trial_stat = _stationarity(trial, rates, dist, lower)
        if trial_cost > cost * (1 + 1e-9) or trial_stat >= stat:
            break
        x, res, cost, stat = trial, trial_res, trial_cost, trial_stat
        steps += 1
    return x, cost, stat, steps


def check_design(rates: np.ndarray) -> None:
    n_samples, n = rates.shape
    if n_samples < 2 * n + 1:
        raise TooFewSamplesError(
            f"{n_samples} samples cannot identify {2 * n + 1} surface parameters "
            f"for {n} streams (need at least {2 * n + 1})"
        )
    for j in range(n):
        if np.unique(rates[:, j]).size < 2:
            raise DegenerateDesignError(
                f"rate R_{j + 1} is constant across all samples", coordinate=j + 1
            )


def fit_surface(
    samples: Sequence[RdSample],
    options: FitOptions = FitOptions(),
    x0: Sequence[float] | None = None,
) -> FitReport:
    """Fit surface parameters by bounded trust-region-reflective least squares.

    Returns a FitReport whose ``converged`` flag is False when the iteration
    cap is hit; the best parameters found so far are still reported.
    """
    rates, dist = samples_to_arrays(samples)
    check_design(rates)
    rates, dist = _canonical_order(rates, dist)
    n = rates.shape[1]

    lower = _lower_bounds(n, options)
    if x0 is not None:
        starts = [np.asarray(x0, float)]
    else:
        starts = [initial_guess(rates, dist, options)] + decay_grid_starts(rates, dist, options)

    sol = None
    for start in starts:
        trial = least_squares(
            _residuals,
            np.maximum(start, lower),
            jac=_jacobian,
            bounds=(lower, np.inf),
            method="trf",
            x_scale="jac",
            ftol=options.ftol,
            gtol=options.gtol,
            xtol=options.xtol,
            max_nfev=options.max_iter,
            args=(rates, dist),
        )
        # Strict improvement only, so ties keep the earliest start.
        if sol is None or trial.cost < sol.cost:
            sol = trial
    x, cost, stat, polish_steps = _polish(np.maximum(sol.x, lower), rates, dist, lower, options)
    params = SurfaceParams.from_vector(x)
    fitted = eval_surface(params, rates)
    res = dist - fitted
    try:
        r2 = _r_squared(dist, fitted)
    except UndefinedValueError:
        r2 = float("nan")
    return FitReport(
        params=params,
        r_squared=r2,
        residual_mean=math.fsum(res) / res.size,
        residual_max_abs=float(np.max(np.abs(res))),
        iterations=int(sol.nfev) + polish_steps,
        converged=bool(sol.status > 0),
        n_samples=len(dist),
        cost=cost,
        stationarity=stat,
        message=str(sol.message),
    )


def stationarity(samples: Sequence[RdSample], params: SurfaceParams, options: FitOptions = FitOptions()) -> float:
    """First-order optimality measure of ``params`` for ``samples``; see FitReport."""
    rates, dist = samples_to_arrays(samples)
    rates, dist = _canonical_order(rates, dist)
    return _stationarity(params.to_vector(), rates, dist, _lower_bounds(params.n_streams, options))
