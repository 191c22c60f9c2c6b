"""Command-line front end.

Exit codes: 0 success, 2 usage or parse error, 3 fit did not converge,
4 degenerate sample design.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io as rio
from .allocate import (
    StreamStats,
    allocate_clipped,
    allocate_equal,
    allocate_proportional,
    compare_methods,
)
from .distortion import SurfaceParams, WeightVector, eval_surface
from .errors import DegenerateDesignError, ParseError, RdError
from .fit import FitOptions, fit_surface
from .synthetic import (
    SamplingPlan,
    build_rd_samples,
    default_models,
    generate_task_performances,
    grid_search_allocation,
    load_models,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_DEGENERATE = 0, 2, 3, 4

CLI_METHODS = ("proposed", "equal", "prop-elements", "prop-variance", "grid")


@dataclass
class ExperimentConfig:
    n_streams: int
    n_tasks: int
    weights: WeightVector
    budgets: list[float]
    stream_stats: Optional[StreamStats] = None
    fit_options: FitOptions = field(default_factory=FitOptions)
    input_path: Optional[Path] = None
    output_path: Optional[Path] = None

    def __post_init__(self):
        if not self.budgets or any(not b > 0 for b in self.budgets):
            raise RdError("budgets must be a nonempty list of positive values")
        if len(self.weights) != self.n_tasks:
            raise RdError(f"{len(self.weights)} weights for {self.n_tasks} tasks")
        if self.stream_stats is not None and len(self.stream_stats) != self.n_streams:
            raise RdError(f"stream stats cover {len(self.stream_stats)} streams, expected {self.n_streams}")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _stats(args, n: int) -> Optional[StreamStats]:
    if args.elements is None and args.variances is None:
        return None
    counts = args.elements if args.elements is not None else [1.0] * n
    variances = args.variances if args.variances is not None else [0.0] * n
    if len(counts) != n or len(variances) != n:
        raise RdError(f"--elements/--variances need {n} values")
    return StreamStats(counts, variances)


def _write_or_print(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _table(allocs) -> str:
    n = len(allocs[0].rates)
    head = f"{'budget':>10} {'method':<14}" + "".join(f"{'R_' + str(j):>12}" for j in range(1, n + 1))
    head += f"{'D_t':>14}{'multiplier':>14}"
    lines = [head]
    for a in allocs:
        row = f"{a.budget:>10.2f} {a.method:<14}" + "".join(f"{r:>12.3f}" for r in a.rates)
        row += f"{a.predicted_distortion:>14.6f}"
        row += f"{a.multiplier:>14.6g}" if a.multiplier is not None else f"{'-':>14}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    models = load_models(args.model) if args.model else default_models()
    n = models[0].n_streams
    plan = SamplingPlan.uniform_grid(n, args.points, args.low, args.high, args.noise, args.seed)
    table = generate_task_performances(models, plan)
    if args.raw:
        if not args.output:
            raise RdError("--raw needs --output (a baselines sidecar is written next to it)")
        rio.write_perf_table(args.output, table)
        return EXIT_OK
    weights = WeightVector(args.weights) if args.weights else WeightVector.ones(len(models))
    samples = build_rd_samples(table, weights)
    _write_or_print(rio.samples_csv(samples), args.output)
    return EXIT_OK


def cmd_fit(args) -> int:
    weights = WeightVector(args.weights) if args.weights else None
    samples = rio.read_samples(args.input, weights)
    opts = FitOptions(max_iter=args.max_iter)
    report = fit_surface(samples, opts)
    stamp = None
    if args.timestamp:
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
        stamp = when.isoformat(timespec="seconds")
    prov = rio.fit_provenance(report, rio.file_sha256(args.input), stamp)
    text = rio.params_text(report.params, prov)
    _write_or_print(text, args.params)
    p = report.params
    # Summary goes to stderr when stdout carries the params file.
    out = sys.stdout if args.params else sys.stderr
    print(f"samples     {report.n_samples}", file=out)
    print(f"gamma       {p.gamma:.6g}", file=out)
    for j, (a, b) in enumerate(zip(p.alphas, p.betas), start=1):
        print(f"stream {j}    alpha={a:.6g} beta={b:.6g}", file=out)
    print(f"R^2         {report.r_squared:.6f}", file=out)
    print(f"residuals   mean={report.residual_mean:.3e} max|.|={report.residual_max_abs:.3e}", file=out)
    print(f"iterations  {report.iterations} converged={report.converged}", file=out)
    return EXIT_OK if report.converged else EXIT_NUMERIC


def _allocate_one(params: SurfaceParams, method: str, budget: float, args):
    n = params.n_streams
    if method == "proposed":
        return allocate_clipped(params, budget)
    if method == "equal":
        alloc = allocate_equal(n, budget)
    elif method in ("prop-elements", "prop-variance"):
        stats = _stats(args, n)
        if stats is None:
            raise RdError(f"method {method} needs --elements or --variances")
        if method == "prop-elements":
            alloc = allocate_proportional(stats.element_counts, budget, "prop_elements")
        else:
            alloc = allocate_proportional(stats.variances, budget, "prop_variance")
    elif method == "grid":
        return grid_search_allocation(params, budget, args.grid_step)
    else:
        raise RdError(f"unknown method {method!r}")
    return alloc.with_distortion(params)


def cmd_allocate(args) -> int:
    params = rio.read_params(args.params)
    alloc = _allocate_one(params, args.method, args.budget, args)
    sys.stdout.write(_table([alloc]))
    sys.stdout.write("\n" + rio.allocations_csv([alloc]))
    return EXIT_OK


def cmd_compare(args) -> int:
    params = rio.read_params(args.params)
    rows = compare_methods(params, _stats(args, params.n_streams), args.budget)
    allocs = [r.allocation for r in rows]
    sys.stdout.write(_table(allocs))
    sys.stdout.write("\n" + rio.allocations_csv(allocs))
    return EXIT_OK


def sweep_rows(params: SurfaceParams, budgets: Sequence[float], stats: Optional[StreamStats]):
    allocs = []
    for budget in budgets:
        allocs.extend(r.allocation for r in compare_methods(params, stats, budget))
    return allocs


def surface_points(params: SurfaceParams, budgets: Sequence[float], points: int) -> str:
    """Plot data: a surface grid and one constraint line per budget (two streams only)."""
    if params.n_streams != 2:
        raise RdError("--emit-surface needs a two-stream surface")
    top = max(budgets)
    axis = np.linspace(0.0, top, points)
    rows = []
    for r1 in axis:
        for r2 in axis:
            rows.append(["surface", "", rio.fmt(r1), rio.fmt(r2), rio.fmt(eval_surface(params, (r1, r2)))])
    for budget in budgets:
        for r1 in np.linspace(0.0, budget, points):
            r2 = max(budget - r1, 0.0)
            rows.append(["constraint", rio.fmt(budget), rio.fmt(r1), rio.fmt(r2),
                         rio.fmt(eval_surface(params, (r1, r2)))])
    return rio._to_csv(["kind", "budget", "R_1", "R_2", "D_t"], rows)


def cmd_sweep(args) -> int:
    params = rio.read_params(args.params)
    stats = _stats(args, params.n_streams)
    allocs = sweep_rows(params, args.budgets, stats)
    sys.stdout.write(_table(allocs))
    if args.output:
        Path(args.output).write_text(rio.allocations_csv(allocs))
    else:
        sys.stdout.write("\n" + rio.allocations_csv(allocs))
    if args.emit_surface:
        Path(args.emit_surface).write_text(surface_points(params, args.budgets, args.surface_points))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdalloc", description="Fit rate-distortion surfaces and allocate bits among feature streams.")
    sub = parser.add_subparsers(dest="command", required=True)

    def stats_flags(p):
        p.add_argument("--elements", type=_floats, help="per-stream tensor element counts, comma-separated")
        p.add_argument("--variances", type=_floats, help="per-stream tensor element variances, comma-separated")

    p = sub.add_parser("simulate", help="generate a synthetic samples file")
    p.add_argument("--model", help="synthetic task model JSON (default: built-in 3-task, 2-stream model)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--noise", type=float, default=0.0, help="performance noise std as a fraction of baseline")
    p.add_argument("--weights", type=_floats)
    p.add_argument("--points", type=int, default=10, help="grid points per stream")
    p.add_argument("--low", type=float, default=50.0)
    p.add_argument("--high", type=float, default=3000.0)
    p.add_argument("--raw", action="store_true", help="write A_i columns and a baselines sidecar instead of D_t")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit surface parameters to a samples file")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--params", "-p", help="where to write the params file (default: stdout)")
    p.add_argument("--weights", type=_floats, help="task weights for raw-performance input")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--timestamp", action="store_true", help="record a timestamp (honours SOURCE_DATE_EPOCH)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("allocate", help="allocate one budget with one method")
    p.add_argument("--params", "-p", required=True)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--method", choices=CLI_METHODS, default="proposed")
    p.add_argument("--grid-step", type=float, default=1.0)
    stats_flags(p)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("compare", help="compare the proposed allocation with the baselines")
    p.add_argument("--params", "-p", required=True)
    p.add_argument("--budget", type=float, required=True)
    stats_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="compare methods over several budgets")
    p.add_argument("--params", "-p", required=True)
    p.add_argument("--budgets", type=_floats, default=[1000.0, 1500.0, 2000.0])
    p.add_argument("--output", "-o", help="CSV output (default: stdout after the table)")
    p.add_argument("--emit-surface", help="write surface and constraint-line points as CSV")
    p.add_argument("--surface-points", type=int, default=41)
    stats_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    try:
        return args.func(args)
    except DegenerateDesignError as exc:
        print(f"rdalloc: degenerate design: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ParseError as exc:
        print(f"rdalloc: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RdError as exc:
        print(f"rdalloc: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
