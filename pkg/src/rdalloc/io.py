"""File formats: samples CSV, baselines sidecar, params key-value file, result CSV.

Floats are written with ``repr`` so every value re-parses to the same double.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import re
from pathlib import Path
from typing import Iterable, Sequence

from .distortion import RateVector, SurfaceParams, TaskPerformance, WeightVector
from .errors import ParseError, RdError
from .fit import FitReport, RdSample
from .synthetic import PerfRow, build_rd_samples

_RATE = re.compile(r"R_(\d+)$")
_PERF = re.compile(r"A_(\d+)$")


def fmt(x: float) -> str:
    return repr(float(x))


def baselines_path(path) -> Path:
    return Path(str(path) + ".baselines")


def _to_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def samples_csv(samples: Sequence[RdSample]) -> str:
    n = len(samples[0].rates)
    header = [f"R_{j}" for j in range(1, n + 1)] + ["D_t"]
    rows = ([fmt(r) for r in s.rates.rates] + [fmt(s.total_distortion)] for s in samples)
    return _to_csv(header, rows)


def write_samples(path, samples: Sequence[RdSample]) -> None:
    Path(path).write_text(samples_csv(samples))


def write_perf_table(path, perf_table: Sequence[PerfRow]) -> None:
    """Write raw performances plus a ``<path>.baselines`` sidecar."""
    n = len(perf_table[0].rates)
    m = len(perf_table[0].performances)
    header = [f"R_{j}" for j in range(1, n + 1)] + [f"A_{i}" for i in range(1, m + 1)]
    rows = ([fmt(r) for r in row.rates.rates] + [fmt(p.measured) for p in row.performances]
            for row in perf_table)
    Path(path).write_text(_to_csv(header, rows))
    baselines = [fmt(p.baseline) for p in perf_table[0].performances]
    baselines_path(path).write_text(_to_csv([f"A_{i}" for i in range(1, m + 1)], [baselines]))


def _read_rows(path) -> list[list[str]]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path=p) from exc
    rows = [r for r in csv.reader(io.StringIO(text))]
    rows = [(i, r) for i, r in enumerate(rows, start=1) if r and not r[0].startswith("#")]
    if not rows:
        raise ParseError("file is empty", path=p, line=1, column=1)
    return rows


def _parse_float(text: str, path, line: int, col: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a number", path, line, col) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {text!r}", path, line, col)
    return v


def _check_indices(names: list[str], prefix: str, path, start_col: int) -> None:
    for offset, name in enumerate(names):
        expected = f"{prefix}_{offset + 1}"
        if name != expected:
            raise ParseError(f"expected header {expected!r}, got {name!r}", path, 1, start_col + offset)


def read_perf_table(path) -> list[PerfRow]:
    rows = _read_rows(path)
    line0, header = rows[0]
    header = [h.strip() for h in header]
    n = sum(1 for h in header if _RATE.match(h))
    m = len(header) - n
    _check_indices(header[:n], "R", path, 1)
    _check_indices(header[n:], "A", path, n + 1)
    if n == 0 or m == 0:
        raise ParseError("header must contain R_j and A_i columns", path, line0, 1)
    side = baselines_path(path)
    if not side.exists():
        raise ParseError(f"missing baselines sidecar {side.name}", path, line0)
    brows = _read_rows(side)
    bline, bvals = brows[1] if len(brows) > 1 else (brows[0][0], [])
    if len(bvals) != m:
        raise ParseError(f"expected {m} baselines", side, bline)
    baselines = [_parse_float(v, side, bline, c) for c, v in enumerate(bvals, start=1)]
    out = []
    for line, r in rows[1:]:
        if len(r) != n + m:
            raise ParseError(f"expected {n + m} fields, got {len(r)}", path, line, min(len(r), n + m) + 1)
        vals = [_parse_float(v, path, line, c) for c, v in enumerate(r, start=1)]
        try:
            rates = RateVector(vals[:n])
            perfs = tuple(TaskPerformance(i + 1, baselines[i], vals[n + i]) for i in range(m))
        except RdError as exc:
            raise ParseError(str(exc), path, line) from exc
        out.append(PerfRow(rates, perfs))
    if not out:
        raise ParseError("no data rows", path, line0 + 1)
    return out


def read_samples(path, weights: WeightVector | None = None) -> list[RdSample]:
    """Read a samples CSV.

    Pre-scalarized files (``R_1..R_N,D_t``) are returned as is. Raw files
    (``R_1..R_N,A_1..A_M``) are scalarized with ``weights`` (unit weights when
    omitted) using the baselines sidecar.
    """
    rows = _read_rows(path)
    line0, header = rows[0]
    header = [h.strip() for h in header]
    if header and header[-1] != "D_t":
        table = read_perf_table(path)
        if weights is None:
            weights = WeightVector.ones(len(table[0].performances))
        return build_rd_samples(table, weights)
    n = len(header) - 1
    if n < 1:
        raise ParseError("header must be R_1,...,R_N,D_t", path, line0, 1)
    _check_indices(header[:n], "R", path, 1)
    out = []
    for line, r in rows[1:]:
        if len(r) != n + 1:
            raise ParseError(f"expected {n + 1} fields, got {len(r)}", path, line, min(len(r), n + 1) + 1)
        vals = [_parse_float(v, path, line, c) for c, v in enumerate(r, start=1)]
        try:
            out.append(RdSample(RateVector(vals[:n]), vals[n]))
        except RdError as exc:
            raise ParseError(str(exc), path, line) from exc
    if not out:
        raise ParseError("no data rows", path, line0 + 1)
    return out


def params_text(params: SurfaceParams, provenance: dict | None = None) -> str:
    lines = ["# rdalloc surface parameters: D = gamma + sum_j alpha_j * 2**(-beta_j * R_j), R in kbits",
             f"gamma = {fmt(params.gamma)}"]
    lines += [f"alpha_{j} = {fmt(a)}" for j, a in enumerate(params.alphas, start=1)]
    lines += [f"beta_{j} = {fmt(b)}" for j, b in enumerate(params.betas, start=1)]
    for key, value in (provenance or {}).items():
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def fit_provenance(report: FitReport, source: str | None = None, timestamp: str | None = None) -> dict:
    prov = {
        "n_samples": report.n_samples,
        "r_squared": fmt(report.r_squared),
        "residual_mean": fmt(report.residual_mean),
        "residual_max_abs": fmt(report.residual_max_abs),
        "iterations": report.iterations,
        "converged": str(report.converged).lower(),
    }
    if source is not None:
        prov["source_sha256"] = source
    if timestamp is not None:
        prov["timestamp"] = timestamp
    return prov


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_params(path, params: SurfaceParams, provenance: dict | None = None) -> None:
    Path(path).write_text(params_text(params, provenance))


def read_params_file(path) -> tuple[SurfaceParams, dict]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path=p) from exc
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError("expected 'key = value'", p, line_no, 1)
        key = key.strip()
        if key in values:
            raise ParseError(f"duplicate key {key!r}", p, line_no, 1)
        values[key] = value.strip()
    if "gamma" not in values:
        raise ParseError("missing key 'gamma'", p)
    n = 0
    while f"alpha_{n + 1}" in values or f"beta_{n + 1}" in values:
        n += 1
    if n == 0:
        raise ParseError("no alpha_j/beta_j keys", p)

    def num(key):
        if key not in values:
            raise ParseError(f"missing key {key!r}", p)
        try:
            return float(values[key])
        except ValueError:
            raise ParseError(f"{key}: cannot parse {values[key]!r}", p) from None

    try:
        params = SurfaceParams(num("gamma"), [num(f"alpha_{j}") for j in range(1, n + 1)],
                               [num(f"beta_{j}") for j in range(1, n + 1)])
    except ParseError:
        raise
    except RdError as exc:
        raise ParseError(str(exc), p) from exc
    core = {"gamma"} | {f"alpha_{j}" for j in range(1, n + 1)} | {f"beta_{j}" for j in range(1, n + 1)}
    return params, {k: v for k, v in values.items() if k not in core}


def read_params(path) -> SurfaceParams:
    return read_params_file(path)[0]


def allocation_header(n: int) -> list[str]:
    return ["budget", "method"] + [f"R_{j}" for j in range(1, n + 1)] + ["D_t", "multiplier"]


def allocation_fields(alloc) -> list[str]:
    return ([fmt(alloc.budget), alloc.method] + [fmt(r) for r in alloc.rates]
            + [fmt(alloc.predicted_distortion) if alloc.predicted_distortion is not None else "",
               fmt(alloc.multiplier) if alloc.multiplier is not None else ""])


def allocations_csv(allocs: Sequence) -> str:
    return _to_csv(allocation_header(len(allocs[0].rates)), (allocation_fields(a) for a in allocs))
