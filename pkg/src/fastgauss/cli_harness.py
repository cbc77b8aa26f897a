"""Dataset ingestion, bandwidth sweeps, verification, and reports.

The ``sweep`` command reproduces the standard evaluation protocol for
fast kernel summation: pick a center bandwidth h* (least-squares
cross-validation, or supplied), run the requested algorithms at every
multiple k * h*, optionally verify each run against the exact sums, and
report per-row wall time, error, and prune counters plus a per-algorithm
total.  The ``gen`` command writes synthetic CSV datasets.

Timing per row includes the per-bandwidth moment refresh and an
amortized share of the one-time tree build; dataset loading and the h*
search are excluded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .datasets import clustered_points, uniform_points
from .spatial_index import PointStore, build_tree, default_plimit
from .summation_engine import (
    RunConfig,
    dfd_run,
    dfdo_run,
    dito_run,
    naive_sum,
)

DEFAULT_MULTIPLIERS = tuple(10.0**k for k in range(-3, 4))
_TREE_ALGOS = {"dfd": dfd_run, "dfdo": dfdo_run, "dito": dito_run}
_COUNTER_FIELDS = (
    "pair_visits", "base_cases", "fd_prunes",
    "hermite_prunes", "local_prunes", "h2l_prunes",
)


class LoadError(Exception):
    """Raised for unreadable, ragged, or non-numeric dataset files."""


def load_points(path: str, has_weights: bool = False,
                rescale: bool = False, header: bool = False) -> PointStore:
    """Read a rectangular numeric CSV into a PointStore.

    With ``has_weights`` the last column is taken as per-point weights;
    with ``rescale`` coordinates are min-max mapped into [0, 1] per
    dimension (constant dimensions map to 0).
    """
    rows = []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    start = 1 if header else 0
    width = None
    for lineno, line in enumerate(lines[start:], start=start + 1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise LoadError(
                f"{path}:{lineno}: expected {width} fields, found {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise LoadError(f"{path}:{lineno}: non-numeric field ({exc})") from exc
    if not rows:
        raise LoadError(f"{path}: no data rows")
    data = np.array(rows)
    weights = None
    if has_weights:
        if data.shape[1] < 2:
            raise LoadError(f"{path}: need at least one coordinate column plus weights")
        weights = data[:, -1]
        data = data[:, :-1]
    if rescale:
        lo = data.min(axis=0)
        span = data.max(axis=0) - lo
        span[span == 0.0] = 1.0
        data = (data - lo) / span
    try:
        return PointStore(data, weights)
    except ValueError as exc:
        raise LoadError(f"{path}: {exc}") from exc


def select_bandwidth(points, seed: int = 0, epsilon: float = 1e-3,
                     max_points: int = 2000) -> float:
    """Least-squares cross-validation bandwidth on a log grid + refinement.

    The LSCV score of a Gaussian density estimate decomposes into two
    all-pairs kernel sums (one at bandwidth sqrt(2) h, one at h), which
    are evaluated with the tree engine at a tight tolerance.  A coarse
    geometric grid locates the minimum and a golden-section search in
    log-bandwidth refines it.  Deterministic given the seed (which also
    drives the subsample used for large inputs).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.shape[0] < 2:
        raise ValueError("bandwidth selection needs at least two points")
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    if np.all(hi == lo):
        raise ValueError("all points identical; no finite bandwidth minimizes LSCV")
    if points.shape[0] > max_points:
        idx = np.random.default_rng(seed).choice(points.shape[0], max_points, replace=False)
        points = points[idx]
    n, dim = points.shape
    scale = float(np.linalg.norm(hi - lo))
    tree = build_tree(PointStore(points))

    def score(h: float) -> float:
        conv = dfd_run(RunConfig(bandwidth=math.sqrt(2.0) * h, epsilon=epsilon,
                                 algorithm="dfd"), tree, tree)
        near = dfd_run(RunConfig(bandwidth=h, epsilon=epsilon, algorithm="dfd"),
                       tree, tree)
        norm_conv = (2.0 * math.pi * 2.0 * h * h) ** (-0.5 * dim)
        norm_near = (2.0 * math.pi * h * h) ** (-0.5 * dim)
        integral_sq = norm_conv * float(conv.values.sum()) / (n * n)
        leave_one_out = norm_near * 2.0 * float(near.values.sum() - n) / (n * (n - 1))
        return integral_sq - leave_one_out

    grid = np.geomspace(1e-3 * scale, 0.5 * scale, 14)
    scores = [score(h) for h in grid]
    best = int(np.argmin(scores))
    a = math.log(grid[max(best - 1, 0)])
    b = math.log(grid[min(best + 1, len(grid) - 1)])
    invphi = 0.5 * (math.sqrt(5.0) - 1.0)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = score(math.exp(c)), score(math.exp(d))
    while b - a > 0.02:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = score(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = score(math.exp(d))
    return math.exp(0.5 * (a + b))


@dataclass
class SweepSpec:
    """Everything a bandwidth-sweep run needs."""

    ref_path: str
    query_path: str | None = None
    has_weights: bool = False
    rescale: bool = False
    header: bool = False
    epsilon: float = 0.01
    h_star: float | str = "auto"
    multipliers: tuple = DEFAULT_MULTIPLIERS
    algorithms: tuple = ("dito",)
    leaf_threshold: int = 25
    plimit: int | None = None
    verify: bool = False
    seed: int = 0

    def __post_init__(self):
        self.multipliers = tuple(float(m) for m in self.multipliers)
        self.algorithms = tuple(self.algorithms)
        if not self.multipliers or any(m <= 0 for m in self.multipliers):
            raise ValueError("multipliers must be non-empty and positive")
        for alg in self.algorithms:
            if alg != "naive" and alg not in _TREE_ALGOS:
                raise ValueError(f"unknown algorithm {alg!r}")


@dataclass
class SweepRow:
    algorithm: str
    multiplier: float
    bandwidth: float
    seconds: float
    max_rel_error: float | None
    counters: dict = field(default_factory=dict)


@dataclass
class SweepReport:
    h_star: float
    epsilon: float
    reference: str
    query: str | None
    multipliers: tuple
    algorithms: tuple
    rows: list
    totals: dict
    verified: bool

    @property
    def worst_error(self) -> float:
        errs = [r.max_rel_error for r in self.rows if r.max_rel_error is not None]
        return max(errs) if errs else 0.0


def max_rel_error(estimates: np.ndarray, exact: np.ndarray) -> float:
    """max_q |est - exact| / exact, treating exact zeros as matched zeros."""
    exact = np.asarray(exact, dtype=float)
    estimates = np.asarray(estimates, dtype=float)
    err = np.zeros_like(exact)
    pos = exact > 0.0
    err[pos] = np.abs(estimates[pos] - exact[pos]) / exact[pos]
    bad = ~pos & (estimates != 0.0)
    if np.any(bad):
        return float("inf")
    return float(err.max()) if err.size else 0.0


def run_sweep(spec: SweepSpec) -> SweepReport:
    """Run every requested algorithm at every bandwidth; collect a report."""
    ref_store = load_points(spec.ref_path, spec.has_weights, spec.rescale, spec.header)
    if spec.query_path is not None:
        query_store = load_points(spec.query_path, False, spec.rescale, spec.header)
        if query_store.dim != ref_store.dim:
            raise LoadError("query and reference dimensions differ")
    else:
        query_store = None

    if spec.h_star == "auto":
        h_star = select_bandwidth(ref_store.points, seed=spec.seed)
    else:
        h_star = float(spec.h_star)
        if h_star <= 0:
            raise ValueError("h_star must be positive")

    t0 = time.perf_counter()
    rtree = build_tree(ref_store, spec.leaf_threshold)
    if query_store is None:
        qtree = rtree
        query_points = ref_store.points
    else:
        qtree = build_tree(query_store, spec.leaf_threshold)
        query_points = query_store.points
    build_seconds = time.perf_counter() - t0
    amortized = build_seconds / len(spec.multipliers)

    plimit = spec.plimit if spec.plimit is not None else default_plimit(ref_store.dim)
    need_naive = spec.verify or "naive" in spec.algorithms
    rows = []
    for mult in spec.multipliers:
        h = mult * h_star
        naive_res = None
        if need_naive:
            naive_res = naive_sum(query_points, ref_store.points, ref_store.weights, h)
        for alg in spec.algorithms:
            try:
                if alg == "naive":
                    rows.append(SweepRow(alg, mult, h, naive_res.seconds,
                                         0.0 if spec.verify else None,
                                         naive_res.counters.as_dict()))
                    continue
                config = RunConfig(bandwidth=h, epsilon=spec.epsilon, algorithm=alg,
                                   plimit=spec.plimit, leaf_threshold=spec.leaf_threshold)
                extra = amortized
                if alg == "dito":
                    t_r = time.perf_counter()
                    rtree.refresh_moments(h, plimit)
                    extra += time.perf_counter() - t_r
                result = _TREE_ALGOS[alg](config, qtree, rtree)
                err = None
                if spec.verify:
                    err = max_rel_error(result.values, naive_res.values)
                rows.append(SweepRow(alg, mult, h, result.seconds + extra, err,
                                     result.counters.as_dict()))
            except Exception as exc:
                raise RuntimeError(f"{alg} failed at bandwidth {h:g} "
                                   f"(multiplier {mult:g})") from exc
    totals = {}
    for alg in spec.algorithms:
        totals[alg] = sum(r.seconds for r in rows if r.algorithm == alg)
    return SweepReport(h_star, spec.epsilon, spec.ref_path, spec.query_path,
                       spec.multipliers, spec.algorithms, rows, totals, spec.verify)


def _format_table(report: SweepReport) -> str:
    cols = [f"{m:g}" for m in report.multipliers]
    head = ["algorithm"] + cols + ["sum"]
    by_alg = {alg: {} for alg in report.algorithms}
    for row in report.rows:
        by_alg[row.algorithm][row.multiplier] = row
    lines = [
        f"h* = {report.h_star:.6g}   eps = {report.epsilon:g}   ref = {report.reference}"
    ]
    widths = [max(10, len(c) + 2) for c in head]
    lines.append("".join(c.rjust(w) for c, w in zip(head, widths)))
    for alg in report.algorithms:
        cells = [alg]
        for m in report.multipliers:
            cells.append(f"{by_alg[alg][m].seconds:.3g}")
        cells.append(f"{report.totals[alg]:.3g}")
        lines.append("".join(c.rjust(w) for c, w in zip(cells, widths)))
    if report.verified:
        lines.append("max relative error")
        for alg in report.algorithms:
            cells = [alg]
            for m in report.multipliers:
                err = by_alg[alg][m].max_rel_error
                cells.append("-" if err is None else f"{err:.2e}")
            cells.append("")
            lines.append("".join(c.rjust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"


def _format_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["algorithm", "multiplier", "bandwidth", "seconds",
                     "max_rel_error", *_COUNTER_FIELDS])
    for row in report.rows:
        writer.writerow([
            row.algorithm, f"{row.multiplier:g}", f"{row.bandwidth:.17g}",
            f"{row.seconds:.6g}",
            "" if row.max_rel_error is None else f"{row.max_rel_error:.6g}",
            *[row.counters.get(k, 0) for k in _COUNTER_FIELDS],
        ])
    return buf.getvalue()


def report_to_dict(report: SweepReport) -> dict:
    return {
        "h_star": report.h_star,
        "epsilon": report.epsilon,
        "reference": report.reference,
        "query": report.query,
        "multipliers": list(report.multipliers),
        "algorithms": list(report.algorithms),
        "verified": report.verified,
        "rows": [
            {
                "algorithm": r.algorithm,
                "multiplier": r.multiplier,
                "bandwidth": r.bandwidth,
                "seconds": r.seconds,
                "max_rel_error": r.max_rel_error,
                "counters": {k: r.counters.get(k, 0) for k in _COUNTER_FIELDS},
            }
            for r in report.rows
        ],
        "totals": dict(report.totals),
    }


def emit_report(report: SweepReport, fmt: str = "table", path: str | None = None) -> str:
    """Render the report as table/csv/json; write to ``path`` or stdout."""
    if fmt == "table":
        text = _format_table(report)
    elif fmt == "csv":
        text = _format_csv(report)
    elif fmt == "json":
        text = json.dumps(report_to_dict(report), indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise LoadError(f"cannot write {path}: {exc}") from exc
    return text


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; code 2 is reserved for verification failures
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="fastgauss",
                     description="Fast Gaussian kernel summation benchmarks")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sweep = sub.add_parser("sweep", help="run a bandwidth sweep")
    sweep.add_argument("--ref", required=True, help="reference dataset CSV")
    sweep.add_argument("--query", default=None, help="query dataset CSV (default: reference)")
    sweep.add_argument("--weights", action="store_true",
                       help="last CSV column holds per-point weights")
    sweep.add_argument("--rescale", action="store_true",
                       help="min-max rescale coordinates into the unit cube")
    sweep.add_argument("--header", action="store_true", help="skip a CSV header row")
    sweep.add_argument("--epsilon", type=float, default=0.01,
                       help="relative error tolerance (default 0.01)")
    sweep.add_argument("--h-star", default="auto",
                       help="center bandwidth, or 'auto' for cross-validation")
    sweep.add_argument("--multipliers",
                       default=",".join(f"{m:g}" for m in DEFAULT_MULTIPLIERS),
                       help="comma-separated bandwidth multipliers")
    sweep.add_argument("--algos", default="dito",
                       help="comma-separated subset of naive,dfd,dfdo,dito")
    sweep.add_argument("--leaf", type=int, default=25, help="leaf threshold")
    sweep.add_argument("--plimit", type=int, default=None, help="series order cap")
    sweep.add_argument("--verify", action="store_true",
                       help="check every run against the exact sums")
    sweep.add_argument("--out", default=None, help="write the report here")
    sweep.add_argument("--format", choices=("table", "csv", "json"), default="table")
    sweep.add_argument("--seed", type=int, default=0)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--dist", choices=("uniform", "clusters"), required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--dim", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "gen":
            if args.dist == "uniform":
                pts = uniform_points(args.n, args.dim, args.seed)
            else:
                pts = clustered_points(args.n, args.dim, args.seed)
            np.savetxt(args.out, pts, delimiter=",", fmt="%.17g")
            return 0
        h_star = args.h_star if args.h_star == "auto" else float(args.h_star)
        spec = SweepSpec(
            ref_path=args.ref,
            query_path=args.query,
            has_weights=args.weights,
            rescale=args.rescale,
            header=args.header,
            epsilon=args.epsilon,
            h_star=h_star,
            multipliers=tuple(float(m) for m in args.multipliers.split(",")),
            algorithms=tuple(a.strip() for a in args.algos.split(",")),
            leaf_threshold=args.leaf,
            plimit=args.plimit,
            verify=args.verify,
            seed=args.seed,
        )
        report = run_sweep(spec)
        emit_report(report, args.format, args.out)
    except (LoadError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    if spec.verify and report.worst_error > spec.epsilon:
        sys.stderr.write(
            f"verification FAILED: max relative error {report.worst_error:.3e} "
            f"> {spec.epsilon:g}\n"
        )
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
