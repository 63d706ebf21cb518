"""Experiment configuration, drivers, and plot-data aggregation.

Configurations live in flat ``key = value`` text files (UTF-8, ``#``
comments, comma-separated lists) or come straight from command-line
flags.  The drivers reproduce the three experiment regimes -- varying
dimension, varying rank, varying size -- at desk scale: the grids are
deliberately small enough to finish in minutes and are not the ones
behind the original figures.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bounds as bounds_mod
from . import kernels, rff, taylor, tensors
from .altproj import AltProjConfig, run_trials
from .compress import rank_formula
from .records import (
    CSV_VERSION_LINE,
    MEDIAN_TRIAL,
    ExperimentRecord,
    format_float,
    read_csv,
    write_csv,
)
from .rng import split
from .sampling import SamplingScheme, sample_ball

EXPERIMENTS = ("varm", "varr", "varn", "bounds", "single")
FUNCTIONS = ("f1", "f2", "f3", "gauss")
CONSTRUCTIVE = ("taylor", "rff", "tt")


@dataclass
class ExperimentConfig:
    experiment: str = "single"
    function: str = "f1"
    scheme: str = "independent"
    n_grid: tuple[int, ...] = (400,)
    m_grid: tuple[int, ...] = (100,)
    r_grid: tuple[int, ...] = (10,)
    trials: int = 5
    seed: Optional[int] = None
    output: str = "experiment.csv"
    radius: float = 1.0
    eps: float = 0.1
    t: Optional[int] = None
    theta: float = 0.5
    rho: int = 64
    algorithms: tuple[str, ...] = ("altproj",)
    jobs: int = 1
    # bounds-table constants
    C: float = 1.0
    M: float = 1.0
    Cu: float = 0.0
    Cv: float = 0.0
    beta2: Optional[int] = None
    # solver hyperparameters
    max_iters: int = 500
    tol: float = 1e-6
    bisect_iters: int = 20
    restarts: int = 1
    init: str = "gaussian"
    stall_patience: int = 50
    stall_rtol: float = 1e-3

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.experiment != "bounds":
            if self.function not in FUNCTIONS:
                raise ValueError(f"unknown function {self.function!r}")
            if self.seed is None:
                raise ValueError("a seed is mandatory for stochastic experiments")
        SamplingScheme.coerce(self.scheme)
        for name in ("n_grid", "m_grid", "r_grid"):
            grid = getattr(self, name)
            if not grid:
                raise ValueError(f"{name} must be nonempty")
            if any(v < 1 for v in grid):
                raise ValueError(f"{name} entries must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        for alg in self.algorithms:
            if alg not in ("altproj",) + CONSTRUCTIVE:
                raise ValueError(f"unknown algorithm {alg!r}")
        if "tt" in self.algorithms and self.function != "f3":
            raise ValueError("the tt algorithm applies to the tensor function f3")
        if self.function == "f3" and SamplingScheme.coerce(self.scheme) is not SamplingScheme.INDEPENDENT:
            raise ValueError("tensors use independent sampling only")

    def solver(self) -> AltProjConfig:
        return AltProjConfig(
            max_iters=self.max_iters,
            tol=self.tol,
            bisect_iters=self.bisect_iters,
            restarts=self.restarts,
            init=self.init,
            stall_patience=self.stall_patience,
            stall_rtol=self.stall_rtol,
        )


_LIST_FIELDS = {"n_grid", "m_grid", "r_grid", "algorithms"}
_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if name in _LIST_FIELDS:
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if name == "algorithms":
            return tuple(items)
        return tuple(int(x) for x in items)
    if name in ("seed", "beta2", "t"):
        return None if raw.lower() in ("none", "") else int(raw)
    if name in ("trials", "rho", "jobs", "max_iters", "bisect_iters", "restarts", "stall_patience"):
        return int(raw)
    if name in ("radius", "eps", "theta", "C", "M", "Cu", "Cv", "tol", "stall_rtol"):
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """Parse the flat ``key = value`` grammar into a field dict."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def load_config(path: str | Path, overrides: Optional[dict] = None) -> ExperimentConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    if overrides:
        values.update(overrides)
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def kernel_for(function: str, radius: float) -> kernels.KernelSpec:
    """Kernel spec for a named test function on the ball of the given radius."""
    R2 = radius**2
    if function == "f1":
        return kernels.exp_dist((0.0, 4.0 * R2))
    if function == "f2":
        return kernels.quartic_dist((-4.0 * R2, 4.0 * R2))
    if function == "f3":
        R3 = radius**3
        return kernels.sinh_hoip((-R3, R3))
    if function == "gauss":
        return kernels.gauss_sq_dist((-4.0 * R2, 4.0 * R2))
    raise ValueError(f"unknown function {function!r}")


def _grid_points(cfg: ExperimentConfig) -> list[tuple[int, int, int]]:
    n0, m0, r0 = cfg.n_grid[0], cfg.m_grid[0], cfg.r_grid[0]
    if cfg.experiment == "varm":
        return [(n0, m, r0) for m in cfg.m_grid]
    if cfg.experiment == "varr":
        return [(n0, m0, r) for r in cfg.r_grid]
    if cfg.experiment == "varn":
        return [(n, m0, r0) for n in cfg.n_grid]
    return [(n0, m0, r0)]


def _constructive_records(
    cfg: ExperimentConfig, n: int, m: int, r: int, point_seed_words: Sequence[int]
) -> list[ExperimentRecord]:
    """Rows for the requested constructive approximators at one grid point."""
    import time

    spec = kernel_for(cfg.function, cfg.radius)
    scheme = SamplingScheme.coerce(cfg.scheme)
    out: list[ExperimentRecord] = []
    for alg in cfg.algorithms:
        if alg == "altproj":
            continue
        for trial in range(cfg.trials):
            seed_word = int(point_seed_words[trial])
            streams = split(seed_word, 4)
            start = time.perf_counter()
            if alg == "tt":
                sets = [sample_ball(streams[j], n, m, cfg.radius) for j in range(3)]
                P = tensors.cp_from_points(sets)
                t = cfg.t if cfg.t is not None else taylor.default_order(cfg.eps)
                _, rep = tensors.taylor_tt_approx(spec, P, t, r, cfg.eps, streams[3])
                rel = rep.measured_relative_error
            else:
                X = sample_ball(streams[0], n, m, cfg.radius)
                Y = X if scheme is SamplingScheme.SYMMETRIC else sample_ball(
                    streams[1], n, m, cfg.radius
                )
                if alg == "rff":
                    _, rep = rff.rff_then_compress(
                        spec, X, Y, rho=cfg.rho, eps=cfg.eps,
                        seed=streams[3], theta=cfg.theta,
                    )
                    rel = rep.measured_relative_error
                else:  # taylor
                    builder = (
                        taylor.approx_sq_distance_local
                        if cfg.function == "f1"
                        else taylor.approx_sq_distance
                    )
                    _, rep = builder(
                        spec, X, None, Y, t=cfg.t, eps=cfg.eps, seed=streams[3]
                    )
                    rel = rep.measured_relative_error
            elapsed = time.perf_counter() - start
            out.append(
                ExperimentRecord(
                    cfg.experiment, cfg.function, scheme.value, n, m, r,
                    trial, seed_word, alg, float(rel), elapsed,
                )
            )
    return out


def _run_grid_point(
    cfg: ExperimentConfig, n: int, m: int, r: int, seed_word: int,
    trial_seed_words: Sequence[int],
) -> list[ExperimentRecord]:
    spec = kernel_for(cfg.function, cfg.radius)
    records: list[ExperimentRecord] = []
    if "altproj" in cfg.algorithms:
        summary = run_trials(
            spec, cfg.scheme, n, m, r,
            cfg=cfg.solver(), trials=cfg.trials, seed=seed_word,
            radius=cfg.radius, experiment=cfg.experiment, function=cfg.function,
        )
        records.extend(summary.records)
        records.append(
            ExperimentRecord(
                cfg.experiment, cfg.function,
                SamplingScheme.coerce(cfg.scheme).value, n, m, r,
                MEDIAN_TRIAL, seed_word, "altproj_median",
                summary.median_relative, 0.0,
            )
        )
    records.extend(_constructive_records(cfg, n, m, r, trial_seed_words))
    return records


def run_experiment(cfg: ExperimentConfig) -> list[ExperimentRecord]:
    """Run the configured grid and write the CSV; returns the records."""
    cfg.validate()
    if cfg.experiment == "bounds":
        write_bounds_table(cfg, cfg.output)
        return []
    grid = _grid_points(cfg)
    root = np.random.SeedSequence(cfg.seed)
    words = root.generate_state(len(grid) * (1 + cfg.trials), dtype=np.uint64)
    jobs = min(cfg.jobs, len(grid))

    def task(idx: int) -> list[ExperimentRecord]:
        n, m, r = grid[idx]
        base = idx * (1 + cfg.trials)
        seed_word = int(words[base])
        trial_words = [int(w) for w in words[base + 1 : base + 1 + cfg.trials]]
        return _run_grid_point(cfg, n, m, r, seed_word, trial_words)

    if jobs == 1:
        chunks = [task(i) for i in range(len(grid))]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(task, range(len(grid))))
    records = [rec for chunk in chunks for rec in chunk]
    with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
        write_csv(records, fh)
    return records


def bounds_table_text(cfg: ExperimentConfig) -> str:
    """CSV table of the closed-form bounds over the configured n grid."""
    m = cfg.m_grid[0]
    profile = bounds_mod.three_stage_profile(cfg.eps, cfg.n_grid, cfg.beta2)
    analytical = bounds_mod.analytical_rank_bound(m, cfg.C, cfg.M, cfg.eps)
    lines = [CSV_VERSION_LINE, "n,r_formula,r_analytical,r_ut,r_ut_tighter,stage"]
    for point in profile.points:
        n = point.n
        r_formula = rank_formula(cfg.eps, n, n)
        r_ut = bounds_mod.ut_bound(n, n, cfg.eps, cfg.Cu, cfg.Cv)
        r_ut_tighter, _ = bounds_mod.ut_tighter_bound(n, n, cfg.eps, cfg.C, cfg.M, m)
        lines.append(
            f"{n},{r_formula},{analytical.rank},{r_ut},{r_ut_tighter},{point.stage}"
        )
    return "\n".join(lines) + "\n"


def write_bounds_table(cfg: ExperimentConfig, path: str | Path):
    Path(path).write_text(bounds_table_text(cfg), encoding="utf-8")


# ----------------------------------------------------------------------
# aggregation and plotting
# ----------------------------------------------------------------------

_X_COLUMN = {"varm": "m", "varr": "r", "varn": "n", "single": "n"}


@dataclass
class AggregateRow:
    experiment: str
    function: str
    scheme: str
    algorithm: str
    x: int
    median: float
    q25: float
    q75: float
    loglog_slope: Optional[float] = None


def aggregate(records: Sequence[ExperimentRecord]) -> list[AggregateRow]:
    """Per-figure aggregation: median and quartiles of the trial errors."""
    trials = [r for r in records if r.trial != MEDIAN_TRIAL]
    if not trials:
        return []
    groups: dict[tuple, list[float]] = {}
    for rec in trials:
        x = getattr(rec, _X_COLUMN.get(rec.experiment, "n"))
        key = (rec.experiment, rec.function, rec.scheme, rec.algorithm, x)
        groups.setdefault(key, []).append(rec.rel_error)
    rows = []
    for key in sorted(groups):
        values = np.asarray(groups[key])
        q25, med, q75 = np.percentile(values, [25.0, 50.0, 75.0])
        rows.append(AggregateRow(*key, float(med), float(q25), float(q75)))
    # least-squares log-log slope per curve (needs >= 2 grid points)
    curves: dict[tuple, list[AggregateRow]] = {}
    for row in rows:
        curves.setdefault(
            (row.experiment, row.function, row.scheme, row.algorithm), []
        ).append(row)
    for curve in curves.values():
        xs = np.array([c.x for c in curve], dtype=float)
        ys = np.array([c.median for c in curve])
        if len(curve) >= 2 and (ys > 0).all() and np.unique(xs).size >= 2:
            slope = float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
            for c in curve:
                c.loglog_slope = slope
    return rows


def write_aggregate_csv(rows: Sequence[AggregateRow], path: str | Path):
    lines = [
        CSV_VERSION_LINE,
        "experiment,function,scheme,algorithm,x,median,q25,q75,loglog_slope",
    ]
    for row in rows:
        slope = "" if row.loglog_slope is None else format_float(row.loglog_slope)
        lines.append(
            f"{row.experiment},{row.function},{row.scheme},{row.algorithm},"
            f"{row.x},{format_float(row.median)},{format_float(row.q25)},"
            f"{format_float(row.q75)},{slope}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_svg(rows: Sequence[AggregateRow], path: str | Path):
    """Self-contained SVG line chart of median error vs. the grid variable."""
    curves: dict[str, list[AggregateRow]] = {}
    for row in rows:
        label = f"{row.function}/{row.scheme}/{row.algorithm}"
        curves.setdefault(label, []).append(row)
    width, height, margin = 640, 480, 60
    xs = [math.log10(r.x) for r in rows if r.x > 0]
    ys = [math.log10(r.median) for r in rows if r.median > 0]
    if not xs or not ys:
        Path(path).write_text("<svg xmlns='http://www.w3.org/2000/svg'/>\n")
        return
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x: float) -> float:
        return margin + (x - x0) / (x1 - x0) * (width - 2 * margin)

    def py(y: float) -> float:
        return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin)

    parts = [
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}'>",
        f"<rect width='{width}' height='{height}' fill='white'/>",
        f"<line x1='{margin}' y1='{height - margin}' x2='{width - margin}' "
        f"y2='{height - margin}' stroke='black'/>",
        f"<line x1='{margin}' y1='{margin}' x2='{margin}' "
        f"y2='{height - margin}' stroke='black'/>",
        f"<text x='{width // 2}' y='{height - margin // 3}' text-anchor='middle' "
        "font-size='13'>log10(grid variable)</text>",
        f"<text x='{margin // 3}' y='{height // 2}' text-anchor='middle' "
        f"font-size='13' transform='rotate(-90 {margin // 3} {height // 2})'>"
        "log10(median relative error)</text>",
    ]
    for idx, label in enumerate(sorted(curves)):
        pts = sorted(curves[label], key=lambda rr: rr.x)
        coords = " ".join(
            f"{px(math.log10(p.x)):.2f},{py(math.log10(p.median)):.2f}"
            for p in pts
            if p.x > 0 and p.median > 0
        )
        color = _PALETTE[idx % len(_PALETTE)]
        parts.append(
            f"<polyline points='{coords}' fill='none' stroke='{color}' stroke-width='2'/>"
        )
        parts.append(
            f"<text x='{width - margin + 4}' y='{margin + 16 * idx}' font-size='11' "
            f"fill='{color}'>{label}</text>"
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def emit_plot_data(
    csv_in: str | Path, csv_out: str | Path, svg_out: Optional[str | Path] = None
) -> list[AggregateRow]:
    with open(csv_in, "r", encoding="utf-8") as fh:
        records = read_csv(fh)
    rows = aggregate(records)
    write_aggregate_csv(rows, csv_out)
    if svg_out is not None:
        render_svg(rows, svg_out)
    return rows
