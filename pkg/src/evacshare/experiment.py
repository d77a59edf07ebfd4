"""Synthetic case-study instances, ratio x deadline sweeps and report output."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .instance import CARLESS, GATHERING, VEHICLE_OWNER, Instance, Location

CIRCUITY = 1.3
DEFAULT_RATIOS = (0.3, 0.4, 0.5, 0.6, 0.7)
DEFAULT_TMAXES = (5, 7, 9, 11, 13, 15)
# coordinates are metadata only; points are laid out around this centre
_CENTRE = (29.7604, -95.3698)
_MILES_PER_DEG_LAT = 69.0

CSV_HEADER = ("r_ratio", "t_max", "method", "objective", "EP", "ATD", "status", "seconds")


class ConfigError(ValueError):
    pass


class EmptyReport(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    n_households: int = 14
    n_gathering: int = 8
    r_ratio: float = 0.5
    household_size: int = 3
    capacities: tuple = (5, 7)
    area: float = 6.0  # side of the square, miles
    speed: float = 0.75  # miles per minute
    t_p: float = 1.0
    t_max: float = 15.0
    seed: int = 0

    def check(self):
        if not 0 < self.r_ratio < 1:
            raise ConfigError(f"r_ratio must be in (0, 1), got {self.r_ratio}")
        if self.n_households < 1:
            raise ConfigError("n_households must be >= 1")
        if self.n_gathering < 1:
            raise ConfigError("n_gathering must be >= 1")
        if not self.capacities or min(self.capacities) < self.household_size:
            raise ConfigError("every capacity must seat the owner's household")
        if self.area <= 0 or self.speed <= 0:
            raise ConfigError("area and speed must be positive")
        if self.t_p < 0 or self.t_max < 0 or self.household_size < 0:
            raise ConfigError("t_p, t_max and household_size must be non-negative")


def owner_count(r_ratio: float, n_households: int) -> int:
    """Number of vehicle owners, rounding half up."""
    x = Decimal(str(r_ratio)) * n_households
    return int(x.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def generate_instance(config: GenConfig) -> Instance:
    config.check()
    rng = np.random.default_rng(config.seed)
    n = config.n_households + config.n_gathering
    pts = rng.uniform(0.0, config.area, size=(n, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1]) * CIRCUITY
    tt = dist / config.speed

    m = owner_count(config.r_ratio, config.n_households)
    lat0, lon0 = _CENTRE
    per_lon = _MILES_PER_DEG_LAT * math.cos(math.radians(lat0))
    locs = []
    for i in range(n):
        x, y = pts[i] - config.area / 2
        coord = (round(lat0 + y / _MILES_PER_DEG_LAT, 6), round(lon0 + x / per_lon, 6))
        if i < m:
            cap = config.capacities[i % len(config.capacities)]
            locs.append(Location(f"r{i + 1}", VEHICLE_OWNER, config.household_size, cap, coord))
        elif i < config.n_households:
            locs.append(Location(f"h{i - m + 1}", CARLESS, config.household_size, None, coord))
        else:
            locs.append(Location(f"s{i - config.n_households + 1}", GATHERING, 0, None, coord))
    name = f"synthetic-r{config.r_ratio}-t{config.t_max}-s{config.seed}"
    return Instance(name, tuple(locs), tt.tolist(), config.t_p, config.t_max, dist.tolist())


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    r_ratio: float
    t_max: float
    method: str
    objective: Optional[int]
    EP: Optional[float]
    ATD: Optional[float]
    status: str
    seconds: float


@dataclass(frozen=True)
class SweepReport:
    rows: tuple

    def cell(self, r_ratio, t_max, method) -> SweepRow:
        for row in self.rows:
            if row.r_ratio == r_ratio and row.t_max == t_max and row.method == method:
                return row
        raise KeyError((r_ratio, t_max, method))


def _run_cell(args):
    base, ratio, t_max, method, solver_opts = args
    # local import keeps the worker start-up light
    from .solve import run_method
    from .plan import NoUsedVehicles, average_travel_distance, evacuation_percentage

    cfg = replace(base, r_ratio=ratio, t_max=t_max)
    t0 = time.perf_counter()
    try:
        inst = generate_instance(cfg)
        plan, status = run_method(inst, method, **solver_opts)
        ep = evacuation_percentage(inst, plan)
        try:
            atd = average_travel_distance(inst, plan)
        except NoUsedVehicles:
            atd = None
        obj = plan.evacuated_total
    except Exception as exc:  # recorded, never aborts the sweep
        obj, ep, atd, status = None, None, None, f"error: {type(exc).__name__}: {exc}"
    return SweepRow(ratio, t_max, method, obj, ep, atd, status, time.perf_counter() - t0)


def run_sweep(
    base: GenConfig = GenConfig(),
    ratios=DEFAULT_RATIOS,
    t_maxes=DEFAULT_TMAXES,
    methods=("heuristic",),
    workers: int = 1,
    **solver_opts,
) -> SweepReport:
    """Solve every (ratio, t_max, method) cell on instances sharing ``base.seed``.

    Rows come back in grid order regardless of ``workers``.
    """
    cells = [(base, r, t, m, solver_opts) for r in ratios for t in t_maxes for m in methods]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    return SweepReport(tuple(rows))


# ---------------------------------------------------------------------------
# report output


def _num(v):
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


def report_csv(report: SweepReport) -> str:
    if not report.rows:
        raise EmptyReport("report has no rows")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in report.rows:
        w.writerow([_num(getattr(row, c)) for c in CSV_HEADER])
    return buf.getvalue()


def _read_num(text):
    # ints stay ints so a re-export reproduces the original text
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_report_csv(text: str) -> SweepReport:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        def opt(key, cast):
            return None if rec[key] == "" else cast(rec[key])

        rows.append(
            SweepRow(
                r_ratio=_read_num(rec["r_ratio"]),
                t_max=_read_num(rec["t_max"]),
                method=rec["method"],
                objective=opt("objective", int),
                EP=opt("EP", float),
                ATD=opt("ATD", float),
                status=rec["status"],
                seconds=float(rec["seconds"]),
            )
        )
    return SweepReport(tuple(rows))


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _chart(series, x0, title, ylabel, fixed_max=None, width=420, height=300):
    pad_l, pad_r, pad_t, pad_b = 56, 16, 30, 40
    xs = sorted({x for pts in series.values() for x, _ in pts})
    ys = [y for pts in series.values() for _, y in pts]
    xmin, xmax = (xs[0], xs[-1]) if xs else (0, 1)
    if xmax == xmin:
        xmin, xmax = xmin - 1, xmax + 1
    ymax = fixed_max if fixed_max is not None else (max(ys) if ys else 1.0)
    ymax = ymax if ymax > 0 else 1.0
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x):
        return x0 + pad_l + (x - xmin) / (xmax - xmin) * pw

    def py(y):
        return pad_t + ph - y / ymax * ph

    out = [
        f'<text x="{x0 + width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{x0 + pad_l}" y1="{pad_t + ph}" x2="{x0 + pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{x0 + pad_l}" y1="{pad_t}" x2="{x0 + pad_l}" y2="{pad_t + ph}" stroke="black"/>',
        f'<text x="{x0 + pad_l + pw / 2:.1f}" y="{height - 6}" text-anchor="middle" font-size="11">t_max (min)</text>',
        f'<text x="{x0 + 14}" y="{pad_t + ph / 2:.1f}" font-size="11" '
        f'transform="rotate(-90 {x0 + 14} {pad_t + ph / 2:.1f})" text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for x in xs:
        out.append(
            f'<text x="{px(x):.1f}" y="{pad_t + ph + 14}" text-anchor="middle" font-size="10">{x:g}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        out.append(
            f'<text x="{x0 + pad_l - 4}" y="{py(frac * ymax) + 3:.1f}" text-anchor="end" font-size="10">{frac * ymax:.3g}</text>'
        )
    for i, (label, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        out.append(
            f'<text x="{x0 + pad_l + pw - 4}" y="{pad_t + 12 + 12 * i}" text-anchor="end" '
            f'font-size="10" fill="{color}">{escape(label)}</text>'
        )
    return out


def report_svg(report: SweepReport) -> str:
    """EP and ATD against t_max, one polyline per (ratio, method) series."""
    if not report.rows:
        raise EmptyReport("report has no rows")
    methods = sorted({r.method for r in report.rows})
    ep, atd = {}, {}
    for row in report.rows:
        label = f"R={row.r_ratio:g}" + (f" {row.method}" if len(methods) > 1 else "")
        ep.setdefault(label, [])
        atd.setdefault(label, [])
        if row.EP is not None:
            ep[label].append((row.t_max, row.EP))
        if row.ATD is not None:
            atd[label].append((row.t_max, row.ATD))
    for d in (ep, atd):
        for k in d:
            d[k].sort()
    width, height = 420, 300
    body = _chart(ep, 0, "Evacuation percentage", "EP", fixed_max=1.0)
    body += _chart(atd, width, "Average travel distance", "ATD (miles)")
    return "\n".join(
        [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{2 * width}" height="{height}" '
            f'viewBox="0 0 {2 * width} {height}">',
            '<rect width="100%" height="100%" fill="white"/>',
            *body,
            "</svg>",
            "",
        ]
    )


def export_report(report: SweepReport, fmt: str = "csv") -> str:
    if fmt == "csv":
        return report_csv(report)
    if fmt == "svg":
        return report_svg(report)
    raise ValueError(f"unknown report format {fmt!r}")


def config_dict(config: GenConfig) -> dict:
    return asdict(config)
