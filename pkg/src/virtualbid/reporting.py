"""Static SVG figures, each written next to the CSV holding its numbers.

The plot writer is deliberately small: bar charts, scatter plots and
stacked bars with linear axes.  Every data mark carries ``class="mark"``
and its value in ``data-*`` attributes so the figure can be checked
against its CSV.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 360
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
SHARE_COLUMNS = ("price_forecasting", "self_scheduling", "opportunistic", "other")


def _num(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _nice_range(lo: float, hi: float) -> tuple:
    if lo == hi:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Axes:
    def __init__(self, x_range, y_range):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.w = WIDTH - LEFT - RIGHT
        self.h = HEIGHT - TOP - BOTTOM

    def x(self, v):
        return LEFT + (v - self.x0) / (self.x1 - self.x0) * self.w

    def y(self, v):
        return TOP + (self.y1 - v) / (self.y1 - self.y0) * self.h


def _frame(title: str, xlabel: str, ylabel: str, ax: _Axes, body: list, xticks=()) -> str:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:g}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ax.h}" x2="{LEFT + ax.w}" y2="{TOP + ax.h}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ax.h}" stroke="black"/>',
    ]
    for i in range(5):
        v = ax.y0 + (ax.y1 - ax.y0) * i / 4
        yy = ax.y(v)
        out.append(f'<text x="{LEFT - 6}" y="{_num(yy + 4)}" text-anchor="end" font-size="10">{_num(v)}</text>')
        out.append(f'<line x1="{LEFT}" y1="{_num(yy)}" x2="{LEFT + ax.w}" y2="{_num(yy)}" stroke="#ddd"/>')
    if ax.y0 < 0 < ax.y1:
        out.append(f'<line x1="{LEFT}" y1="{_num(ax.y(0))}" x2="{LEFT + ax.w}" y2="{_num(ax.y(0))}" stroke="#888"/>')
    for pos, text in xticks:
        out.append(f'<text x="{_num(pos)}" y="{TOP + ax.h + 14}" text-anchor="middle" font-size="9">{escape(text)}</text>')
    out.append(f'<text x="{WIDTH / 2:g}" y="{HEIGHT - 8}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{TOP + ax.h / 2:g}" text-anchor="middle" font-size="11" '
               f'transform="rotate(-90 14 {TOP + ax.h / 2:g})">{escape(ylabel)}</text>')
    out.extend(body)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(labels, values, title="", xlabel="", ylabel="") -> str:
    values = [float(v) for v in values]
    lo, hi = min(values + [0.0]), max(values + [0.0])
    ax = _Axes((0, max(len(values), 1)), _nice_range(lo, hi))
    body, ticks = [], []
    step = max(1, len(labels) // 12)
    for i, (lab, v) in enumerate(zip(labels, values)):
        x = ax.x(i + 0.1)
        w = ax.x(i + 0.9) - x
        top, bot = ax.y(max(v, 0.0)), ax.y(min(v, 0.0))
        color = PALETTE[0] if v >= 0 else PALETTE[3]
        body.append(f'<rect class="mark" data-label="{escape(str(lab))}" data-value="{v:.4f}" x="{_num(x)}" '
                    f'y="{_num(top)}" width="{_num(w)}" height="{_num(bot - top)}" fill="{color}"/>')
        if i % step == 0:
            ticks.append((ax.x(i + 0.5), str(lab)))
    return _frame(title, xlabel, ylabel, ax, body, ticks)


def scatter_plot(xs, ys, title="", xlabel="", ylabel="", x_range=None) -> str:
    xs, ys = [float(v) for v in xs], [float(v) for v in ys]
    xr = x_range or _nice_range(min(xs, default=0.0), max(xs, default=1.0))
    yr = _nice_range(min(ys, default=0.0), max(ys, default=1.0))
    ax = _Axes(xr, yr)
    body = [
        f'<circle class="mark" data-x="{x:.4f}" data-y="{y:.4f}" cx="{_num(ax.x(x))}" cy="{_num(ax.y(y))}" '
        f'r="2.5" fill="{PALETTE[0]}" fill-opacity="0.6"/>'
        for x, y in zip(xs, ys)
    ]
    ticks = [(ax.x(t), _num(t)) for t in _ticks(*xr)]
    return _frame(title, xlabel, ylabel, ax, body, ticks)


def _ticks(lo, hi, n=6):
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag * 10)
    start = math.ceil(lo / step) * step
    out, t = [], start
    while t <= hi + 1e-12:
        out.append(t)
        t += step
    return out


def stacked_bars(categories, series: dict, title="", xlabel="", ylabel="") -> str:
    """One bar per category, segments in ``series`` order (values per category)."""
    ax = _Axes((0, max(len(categories), 1)), (0.0, 1.0))
    body, ticks = [], []
    names = list(series)
    for i, cat in enumerate(categories):
        base = 0.0
        x = ax.x(i + 0.15)
        w = ax.x(i + 0.85) - x
        for j, name in enumerate(names):
            v = float(series[name][i])
            top, bot = ax.y(base + v), ax.y(base)
            body.append(f'<rect class="mark" data-label="{escape(str(cat))}" data-series="{escape(name)}" '
                        f'data-value="{v:.6f}" x="{_num(x)}" y="{_num(top)}" width="{_num(w)}" '
                        f'height="{_num(bot - top)}" fill="{PALETTE[j % len(PALETTE)]}"/>')
            base += v
        ticks.append((ax.x(i + 0.5), str(cat)))
    for j, name in enumerate(names):
        y = TOP + 12 * j
        body.append(f'<rect x="{WIDTH - RIGHT - 120}" y="{y}" width="8" height="8" fill="{PALETTE[j % len(PALETTE)]}"/>')
        body.append(f'<text x="{WIDTH - RIGHT - 108}" y="{y + 8}" font-size="9">{escape(name)}</text>')
    return _frame(title, xlabel, ylabel, ax, body, ticks)


# ---------------------------------------------------------------------------
# report emission


@dataclass
class ReportInputs:
    """Stage outputs feeding the figures; ``None`` means the stage was not run.

    ``monthly`` holds ``(month, cleared_mwh, net_profit)`` rows,
    ``deltas`` maps participant to ``(hour, delta)`` pairs, ``profits``
    maps node to ``(day, hour, net_profit)`` of cleared trades and
    ``shares`` maps participant to its strategy fractions.
    """

    monthly: list | None = None
    deltas: dict | None = None
    profits: dict | None = None
    shares: dict | None = None


def safe_name(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", s)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write(path: Path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def emit_reports(inputs: ReportInputs, out_dir) -> list:
    """Write figure CSVs and SVGs under ``out_dir/figures``; returns the paths."""
    fig = Path(out_dir) / "figures"
    fig.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, header, rows, svg):
        p = fig / f"{name}.csv"
        _write_csv(p, header, rows)
        written.append(p)
        if svg is not None:
            s = fig / f"{name}.svg"
            _write(s, svg)
            written.append(s)

    if inputs.monthly is not None:
        months = [m for m, _, _ in inputs.monthly]
        mwh = [round(q, 4) for _, q, _ in inputs.monthly]
        net = [round(p, 4) for _, _, p in inputs.monthly]
        emit("monthly_cleared_mwh", ["month", "cleared_mwh"], [(m, f"{q:.4f}") for m, q in zip(months, mwh)],
             bar_chart(months, mwh, "Cleared energy per month", "month", "MWh"))
        emit("monthly_net_profit", ["month", "net_profit"], [(m, f"{p:.4f}") for m, p in zip(months, net)],
             bar_chart(months, net, "Net profit per month", "month", "net profit"))

    if inputs.deltas is not None:
        for pid in sorted(inputs.deltas):
            pts = inputs.deltas[pid]
            emit(f"delta_by_hour_{safe_name(pid)}", ["participant_id", "hour", "delta"],
                 [(pid, h, f"{d:.4f}") for h, d in pts],
                 scatter_plot([h for h, _ in pts], [round(d, 4) for _, d in pts],
                              f"Price distance by hour, {pid}", "hour of day", "price distance", (-0.5, 23.5)))

    if inputs.profits is not None:
        for node in sorted(inputs.profits):
            pts = inputs.profits[node]
            emit(f"hourly_profit_{safe_name(node)}", ["node_id", "day", "hour", "net_profit"],
                 [(node, d, h, f"{p:.4f}") for d, h, p in pts],
                 scatter_plot([h for _, h, _ in pts], [round(p, 4) for _, _, p in pts],
                              f"Hourly profit of cleared bids, {node}", "hour of day", "net profit", (-0.5, 23.5)))

    if inputs.shares is not None:
        pids = sorted(inputs.shares)
        rows = [(pid, *(f"{inputs.shares[pid][c]:.6f}" for c in SHARE_COLUMNS)) for pid in pids]
        svg = None
        if pids:
            series = {c: [round(inputs.shares[p][c], 6) for p in pids] for c in SHARE_COLUMNS}
            svg = stacked_bars(pids, series, "Strategy shares per participant", "participant", "share of bids")
        emit("strategy_shares", ["participant_id", *SHARE_COLUMNS], rows, svg)
    return written
