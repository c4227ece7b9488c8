"""CSV and SVG emission for sweep results.

Both writers are byte-deterministic: fixed column order, fixed number
formatting, no timestamps.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .sweep import DIAGNOSTIC_COLUMNS, RATE_LIKE_DIAGNOSTICS, SweepRow

LN2 = math.log(2.0)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f")


def _scale(units):
    if units not in ("bits", "nats"):
        raise ValueError(f"units must be 'bits' or 'nats', got {units!r}")
    return 1.0 / LN2 if units == "bits" else 1.0


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    value = float(value)
    if not math.isfinite(value):
        return ""
    return format(value, ".17g")


def table_columns(rows, rate_columns=None):
    """Rate columns in first-seen order unless given explicitly."""
    if rate_columns is not None:
        return list(rate_columns)
    cols = []
    for r in rows:
        for k in r.rates:
            if k not in cols:
                cols.append(k)
    return cols


def emit_csv(rows: list[SweepRow], path, rate_columns=None, units="bits") -> Path:
    """Write ``rows`` as UTF-8 CSV with LF line endings and 17 significant digits.

    Columns: ``sweep_var, sweep_value``, the rate columns, the diagnostics,
    ``status``.  Rates (and BA gaps) are converted to ``units``.
    """
    if not rows:
        raise ValueError("emit_csv needs at least one row")
    scale = _scale(units)
    cols = table_columns(rows, rate_columns)
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sweep_var", "sweep_value", *cols, *DIAGNOSTIC_COLUMNS, "status"])
            for r in rows:
                rates = [_cell(None if r.rates.get(c) is None else r.rates[c] * scale) for c in cols]
                diags = []
                for d in DIAGNOSTIC_COLUMNS:
                    v = r.diagnostics.get(d)
                    if v is not None and d in RATE_LIKE_DIAGNOSTICS:
                        v = v * scale
                    diags.append(_cell(v))
                w.writerow([r.sweep_var, _cell(r.sweep_value), *rates, *diags, r.status])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path):
    """Read a CSV written by :func:`emit_csv` back into dictionaries (numbers as floats)."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if k in ("sweep_var", "status"):
                    row[k] = v
                else:
                    row[k] = float(v) if v != "" else None
            out.append(row)
    return out


def _fmt(v):
    return f"{v:.2f}"


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _tick_label(v):
    return format(v, ".6g")


def emit_svg_plot(rows: list[SweepRow], style: dict | None, path, rate_columns=None, units="bits") -> Path:
    """Static line plot: one polyline per contiguous run of finite values per method.

    ``style`` keys: ``title``, ``width``, ``height``, ``x_key`` (a
    diagnostics column to use as abscissa instead of ``sweep_value``),
    ``x_label``.
    """
    if len(rows) < 2:
        raise ValueError("emit_svg_plot needs at least two rows")
    style = dict(style or {})
    scale = _scale(units)
    width = int(style.get("width", 640))
    height = int(style.get("height", 420))
    x_key = style.get("x_key", "sweep_value") or "sweep_value"
    title = style.get("title", "")
    x_label = style.get("x_label", x_key if x_key != "sweep_value" else rows[0].sweep_var)
    cols = table_columns(rows, rate_columns)

    def xval(r):
        return float(r.sweep_value if x_key == "sweep_value" else r.diagnostics[x_key])

    series = {}
    for c in cols:
        pts = []
        for r in rows:
            v = r.rates.get(c)
            pts.append(None if v is None or not math.isfinite(v) else (xval(r), v * scale))
        series[c] = pts
    xs = [xval(r) for r in rows]
    ys = [p[1] for pts in series.values() for p in pts if p is not None]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    left, right, top, bottom = 70, 150, 40, 55
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return top + (y_hi - y) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.2f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        X = sx(t)
        out.append(f'<line x1="{_fmt(X)}" y1="{top + ph}" x2="{_fmt(X)}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(X)}" y="{top + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{_tick_label(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        Y = sy(t)
        out.append(f'<line x1="{left - 5}" y1="{_fmt(Y)}" x2="{left}" y2="{_fmt(Y)}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_fmt(Y + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{_tick_label(t)}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(str(x_label))}</text>')
    out.append(
        f'<text x="18" y="{top + ph / 2:.2f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {top + ph / 2:.2f})">rate ({units}/channel use)</text>'
    )
    for k, c in enumerate(cols):
        color = PALETTE[k % len(PALETTE)]
        run = []
        for p in series[c] + [None]:
            if p is not None:
                run.append(p)
                continue
            if run:
                coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in run)
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
                for x, y in run:
                    out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2.5" fill="{color}"/>')
            run = []
        ly = top + 10 + 18 * k
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 36}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 42}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(c)}</text>')
    out.append("</svg>")
    path = Path(path)
    try:
        path.write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path
