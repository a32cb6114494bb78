"""Deterministic writers for CSV tables, JSON records and SVG line plots.

Every file carries the config hash: a ``# config_hash:`` comment line in CSV,
a ``config_hash`` field in JSON, and an XML comment in SVG.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


def _plain(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def to_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_plain, allow_nan=False) + "\n"


def write_json(path, obj: dict, config_hash: str) -> Path:
    path = Path(path)
    body = dict(obj)
    body["config_hash"] = config_hash
    path.write_text(to_json(body))
    return path


def write_csv(path, columns, rows, config_hash: str) -> Path:
    buf = io.StringIO()
    buf.write(f"# config_hash: {config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def read_csv(path):
    """Return ``(config_hash, columns, rows)``; rows are lists of strings."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# config_hash: "):
        raise ValueError(f"{path}: missing config_hash header")
    chash = lines[0].split(": ", 1)[1]
    reader = csv.reader(lines[1:])
    columns = next(reader)
    return chash, columns, list(reader)


_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_plot(series: dict, title: str, config_hash: str, logx=False, logy=True,
             xlabel="t", ylabel="norm", width=640, height=420) -> str:
    """Minimal multi-line plot.  ``series`` maps a label to ``(x, y)`` arrays;
    points that cannot be shown on a log axis are dropped."""
    pad_l, pad_r, pad_t, pad_b = 70, 150, 40, 50
    tx = (lambda v: math.log10(v)) if logx else float
    ty = (lambda v: math.log10(v)) if logy else float
    clean = {}
    for label, (xs, ys) in series.items():
        pts = [(tx(x), ty(y)) for x, y in zip(xs, ys)
               if (not logx or x > 0) and (not logy or y > 0)
               and math.isfinite(x) and math.isfinite(y)]
        if pts:
            clean[label] = pts
    allx = [p[0] for pts in clean.values() for p in pts] or [0.0, 1.0]
    ally = [p[1] for pts in clean.values() for p in pts] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def py(y):
        return pad_t + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f"<!-- config_hash: {config_hash} -->",
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{pad_l}" y="{pad_t - 12}" font-size="14">{_esc(title)}</text>',
           f'<text x="{pad_l + pw / 2:.1f}" y="{height - 10}" font-size="12">'
           f'{"log10 " if logx else ""}{_esc(xlabel)}</text>',
           f'<text x="14" y="{pad_t + ph / 2:.1f}" font-size="12" '
           f'transform="rotate(-90 14 {pad_t + ph / 2:.1f})">{"log10 " if logy else ""}'
           f'{_esc(ylabel)}</text>']
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{px(xv):.1f}" y="{pad_t + ph + 16}" font-size="10" '
                   f'text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{pad_l - 6}" y="{py(yv):.1f}" font-size="10" '
                   f'text-anchor="end">{yv:.3g}</text>')
    for i, (label, pts) in enumerate(clean.items()):
        colour = _COLOURS[i % len(_COLOURS)]
        path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{path}"/>')
        ly = pad_t + 16 * (i + 1)
        out.append(f'<line x1="{width - pad_r + 10}" y1="{ly}" x2="{width - pad_r + 30}" '
                   f'y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{width - pad_r + 36}" y="{ly + 4}" font-size="11">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path, series, title, config_hash, **kw) -> Path:
    path = Path(path)
    path.write_text(svg_plot(series, title, config_hash, **kw))
    return path
