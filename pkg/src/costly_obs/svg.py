"""Tiny static SVG charts: multi-series line charts and grouped bar charts."""
from __future__ import annotations

from html import escape
from typing import Sequence

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
W, H = 640, 400
ML, MR, MT, MB = 64, 150, 36, 48


def _frame(title: str, xlabel: str, ylabel: str, body: list[str]) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{ML + (W - ML - MR) / 2:.0f}" y="{H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{MT + (H - MT - MB) / 2:.0f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {MT + (H - MT - MB) / 2:.0f})">{escape(ylabel)}</text>',
        f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
        f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>',
    ]
    return "\n".join(parts + body + ["</svg>"]) + "\n"


def _ticks(lo: float, hi: float, axis: str, to_px) -> list[str]:
    out = []
    for v in np.linspace(lo, hi, 5):
        px = to_px(v)
        label = f"{v:.3g}"
        if axis == "y":
            out.append(f'<line x1="{ML - 4}" y1="{px:.1f}" x2="{ML}" y2="{px:.1f}" stroke="black"/>')
            out.append(f'<text x="{ML - 6}" y="{px + 4:.1f}" text-anchor="end" font-size="10">{label}</text>')
        else:
            out.append(f'<line x1="{px:.1f}" y1="{H - MB}" x2="{px:.1f}" y2="{H - MB + 4}" stroke="black"/>')
            out.append(f'<text x="{px:.1f}" y="{H - MB + 16}" text-anchor="middle" font-size="10">{label}</text>')
    return out


def _legend(labels: Sequence[str]) -> list[str]:
    out = []
    for i, lab in enumerate(labels):
        y = MT + 14 + 18 * i
        c = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{W - MR + 10}" y="{y - 9}" width="12" height="10" fill="{c}"/>')
        out.append(f'<text x="{W - MR + 28}" y="{y}" font-size="11">{escape(lab)}</text>')
    return out


def _span(values: np.ndarray) -> tuple[float, float]:
    lo, hi = float(np.nanmin(values)), float(np.nanmax(values))
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def line_chart(series: dict[str, tuple[Sequence[float], Sequence[float]]],
               title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """``series`` maps a label to (x values, y values)."""
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()] or [np.zeros(1)])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()] or [np.zeros(1)])
    x0, x1 = _span(xs)
    y0, y1 = _span(ys)
    y0 = min(y0, 0.0)
    fx = lambda v: ML + (v - x0) / (x1 - x0) * (W - ML - MR)
    fy = lambda v: H - MB - (v - y0) / (y1 - y0) * (H - MT - MB)
    body = _ticks(x0, x1, "x", fx) + _ticks(y0, y1, "y", fy)
    for i, (x, y) in enumerate(series.values()):
        pts = " ".join(f"{fx(a):.1f},{fy(b):.1f}" for a, b in zip(x, y) if np.isfinite(b))
        body.append(f'<polyline fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.2" points="{pts}"/>')
    return _frame(title, xlabel, ylabel, body + _legend(list(series)))


def bar_chart(categories: Sequence[str], groups: dict[str, Sequence[float]],
              title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Grouped bars: one group per category, one bar per entry of ``groups``."""
    vals = np.array([np.asarray(v, float) for v in groups.values()]) if groups else np.zeros((1, 1))
    top = float(np.nanmax(vals)) if vals.size else 1.0
    top = top if top > 0 else 1.0
    fy = lambda v: H - MB - v / top * (H - MT - MB)
    n_cat, n_grp = len(categories), max(len(groups), 1)
    slot = (W - ML - MR) / max(n_cat, 1)
    bw = slot * 0.8 / n_grp
    body = _ticks(0.0, top, "y", fy)
    for j, cat in enumerate(categories):
        cx = ML + slot * (j + 0.5)
        body.append(f'<text x="{cx:.1f}" y="{H - MB + 16}" text-anchor="middle" font-size="10">{escape(cat)}</text>')
        for i, v in enumerate(groups.values()):
            x = ML + slot * j + slot * 0.1 + bw * i
            val = float(v[j]) if np.isfinite(v[j]) else 0.0
            body.append(f'<rect x="{x:.1f}" y="{fy(val):.1f}" width="{bw:.1f}" height="{H - MB - fy(val):.1f}" '
                        f'fill="{PALETTE[i % len(PALETTE)]}"/>')
    return _frame(title, xlabel, ylabel, body + _legend(list(groups)))
