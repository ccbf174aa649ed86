"""Static SVG figures: agent tours, cumulative curves and per-cell line charts.

Output is a pure function of the inputs (fixed float formatting, no timestamps).
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

from .core import Plan, Scenario

PALETTE = ("#d62728", "#ff9f1c", "#2ca02c", "#1f77b4", "#9467bd", "#8c564b", "#e377c2", "#17becf")
PANEL = 260
MARGIN = 20


def _f(v: float) -> str:
    return f"{v:.2f}"


def _svg(width: float, height: float, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}" font-family="sans-serif" font-size="11">'
    )
    return "\n".join([head, f'<rect width="{_f(width)}" height="{_f(height)}" fill="white"/>', *body, "</svg>"]) + "\n"


def tour_panel(scenario: Scenario, plan: Plan, x0: float, y0: float, title: str, domain: float = 10.0) -> list[str]:
    inner = PANEL - 2 * MARGIN
    sx = lambda x: x0 + MARGIN + x / domain * inner
    sy = lambda y: y0 + MARGIN + (1 - y / domain) * inner  # y axis up
    out = [
        '<g class="panel">',
        f'<rect x="{_f(x0 + MARGIN)}" y="{_f(y0 + MARGIN)}" width="{_f(inner)}" height="{_f(inner)}" '
        f'fill="none" stroke="#bbb"/>',
        f'<text x="{_f(x0 + PANEL / 2)}" y="{_f(y0 + 13)}" text-anchor="middle">{escape(title)}</text>',
    ]
    subs = scenario.subtasks()
    for k, (start, route) in enumerate(zip(scenario.starts, plan.routes)):
        pts = [start] + [subs[s].location for s in route] + [scenario.depot]
        coords = " ".join(f"{_f(sx(p.x))},{_f(sy(p.y))}" for p in pts)
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<polyline class="route" data-agent="{k}" points="{coords}" fill="none" '
                   f'stroke="{color}" stroke-width="1.6"/>')
    t_max = max((t.time_cost for t in scenario.tasks), default=0.0) or 1.0
    for t in scenario.tasks:
        r = 2.5 + 4.5 * t.time_cost / t_max
        out.append(f'<circle class="task" cx="{_f(sx(t.location.x))}" cy="{_f(sy(t.location.y))}" r="{_f(r)}" '
                   f'fill="black"/>')
    for p in scenario.starts:
        if p == scenario.depot:
            continue
        cx, cy = sx(p.x), sy(p.y)
        tri = f"{_f(cx)},{_f(cy - 5)} {_f(cx - 4.5)},{_f(cy + 4)} {_f(cx + 4.5)},{_f(cy + 4)}"
        out.append(f'<polygon class="start" points="{tri}" fill="black"/>')
    dx, dy = sx(scenario.depot.x), sy(scenario.depot.y)
    out.append(f'<rect class="depot" x="{_f(dx - 4.5)}" y="{_f(dy - 4.5)}" width="9" height="9" fill="black"/>')
    out.append("</g>")
    return out


def tours_svg(rows: Sequence[tuple[str, Scenario, Mapping[str, Plan]]], domain: float = 10.0) -> str:
    """Grid of tour panels: one row per scenario, one column per solver."""
    n_cols = max(len(plans) for _, _, plans in rows)
    body = []
    for r, (label, scenario, plans) in enumerate(rows):
        for c, (name, plan) in enumerate(plans.items()):
            title = f"{label}: {name}" if label else name
            body += tour_panel(scenario, plan, c * PANEL, r * PANEL, title, domain)
    return _svg(n_cols * PANEL, len(rows) * PANEL, body)


def plot_tours(scenario: Scenario, plans: Mapping[str, Plan], path, domain: float = 10.0) -> None:
    Path(path).write_text(tours_svg([("", scenario, plans)], domain))


def _axes(x0, y0, w, h, xr, yr, xlabel, ylabel) -> tuple[list[str], callable, callable]:
    (xa, xb), (ya, yb) = xr, yr
    xb = xb if xb != xa else xa + 1
    yb = yb if yb != ya else ya + 1
    fx = lambda x: x0 + (x - xa) / (xb - xa) * w
    fy = lambda y: y0 + h - (y - ya) / (yb - ya) * h
    out = [
        f'<line x1="{_f(x0)}" y1="{_f(y0 + h)}" x2="{_f(x0 + w)}" y2="{_f(y0 + h)}" stroke="black"/>',
        f'<line x1="{_f(x0)}" y1="{_f(y0)}" x2="{_f(x0)}" y2="{_f(y0 + h)}" stroke="black"/>',
        f'<text x="{_f(x0 + w / 2)}" y="{_f(y0 + h + 32)}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="{_f(x0 - 40)}" y="{_f(y0 + h / 2)}" transform="rotate(-90 {_f(x0 - 40)} {_f(y0 + h / 2)})" '
        f'text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        xv = xa + (xb - xa) * i / 4
        yv = ya + (yb - ya) * i / 4
        out.append(f'<text x="{_f(fx(xv))}" y="{_f(y0 + h + 15)}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{_f(x0 - 5)}" y="{_f(fy(yv) + 4)}" text-anchor="end">{yv:.3g}</text>')
    return out, fx, fy


def lines_svg(series: Mapping[str, Sequence[tuple[float, float]]], xlabel: str, ylabel: str,
              title: str = "", step: bool = False) -> str:
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    w, h, x0, y0 = 420, 260, 70, 40
    body, fx, fy = _axes(x0, y0, w, h, (min(xs), max(xs)), (min(0.0, min(ys)), max(ys)), xlabel, ylabel)
    if title:
        body.append(f'<text x="{_f(x0 + w / 2)}" y="20" text-anchor="middle">{escape(title)}</text>')
    for i, (name, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = []
        for j, (x, y) in enumerate(pts):
            if step and j:
                coords.append(f"{_f(fx(x))},{_f(fy(pts[j - 1][1]))}")
            coords.append(f"{_f(fx(x))},{_f(fy(y))}")
        body.append(f'<polyline points="{" ".join(coords)}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        body.append(f'<text x="{_f(x0 + w + 8)}" y="{_f(y0 + 14 * i + 10)}" fill="{color}">{escape(name)}</text>')
    return _svg(x0 + w + 120, y0 + h + 50, body)


def plot_curves(series: Mapping[str, Sequence[tuple[float, float]]], path, xlabel: str, ylabel: str,
                title: str = "", step: bool = False) -> None:
    Path(path).write_text(lines_svg(series, xlabel, ylabel, title, step))
