"""Standalone SVG rendering of an environment, executed path and candidate rollouts."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import quoteattr

import numpy as np

from .world import Environment

PX_PER_M = 40.0
MARGIN = 20.0


def _points_attr(xy: np.ndarray, to_px) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in (to_px(p) for p in xy))


def _candidate_sets(bundle) -> list:
    """Normalize candidates to a list of ``(K, T + 1, n)`` arrays (one per solve)."""
    if bundle is None:
        return []
    if isinstance(bundle, np.ndarray):
        return [bundle] if bundle.ndim == 3 else [bundle[None]]
    return [np.asarray(c) for c in bundle if c is not None]


def render_svg(env: Environment, path: Optional[np.ndarray] = None, candidates=None,
               title: str = "") -> str:
    xmin, xmax, ymin, ymax = env.bounds
    width = (xmax - xmin) * PX_PER_M + 2 * MARGIN
    height = (ymax - ymin) * PX_PER_M + 2 * MARGIN

    def to_px(p):
        # SVG y grows downwards
        return (MARGIN + (p[0] - xmin) * PX_PER_M, MARGIN + (ymax - p[1]) * PX_PER_M)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
    ]
    if title:
        out.append(f"<title>{_escape(title)}</title>")
    out.append(f'<rect class="bounds" x="{MARGIN}" y="{MARGIN}" width="{width - 2 * MARGIN:.2f}" '
               f'height="{height - 2 * MARGIN:.2f}" fill="white" stroke="black" stroke-width="1"/>')
    out.append('<g class="obstacles" fill="#8a8a8a" stroke="#444">')
    for c in env.obstacles:
        cx, cy = to_px((c.x, c.y))
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{c.radius * PX_PER_M:.2f}"/>')
    out.append("</g>")

    sets = _candidate_sets(candidates)
    if sets:
        out.append('<g class="candidates" fill="none" stroke="#1f77b4" stroke-opacity="0.15" '
                   'stroke-width="0.8">')
        for solve_idx, rollouts in enumerate(sets):
            for k, traj in enumerate(rollouts):
                out.append(f'<polyline data-solve="{solve_idx}" data-k="{k}" '
                           f'points="{_points_attr(traj[:, :2], to_px)}"/>')
        out.append("</g>")

    if path is not None and len(path):
        out.append(f'<polyline class="path" fill="none" stroke="#d62728" stroke-width="2" '
                   f'points="{_points_attr(np.asarray(path)[:, :2], to_px)}"/>')

    for cls, p, color in (("start", env.start, "#2ca02c"), ("goal", env.goal, "#ff7f0e")):
        x, y = to_px(p)
        out.append(f'<circle class="{cls}" cx="{x:.2f}" cy="{y:.2f}" r="6" fill="{color}" '
                   f'stroke="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return quoteattr(text)[1:-1]


def export_plot(env: Environment, result_or_candidates, path, title: str = "") -> Path:
    """Write an SVG of ``env`` with a trial result or a bare candidate bundle.

    ``result_or_candidates`` may be a ``TrialResult`` (its executed path plus
    any captured candidates are drawn), a single ``(K, T + 1, n)`` candidate
    array, a list of those, or ``None`` for obstacles and markers only.
    """
    path_xy = None
    candidates = result_or_candidates
    if hasattr(result_or_candidates, "path"):
        path_xy = result_or_candidates.path
        candidates = getattr(result_or_candidates, "candidates", None)
    path = Path(path)
    path.write_text(render_svg(env, path_xy, candidates, title))
    return path


def candidate_count(svg_text: str) -> Sequence[int]:
    """Number of candidate polylines per solve index in a rendered SVG."""
    counts: dict[int, int] = {}
    for m in re.finditer(r'data-solve="(\d+)"', svg_text):
        i = int(m.group(1))
        counts[i] = counts.get(i, 0) + 1
    return [counts[i] for i in sorted(counts)]
