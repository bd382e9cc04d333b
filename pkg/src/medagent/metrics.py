"""ROC curve and AUC computation, plus a plot-ready SVG rendering.

Thresholds sweep the distinct score values in descending order and tied
scores collapse into a single step, so the trapezoidal area under the curve
equals the tie-aware rank statistic (concordant + 0.5 * tied) / (P * N)
exactly, up to float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AgentError


class MetricsError(AgentError):
    code = "metrics_error"


class SingleClass(MetricsError):
    code = "single_class"

    def __init__(self):
        super().__init__("both classes must be present to compute a ROC curve")


class LengthMismatch(MetricsError):
    code = "length_mismatch"

    def __init__(self, n_scores: int, n_labels: int):
        super().__init__(f"got {n_scores} scores but {n_labels} labels")


class NonFiniteScore(MetricsError):
    code = "non_finite_score"

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"score at index {index} is not finite")


@dataclass(frozen=True)
class RocResult:
    points: tuple[tuple[float, float], ...]  # (fpr, tpr), from (0,0) to (1,1)
    auc: float
    n_pos: int
    n_neg: int


def roc_curve(scores, labels) -> RocResult:
    """ROC points and trapezoidal AUC for binary labels."""
    scores = [float(s) for s in scores]
    labels = [int(y) for y in labels]
    if len(scores) != len(labels):
        raise LengthMismatch(len(scores), len(labels))
    for i, s in enumerate(scores):
        if not math.isfinite(s):
            raise NonFiniteScore(i)
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass()

    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(order):
        j = i
        threshold = scores[order[i]]
        while j < len(order) and scores[order[j]] == threshold:
            if labels[order[j]] == 1:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j

    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return RocResult(points=tuple(points), auc=auc, n_pos=n_pos, n_neg=n_neg)


def pair_count_auc(scores, labels) -> float:
    """O(n^2) tie-aware rank statistic: P(score_pos > score_neg) + 0.5 ties.

    Independent of roc_curve; kept as the reference oracle.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = s[y == 1]
    neg = s[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClass()
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0)
    ties = np.count_nonzero(diff == 0)
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


# fixed plot geometry (640x480 viewBox)
_PLOT_LEFT = 70.0
_PLOT_RIGHT = 620.0
_PLOT_TOP = 20.0
_PLOT_BOTTOM = 430.0


def _px(fpr: float) -> str:
    return f"{_PLOT_LEFT + fpr * (_PLOT_RIGHT - _PLOT_LEFT):.6f}"


def _py(tpr: float) -> str:
    return f"{_PLOT_BOTTOM - tpr * (_PLOT_BOTTOM - _PLOT_TOP):.6f}"


def plot_series(r: RocResult) -> str:
    """Self-contained SVG document for a ROC curve.

    Output is byte-deterministic: fixed geometry, 6-decimal coordinates,
    no timestamps.  Uses only polyline, line, and text elements.
    """
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        'viewBox="0 0 640 480" font-family="sans-serif" font-size="14">',
    ]

    frame = " ".join(
        f"{x},{y}"
        for x, y in [
            (_px(0.0), _py(1.0)),
            (_px(1.0), _py(1.0)),
            (_px(1.0), _py(0.0)),
            (_px(0.0), _py(0.0)),
            (_px(0.0), _py(1.0)),
        ]
    )
    parts.append(f'<polyline points="{frame}" fill="none" stroke="#333333" stroke-width="1"/>')

    for k in range(6):
        t = k / 5.0
        label = f"{t:.1f}"
        x = _px(t)
        y = _py(t)
        bottom = f"{_PLOT_BOTTOM:.6f}"
        left = f"{_PLOT_LEFT:.6f}"
        parts.append(
            f'<line x1="{x}" y1="{bottom}" x2="{x}" y2="{_PLOT_BOTTOM + 6:.6f}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x}" y="{_PLOT_BOTTOM + 22:.6f}" text-anchor="middle">{label}</text>'
        )
        parts.append(
            f'<line x1="{left}" y1="{y}" x2="{_PLOT_LEFT - 6:.6f}" y2="{y}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_PLOT_LEFT - 10:.6f}" y="{y}" text-anchor="end" dominant-baseline="middle">{label}</text>'
        )

    parts.append(
        f'<line x1="{_px(0.0)}" y1="{_py(0.0)}" x2="{_px(1.0)}" y2="{_py(1.0)}" '
        'stroke="#999999" stroke-width="1" stroke-dasharray="6,4"/>'
    )

    curve = " ".join(f"{_px(x)},{_py(y)}" for x, y in r.points)
    parts.append(f'<polyline points="{curve}" fill="none" stroke="#1f6fb2" stroke-width="2"/>')

    mid_x = f"{(_PLOT_LEFT + _PLOT_RIGHT) / 2:.6f}"
    parts.append(
        f'<text x="{mid_x}" y="{_PLOT_BOTTOM + 44:.6f}" text-anchor="middle">False Positive Rate</text>'
    )
    mid_y = f"{(_PLOT_TOP + _PLOT_BOTTOM) / 2:.6f}"
    parts.append(
        f'<text x="22.000000" y="{mid_y}" text-anchor="middle" '
        f'transform="rotate(-90 22.000000 {mid_y})">True Positive Rate</text>'
    )
    parts.append(
        f'<text x="{_PLOT_LEFT + 14:.6f}" y="{_PLOT_TOP + 20:.6f}">AUC = {r.auc:.3f}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
