"""Minimal deterministic SVG plotting (no timestamps, no generated ids).

Hand-rolled so that identical data produce byte-identical documents, which the
pipeline relies on for reproducibility checks.
"""

import math

import numpy as np


class Axes:
    """Maps data coordinates into a fixed SVG viewport, linear or log per axis."""

    def __init__(self, x_range, y_range, xlog=False, ylog=False,
                 width=640, height=480, margin=60):
        self.x_range = x_range
        self.y_range = y_range
        self.xlog = xlog
        self.ylog = ylog
        self.width = width
        self.height = height
        self.margin = margin

    def _scale(self, v, rng, log):
        lo, hi = rng
        if log:
            v, lo, hi = math.log10(v), math.log10(lo), math.log10(hi)
        return (v - lo) / (hi - lo)

    def px(self, x):
        t = self._scale(x, self.x_range, self.xlog)
        return self.margin + t * (self.width - 2 * self.margin)

    def py(self, y):
        t = self._scale(y, self.y_range, self.ylog)
        return self.height - self.margin - t * (self.height - 2 * self.margin)


class SvgFigure:
    def __init__(self, axes, title=""):
        self.axes = axes
        self.parts = []
        a = axes
        self.parts.append(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{a.width}" '
            f'height="{a.height}" viewBox="0 0 {a.width} {a.height}">')
        self.parts.append(
            f'<rect x="0" y="0" width="{a.width}" height="{a.height}" fill="white"/>')
        m = a.margin
        self.parts.append(
            f'<rect x="{m}" y="{m}" width="{a.width - 2 * m}" '
            f'height="{a.height - 2 * m}" fill="none" stroke="black"/>')
        if title:
            self.parts.append(
                f'<text x="{a.width / 2:.1f}" y="{m - 20}" text-anchor="middle" '
                f'font-size="14">{title}</text>')

    def comment(self, text):
        self.parts.append(f"<!-- {text} -->")

    def curve(self, x, y, color="black", dash=None, label=None):
        pts = " ".join(f"{self.axes.px(xi):.2f},{self.axes.py(yi):.2f}"
                       for xi, yi in zip(x, y) if self._inside(xi, yi))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        label_attr = f' data-label="{label}"' if label else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}"{dash_attr}{label_attr}/>')

    def markers(self, x, y, yerr=None, color="black", radius=4):
        for i, (xi, yi) in enumerate(zip(x, y)):
            if not self._inside(xi, yi):
                continue
            cx, cy = self.axes.px(xi), self.axes.py(yi)
            if yerr is not None:
                e = yerr[i]
                y0, y1 = max(yi - e, 1e-300), yi + e
                if self._inside(xi, y0) and self._inside(xi, y1):
                    self.parts.append(
                        f'<line x1="{cx:.2f}" y1="{self.axes.py(y0):.2f}" '
                        f'x2="{cx:.2f}" y2="{self.axes.py(y1):.2f}" stroke="{color}"/>')
            self.parts.append(
                f'<circle class="data-marker" cx="{cx:.2f}" cy="{cy:.2f}" '
                f'r="{radius}" fill="{color}"/>')

    def text(self, x_frac, y_frac, content, color="black"):
        a = self.axes
        px = a.margin + x_frac * (a.width - 2 * a.margin)
        py = a.height - a.margin - y_frac * (a.height - 2 * a.margin)
        self.parts.append(
            f'<text x="{px:.1f}" y="{py:.1f}" font-size="12" '
            f'fill="{color}">{content}</text>')

    def axis_labels(self, xlabel, ylabel):
        a = self.axes
        self.parts.append(
            f'<text x="{a.width / 2:.1f}" y="{a.height - 15}" text-anchor="middle" '
            f'font-size="12">{xlabel}</text>')
        self.parts.append(
            f'<text x="18" y="{a.height / 2:.1f}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 18 {a.height / 2:.1f})">{ylabel}</text>')

    def _inside(self, x, y):
        (xlo, xhi), (ylo, yhi) = self.axes.x_range, self.axes.y_range
        if not (xlo <= x <= xhi and ylo <= y <= yhi):
            return False
        if (self.axes.xlog and x <= 0) or (self.axes.ylog and y <= 0):
            return False
        return True

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def decade_range(values, pad=1.5):
    """A padded (lo, hi) range covering positive `values`, for log axes."""
    v = np.asarray(values, dtype=float)
    v = v[v > 0]
    return (float(v.min() / pad), float(v.max() * pad))
