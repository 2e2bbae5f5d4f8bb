"""Minimal hand-written SVG charts: scatter, distribution curves, accuracy lines, confusion grid."""

from __future__ import annotations

from html import escape

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN = (70, 30, 40, 60)  # left, right, top, bottom

QUALIFIED_COLOR = "#1f77b4"
DEFECTIVE_COLOR = "#ff7f0e"
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _n(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    """Maps data coordinates into the plotting area of a fixed-size canvas."""

    def __init__(self, xlim, ylim, width=WIDTH, height=HEIGHT):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        left, right, top, bottom = MARGIN
        self.left, self.top = left, top
        self.w = width - left - right
        self.h = height - top - bottom
        self.width, self.height = width, height

    def px(self, x):
        return self.left + (x - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        return self.top + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.h

    def axes(self, title, xlabel, ylabel, ticks=5) -> list[str]:
        out = [f'<rect class="frame" x="{self.left}" y="{self.top}" width="{self.w}" '
               f'height="{self.h}" fill="none" stroke="#000"/>']
        for k in range(ticks + 1):
            xv = self.x0 + (self.x1 - self.x0) * k / ticks
            yv = self.y0 + (self.y1 - self.y0) * k / ticks
            out.append(f'<text x="{_n(self.px(xv))}" y="{self.top + self.h + 16}" '
                       f'font-size="11" text-anchor="middle">{xv:.3g}</text>')
            out.append(f'<text x="{self.left - 6}" y="{_n(self.py(yv) + 4)}" '
                       f'font-size="11" text-anchor="end">{yv:.3g}</text>')
        out.append(f'<text x="{self.left + self.w / 2}" y="{self.height - 15}" '
                   f'font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
        out.append(f'<text x="18" y="{self.top + self.h / 2}" font-size="13" '
                   f'text-anchor="middle" transform="rotate(-90 18 {self.top + self.h / 2})">'
                   f'{escape(ylabel)}</text>')
        out.append(f'<text x="{self.width / 2}" y="22" font-size="15" '
                   f'text-anchor="middle">{escape(title)}</text>')
        return out


def _document(body: list[str], width=WIDTH, height=HEIGHT) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="#fff"/>',
                      *body, "</svg>"]) + "\n"


def _padded(values, pad=0.05):
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo if hi > lo else max(abs(hi), 1.0)
    return lo - pad * span, hi + pad * span


def clip_line(a: float, b: float, c: float, xlim, ylim):
    """Segment of the line a*x + b*y = c inside the box, or None."""
    pts = []
    for x in xlim:
        if b != 0:
            y = (c - a * x) / b
            if ylim[0] <= y <= ylim[1]:
                pts.append((x, y))
    for y in ylim:
        if a != 0:
            x = (c - b * y) / a
            if xlim[0] <= x <= xlim[1]:
                pts.append((x, y))
    if len(pts) < 2:
        return None
    pts.sort()
    return pts[0], pts[-1]


def scatter_svg(points, line=None, title="", xlabel="mean", ylabel="standard deviation",
                qualified="Qualified", colors=(QUALIFIED_COLOR, DEFECTIVE_COLOR)) -> str:
    """``points`` are (x, y, label); ``line`` is (a, b, c) for a*x + b*y = c.

    Qualified beans are open circles, every other label a filled marker.
    """
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    frame = _Frame(_padded(xs), _padded(ys))
    body = frame.axes(title, xlabel, ylabel)
    q_color, d_color = colors
    for x, y, label in points:
        if label == qualified:
            body.append(f'<circle class="bean qualified" cx="{_n(frame.px(x))}" '
                        f'cy="{_n(frame.py(y))}" r="3.5" fill="none" stroke="{q_color}"/>')
        else:
            body.append(f'<circle class="bean defective" cx="{_n(frame.px(x))}" '
                        f'cy="{_n(frame.py(y))}" r="3.5" fill="{d_color}" stroke="{d_color}"/>')
    if line is not None:
        seg = clip_line(*line, (frame.x0, frame.x1), (frame.y0, frame.y1))
        if seg is not None:
            (ax, ay), (bx, by) = seg
            body.append(f'<line class="separatrix" x1="{_n(frame.px(ax))}" '
                        f'y1="{_n(frame.py(ay))}" x2="{_n(frame.px(bx))}" '
                        f'y2="{_n(frame.py(by))}" stroke="#000" stroke-width="2"/>')
    lx = frame.left + frame.w - 110
    body += [
        f'<circle class="legend" cx="{lx}" cy="{frame.top + 14}" r="4" fill="none" '
        f'stroke="{q_color}"/>',
        f'<text x="{lx + 10}" y="{frame.top + 18}" font-size="12">qualified</text>',
        f'<circle class="legend" cx="{lx}" cy="{frame.top + 32}" r="4" fill="{d_color}"/>',
        f'<text x="{lx + 10}" y="{frame.top + 36}" font-size="12">defective</text>',
    ]
    return _document(body)


def curves_svg(curves, title="grayscale distribution curves", ylabel="frequency") -> str:
    """``curves`` are (label, 256 frequencies); qualified curves blue, others orange."""
    ymax = max((float(np.max(f)) for _, f in curves), default=1.0)
    frame = _Frame((0, 255), (0, ymax * 1.05))
    body = frame.axes(title, "grayscale value", ylabel)
    for label, freq in curves:
        color = QUALIFIED_COLOR if label == "Qualified" else DEFECTIVE_COLOR
        pts = " ".join(f"{_n(frame.px(v))},{_n(frame.py(f))}" for v, f in enumerate(freq))
        body.append(f'<polyline class="curve" points="{pts}" fill="none" stroke="{color}" '
                    f'stroke-width="1" stroke-opacity="0.7"/>')
    return _document(body)


def accuracy_svg(series, title="accuracy rate versus training ratio") -> str:
    """``series`` are (name, [(ratio, accuracy), ...]); accuracy drawn in percent."""
    all_acc = [100 * a for _, pts in series for _, a in pts]
    lo = min(all_acc, default=0.0)
    frame = _Frame((0, 1), (min(lo - 2, 75.0), 100.5))
    body = frame.axes(title, "training set / whole set", "accuracy rate (%)")
    for k, (name, pts) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        coords = [(frame.px(r), frame.py(100 * a)) for r, a in pts]
        body.append(f'<polyline class="series" points="'
                    + " ".join(f"{_n(x)},{_n(y)}" for x, y in coords)
                    + f'" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in coords:
            body.append(f'<circle class="point" cx="{_n(x)}" cy="{_n(y)}" r="3" fill="{color}"/>')
        body.append(f'<text x="{frame.left + 10}" y="{frame.top + 16 + 16 * k}" font-size="12" '
                    f'fill="{color}">{escape(name)}</text>')
    return _document(body)


def confusion_svg(cm, title="confusion matrix") -> str:
    k = len(cm.classes)
    cell = 80
    left, top = 120, 60
    width, height = left + k * cell + 30, top + k * cell + 60
    peak = max(int(cm.counts.max()), 1)
    body = [f'<text x="{width / 2}" y="24" font-size="15" text-anchor="middle">'
            f'{escape(title)}</text>']
    for i, true_cls in enumerate(cm.classes):
        body.append(f'<text x="{left - 8}" y="{top + i * cell + cell / 2 + 4}" font-size="12" '
                    f'text-anchor="end">true {escape(true_cls)}</text>')
        for j in range(k):
            v = int(cm.counts[i, j])
            shade = int(255 - 180 * v / peak)
            body.append(f'<rect class="cell" x="{left + j * cell}" y="{top + i * cell}" '
                        f'width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" '
                        f'stroke="#000"/>')
            body.append(f'<text x="{left + j * cell + cell / 2}" '
                        f'y="{top + i * cell + cell / 2 + 5}" font-size="14" '
                        f'text-anchor="middle">{v}</text>')
    for j, cls in enumerate(cm.classes):
        body.append(f'<text x="{left + j * cell + cell / 2}" y="{top + k * cell + 18}" '
                    f'font-size="12" text-anchor="middle">{escape(cls)}</text>')
    body.append(f'<text x="{left + k * cell / 2}" y="{top + k * cell + 40}" font-size="13" '
                f'text-anchor="middle">predicted (accuracy {100 * cm.accuracy:.2f}%)</text>')
    return _document(body, width, height)
