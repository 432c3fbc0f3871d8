"""Minimal deterministic SVG plots (histogram and line).

Hand-rolled so identical inputs produce byte-identical files; no plotting
library keeps timestamps or randomized element ids out of the output.
"""

import numpy as np

__all__ = ["emit_plot", "histogram_counts"]

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 50
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def histogram_counts(values, bins: int, lo=None, hi=None):
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if lo is None:
        lo = float(values.min())
    if hi is None:
        hi = float(values.max())
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return counts, edges


class _Canvas:
    def __init__(self, x_range, y_range):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.parts = []

    def px(self, x):
        frac = (x - self.x0) / (self.x1 - self.x0)
        return MARGIN_L + frac * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y):
        frac = (y - self.y0) / (self.y1 - self.y0)
        return HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B)

    def axes(self, xlabel, ylabel, title):
        left, right = MARGIN_L, WIDTH - MARGIN_R
        top, bottom = MARGIN_T, HEIGHT - MARGIN_B
        self.parts.append(
            f'<rect x="{left}" y="{top}" width="{right - left}" '
            f'height="{bottom - top}" fill="none" stroke="black"/>')
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            xv = self.x0 + frac * (self.x1 - self.x0)
            yv = self.y0 + frac * (self.y1 - self.y0)
            xp, yp = self.px(xv), self.py(yv)
            self.parts.append(
                f'<line x1="{_fmt(xp)}" y1="{bottom}" x2="{_fmt(xp)}" '
                f'y2="{bottom + 5}" stroke="black"/>')
            self.parts.append(
                f'<text x="{_fmt(xp)}" y="{bottom + 18}" font-size="11" '
                f'text-anchor="middle">{_fmt(xv)}</text>')
            self.parts.append(
                f'<line x1="{left - 5}" y1="{_fmt(yp)}" x2="{left}" '
                f'y2="{_fmt(yp)}" stroke="black"/>')
            self.parts.append(
                f'<text x="{left - 8}" y="{_fmt(yp + 4)}" font-size="11" '
                f'text-anchor="end">{_fmt(yv)}</text>')
        self.parts.append(
            f'<text x="{(left + right) / 2}" y="{HEIGHT - 10}" font-size="13" '
            f'text-anchor="middle">{xlabel}</text>')
        self.parts.append(
            f'<text x="16" y="{(top + bottom) / 2}" font-size="13" '
            f'text-anchor="middle" transform="rotate(-90 16 {(top + bottom) / 2})">'
            f'{ylabel}</text>')
        if title:
            self.parts.append(
                f'<text x="{(left + right) / 2}" y="20" font-size="14" '
                f'text-anchor="middle" font-weight="bold">{title}</text>')

    def legend(self, labels):
        x, y = WIDTH - MARGIN_R - 150, MARGIN_T + 14
        for k, label in enumerate(labels):
            color = PALETTE[k % len(PALETTE)]
            self.parts.append(
                f'<rect x="{x}" y="{y + 16 * k - 9}" width="12" height="9" '
                f'fill="{color}"/>')
            self.parts.append(
                f'<text x="{x + 17}" y="{y + 16 * k}" font-size="11">{label}</text>')

    def render(self):
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
                f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">\n'
                f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n'
                f"{body}\n</svg>\n")


def emit_plot(series, kind: str, path, title="", xlabel="", ylabel="",
              bins: int = 50):
    """Write a self-contained SVG.

    kind "histogram": series is [(label, values)]; shared binning.
    kind "line": series is [(label, xs, ys)].
    """
    if not series:
        raise ValueError("empty series")
    if kind == "histogram":
        all_vals = np.concatenate([np.asarray(s[1], dtype=np.float64).reshape(-1)
                                   for s in series])
        lo, hi = float(all_vals.min()), float(all_vals.max())
        if hi <= lo:
            lo, hi = lo - 0.5, lo + 0.5
        counted = [(label, *histogram_counts(vals, bins, lo, hi))
                   for label, vals in series]
        ymax = max(int(c.max()) for _, c, _ in counted) or 1
        canvas = _Canvas((lo, hi), (0.0, float(ymax)))
        canvas.axes(xlabel, ylabel or "count", title)
        for k, (label, counts, edges) in enumerate(counted):
            color = PALETTE[k % len(PALETTE)]
            for ci, count in enumerate(counts):
                if count == 0:
                    continue
                x_left = canvas.px(edges[ci])
                x_right = canvas.px(edges[ci + 1])
                y_top = canvas.py(float(count))
                y_base = canvas.py(0.0)
                canvas.parts.append(
                    f'<rect x="{_fmt(x_left)}" y="{_fmt(y_top)}" '
                    f'width="{_fmt(x_right - x_left)}" '
                    f'height="{_fmt(y_base - y_top)}" fill="{color}" '
                    f'fill-opacity="0.6"/>')
        canvas.legend([s[0] for s in series])
    elif kind == "line":
        xs_all = np.concatenate([np.asarray(s[1], dtype=np.float64) for s in series])
        ys_all = np.concatenate([np.asarray(s[2], dtype=np.float64) for s in series])
        canvas = _Canvas((float(xs_all.min()), float(xs_all.max())),
                         (float(ys_all.min()), float(ys_all.max())))
        canvas.axes(xlabel, ylabel, title)
        for k, (label, xs, ys) in enumerate(series):
            color = PALETTE[k % len(PALETTE)]
            pts = " ".join(f"{_fmt(canvas.px(float(x)))},{_fmt(canvas.py(float(y)))}"
                           for x, y in zip(xs, ys))
            canvas.parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>')
            if len(np.asarray(xs)) == 1:
                canvas.parts.append(
                    f'<circle cx="{_fmt(canvas.px(float(xs[0])))}" '
                    f'cy="{_fmt(canvas.py(float(ys[0])))}" r="3" fill="{color}"/>')
        canvas.legend([s[0] for s in series])
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    with open(path, "w") as fh:
        fh.write(canvas.render())
