"""Minimal static SVG line/band plots with deterministic output."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Ticks at 1, 2 or 5 times a power of ten covering ``[lo, hi]``."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _label(t: float) -> str:
    if t == 0:
        return "0"
    if abs(t) >= 1e4 or abs(t) < 1e-3:
        return f"{t:.0e}"
    return f"{t:.6g}"


@dataclass
class Plot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    width: int = 480
    height: int = 360
    margin: tuple[int, int, int, int] = (40, 20, 50, 70)  # top, right, bottom, left
    ylim: tuple[float, float] | None = None
    _items: list = field(default_factory=list)

    def band(self, x, lo, hi, color="#4a7fd4", opacity=0.3, label=None):
        self._items.append(("band", np.asarray(x, float), np.asarray(lo, float), np.asarray(hi, float), color, opacity, label))

    def line(self, x, y, color="black", width=1.5, dash=None, opacity=1.0, label=None):
        self._items.append(("line", np.asarray(x, float), np.asarray(y, float), color, width, dash, opacity, label))

    def _limits(self):
        xs, ys = [], []
        for it in self._items:
            xs.append(it[1])
            ys.extend([it[2], it[3]] if it[0] == "band" else [it[2]])
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        y = y[np.isfinite(y)]
        ylo, yhi = (float(y.min()), float(y.max())) if y.size else (0.0, 1.0)
        if self.ylim is not None:
            ylo, yhi = self.ylim
        pad = 0.05 * (yhi - ylo or 1.0)
        return float(x.min()), float(x.max()), ylo - pad, yhi + pad

    def render(self) -> str:
        top, right, bottom, left = self.margin
        pw = self.width - left - right
        ph = self.height - top - bottom
        x0, x1, y0, y1 = self._limits()
        if x1 == x0:
            x1 = x0 + 1.0
        ys = nice_ticks(y0, y1)
        if ys:
            y0, y1 = min(y0, ys[0]), max(y1, ys[-1])

        def px(x):
            return left + (np.asarray(x) - x0) / (x1 - x0) * pw

        def py(y):
            y = np.clip(np.asarray(y, float), y0, y1)
            return top + (y1 - y) / (y1 - y0) * ph

        def pts(xa, ya):
            return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(xa), py(ya)))

        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="11">',
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>',
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
        ]
        for t in nice_ticks(x0, x1):
            X = float(px(t))
            out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 4}" stroke="#333"/>')
            out.append(f'<text x="{X:.2f}" y="{top + ph + 16}" text-anchor="middle">{_label(t)}</text>')
        for t in ys:
            Y = float(py(t))
            out.append(f'<line x1="{left - 4}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="#333"/>')
            out.append(f'<text x="{left - 6}" y="{Y + 4:.2f}" text-anchor="end">{_label(t)}</text>')

        legend = []
        for it in self._items:
            if it[0] == "band":
                _, x, lo, hi, color, opacity, label = it
                poly = pts(x, hi) + " " + pts(x[::-1], lo[::-1])
                out.append(f'<polygon class="band" points="{poly}" fill="{color}" fill-opacity="{opacity}" stroke="none"/>')
                if label:
                    legend.append((label, f'fill="{color}" fill-opacity="{opacity}"', True))
            else:
                _, x, y, color, width, dash, opacity, label = it
                da = f' stroke-dasharray="{dash}"' if dash else ""
                out.append(
                    f'<polyline points="{pts(x, y)}" fill="none" stroke="{color}" stroke-width="{width}"'
                    f' stroke-opacity="{opacity}"{da}/>'
                )
                if label:
                    legend.append((label, f'stroke="{color}" stroke-width="{width}"{da}', False))

        for k, (label, style, is_band) in enumerate(legend):
            ly = top + 12 + 14 * k
            lx = left + pw - 120
            if is_band:
                out.append(f'<rect x="{lx}" y="{ly - 6}" width="18" height="8" {style}/>')
            else:
                out.append(f'<line x1="{lx}" y1="{ly - 2}" x2="{lx + 18}" y2="{ly - 2}" {style}/>')
            out.append(f'<text x="{lx + 24}" y="{ly + 2}">{escape(label)}</text>')

        out.append(f'<text x="{left + pw / 2:.1f}" y="{top - 14}" text-anchor="middle" font-size="13">{escape(self.title)}</text>')
        out.append(f'<text x="{left + pw / 2:.1f}" y="{self.height - 10}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(
            f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(self.ylabel)}</text>'
        )
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())
