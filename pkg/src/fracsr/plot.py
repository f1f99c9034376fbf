"""Static SVG rate-distortion plots."""

from __future__ import annotations

import math
import os
import xml.etree.ElementTree as ET
from typing import Sequence, TextIO, Union

import numpy as np

from .metrics import MetricError, RdCurve

WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 60
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    return np.arange(math.ceil(lo / step) * step, hi + step * 1e-9, step)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def emit_plot(curves: Sequence[RdCurve], destination: Union[str, os.PathLike, TextIO, None] = None,
              title: str = "") -> str:
    """Render curves as SVG, rate (bits per input point) on x, D1 PSNR on y.

    Points with infinite PSNR sit on the top edge of the axes and carry a
    ``clipped`` marker.
    """
    if not curves:
        raise MetricError("nothing to plot")
    rates = np.concatenate([c.rates for c in curves])
    quals = np.concatenate([c.qualities for c in curves])
    finite = quals[np.isfinite(quals)]
    x_lo, x_hi = float(rates.min()), float(rates.max())
    y_lo, y_hi = (float(finite.min()), float(finite.max())) if len(finite) else (0.0, 1.0)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    pad = max(0.05 * (y_hi - y_lo), 0.5)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(r):
        return LEFT + (r - x_lo) / (x_hi - x_lo) * pw

    def sy(q):
        return TOP + (y_hi - min(q, y_hi)) / (y_hi - y_lo) * ph

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(WIDTH), height=str(HEIGHT),
                     viewBox=f"0 0 {WIDTH} {HEIGHT}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white")
    if title:
        ET.SubElement(svg, "text", x=str(LEFT + pw / 2), y="18", **{"text-anchor": "middle"}).text = title

    axes = ET.SubElement(svg, "g", {"class": "axes", "stroke": "black", "font-size": "11"})
    ET.SubElement(axes, "rect", x=_fmt(LEFT), y=_fmt(TOP), width=_fmt(pw), height=_fmt(ph), fill="none")
    for r in _ticks(x_lo, x_hi):
        ET.SubElement(axes, "line", x1=_fmt(sx(r)), y1=_fmt(TOP + ph), x2=_fmt(sx(r)), y2=_fmt(TOP + ph + 5))
        ET.SubElement(axes, "text", x=_fmt(sx(r)), y=_fmt(TOP + ph + 18), stroke="none",
                      **{"text-anchor": "middle"}).text = _fmt(r)
    for q in _ticks(y_lo, y_hi):
        ET.SubElement(axes, "line", x1=_fmt(LEFT - 5), y1=_fmt(sy(q)), x2=_fmt(LEFT), y2=_fmt(sy(q)))
        ET.SubElement(axes, "text", x=_fmt(LEFT - 8), y=_fmt(sy(q) + 4), stroke="none",
                      **{"text-anchor": "end"}).text = _fmt(q)
    ET.SubElement(axes, "text", x=_fmt(LEFT + pw / 2), y=_fmt(HEIGHT - 15), stroke="none",
                  **{"text-anchor": "middle"}).text = "rate (bits per input point)"
    ET.SubElement(axes, "text", x="15", y=_fmt(TOP + ph / 2), stroke="none",
                  transform=f"rotate(-90 15 {_fmt(TOP + ph / 2)})",
                  **{"text-anchor": "middle"}).text = "D1 PSNR (dB)"

    legend = ET.SubElement(svg, "g", {"class": "legend", "font-size": "12"})
    for i, curve in enumerate(curves):
        color = COLORS[i % len(COLORS)]
        coords = [(sx(p.rate), sy(p.quality)) for p in curve.points]
        g = ET.SubElement(svg, "g", {"class": "curve", "data-label": curve.label})
        ET.SubElement(g, "polyline", fill="none", stroke=color, points=" ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in coords))
        for p, (x, y) in zip(curve.points, coords):
            ET.SubElement(g, "circle", cx=_fmt(x), cy=_fmt(y), r="3", fill=color)
            if math.isinf(p.quality):
                ET.SubElement(g, "text", {"class": "clipped", "x": _fmt(x + 5), "y": _fmt(y - 5),
                                          "fill": color, "font-size": "11"}).text = "inf"
        ly = TOP + 10 + 18 * i
        entry = ET.SubElement(legend, "g", {"class": "legend-entry"})
        ET.SubElement(entry, "line", x1=_fmt(WIDTH - RIGHT + 15), y1=_fmt(ly), x2=_fmt(WIDTH - RIGHT + 40),
                      y2=_fmt(ly), stroke=color, **{"stroke-width": "2"})
        ET.SubElement(entry, "text", x=_fmt(WIDTH - RIGHT + 45), y=_fmt(ly + 4)).text = curve.label or f"curve {i + 1}"

    text = ET.tostring(svg, encoding="unicode")
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)
    elif destination is not None:
        destination.write(text)
    return text
