"""Deterministic SVG 1.1 figures: intention modes, multi-modal predictions, force breakdowns."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Sequence

import numpy as np

from .nsf import ForceBreakdown
from .trajdata import LaneGeometry, LineKind

SVG_NS = "http://www.w3.org/2000/svg"
MANEUVER_COLORS = {"straight": "#1f77b4", "left": "#2ca02c", "right": "#d62728"}


def _num(v: float) -> str:
    return f"{v:.3f}"


class Canvas:
    """Axis-aligned plot area; x and y get independent scales (highway scenes are long and thin)."""

    def __init__(self, xlim, ylim, width=800, height=300, margin=30, title: str = ""):
        self.x0, self.x1 = map(float, xlim)
        self.y0, self.y1 = map(float, ylim)
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.width, self.height, self.margin = width, height, margin
        self.root = ET.Element(
            "svg",
            {
                "xmlns": SVG_NS,
                "version": "1.1",
                "width": str(width),
                "height": str(height),
                "viewBox": f"0 0 {width} {height}",
            },
        )
        defs = ET.SubElement(self.root, "defs")
        marker = ET.SubElement(
            defs,
            "marker",
            {"id": "arrow", "markerWidth": "8", "markerHeight": "8", "refX": "6", "refY": "3", "orient": "auto"},
        )
        ET.SubElement(marker, "path", {"d": "M0,0 L6,3 L0,6 z", "fill": "#333333"})
        ET.SubElement(self.root, "rect", {"width": str(width), "height": str(height), "fill": "white"})
        if title:
            self.text(title, width / 2, 18, anchor="middle", raw=True)

    @property
    def sx(self) -> float:
        return (self.width - 2 * self.margin) / (self.x1 - self.x0)

    @property
    def sy(self) -> float:
        return (self.height - 2 * self.margin) / (self.y1 - self.y0)

    def px(self, x: float, y: float) -> tuple[float, float]:
        return self.margin + (x - self.x0) * self.sx, self.height - self.margin - (y - self.y0) * self.sy

    def polyline(self, xy, color: str, width: float = 1.5, dash: str | None = None, label: str | None = None):
        pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in (self.px(x, y) for x, y in np.asarray(xy)))
        attrs = {"points": pts, "fill": "none", "stroke": color, "stroke-width": str(width)}
        if dash:
            attrs["stroke-dasharray"] = dash
        if label:
            attrs["class"] = label
        return ET.SubElement(self.root, "polyline", attrs)

    def hline(self, y: float, color: str, dash: str | None = None, label: str | None = None):
        return self.polyline([(self.x0, y), (self.x1, y)], color, 1.0, dash, label)

    def circle(self, x: float, y: float, r: float, color: str, label: str | None = None):
        cx, cy = self.px(x, y)
        attrs = {"cx": _num(cx), "cy": _num(cy), "r": str(r), "fill": color}
        if label:
            attrs["class"] = label
        return ET.SubElement(self.root, "circle", attrs)

    def arrow(self, x: float, y: float, dx_px: float, dy_px: float, color: str, label: str | None = None):
        """Arrow from data point ``(x, y)`` with a length given in pixels (+y up)."""
        ax, ay = self.px(x, y)
        attrs = {
            "x1": _num(ax),
            "y1": _num(ay),
            "x2": _num(ax + dx_px),
            "y2": _num(ay - dy_px),
            "stroke": color,
            "stroke-width": "2",
            "marker-end": "url(#arrow)",
        }
        if label:
            attrs["class"] = label
        return ET.SubElement(self.root, "line", attrs)

    def text(self, s: str, x: float, y: float, anchor: str = "start", raw: bool = False, size: int = 12):
        if not raw:
            x, y = self.px(x, y)
        el = ET.SubElement(
            self.root, "text", {"x": _num(x), "y": _num(y), "font-size": str(size), "text-anchor": anchor, "font-family": "sans-serif"}
        )
        el.text = s
        return el

    def legend(self, entries: Sequence[tuple[str, str]]):
        for i, (name, color) in enumerate(entries):
            y = self.margin + 14 * i
            x = self.width - self.margin - 110
            ET.SubElement(
                self.root,
                "line",
                {"x1": _num(x), "y1": _num(y - 4), "x2": _num(x + 18), "y2": _num(y - 4), "stroke": color, "stroke-width": "2"},
            )
            self.text(name, x + 24, y, raw=True, size=11)

    def to_string(self) -> str:
        ET.indent(self.root)
        return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(self.root, encoding="unicode") + "\n"


def _bounds(arrays, pad_frac=0.05, min_pad=1.0):
    pts = np.concatenate([np.asarray(a, dtype=float).reshape(-1, 2) for a in arrays])
    lo, hi = pts.min(0), pts.max(0)
    pad = np.maximum((hi - lo) * pad_frac, min_pad)
    return (lo[0] - pad[0], hi[0] + pad[0]), (lo[1] - pad[1], hi[1] + pad[1])


def mode_class(endpoint_y: float, lane_width: float) -> str:
    if endpoint_y > lane_width / 2:
        return "left"
    if endpoint_y < -lane_width / 2:
        return "right"
    return "straight"


def plot_modes(centers: np.ndarray, lane_width: float = 3.7, title: str = "Intention modes") -> str:
    centers = np.asarray(centers, dtype=float)
    xlim, ylim = _bounds(list(centers))
    c = Canvas(xlim, ylim, title=title)
    for k, center in enumerate(centers):
        cls = mode_class(center[-1, 1], lane_width)
        c.polyline(center, MANEUVER_COLORS[cls], 2.0, label=f"mode mode-{k} {cls}")
    c.legend([(k, v) for k, v in MANEUVER_COLORS.items()])
    return c.to_string()


def plot_multimodal(
    history: np.ndarray,
    truth: np.ndarray,
    hypotheses: np.ndarray,
    best: int,
    title: str = "Multi-modal prediction",
) -> str:
    hypotheses = np.asarray(hypotheses, dtype=float)
    xlim, ylim = _bounds([history, truth, hypotheses])
    c = Canvas(xlim, ylim, title=title)
    for k, path in enumerate(hypotheses):
        if k != best:
            c.polyline(path, "#999999", 1.0, "4,3", label="hypothesis")
    c.polyline(history, "#000000", 2.0, label="history")
    c.polyline(truth, "#2ca02c", 2.0, "6,3", label="truth")
    c.polyline(hypotheses[best], "#d62728", 2.0, label="best")
    c.legend([("history", "#000000"), ("ground truth", "#2ca02c"), ("best", "#d62728"), ("other", "#999999")])
    return c.to_string()


def plot_forces(
    breakdown: ForceBreakdown,
    position,
    lanes: LaneGeometry,
    neighbor_positions: dict[int, np.ndarray] | None = None,
    px_per_unit: float = 20.0,
    half_span: float = 40.0,
    title: str | None = None,
) -> str:
    """Scene at one rollout step with arrows for the goal force and every repulsion source."""
    p = np.asarray(position, dtype=float)
    neighbor_positions = neighbor_positions or {}
    ys = list(lanes.offsets) + [p[1]] + [q[1] for q in neighbor_positions.values()]
    c = Canvas(
        (p[0] - half_span, p[0] + half_span),
        (min(ys) - 1.0, max(ys) + 1.0),
        height=320,
        title=title or f"Forces at step {breakdown.step}",
    )
    for off, kind in zip(lanes.offsets, lanes.kinds):
        c.hline(off, "#666666", "5,4" if kind is LineKind.CENTER else None, label=f"line {kind.value}")
    for vid, q in neighbor_positions.items():
        c.circle(q[0], q[1], 5, "#ff7f0e", label=f"neighbor neighbor-{vid}")
    c.circle(p[0], p[1], 6, "#000000", label="target")

    def draw(vec, color, label):
        vec = np.asarray(vec, dtype=float)
        if np.hypot(*vec) > 0:
            c.arrow(p[0], p[1], vec[0] * px_per_unit, vec[1] * px_per_unit, color, label)

    draw(breakdown.f_goal, "#1f77b4", "force goal")
    for vid, f in breakdown.f_rep_vehicles:
        draw(f, "#ff7f0e", f"force vehicle vehicle-{vid}")
    for idx, f in breakdown.f_rep_lines:
        draw(f, "#9467bd", f"force line line-{idx}")
    c.legend([("goal force", "#1f77b4"), ("vehicle rep.", "#ff7f0e"), ("line rep.", "#9467bd")])
    return c.to_string()
