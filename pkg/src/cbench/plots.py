"""Roofline and time-share plot emitters.

Emits self-contained interactive HTML (inline SVG plus a small pan/zoom
script, no external assets) and a static SVG fallback per plot.
"""

from __future__ import annotations

import html
import math
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .analysis import RooflinePoint, roofline_knee
from .model import HostProfile

_WIDTH = 880
_HEIGHT = 560
_MARGIN_L = 70
_MARGIN_R = 200
_MARGIN_T = 40
_MARGIN_B = 60

_PALETTE = (
    "#2e7d32",
    "#c09000",
    "#1565c0",
    "#ad1457",
    "#00838f",
    "#6a1b9a",
    "#ef6c00",
    "#37474f",
)

_PANZOOM_SCRIPT = """
(function () {
  var svg = document.querySelector('svg');
  var base = svg.getAttribute('viewBox').split(' ').map(Number);
  var vb = base.slice();
  var dragging = false, lastX = 0, lastY = 0;
  function apply() { svg.setAttribute('viewBox', vb.join(' ')); }
  svg.addEventListener('wheel', function (ev) {
    ev.preventDefault();
    var factor = ev.deltaY > 0 ? 1.15 : 1 / 1.15;
    var rect = svg.getBoundingClientRect();
    var px = vb[0] + (ev.clientX - rect.left) / rect.width * vb[2];
    var py = vb[1] + (ev.clientY - rect.top) / rect.height * vb[3];
    vb[2] *= factor; vb[3] *= factor;
    vb[0] = px - (px - vb[0]) * factor;
    vb[1] = py - (py - vb[1]) * factor;
    apply();
  }, { passive: false });
  svg.addEventListener('mousedown', function (ev) {
    dragging = true; lastX = ev.clientX; lastY = ev.clientY;
  });
  window.addEventListener('mouseup', function () { dragging = false; });
  window.addEventListener('mousemove', function (ev) {
    if (!dragging) return;
    var rect = svg.getBoundingClientRect();
    vb[0] -= (ev.clientX - lastX) / rect.width * vb[2];
    vb[1] -= (ev.clientY - lastY) / rect.height * vb[3];
    lastX = ev.clientX; lastY = ev.clientY;
    apply();
  });
  svg.addEventListener('dblclick', function () { vb = base.slice(); apply(); });
})();
"""


def _decades(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


class _LogLogFrame:
    """Maps (x, y) data coordinates onto the SVG pixel grid, log-log."""

    def __init__(self, xlo: float, xhi: float, ylo: float, yhi: float):
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi
        self.plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
        self.plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def x(self, value: float) -> float:
        t = (math.log10(value) - math.log10(self.xlo)) / (
            math.log10(self.xhi) - math.log10(self.xlo)
        )
        return _MARGIN_L + t * self.plot_w

    def y(self, value: float) -> float:
        t = (math.log10(value) - math.log10(self.ylo)) / (
            math.log10(self.yhi) - math.log10(self.ylo)
        )
        return _MARGIN_T + (1.0 - t) * self.plot_h

    def axes_svg(self, xlabel: str, ylabel: str) -> list[str]:
        parts = []
        x0, x1 = _MARGIN_L, _WIDTH - _MARGIN_R
        y0, y1 = _MARGIN_T, _HEIGHT - _MARGIN_B
        parts.append(
            f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
            'fill="none" stroke="#444"/>'
        )
        for d in _decades(self.xlo, self.xhi):
            v = 10.0**d
            if not self.xlo <= v <= self.xhi:
                continue
            px = self.x(v)
            parts.append(
                f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y1}" '
                'stroke="#ddd" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{px:.1f}" y="{y1 + 18}" text-anchor="middle" '
                f'font-size="11">1e{d}</text>'
            )
        for d in _decades(self.ylo, self.yhi):
            v = 10.0**d
            if not self.ylo <= v <= self.yhi:
                continue
            py = self.y(v)
            parts.append(
                f'<line x1="{x0}" y1="{py:.1f}" x2="{x1}" y2="{py:.1f}" '
                'stroke="#ddd" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{x0 - 6}" y="{py + 4:.1f}" text-anchor="end" '
                f'font-size="11">1e{d}</text>'
            )
        parts.append(
            f'<text x="{(x0 + x1) / 2:.0f}" y="{_HEIGHT - 18}" text-anchor="middle" '
            f'font-size="13">{html.escape(xlabel)}</text>'
        )
        parts.append(
            f'<text x="18" y="{(y0 + y1) / 2:.0f}" text-anchor="middle" font-size="13" '
            f'transform="rotate(-90 18 {(y0 + y1) / 2:.0f})">{html.escape(ylabel)}</text>'
        )
        return parts


def roofline_svg(
    hosts: Sequence[HostProfile],
    points: Sequence[RooflinePoint],
    title: str = "Roofline",
    color_keys: Optional[Sequence[str]] = None,
) -> str:
    """Render ceilings for every host bandwidth kind plus labeled points.

    ``color_keys`` groups points into colors (defaults to each point's
    label); points carry hover tooltips via SVG title elements.
    """
    knees = []
    peaks = []
    for host in hosts:
        peaks.append(host.peak_flops_gflops)
        for kind in host.bandwidths_gbps:
            knees.append(roofline_knee(host, kind))
    xs = [p.operational_intensity for p in points if p.operational_intensity > 0]
    ys = [p.achieved_gflops for p in points if p.achieved_gflops > 0]
    xlo = min(knees + xs, default=0.1) / 8
    xhi = max(knees + xs, default=10.0) * 8
    ylo = min(ys + peaks, default=1.0) / 64
    yhi = max(ys + peaks, default=100.0) * 2
    frame = _LogLogFrame(xlo, xhi, ylo, yhi)

    body: list[str] = []
    body.append(
        f'<text x="{_WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="16">'
        f"{html.escape(title)}</text>"
    )
    body.extend(frame.axes_svg("Operational intensity [FLOP/byte]", "Performance [GFLOP/s]"))

    dash_cycle = ("", "6,3", "2,3", "8,2,2,2")
    for host in hosts:
        peak = host.peak_flops_gflops
        for idx, (kind, bw) in enumerate(sorted(host.bandwidths_gbps.items())):
            knee = peak / bw
            dash = dash_cycle[idx % len(dash_cycle)]
            dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
            x_start = max(xlo, ylo / bw)  # keep the line inside the frame
            body.append(
                f'<line x1="{frame.x(x_start):.1f}" y1="{frame.y(x_start * bw):.1f}" '
                f'x2="{frame.x(knee):.1f}" y2="{frame.y(peak):.1f}" '
                f'stroke="#555" stroke-width="1.6"{dash_attr}>'
                f"<title>{html.escape(host.hostname)} {html.escape(kind)}: {bw:g} GB/s</title></line>"
            )
            body.append(
                f'<text x="{frame.x(x_start) + 6:.1f}" y="{frame.y(x_start * bw) - 6:.1f}" '
                f'font-size="10" fill="#555">{html.escape(host.hostname)}/{html.escape(kind)}</text>'
            )
        body.append(
            f'<line x1="{frame.x(min(k for k in [peak / bw for bw in host.bandwidths_gbps.values()])):.1f}" '
            f'y1="{frame.y(peak):.1f}" x2="{frame.x(xhi):.1f}" y2="{frame.y(peak):.1f}" '
            f'stroke="#b71c1c" stroke-width="1.8">'
            f"<title>{html.escape(host.hostname)} peak: {peak:g} GFLOP/s</title></line>"
        )
        body.append(
            f'<text x="{frame.x(xhi) - 4:.1f}" y="{frame.y(peak) - 6:.1f}" text-anchor="end" '
            f'font-size="10" fill="#b71c1c">{html.escape(host.hostname)} peak {peak:g}</text>'
        )

    keys = list(color_keys) if color_keys is not None else [p.label for p in points]
    palette_index: dict[str, int] = {}
    legend_entries: list[str] = []
    for point, key in zip(points, keys):
        if key not in palette_index:
            palette_index[key] = len(palette_index) % len(_PALETTE)
            legend_entries.append(key)
        if point.operational_intensity <= 0 or point.achieved_gflops <= 0:
            continue  # log axes cannot place zero-valued points
        color = _PALETTE[palette_index[key]]
        px, py = frame.x(point.operational_intensity), frame.y(point.achieved_gflops)
        body.append(
            f'<circle cx="{px:.1f}" cy="{py:.1f}" r="5" fill="{color}" '
            f'fill-opacity="0.85" stroke="#222" stroke-width="0.6">'
            f"<title>{html.escape(point.label)}\nOI {point.operational_intensity:.4g} FLOP/B\n"
            f"{point.achieved_gflops:.4g} GFLOP/s</title></circle>"
        )
        body.append(
            f'<text x="{px + 7:.1f}" y="{py - 6:.1f}" font-size="9" fill="#333">'
            f"{html.escape(point.label)}</text>"
        )

    legend_x = _WIDTH - _MARGIN_R + 16
    for i, key in enumerate(legend_entries):
        y = _MARGIN_T + 14 + 16 * i
        color = _PALETTE[palette_index[key]]
        body.append(f'<circle cx="{legend_x}" cy="{y - 4}" r="5" fill="{color}"/>')
        body.append(
            f'<text x="{legend_x + 10}" y="{y}" font-size="11">{html.escape(key)}</text>'
        )

    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_WIDTH} {_HEIGHT}" '
        f'width="{_WIDTH}" height="{_HEIGHT}" font-family="sans-serif">'
        + "".join(body)
        + "</svg>"
    )


def _wrap_html(title: str, svg: str, caption: str) -> str:
    return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{html.escape(title)}</title>
<style>
body {{ font-family: sans-serif; margin: 1rem; }}
svg {{ border: 1px solid #ccc; background: #fff; cursor: grab; max-width: 100%; }}
p.caption {{ color: #555; font-size: 0.85rem; }}
</style>
</head>
<body>
{svg}
<p class="caption">{html.escape(caption)}</p>
<script>{_PANZOOM_SCRIPT}</script>
</body>
</html>
"""


def emit_roofline(
    hosts: Sequence[HostProfile],
    points: Sequence[RooflinePoint],
    out_html: Union[str, Path],
    title: str = "Roofline",
    color_keys: Optional[Sequence[str]] = None,
) -> Path:
    """Write the interactive HTML roofline plus a .svg fallback next to it."""
    out_html = Path(out_html)
    out_html.parent.mkdir(parents=True, exist_ok=True)
    svg = roofline_svg(hosts, points, title=title, color_keys=color_keys)
    out_html.write_text(
        _wrap_html(title, svg, "Scroll to zoom, drag to pan, double-click to reset."),
        encoding="utf-8",
    )
    out_html.with_suffix(".svg").write_text(svg, encoding="utf-8")
    return out_html


_SHARE_COLORS = {
    "computation": "#2e7d32",
    "synchronization": "#1565c0",
    "communication": "#c62828",
}


def timeshare_svg(
    shares_by_group: Mapping[str, Mapping[str, float]],
    title: str = "Time shares",
) -> str:
    """Stacked horizontal bars: one row per group, fractions summing to 1."""
    groups = sorted(shares_by_group)
    bar_h = 34
    gap = 18
    top = 56
    height = top + len(groups) * (bar_h + gap) + 60
    width = _WIDTH
    left = 150
    plot_w = width - left - 60
    body = [
        f'<text x="{width / 2:.0f}" y="26" text-anchor="middle" font-size="16">'
        f"{html.escape(title)}</text>"
    ]
    for gi, group in enumerate(groups):
        y = top + gi * (bar_h + gap)
        body.append(
            f'<text x="{left - 10}" y="{y + bar_h / 2 + 4:.1f}" text-anchor="end" '
            f'font-size="12">{html.escape(group)}</text>'
        )
        x = float(left)
        for category in ("computation", "synchronization", "communication"):
            fraction = float(shares_by_group[group].get(category, 0.0))
            w = fraction * plot_w
            color = _SHARE_COLORS[category]
            body.append(
                f'<rect x="{x:.1f}" y="{y}" width="{w:.1f}" height="{bar_h}" '
                f'fill="{color}"><title>{html.escape(group)} {category}: '
                f"{fraction * 100:.1f}%</title></rect>"
            )
            if fraction >= 0.06:
                body.append(
                    f'<text x="{x + w / 2:.1f}" y="{y + bar_h / 2 + 4:.1f}" '
                    f'text-anchor="middle" font-size="11" fill="#fff">'
                    f"{fraction * 100:.0f}%</text>"
                )
            x += w
    legend_y = top + len(groups) * (bar_h + gap) + 20
    lx = left
    for category, color in _SHARE_COLORS.items():
        body.append(f'<rect x="{lx}" y="{legend_y}" width="14" height="14" fill="{color}"/>')
        body.append(
            f'<text x="{lx + 20}" y="{legend_y + 12}" font-size="12">{category}</text>'
        )
        lx += 160
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}" font-family="sans-serif">'
        + "".join(body)
        + "</svg>"
    )


def emit_timeshare(
    shares_by_group: Mapping[str, Mapping[str, float]],
    out_html: Union[str, Path],
    title: str = "Time shares",
) -> Path:
    out_html = Path(out_html)
    out_html.parent.mkdir(parents=True, exist_ok=True)
    svg = timeshare_svg(shares_by_group, title=title)
    out_html.write_text(
        _wrap_html(title, svg, "Share of total simulation time per category."),
        encoding="utf-8",
    )
    out_html.with_suffix(".svg").write_text(svg, encoding="utf-8")
    return out_html
