/**
 * Time-series panel: one polyline per query group, commit time on x.
 *
 * Filtering is pure presentation: the query groups by the filter tags
 * and deselected groups are simply not drawn, so every plotted value is
 * an untouched API value.
 */

import type { QueryGroup } from "./api.js";
import { fmtNumber, fmtTimestamp, tagLabel } from "./format.js";

export const PALETTE = [
    "#2e7d32",
    "#c09000",
    "#1565c0",
    "#ad1457",
    "#00838f",
    "#6a1b9a",
    "#ef6c00",
    "#37474f",
];

const WIDTH = 640;
const HEIGHT = 260;
const MARGIN = { left: 64, right: 16, top: 12, bottom: 28 };

export interface Series {
    label: string;
    tags: Record<string, string>;
    points: { ts: number; value: number }[];
}

/** Flatten query groups into plottable series for one field. */
export function groupsToSeries(groups: QueryGroup[], field: string): Series[] {
    const series: Series[] = [];
    for (const group of groups) {
        const points = (group.points ?? [])
            .map(([ts, fields]) => ({ ts, value: fields[field] }))
            .filter((p): p is { ts: number; value: number } => typeof p.value === "number");
        if (points.length) {
            series.push({ label: tagLabel(group.tags), tags: group.tags, points });
        }
    }
    return series;
}

export function matchesSelection(
    tags: Record<string, string>,
    selection: Record<string, string[]>,
): boolean {
    for (const [tag, values] of Object.entries(selection)) {
        if (values.length && !values.includes(tags[tag] ?? "")) return false;
    }
    return true;
}

function svgEl(tag: string): SVGElement {
    return document.createElementNS("http://www.w3.org/2000/svg", tag) as SVGElement;
}

export function renderTimeSeries(
    container: HTMLElement,
    allSeries: Series[],
    selection: Record<string, string[]> = {},
): void {
    container.textContent = "";
    const series = allSeries.filter((s) => matchesSelection(s.tags, selection));
    if (!series.length) {
        const empty = document.createElement("p");
        empty.className = "no-data";
        empty.textContent = "no data";
        container.appendChild(empty);
        return;
    }
    const allPoints = series.flatMap((s) => s.points);
    const tMin = Math.min(...allPoints.map((p) => p.ts));
    const tMax = Math.max(...allPoints.map((p) => p.ts));
    const vMin = Math.min(0, ...allPoints.map((p) => p.value));
    const vMax = Math.max(...allPoints.map((p) => p.value));
    const x = (ts: number) =>
        MARGIN.left +
        ((ts - tMin) / Math.max(tMax - tMin, 1)) * (WIDTH - MARGIN.left - MARGIN.right);
    const y = (v: number) =>
        HEIGHT -
        MARGIN.bottom -
        ((v - vMin) / Math.max(vMax - vMin, 1e-300)) * (HEIGHT - MARGIN.top - MARGIN.bottom);

    const svg = svgEl("svg");
    svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
    svg.setAttribute("class", "timeseries");
    const axis = svgEl("line");
    axis.setAttribute("x1", String(MARGIN.left));
    axis.setAttribute("y1", String(HEIGHT - MARGIN.bottom));
    axis.setAttribute("x2", String(WIDTH - MARGIN.right));
    axis.setAttribute("y2", String(HEIGHT - MARGIN.bottom));
    axis.setAttribute("stroke", "#888");
    svg.appendChild(axis);

    series.forEach((s, i) => {
        const color = PALETTE[i % PALETTE.length];
        const sorted = [...s.points].sort((a, b) => a.ts - b.ts);
        const line = svgEl("polyline");
        line.setAttribute(
            "points",
            sorted.map((p) => `${x(p.ts).toFixed(1)},${y(p.value).toFixed(1)}`).join(" "),
        );
        line.setAttribute("fill", "none");
        line.setAttribute("stroke", color);
        line.setAttribute("stroke-width", "2");
        line.setAttribute("class", "series-line");
        line.setAttribute("data-label", s.label);
        svg.appendChild(line);
        for (const p of sorted) {
            const dot = svgEl("circle");
            dot.setAttribute("cx", x(p.ts).toFixed(1));
            dot.setAttribute("cy", y(p.value).toFixed(1));
            dot.setAttribute("r", "3");
            dot.setAttribute("fill", color);
            dot.setAttribute("class", "series-point");
            dot.setAttribute("data-value", String(p.value));
            const tip = svgEl("title");
            tip.textContent = `${s.label}\n${fmtTimestamp(p.ts)}: ${fmtNumber(p.value)}`;
            dot.appendChild(tip);
            svg.appendChild(dot);
        }
    });
    container.appendChild(svg);

    const legend = document.createElement("ul");
    legend.className = "legend";
    series.forEach((s, i) => {
        const item = document.createElement("li");
        item.className = "legend-entry";
        item.dataset.label = s.label;
        const swatch = document.createElement("span");
        swatch.className = "swatch";
        swatch.style.background = PALETTE[i % PALETTE.length];
        const last = [...s.points].sort((a, b) => a.ts - b.ts)[s.points.length - 1];
        const text = document.createElement("span");
        text.textContent = `${s.label}: `;
        const value = document.createElement("span");
        value.className = "metric-value";
        value.dataset.raw = String(last.value);
        value.textContent = fmtNumber(last.value);
        item.append(swatch, text, value);
        legend.appendChild(item);
    });
    container.appendChild(legend);
}
