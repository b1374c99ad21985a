/**
 * Stacked time-share bars: computation / synchronization / communication
 * fractions per host, straight from the timeshare endpoint.
 */

import type { TimeshareGroup } from "./api.js";
import { fmtPercent } from "./format.js";

export const SHARE_COLORS: Record<string, string> = {
    computation: "#2e7d32",
    synchronization: "#1565c0",
    communication: "#c62828",
};

const CATEGORIES = ["computation", "synchronization", "communication"];

export function renderShares(container: HTMLElement, groups: TimeshareGroup[]): void {
    container.textContent = "";
    if (!groups.length) {
        const empty = document.createElement("p");
        empty.className = "no-data";
        empty.textContent = "no data";
        container.appendChild(empty);
        return;
    }
    for (const group of [...groups].sort((a, b) => a.host.localeCompare(b.host))) {
        const row = document.createElement("div");
        row.className = "share-row";
        row.dataset.host = group.host;

        const label = document.createElement("span");
        label.className = "share-label";
        label.textContent = group.host || "all";
        row.appendChild(label);

        const bar = document.createElement("div");
        bar.className = "share-bar";
        for (const category of CATEGORIES) {
            const fraction = group.fractions[category] ?? 0;
            const segment = document.createElement("div");
            segment.className = `share-segment share-${category}`;
            segment.style.width = `${fraction * 100}%`;
            segment.style.background = SHARE_COLORS[category];
            segment.dataset.category = category;
            segment.dataset.raw = String(fraction);
            segment.title = `${group.host} ${category}: ${fmtPercent(fraction)}`;
            const text = document.createElement("span");
            text.className = "metric-value share-value";
            text.dataset.raw = String(fraction);
            text.textContent = fmtPercent(fraction);
            segment.appendChild(text);
            bar.appendChild(segment);
        }
        row.appendChild(bar);
        container.appendChild(row);
    }
    const legend = document.createElement("ul");
    legend.className = "legend";
    for (const category of CATEGORIES) {
        const item = document.createElement("li");
        const swatch = document.createElement("span");
        swatch.className = "swatch";
        swatch.style.background = SHARE_COLORS[category];
        item.append(swatch, document.createTextNode(category));
        legend.appendChild(item);
    }
    container.appendChild(legend);
}
