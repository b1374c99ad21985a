/**
 * Relative-performance gauge: measured MLUPS against the selected
 * bandwidth-derived ceiling.  The attainment fraction for every bound
 * kind comes precomputed from the analysis endpoint; switching the
 * bound selector only picks a different payload value.
 */

import type { MlupsEntry } from "./api.js";
import { fmtNumber, fmtPercent, tagLabel } from "./format.js";

export function renderGauge(
    container: HTMLElement,
    entries: MlupsEntry[],
    bound: string,
): void {
    container.textContent = "";
    const usable = entries.filter((e) => e.attainment && bound in e.attainment);
    if (!usable.length) {
        const empty = document.createElement("p");
        empty.className = "no-data";
        empty.textContent = "no data";
        container.appendChild(empty);
        return;
    }
    for (const entry of usable) {
        const fraction = entry.attainment[bound];
        const row = document.createElement("div");
        row.className = "gauge-row";
        row.dataset.host = entry.host;
        row.dataset.bound = bound;

        const label = document.createElement("span");
        label.className = "gauge-label";
        label.textContent = `${entry.host} ${tagLabel(entry.tags, ["host", "commit", "job_key", "compiler"])}`;

        const bar = document.createElement("div");
        bar.className = "gauge-bar";
        const fill = document.createElement("div");
        fill.className = "gauge-fill" + (fraction > 1 ? " over-bound" : "");
        fill.style.width = `${Math.min(fraction, 1) * 100}%`;
        bar.appendChild(fill);

        const value = document.createElement("span");
        value.className = "metric-value gauge-value";
        value.dataset.raw = String(fraction);
        value.textContent = fmtPercent(fraction);

        const detail = document.createElement("span");
        detail.className = "gauge-detail";
        const measured = document.createElement("span");
        measured.className = "metric-value";
        measured.dataset.raw = String(entry.mlups);
        measured.textContent = fmtNumber(entry.mlups);
        const ceiling = document.createElement("span");
        ceiling.className = "metric-value";
        ceiling.dataset.raw = String(entry.bounds[bound]);
        ceiling.textContent = fmtNumber(entry.bounds[bound]);
        detail.append(" ", measured, " of ", ceiling, ` MLUPS (${bound})`);

        row.append(label, bar, value, detail);
        container.appendChild(row);
    }
}

/** Bound kinds available across entries, for the selector menu. */
export function boundKinds(entries: MlupsEntry[]): string[] {
    const kinds = new Set<string>();
    for (const entry of entries) {
        for (const kind of Object.keys(entry.bounds ?? {})) kinds.add(kind);
    }
    return [...kinds].sort();
}
