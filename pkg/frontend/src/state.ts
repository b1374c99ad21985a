/**
 * Dashboard state and its URL-hash encoding.
 *
 * The whole view (selected run, bound kind, per-panel filter selections)
 * round-trips through location.hash, so any view is a shareable link.
 */

export type Display = "time-series" | "stacked-share" | "roofline" | "gauge-vs-bound";

export interface PanelSpec {
    id: string;
    title: string;
    measurement: string;
    field: string;
    groupBy: string[];
    /** tag keys offered as filter menus; values are discovered from the store */
    filterTags: string[];
    display: Display;
}

export interface DashboardState {
    run: string | null;
    bound: string;
    /** panel id -> tag -> selected values (empty/missing = all) */
    filters: Record<string, Record<string, string[]>>;
}

export function defaultState(): DashboardState {
    return { run: null, bound: "stream", filters: {} };
}

export function encodeState(state: DashboardState): string {
    const params = new URLSearchParams();
    if (state.run) params.set("run", state.run);
    if (state.bound) params.set("bound", state.bound);
    for (const panel of Object.keys(state.filters).sort()) {
        const tags = state.filters[panel];
        for (const tag of Object.keys(tags).sort()) {
            const values = tags[tag];
            if (values.length) params.set(`f.${panel}.${tag}`, values.join(","));
        }
    }
    return params.toString();
}

export function decodeState(hash: string): DashboardState {
    const state = defaultState();
    const params = new URLSearchParams(hash.replace(/^#/, ""));
    for (const [key, value] of params.entries()) {
        if (key === "run") state.run = value;
        else if (key === "bound") state.bound = value;
        else if (key.startsWith("f.")) {
            const [, panel, tag] = key.split(".", 3);
            if (!panel || !tag) continue;
            (state.filters[panel] ??= {})[tag] = value.split(",").filter(Boolean);
        }
    }
    return state;
}

export function readStateFromLocation(): DashboardState {
    return decodeState(window.location.hash);
}

export function writeStateToLocation(state: DashboardState): void {
    const encoded = encodeState(state);
    const url = encoded ? `#${encoded}` : window.location.pathname;
    window.history.replaceState(null, "", url);
}

/** Selected values for one panel's tag; empty array means "all". */
export function selectedValues(
    state: DashboardState,
    panelId: string,
    tag: string,
): string[] {
    return state.filters[panelId]?.[tag] ?? [];
}

export function setSelectedValues(
    state: DashboardState,
    panelId: string,
    tag: string,
    values: string[],
): void {
    (state.filters[panelId] ??= {})[tag] = values;
}
