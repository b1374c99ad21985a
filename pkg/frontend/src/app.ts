/**
 * Dashboard bootstrap: builds the panel DOM, wires filter menus, the run
 * selector and the bound selector, and keeps everything in sync with the
 * URL hash.  A failing request marks only its own panel with an error
 * badge; the rest of the page stays alive.
 */

import { ApiClient, LatestOnly, QueryGroup, RooflineData } from "./api.js";
import { boundKinds, renderGauge } from "./gauge.js";
import { renderRoofline } from "./roofline.js";
import { renderShares } from "./shares.js";
import {
    DashboardState,
    PanelSpec,
    readStateFromLocation,
    selectedValues,
    setSelectedValues,
    writeStateToLocation,
} from "./state.js";
import { groupsToSeries, renderTimeSeries } from "./timeseries.js";

export const DEFAULT_PANELS: PanelSpec[] = [
    {
        id: "tts",
        title: "Time to solution [s]",
        measurement: "tts",
        field: "seconds",
        groupBy: ["solver", "host", "compiler", "parallelization"],
        filterTags: ["solver", "host"],
        display: "time-series",
    },
    {
        id: "mlups",
        title: "MLUPS per process",
        measurement: "mlups",
        field: "mlups_per_process",
        groupBy: ["collision", "host", "compiler"],
        filterTags: ["collision", "host"],
        display: "time-series",
    },
    {
        id: "intensity",
        title: "Operational intensity [FLOP/byte]",
        measurement: "perf_counters",
        field: "value",
        groupBy: ["solver", "collision", "region", "host"],
        filterTags: ["region", "host"],
        display: "time-series",
    },
    {
        id: "relperf",
        title: "Relative performance vs bound",
        measurement: "mlups",
        field: "mlups_per_process",
        groupBy: [],
        filterTags: [],
        display: "gauge-vs-bound",
    },
    {
        id: "timeshare",
        title: "Time shares",
        measurement: "time_share",
        field: "computation",
        groupBy: [],
        filterTags: [],
        display: "stacked-share",
    },
    {
        id: "roofline",
        title: "Roofline",
        measurement: "perf_counters",
        field: "value",
        groupBy: [],
        filterTags: [],
        display: "roofline",
    },
];

interface PanelHandle {
    spec: PanelSpec;
    root: HTMLElement;
    body: HTMLElement;
    filters: HTMLElement;
    badge: HTMLElement;
    guard: LatestOnly;
    renderCount: number;
}

export class Dashboard {
    state: DashboardState;
    panels = new Map<string, PanelHandle>();
    private runSelect: HTMLSelectElement | null = null;
    private boundSelect: HTMLSelectElement | null = null;

    constructor(
        private api: ApiClient,
        private root: HTMLElement,
        private specs: PanelSpec[] = DEFAULT_PANELS,
    ) {
        this.state = readStateFromLocation();
    }

    async boot(): Promise<void> {
        this.buildChrome();
        for (const spec of this.specs) this.buildPanel(spec);
        try {
            const runs = await this.api.runs();
            if (!this.state.run && runs.length) {
                this.state.run = runs[runs.length - 1].run_id;
            }
            if (this.runSelect) {
                this.runSelect.textContent = "";
                for (const run of runs) {
                    const option = document.createElement("option");
                    option.value = run.run_id;
                    option.textContent = `${run.run_id} (${run.commit_id.slice(0, 10)})`;
                    if (run.run_id === this.state.run) option.selected = true;
                    this.runSelect.appendChild(option);
                }
            }
        } catch {
            /* run-scoped panels will show their own badges */
        }
        writeStateToLocation(this.state);
        await this.refreshAll();
    }

    private buildChrome(): void {
        const bar = document.createElement("header");
        bar.className = "topbar";
        const title = document.createElement("h1");
        title.textContent = "cbench dashboard";
        bar.appendChild(title);

        const runLabel = document.createElement("label");
        runLabel.textContent = "run ";
        this.runSelect = document.createElement("select");
        this.runSelect.id = "run-select";
        this.runSelect.addEventListener("change", () => {
            this.state.run = this.runSelect!.value;
            writeStateToLocation(this.state);
            void this.refreshRunScoped();
        });
        runLabel.appendChild(this.runSelect);
        bar.appendChild(runLabel);

        const boundLabel = document.createElement("label");
        boundLabel.textContent = "bound ";
        this.boundSelect = document.createElement("select");
        this.boundSelect.id = "bound-select";
        this.boundSelect.addEventListener("change", () => {
            this.state.bound = this.boundSelect!.value;
            writeStateToLocation(this.state);
            void this.refreshPanel("relperf");
        });
        boundLabel.appendChild(this.boundSelect);
        bar.appendChild(boundLabel);

        this.root.appendChild(bar);
    }

    private buildPanel(spec: PanelSpec): void {
        const section = document.createElement("section");
        section.className = "panel";
        section.id = `panel-${spec.id}`;
        const heading = document.createElement("h2");
        heading.textContent = spec.title;
        const badge = document.createElement("span");
        badge.className = "error-badge hidden";
        heading.appendChild(badge);
        const filters = document.createElement("div");
        filters.className = "filters";
        const body = document.createElement("div");
        body.className = "panel-body";
        section.append(heading, filters, body);
        this.root.appendChild(section);
        this.panels.set(spec.id, {
            spec,
            root: section,
            body,
            filters,
            badge,
            guard: new LatestOnly(),
            renderCount: 0,
        });
    }

    async refreshAll(): Promise<void> {
        await Promise.all([...this.panels.keys()].map((id) => this.refreshPanel(id)));
    }

    async refreshRunScoped(): Promise<void> {
        await Promise.all(
            [...this.panels.values()]
                .filter((p) => p.spec.display !== "time-series")
                .map((p) => this.refreshPanel(p.spec.id)),
        );
    }

    /** Re-render one panel; other panels' DOM is left untouched. */
    async refreshPanel(id: string): Promise<void> {
        const panel = this.panels.get(id);
        if (!panel) return;
        try {
            const rendered = await panel.guard.run(() => this.loadAndRender(panel));
            if (rendered === null) return; // stale response discarded
            panel.badge.classList.add("hidden");
            panel.badge.textContent = "";
            panel.renderCount += 1;
        } catch (err) {
            panel.badge.textContent =
                err instanceof Error ? err.message : "request failed";
            panel.badge.classList.remove("hidden");
        }
    }

    private async loadAndRender(panel: PanelHandle): Promise<boolean> {
        const spec = panel.spec;
        if (spec.display === "time-series") {
            const tagFilters: Record<string, string> = {};
            if (spec.measurement === "perf_counters") {
                tagFilters["metric"] = "Operational intensity";
            }
            const groups = await this.api.query({
                measurement: spec.measurement,
                tag_filters: tagFilters,
                group_by: spec.groupBy,
            });
            this.renderFilterMenus(panel, groups);
            const selection: Record<string, string[]> = {};
            for (const tag of spec.filterTags) {
                selection[tag] = selectedValues(this.state, spec.id, tag);
            }
            renderTimeSeries(panel.body, groupsToSeries(groups, spec.field), selection);
            return true;
        }
        if (!this.state.run) {
            panel.body.textContent = "";
            const note = document.createElement("p");
            note.className = "no-data";
            note.textContent = "no run selected";
            panel.body.appendChild(note);
            return true;
        }
        if (spec.display === "stacked-share") {
            const data = await this.api.timeshare(this.state.run);
            renderShares(panel.body, data.groups);
            return true;
        }
        const data: RooflineData = await this.api.roofline(this.state.run);
        if (spec.display === "gauge-vs-bound") {
            this.populateBoundSelector(data);
            renderGauge(panel.body, data.mlups, this.state.bound);
        } else {
            renderRoofline(panel.body, data);
        }
        return true;
    }

    private populateBoundSelector(data: RooflineData): void {
        if (!this.boundSelect) return;
        const kinds = boundKinds(data.mlups);
        if (!kinds.length) return;
        this.boundSelect.textContent = "";
        if (!kinds.includes(this.state.bound)) this.state.bound = kinds[0];
        for (const kind of kinds) {
            const option = document.createElement("option");
            option.value = kind;
            option.textContent = kind;
            if (kind === this.state.bound) option.selected = true;
            this.boundSelect.appendChild(option);
        }
    }

    /** Multi-select menus listing the tag values discovered from the store. */
    private renderFilterMenus(panel: PanelHandle, groups: QueryGroup[]): void {
        const spec = panel.spec;
        panel.filters.textContent = "";
        for (const tag of spec.filterTags) {
            const values = [
                ...new Set(groups.map((g) => g.tags[tag]).filter(Boolean)),
            ].sort();
            if (!values.length) continue;
            const label = document.createElement("label");
            label.textContent = `${tag} `;
            const select = document.createElement("select");
            select.multiple = true;
            select.className = "filter-select";
            select.dataset.tag = tag;
            const selected = selectedValues(this.state, spec.id, tag);
            for (const value of values) {
                const option = document.createElement("option");
                option.value = value;
                option.textContent = value;
                option.selected = selected.includes(value);
                select.appendChild(option);
            }
            select.addEventListener("change", () => {
                const chosen = [...select.selectedOptions].map((o) => o.value);
                setSelectedValues(this.state, spec.id, tag, chosen);
                writeStateToLocation(this.state);
                void this.refreshPanel(spec.id);
            });
            label.appendChild(select);
            panel.filters.appendChild(label);
        }
    }
}

export function mount(root: HTMLElement, apiBase = ""): Dashboard {
    const dashboard = new Dashboard(new ApiClient(apiBase), root);
    void dashboard.boot();
    return dashboard;
}

declare global {
    interface Window {
        cbenchDashboard?: Dashboard;
    }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
    window.cbenchDashboard = mount(document.getElementById("app")!);
}
