/**
 * Typed client for the metrics HTTP API.
 *
 * The dashboard performs no analytics of its own: every number it shows
 * comes out of one of these payloads verbatim.  In-flight responses are
 * guarded by sequence numbers so a stale response never overwrites a
 * newer one.
 */

export type FieldValue = number | string;

export interface QueryRequest {
    measurement: string;
    tag_filters?: Record<string, string>;
    group_by?: string[];
    time_range?: [number, number];
    aggregate?: "none" | "mean" | "min" | "max" | "last";
    field?: string;
}

export interface QueryGroup {
    tags: Record<string, string>;
    points?: [number, Record<string, FieldValue>][];
    value?: number;
}

export interface HostProfile {
    hostname: string;
    cpu_model: string;
    cores: number;
    peak_flops_gflops: number;
    bandwidths_gbps: Record<string, number>;
    fixed_frequency_ghz: number | null;
}

export interface RunSummary {
    run_id: string;
    commit_id: string;
    triggered_at: number;
    spec_names: string[];
    hosts: string[];
    job_count: number;
}

export interface RooflineHost {
    hostname: string;
    peak_gflops: number;
    bandwidths_gbps: Record<string, number>;
    knees: Record<string, number>;
}

export interface RooflinePoint {
    label: string;
    host: string;
    operational_intensity: number;
    gflops: number;
    tags: Record<string, string>;
}

export interface MlupsEntry {
    host: string;
    tags: Record<string, string>;
    mlups: number;
    bytes_per_update: number | null;
    bounds: Record<string, number>;
    attainment: Record<string, number>;
}

export interface RooflineData {
    run_id: string;
    commit_id: string;
    hosts: RooflineHost[];
    points: RooflinePoint[];
    mlups: MlupsEntry[];
}

export interface TimeshareGroup {
    tags: Record<string, string>;
    host: string;
    seconds: Record<string, number>;
    fractions: Record<string, number>;
}

export interface TimeshareData {
    run_id: string;
    groups: TimeshareGroup[];
}

export class ApiError extends Error {
    constructor(public status: number, public title: string, detail: string) {
        super(`${title}: ${detail}`);
    }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
    constructor(
        private baseUrl: string = "",
        private fetchFn: FetchLike = (input, init) => fetch(input, init),
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const resp = await this.fetchFn(this.baseUrl + path, init);
        if (!resp.ok) {
            let title = resp.statusText;
            let detail = "";
            try {
                const doc = await resp.json();
                title = doc.title ?? title;
                detail = doc.detail ?? "";
            } catch {
                /* body was not a problem document */
            }
            throw new ApiError(resp.status, title, detail);
        }
        return (await resp.json()) as T;
    }

    async query(req: QueryRequest): Promise<QueryGroup[]> {
        const body = JSON.stringify(req);
        const result = await this.request<{ groups: QueryGroup[] }>(
            "/api/v1/query",
            { method: "POST", headers: { "content-type": "application/json" }, body },
        );
        return result.groups;
    }

    async hosts(): Promise<HostProfile[]> {
        return (await this.request<{ hosts: HostProfile[] }>("/api/v1/hosts")).hosts;
    }

    async runs(): Promise<RunSummary[]> {
        return (await this.request<{ runs: RunSummary[] }>("/api/v1/runs")).runs;
    }

    async roofline(runId: string): Promise<RooflineData> {
        return this.request<RooflineData>(
            `/api/v1/analysis/roofline?run=${encodeURIComponent(runId)}`,
        );
    }

    async timeshare(runId: string): Promise<TimeshareData> {
        return this.request<TimeshareData>(
            `/api/v1/analysis/timeshare?run=${encodeURIComponent(runId)}`,
        );
    }
}

/**
 * Per-panel guard: only the most recently started request may deliver.
 * Older responses resolve to null and must be ignored by the caller.
 */
export class LatestOnly {
    private seq = 0;

    async run<T>(fn: () => Promise<T>): Promise<T | null> {
        const mine = ++this.seq;
        const result = await fn();
        return mine === this.seq ? result : null;
    }
}
