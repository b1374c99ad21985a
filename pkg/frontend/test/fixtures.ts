/** Stub API payloads shaped like the fixture store served by the backend. */

import type {
    QueryGroup,
    RooflineData,
    RunSummary,
    TimeshareData,
} from "../src/api.js";

export const STREAM_BOUND = 779.6052631578947;
export const SRT_MLUPS = 623.6842105263158;

export const RUNS: RunSummary[] = [
    {
        run_id: "fixture-fe2ti",
        commit_id: "d21b8f60c7e5",
        triggered_at: 1709845600000000000,
        spec_names: ["fe2ti-solver-study"],
        hosts: ["icx36"],
        job_count: 2,
    },
    {
        run_id: "fixture-walberla",
        commit_id: "9e8d7c6b5a40",
        triggered_at: 1709932000000000000,
        spec_names: ["uniformgrid-cpu"],
        hosts: ["icx36"],
        job_count: 4,
    },
];

export function ttsGroups(): QueryGroup[] {
    const mk = (solver: string, host: string, compiler: string, values: number[]): QueryGroup => ({
        tags: { solver, host, compiler },
        points: values.map((v, i) => [
            1709500000000000000 + i * 86400_000_000_000,
            { seconds: v },
        ]),
    });
    return [
        mk("ilu", "icx36", "gcc", [41.0, 40.8, 40.2]),
        mk("ilu", "icx36", "intel", [40.9, 40.7, 40.1]),
        mk("pardiso", "icx36", "gcc", [61.2, 60.9, 60.5]),
        mk("pardiso", "icx36", "intel", [61.0, 60.8, 60.4]),
    ];
}

export function rooflineData(): RooflineData {
    return {
        run_id: "fixture-walberla",
        commit_id: "9e8d7c6b5a40",
        hosts: [
            {
                hostname: "icx36",
                peak_gflops: 4608.0,
                bandwidths_gbps: { stream: 237.0, copy: 205.0 },
                knees: { stream: 4608.0 / 237.0, copy: 4608.0 / 205.0 },
            },
        ],
        points: [
            {
                label: "ilu/solve",
                host: "icx36",
                operational_intensity: 0.45,
                gflops: 25.0,
                tags: { host: "icx36", solver: "ilu", region: "solve" },
            },
            {
                label: "pardiso/solve",
                host: "icx36",
                operational_intensity: 0.92,
                gflops: 52.0,
                tags: { host: "icx36", solver: "pardiso", region: "solve" },
            },
        ],
        mlups: [
            {
                host: "icx36",
                tags: { host: "icx36", collision: "srt" },
                mlups: SRT_MLUPS,
                bytes_per_update: 304,
                bounds: { stream: STREAM_BOUND, copy: 205e9 / 304 / 1e6 },
                attainment: {
                    stream: SRT_MLUPS / STREAM_BOUND,
                    copy: SRT_MLUPS / (205e9 / 304 / 1e6),
                },
            },
        ],
    };
}

export function timeshareData(): TimeshareData {
    const mk = (host: string, comp: number, sync: number, comm: number) => {
        const total = comp + sync + comm;
        return {
            tags: { host },
            host,
            seconds: { computation: comp, synchronization: sync, communication: comm },
            fractions: {
                computation: comp / total,
                synchronization: sync / total,
                communication: comm / total,
            },
        };
    };
    return {
        run_id: "fixture-walberla",
        groups: [
            mk("skylakesp2", 67.6, 18.2, 44.2),
            mk("icx36", 55.0, 16.5, 38.5),
            mk("rome1", 69.0, 24.0, 57.0),
            mk("genoa2", 52.25, 12.35, 30.4),
        ],
    };
}

type Payload = unknown;

/** fetch stub serving canned payloads keyed by path prefix. */
export function stubFetch(routes: Record<string, Payload | (() => Payload)>) {
    const calls: string[] = [];
    const fetchFn = async (input: string): Promise<Response> => {
        calls.push(input);
        for (const [prefix, payload] of Object.entries(routes)) {
            if (input.startsWith(prefix)) {
                const body = typeof payload === "function" ? (payload as () => Payload)() : payload;
                return new Response(JSON.stringify(body), {
                    status: 200,
                    headers: { "content-type": "application/json" },
                });
            }
        }
        return new Response(
            JSON.stringify({ title: "unknown", status: 404, detail: input }),
            { status: 404, headers: { "content-type": "application/problem+json" } },
        );
    };
    return { fetchFn, calls };
}
