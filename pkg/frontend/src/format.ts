/**
 * Pure display formatting.  Every numeric text node in the dashboard is
 * produced by one of these functions applied to an API payload value,
 * which is what the snapshot tests assert.
 */

export function fmtNumber(value: number): string {
    if (!Number.isFinite(value)) return String(value);
    const abs = Math.abs(value);
    if (abs !== 0 && (abs >= 1e6 || abs < 1e-3)) return value.toExponential(3);
    return String(Number(value.toPrecision(6)));
}

export function fmtPercent(fraction: number): string {
    return `${fmtNumber(fraction * 100)}%`;
}

export function fmtTimestamp(ns: number): string {
    return new Date(ns / 1e6).toISOString().slice(0, 10);
}

export function tagLabel(tags: Record<string, string>, skip: string[] = []): string {
    const parts = Object.keys(tags)
        .filter((k) => !skip.includes(k) && tags[k] !== "")
        .sort()
        .map((k) => `${k}=${tags[k]}`);
    return parts.join(" ") || "all";
}
