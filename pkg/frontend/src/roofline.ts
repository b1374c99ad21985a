/**
 * Log-log roofline view: one memory ceiling per measured bandwidth kind,
 * a compute ceiling at peak, counter-derived points colored by a variant
 * tag.  Scroll zooms, drag pans, double-click resets, legend entries
 * toggle their point group.
 */

import type { RooflineData } from "./api.js";
import { fmtNumber } from "./format.js";
import { PALETTE } from "./timeseries.js";

const WIDTH = 720;
const HEIGHT = 420;
const MARGIN = { left: 70, right: 24, top: 20, bottom: 46 };

function svgEl(tag: string): SVGElement {
    return document.createElementNS("http://www.w3.org/2000/svg", tag) as SVGElement;
}

interface Frame {
    x(v: number): number;
    y(v: number): number;
    xlo: number;
    xhi: number;
    ylo: number;
    yhi: number;
}

function makeFrame(data: RooflineData): Frame {
    const knees = data.hosts.flatMap((h) => Object.values(h.knees));
    const peaks = data.hosts.map((h) => h.peak_gflops);
    const xs = data.points.map((p) => p.operational_intensity).filter((v) => v > 0);
    const ys = data.points.map((p) => p.gflops).filter((v) => v > 0);
    const xlo = Math.min(...knees, ...xs, 0.1) / 8;
    const xhi = Math.max(...knees, ...xs, 10) * 8;
    const ylo = Math.min(...ys, ...peaks, 1) / 64;
    const yhi = Math.max(...ys, ...peaks, 100) * 2;
    const lx = Math.log10(xlo);
    const ux = Math.log10(xhi);
    const ly = Math.log10(ylo);
    const uy = Math.log10(yhi);
    return {
        xlo, xhi, ylo, yhi,
        x: (v) =>
            MARGIN.left +
            ((Math.log10(v) - lx) / (ux - lx)) * (WIDTH - MARGIN.left - MARGIN.right),
        y: (v) =>
            MARGIN.top +
            (1 - (Math.log10(v) - ly) / (uy - ly)) * (HEIGHT - MARGIN.top - MARGIN.bottom),
    };
}

/** The tag used to color points: first variant-like key present. */
export function colorTag(data: RooflineData): string | null {
    const skip = new Set(["host", "job_key", "commit", "compiler", "region", "unit"]);
    for (const point of data.points) {
        for (const key of Object.keys(point.tags).sort()) {
            if (!skip.has(key)) return key;
        }
    }
    return null;
}

export function renderRoofline(container: HTMLElement, data: RooflineData): void {
    container.textContent = "";
    const frame = makeFrame(data);
    const svg = svgEl("svg") as SVGSVGElement;
    svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
    svg.setAttribute("class", "roofline");

    // decade grid
    for (let d = Math.ceil(Math.log10(frame.xlo)); d <= Math.floor(Math.log10(frame.xhi)); d++) {
        const px = frame.x(10 ** d);
        const grid = svgEl("line");
        grid.setAttribute("x1", px.toFixed(1));
        grid.setAttribute("x2", px.toFixed(1));
        grid.setAttribute("y1", String(MARGIN.top));
        grid.setAttribute("y2", String(HEIGHT - MARGIN.bottom));
        grid.setAttribute("stroke", "#e4e4e4");
        svg.appendChild(grid);
        const label = svgEl("text");
        label.setAttribute("x", px.toFixed(1));
        label.setAttribute("y", String(HEIGHT - MARGIN.bottom + 16));
        label.setAttribute("text-anchor", "middle");
        label.setAttribute("class", "tick");
        label.textContent = `1e${d}`;
        svg.appendChild(label);
    }
    for (let d = Math.ceil(Math.log10(frame.ylo)); d <= Math.floor(Math.log10(frame.yhi)); d++) {
        const py = frame.y(10 ** d);
        const grid = svgEl("line");
        grid.setAttribute("x1", String(MARGIN.left));
        grid.setAttribute("x2", String(WIDTH - MARGIN.right));
        grid.setAttribute("y1", py.toFixed(1));
        grid.setAttribute("y2", py.toFixed(1));
        grid.setAttribute("stroke", "#e4e4e4");
        svg.appendChild(grid);
        const label = svgEl("text");
        label.setAttribute("x", String(MARGIN.left - 6));
        label.setAttribute("y", (py + 4).toFixed(1));
        label.setAttribute("text-anchor", "end");
        label.setAttribute("class", "tick");
        label.textContent = `1e${d}`;
        svg.appendChild(label);
    }

    for (const host of data.hosts) {
        const peak = host.peak_gflops;
        for (const [kind, bw] of Object.entries(host.bandwidths_gbps).sort()) {
            const knee = peak / bw;
            const xStart = Math.max(frame.xlo, frame.ylo / bw);
            const line = svgEl("line");
            line.setAttribute("x1", frame.x(xStart).toFixed(1));
            line.setAttribute("y1", frame.y(xStart * bw).toFixed(1));
            line.setAttribute("x2", frame.x(knee).toFixed(1));
            line.setAttribute("y2", frame.y(peak).toFixed(1));
            line.setAttribute("stroke", "#555");
            line.setAttribute("stroke-width", "1.5");
            line.setAttribute("class", "ceiling memory-ceiling");
            line.dataset.host = host.hostname;
            line.dataset.kind = kind;
            line.dataset.bandwidth = String(bw);
            line.dataset.knee = String(knee);
            const tip = svgEl("title");
            tip.textContent = `${host.hostname} ${kind}: ${fmtNumber(bw)} GB/s`;
            line.appendChild(tip);
            svg.appendChild(line);
        }
        const knees = Object.values(host.bandwidths_gbps).map((bw) => peak / bw);
        const compute = svgEl("line");
        compute.setAttribute("x1", frame.x(Math.min(...knees)).toFixed(1));
        compute.setAttribute("y1", frame.y(peak).toFixed(1));
        compute.setAttribute("x2", frame.x(frame.xhi).toFixed(1));
        compute.setAttribute("y2", frame.y(peak).toFixed(1));
        compute.setAttribute("stroke", "#b71c1c");
        compute.setAttribute("stroke-width", "1.8");
        compute.setAttribute("class", "ceiling compute-ceiling");
        compute.dataset.host = host.hostname;
        compute.dataset.peak = String(peak);
        const tip = svgEl("title");
        tip.textContent = `${host.hostname} peak: ${fmtNumber(peak)} GFLOP/s`;
        compute.appendChild(tip);
        svg.appendChild(compute);
    }

    const tag = colorTag(data);
    const colorOf = new Map<string, string>();
    for (const point of data.points) {
        if (point.operational_intensity <= 0 || point.gflops <= 0) continue;
        const key = tag ? point.tags[tag] ?? "other" : point.label;
        if (!colorOf.has(key)) colorOf.set(key, PALETTE[colorOf.size % PALETTE.length]);
        const dot = svgEl("circle");
        dot.setAttribute("cx", frame.x(point.operational_intensity).toFixed(1));
        dot.setAttribute("cy", frame.y(point.gflops).toFixed(1));
        dot.setAttribute("r", "5");
        dot.setAttribute("fill", colorOf.get(key)!);
        dot.setAttribute("fill-opacity", "0.85");
        dot.setAttribute("stroke", "#222");
        dot.setAttribute("class", "roofline-point");
        dot.dataset.group = key;
        dot.dataset.intensity = String(point.operational_intensity);
        dot.dataset.gflops = String(point.gflops);
        const tip = svgEl("title");
        tip.textContent =
            `${point.label}\nOI ${fmtNumber(point.operational_intensity)} FLOP/B\n` +
            `${fmtNumber(point.gflops)} GFLOP/s`;
        dot.appendChild(tip);
        svg.appendChild(dot);
    }

    const xlabel = svgEl("text");
    xlabel.setAttribute("x", String(WIDTH / 2));
    xlabel.setAttribute("y", String(HEIGHT - 8));
    xlabel.setAttribute("text-anchor", "middle");
    xlabel.textContent = "Operational intensity [FLOP/byte]";
    svg.appendChild(xlabel);
    const ylabel = svgEl("text");
    ylabel.setAttribute("x", "16");
    ylabel.setAttribute("y", String(HEIGHT / 2));
    ylabel.setAttribute("text-anchor", "middle");
    ylabel.setAttribute("transform", `rotate(-90 16 ${HEIGHT / 2})`);
    ylabel.textContent = "Performance [GFLOP/s]";
    svg.appendChild(ylabel);

    attachPanZoom(svg);
    container.appendChild(svg);

    // legend with visibility toggles per color group
    const legend = document.createElement("ul");
    legend.className = "legend";
    for (const [key, color] of colorOf.entries()) {
        const item = document.createElement("li");
        item.className = "legend-entry";
        item.dataset.group = key;
        const swatch = document.createElement("span");
        swatch.className = "swatch";
        swatch.style.background = color;
        item.append(swatch, document.createTextNode(tag ? `${tag}=${key}` : key));
        item.addEventListener("click", () => {
            const hidden = item.classList.toggle("hidden-group");
            svg.querySelectorAll<SVGElement>(`.roofline-point[data-group="${key}"]`).forEach(
                (dot) => {
                    dot.style.display = hidden ? "none" : "";
                },
            );
        });
        legend.appendChild(item);
    }
    container.appendChild(legend);
}

function attachPanZoom(svg: SVGSVGElement): void {
    const base = [0, 0, WIDTH, HEIGHT];
    let vb = [...base];
    const apply = () => svg.setAttribute("viewBox", vb.join(" "));
    svg.addEventListener("wheel", (ev) => {
        ev.preventDefault();
        const factor = ev.deltaY > 0 ? 1.15 : 1 / 1.15;
        const rect = svg.getBoundingClientRect();
        const px = vb[0] + ((ev.clientX - rect.left) / Math.max(rect.width, 1)) * vb[2];
        const py = vb[1] + ((ev.clientY - rect.top) / Math.max(rect.height, 1)) * vb[3];
        vb[2] *= factor;
        vb[3] *= factor;
        vb[0] = px - (px - vb[0]) * factor;
        vb[1] = py - (py - vb[1]) * factor;
        apply();
    });
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    svg.addEventListener("mousedown", (ev) => {
        dragging = true;
        lastX = ev.clientX;
        lastY = ev.clientY;
    });
    svg.addEventListener("mousemove", (ev) => {
        if (!dragging) return;
        const rect = svg.getBoundingClientRect();
        vb[0] -= ((ev.clientX - lastX) / Math.max(rect.width, 1)) * vb[2];
        vb[1] -= ((ev.clientY - lastY) / Math.max(rect.height, 1)) * vb[3];
        lastX = ev.clientX;
        lastY = ev.clientY;
        apply();
    });
    svg.addEventListener("mouseup", () => {
        dragging = false;
    });
    svg.addEventListener("dblclick", () => {
        vb = [...base];
        apply();
    });
}
