"""Desk-scale host calibration: streaming-loop bandwidth and a matmul
peak-FLOP estimate.

A convenience for filling in a host profile, not a validated
micro-benchmark suite; trusted measurements can always be entered by
hand instead.
"""

from __future__ import annotations

import socket
import time
from typing import Optional

import numpy as np

from .collectors import _cpu_model
from .model import HostProfile


def _time_best(fn, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def measure_bandwidths_gbps(buffer_mb: int = 128, repeats: int = 3) -> dict[str, float]:
    """Copy/load/stream/triad loops over large buffers, GB/s by traffic model."""
    n = buffer_mb * 1024 * 1024 // 8
    a = np.ones(n)
    b = np.full(n, 2.0)
    c = np.full(n, 0.5)
    out = np.empty(n)
    sink = [0.0]

    def copy():
        out[:] = a

    def load():
        sink[0] += float(a.sum())

    def stream():
        np.add(a, b, out=out)

    def triad():
        np.multiply(c, 2.5, out=out)
        np.add(a, out, out=out)

    results = {}
    for kind, fn, bytes_moved in (
        ("copy", copy, 2 * n * 8),
        ("load", load, n * 8),
        ("stream", stream, 3 * n * 8),
        ("triad", triad, 3 * n * 8),
    ):
        seconds = _time_best(fn, repeats)
        results[kind] = bytes_moved / seconds / 1e9
    return results


def measure_peak_gflops(size: int = 1024, repeats: int = 3) -> float:
    """Dense matmul rate as a practical compute-ceiling estimate."""
    rng = np.random.default_rng(0)
    a = rng.random((size, size))
    b = rng.random((size, size))
    seconds = _time_best(lambda: a @ b, repeats)
    return 2.0 * size**3 / seconds / 1e9


def measure_host_profile(
    hostname: Optional[str] = None, buffer_mb: int = 128
) -> HostProfile:
    import os

    return HostProfile(
        hostname=hostname or socket.gethostname(),
        cpu_model=_cpu_model(),
        cores=os.cpu_count() or 1,
        peak_flops_gflops=measure_peak_gflops(),
        bandwidths_gbps=measure_bandwidths_gbps(buffer_mb=buffer_mb),
        fixed_frequency_ghz=None,
    )
