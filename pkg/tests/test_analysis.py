import math
import random

import pytest

from cbench.analysis import (
    InsufficientData,
    LengthMismatch,
    RegressionConfig,
    TimeShare,
    UnknownBandwidthKind,
    ZeroBound,
    ZeroTotal,
    detect_regression,
    mlups_bound,
    relative_performance,
    roofline_bound,
    roofline_knee,
    time_share,
    verify_numerics,
)
from cbench.model import HostProfile


def host(peak=100.0, stream=100.0, **extra):
    return HostProfile(
        hostname="test",
        cpu_model="",
        cores=8,
        peak_flops_gflops=peak,
        bandwidths_gbps={"stream": stream, **extra},
    )


def test_roofline_memory_side():
    assert roofline_bound(0.5, host(peak=100, stream=100), "stream") == 50.0


def test_roofline_degenerate_zero_intensity():
    assert roofline_bound(0.0, host(), "stream") == 0.0


def test_roofline_knee_returns_peak():
    h = host(peak=100, stream=40)
    knee = roofline_knee(h, "stream")
    assert knee == 2.5
    assert roofline_bound(knee, h, "stream") == 100.0


def test_roofline_unknown_kind():
    with pytest.raises(UnknownBandwidthKind):
        roofline_bound(1.0, host(), "copy")


def test_roofline_monotone_and_saturating():
    rng = random.Random(13)
    for _ in range(100):
        h = host(peak=rng.uniform(10, 5000), stream=rng.uniform(10, 1000))
        knee = roofline_knee(h, "stream")
        xs = sorted(rng.uniform(0, 4 * knee) for _ in range(20))
        values = [roofline_bound(x, h, "stream") for x in xs]
        assert all(b >= a for a, b in zip(values, values[1:]))
        for x in xs:
            if x >= knee:
                assert roofline_bound(x, h, "stream") == h.peak_flops_gflops
            assert roofline_bound(x, h, "stream") <= h.peak_flops_gflops + 1e-9


def test_mlups_bound_published_bandwidth_arithmetic():
    h = host(stream=237.0)
    assert abs(mlups_bound(h, "stream", 304) - 779.6) < 0.1


def test_mlups_bound_unit_sanity():
    assert mlups_bound(host(stream=1.0), "stream", 1.0) == 1000.0
    assert abs(mlups_bound(host(stream=10.0), "stream", 144) - 69.44) < 0.01


def test_mlups_bound_scaling_properties():
    rng = random.Random(5)
    for _ in range(50):
        bw = rng.uniform(1, 500)
        bytes_per_update = rng.uniform(8, 1024)
        c = rng.uniform(0.1, 10)
        base = mlups_bound(host(stream=bw), "stream", bytes_per_update)
        assert math.isclose(
            mlups_bound(host(stream=c * bw), "stream", bytes_per_update), c * base
        )
        assert math.isclose(
            mlups_bound(host(stream=bw), "stream", c * bytes_per_update), base / c
        )


def test_relative_performance():
    assert relative_performance(80.0, 100.0) == 0.8
    assert relative_performance(100.0, 100.0) == 1.0
    assert relative_performance(0.0, 100.0) == 0.0
    assert relative_performance(120.0, 100.0) > 1.0  # pessimistic bound flagged upstream
    with pytest.raises(ZeroBound):
        relative_performance(1.0, 0.0)


def test_time_share_example():
    shares = time_share(
        {"computation": 50.0, "synchronization": 15.0, "communication": 35.0}
    )
    by_cat = {s.category: s.fraction for s in shares}
    assert by_cat == {
        "computation": 0.50,
        "synchronization": 0.15,
        "communication": 0.35,
    }
    assert 0.45 <= by_cat["computation"] <= 0.55


def test_time_share_single_category():
    shares = time_share({"computation": 3.0})
    assert {s.category: s.fraction for s in shares} == {
        "computation": 1.0,
        "synchronization": 0.0,
        "communication": 0.0,
    }


def test_time_share_proportionality_and_scale_invariance():
    rng = random.Random(7)
    for _ in range(50):
        durations = {
            "computation": rng.uniform(0.1, 100),
            "synchronization": rng.uniform(0.1, 100),
            "communication": rng.uniform(0.1, 100),
        }
        total = sum(durations.values())
        shares = {s.category: s.fraction for s in time_share(durations)}
        assert abs(sum(shares.values()) - 1.0) <= 1e-9
        for cat, dur in durations.items():
            assert math.isclose(shares[cat], dur / total)
        c = rng.uniform(0.01, 100)
        scaled = {k: c * v for k, v in durations.items()}
        rescaled = {s.category: s.fraction for s in time_share(scaled)}
        for cat in shares:
            assert math.isclose(shares[cat], rescaled[cat])


def test_time_share_substeps():
    shares = time_share(
        {"computation": 6.0, "synchronization": 2.0, "communication": 2.0},
        substeps={"computation": {"stream": 4.0, "curvature": 2.0}},
    )
    comp = next(s for s in shares if s.category == "computation")
    assert comp.substeps == {"stream": 0.4, "curvature": 0.2}
    assert abs(sum(comp.substeps.values()) - comp.fraction) <= 1e-9


def test_time_share_zero_total():
    with pytest.raises(ZeroTotal):
        time_share({"computation": 0.0})


def test_timeshare_invariant_enforced():
    with pytest.raises(ValueError):
        TimeShare(category="computation", fraction=0.5, substeps={"a": 0.1})


def test_regression_example_from_median_window():
    cfg = RegressionConfig(window=5, threshold_fraction=0.10, direction="higher-is-better")
    verdict = detect_regression([100, 101, 99, 100, 100, 80], cfg)
    assert verdict.regression
    assert math.isclose(verdict.magnitude, 0.20)
    assert verdict.baseline == 100


def test_regression_constant_series_ok():
    cfg = RegressionConfig(window=3, threshold_fraction=0.05)
    assert not detect_regression([50.0] * 6, cfg).regression


def test_regression_lower_is_better_direction():
    cfg = RegressionConfig(window=4, threshold_fraction=0.10, direction="lower-is-better")
    worse = detect_regression([40, 40, 40, 40, 48], cfg)
    assert worse.regression
    assert math.isclose(worse.magnitude, 0.20)
    better = detect_regression([40, 40, 40, 40, 32], cfg)
    assert not better.regression


def test_regression_insufficient_data():
    cfg = RegressionConfig(window=5, threshold_fraction=0.1)
    with pytest.raises(InsufficientData):
        detect_regression([1.0] * 5, cfg)


def test_regression_scale_invariance():
    rng = random.Random(3)
    cfg = RegressionConfig(window=4, threshold_fraction=0.15)
    for _ in range(50):
        series = [rng.uniform(10, 100) for _ in range(8)]
        c = rng.uniform(0.01, 1000)
        a = detect_regression(series, cfg)
        b = detect_regression([c * v for v in series], cfg)
        assert a.regression == b.regression
        assert math.isclose(a.magnitude, b.magnitude, rel_tol=1e-9)


def test_verify_numerics():
    check = verify_numerics([1.0, 2.0], [1.0, 2.0], 1e-12)
    assert check.passed and check.max_abs_diff == 0.0
    check = verify_numerics([1.0, 2.0 + 1e-12], [1.0, 2.0], 1e-9)
    assert check.passed
    check = verify_numerics([1.0, 2.1], [1.0, 2.0], 1e-3)
    assert not check.passed
    assert math.isclose(check.max_abs_diff, 0.1)
    with pytest.raises(LengthMismatch):
        verify_numerics([1.0], [1.0, 2.0], 1e-9)


def test_verify_numerics_on_kernel_density_field():
    import numpy as np

    import oracle_lbm
    from cbench import lbm

    rho0 = 1.0 + 0.05 * (2 * np.random.default_rng(21).random((8, 8)) - 1)
    u0 = 0.05 * (2 * np.random.default_rng(22).random((8, 8, 2)) - 1)
    field = lbm.from_macroscopics(rho0, u0)
    reference = [
        [[float(field.current[y, x, i]) for i in range(9)] for x in range(8)]
        for y in range(8)
    ]
    cfg = lbm.KernelConfig(nx=8, ny=8, tau=0.8, steps=10, boundary="periodic")
    lbm.run(cfg, field)
    rho, _ = lbm.macroscopics(field.current)
    expected = oracle_lbm.run(reference, 10, 0.8)
    ref_rho = [sum(expected[y][x]) for y in range(8) for x in range(8)]
    check = verify_numerics(list(rho.ravel()), ref_rho, 1e-13)
    assert check.passed
    assert check.max_abs_diff <= 1e-13


def test_regression_config_validation():
    with pytest.raises(ValueError):
        RegressionConfig(window=1)
    with pytest.raises(ValueError):
        RegressionConfig(threshold_fraction=0.0)
    with pytest.raises(ValueError):
        RegressionConfig(direction="sideways")
