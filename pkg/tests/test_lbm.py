import random

import numpy as np
import pytest

import oracle_lbm
from cbench import lbm
from cbench.collectors import parse_app_output
from cbench.pipeline import DEFAULT_RULES
from conftest import make_job


def random_admissible_field(rng, ny, nx, perturb=0.0):
    """Equilibrium populations for random low-Mach macroscopics."""
    rho = 1.0 + 0.05 * (2 * np.array([[rng.random() for _ in range(nx)] for _ in range(ny)]) - 1)
    u = 0.05 * (2 * np.random.default_rng(rng.randrange(2**31)).random((ny, nx, 2)) - 1)
    field = lbm.from_macroscopics(rho, u)
    if perturb:
        noise = perturb * np.random.default_rng(rng.randrange(2**31)).random(
            field.current.shape
        )
        field.f[field.active] += noise
    return field


def test_weights_and_velocity_set():
    assert abs(lbm.W.sum() - 1.0) < 1e-15
    assert lbm.W[0] == 4 / 9
    assert sorted(lbm.W[1:5]) == [1 / 9] * 4
    assert sorted(lbm.W[5:]) == [1 / 36] * 4
    for i in range(9):
        assert lbm.CX[lbm.OPPOSITE[i]] == -lbm.CX[i]
        assert lbm.CY[lbm.OPPOSITE[i]] == -lbm.CY[i]


def test_equilibrium_rest_state_is_weights():
    feq = lbm.equilibrium(1.0, np.zeros(2))
    assert np.array_equal(feq, lbm.W)


def test_equilibrium_hand_value():
    feq = lbm.equilibrium(1.0, np.array([0.1, 0.0]))
    # +x direction: (1/9)(1 + 0.3 + 0.045 - 0.015)
    assert abs(feq[1] - (1 / 9) * 1.33) < 1e-15


def test_equilibrium_moment_identities_randomized():
    rng = random.Random(2)
    for _ in range(200):
        rho = 0.8 + 0.4 * rng.random()
        angle = rng.uniform(0, 2 * np.pi)
        speed = 0.1 * rng.random()
        u = np.array([speed * np.cos(angle), speed * np.sin(angle)])
        feq = lbm.equilibrium(rho, u)
        assert abs(feq.sum() - rho) < 1e-13
        mom = np.array([feq @ lbm.CX, feq @ lbm.CY])
        assert np.abs(mom - rho * u).max() < 1e-13


def test_equilibrium_rejects_nonpositive_density():
    with pytest.raises(lbm.NonpositiveDensity):
        lbm.equilibrium(0.0, np.zeros(2))


def test_macroscopics_rest():
    rho, u = lbm.macroscopics(lbm.W)
    assert rho == 1.0
    assert np.array_equal(u, np.zeros(2))


def test_macroscopics_inverse_of_equilibrium():
    u_in = np.array([0.05, -0.02])
    rho, u = lbm.macroscopics(lbm.equilibrium(1.0, u_in))
    assert abs(rho - 1.0) < 1e-13
    assert np.abs(u - u_in).max() < 1e-13


def test_macroscopics_force_correction():
    rho, u = lbm.macroscopics(lbm.W, force=(1e-3, 0.0))
    assert np.abs(u - np.array([5e-4, 0.0])).max() < 1e-18


def test_viscosity_values():
    assert abs(lbm.viscosity(1.0) - 1 / 6) < 1e-15
    assert abs(lbm.viscosity(0.8) - 0.1) < 1e-15
    assert lbm.viscosity(0.5 + 1e-9) < 1e-9
    with pytest.raises(lbm.SubcriticalTau):
        lbm.viscosity(0.5)


def test_rest_state_is_fixed_point():
    cfg = lbm.KernelConfig(nx=12, ny=10, tau=0.73, steps=20, boundary="periodic")
    field = lbm.uniform_rest(12, 10)
    before = field.current.copy()
    for step in range(20):
        lbm.collide_stream(field, cfg, step)
        assert np.abs(field.current - before).max() <= 1e-15


def test_full_relaxation_at_tau_one():
    rng = random.Random(4)
    field = random_admissible_field(rng, 6, 6, perturb=1e-3)
    cfg = lbm.KernelConfig(nx=6, ny=6, tau=1.0, steps=1, boundary="periodic")
    src = field.current.copy()
    rho, u = lbm.macroscopics(src)
    feq = lbm.equilibrium(rho, u)
    lbm.collide_stream(field, cfg)
    # undo the streaming: gather back to source positions
    recovered = np.empty_like(feq)
    for i in range(9):
        recovered[..., i] = np.roll(
            field.current[..., i], (-lbm.CY[i], -lbm.CX[i]), axis=(0, 1)
        )
    assert np.array_equal(recovered, feq)


@pytest.mark.parametrize("boundary", ["periodic", "channel-walls-y"])
def test_ten_steps_match_naive_oracle(boundary):
    rng = random.Random(8)
    ny = nx = 8
    field = random_admissible_field(rng, ny, nx, perturb=1e-3)
    reference = [
        [[float(field.current[y, x, i]) for i in range(9)] for x in range(nx)]
        for y in range(ny)
    ]
    tau = 0.77
    force = (1e-5, -2e-5)
    cfg = lbm.KernelConfig(
        nx=nx, ny=ny, tau=tau, steps=10, force=force, boundary=boundary
    )
    lbm.run(cfg, field)
    expected = oracle_lbm.run(reference, 10, tau, force, boundary)
    got = field.current
    diff = max(
        abs(got[y, x, i] - expected[y][x][i])
        for y in range(ny)
        for x in range(nx)
        for i in range(9)
    )
    assert diff <= 1e-13


@pytest.mark.parametrize("boundary", ["periodic", "channel-walls-y"])
def test_mass_conserved_over_thousand_steps(boundary):
    cfg = lbm.KernelConfig(
        nx=16, ny=32, tau=0.9, steps=1000, boundary=boundary,
        initial="shear-perturbation",
    )
    field = lbm.initial_field(cfg)
    m0 = field.total_mass()
    lbm.run(cfg, field)
    assert abs(field.total_mass() - m0) / m0 <= 1e-10


def test_momentum_grows_linearly_under_uniform_force():
    force = (1e-5, 2e-6)
    steps = 100
    cfg = lbm.KernelConfig(
        nx=16, ny=16, tau=0.8, steps=steps, force=force, boundary="periodic"
    )
    field = lbm.initial_field(cfg)
    rho0, u0 = lbm.macroscopics(field.current, force)
    p0 = (rho0[..., None] * u0).sum(axis=(0, 1))
    lbm.run(cfg, field)
    rho1, u1 = lbm.macroscopics(field.current, force)
    p1 = (rho1[..., None] * u1).sum(axis=(0, 1))
    expected = np.array(force) * steps * 16 * 16
    assert np.abs((p1 - p0) - expected).max() / np.abs(expected).max() <= 1e-8


def test_instability_reports_step_index():
    # near-critical relaxation plus strong shear blows up within a few
    # hundred steps; the abort must carry the failing step index
    ny = nx = 16
    rho = np.ones((ny, nx))
    u = np.zeros((ny, nx, 2))
    u[..., 0] = 0.3 * np.sin(2 * np.pi * np.arange(ny) / ny)[:, None]
    u[..., 1] = 0.05 * np.cos(2 * np.pi * np.arange(nx) / nx)[None, :]
    field = lbm.from_macroscopics(rho, u)
    cfg = lbm.KernelConfig(nx=nx, ny=ny, tau=0.5001, steps=2000, boundary="periodic")
    with pytest.raises(lbm.Instability) as err:
        lbm.run(cfg, field)
    assert 0 <= err.value.step < 2000


def test_run_benchmark_report_consistency():
    cfg = lbm.KernelConfig(nx=256, ny=128, tau=0.8, steps=100)
    report = lbm.run_benchmark(cfg)
    assert report.cells == 32768
    assert report.steps == 100
    expected_mlups = report.cells * report.steps / report.wall_seconds / 1e6
    assert abs(report.mlups - expected_mlups) / expected_mlups < 1e-9
    assert report.rho.shape == (128, 256)
    assert report.u.shape == (128, 256, 2)


def test_zero_steps_rejected():
    with pytest.raises(ValueError):
        lbm.KernelConfig(nx=8, ny=8, tau=0.8, steps=0)


def test_benchmark_physics_deterministic():
    cfg = lbm.KernelConfig(nx=32, ny=32, tau=0.85, steps=50, initial="shear-perturbation")
    a = lbm.run_benchmark(cfg)
    b = lbm.run_benchmark(cfg)
    assert np.array_equal(a.rho, b.rho)
    assert np.array_equal(a.u, b.u)


def test_metric_lines_parse_back_to_report_values():
    cfg = lbm.KernelConfig(nx=64, ny=32, tau=0.8, steps=20)
    report = lbm.run_benchmark(cfg)
    log = "\n".join(lbm.metric_lines(report)).encode()
    points = parse_app_output(log, DEFAULT_RULES, make_job())
    by_field = {}
    for p in points:
        by_field.update(p.fields)
    assert abs(by_field["mlups_per_process"] - report.mlups) < 5e-5
    assert abs(by_field["seconds"] - report.wall_seconds) < 1e-3
    assert by_field["bytes_per_update"] == 144.0


def test_cli_output_contains_frozen_lines(capsys):
    rc = lbm.main(["--nx", "16", "--ny", "16", "--steps", "5"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "MLUPS per process: " in out
    assert "time to solution: " in out
    assert "bytes per lattice update: 144" in out
    assert "Region stream_collide" in out
    assert "| Operational intensity | " in out


def test_cli_env_overrides_flags(capsys, monkeypatch):
    monkeypatch.setenv("CB_PARAM_steps", "7")
    monkeypatch.setenv("CB_PARAM_collision", "srt-fused")
    rc = lbm.main(["--nx", "12", "--ny", "12", "--steps", "999"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "steps: 7" in out
    assert "collision operator: srt-fused" in out


def test_cli_rejects_unsupported_collision(capsys, monkeypatch):
    monkeypatch.setenv("CB_PARAM_collision", "cumulant")
    rc = lbm.main(["--nx", "8", "--ny", "8", "--steps", "2"])
    assert rc == 1
