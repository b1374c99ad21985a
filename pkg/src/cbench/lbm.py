"""D2Q9 single-relaxation-time lattice-Boltzmann reference workload.

Two-population (source/destination) streaming, optional uniform body
force with second-order (Guo) forcing, periodic or bounce-back channel
walls in y.  Lattice units throughout: dx = dt = 1, c_s^2 = 1/3,
reference density 1.  Bytes per update for bound analysis: 2 x 9 x 8.

Runs standalone as ``python -m cbench.lbm``; configuration comes from
flags overridden by ``CB_PARAM_*`` environment variables, and the
benchmark prints frozen metric lines plus a counter-style region table.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

# direction order: rest, axes (+x, +y, -x, -y), diagonals (++, -+, --, +-)
CX = np.array([0, 1, 0, -1, 0, 1, -1, -1, 1], dtype=np.int64)
CY = np.array([0, 0, 1, 0, -1, 1, 1, -1, -1], dtype=np.int64)
W = np.array(
    [4 / 9, 1 / 9, 1 / 9, 1 / 9, 1 / 9, 1 / 36, 1 / 36, 1 / 36, 1 / 36]
)
OPPOSITE = np.array([0, 3, 4, 1, 2, 7, 8, 5, 6], dtype=np.int64)
Q = 9
CS2 = 1.0 / 3.0

_C2 = np.stack([CX, CY]).astype(float)  # (2, 9), for u @ _C2 projections
_CT = _C2.T.copy()  # (9, 2), for population first moments

# traffic/arithmetic model used for the desk-scale counter table
BYTES_PER_UPDATE = 144.0  # two populations of 9 doubles per cell
FLOPS_PER_UPDATE = 200.0  # arithmetic-count estimate for one SRT update

BOUNDARIES = ("periodic", "channel-walls-y")
INITIALS = ("uniform-rest", "shear-perturbation")

_UP = [i for i in range(Q) if CY[i] == 1]
_DOWN = [i for i in range(Q) if CY[i] == -1]


class Instability(RuntimeError):
    """A population went non-finite; carries the failing step index."""

    def __init__(self, step: int):
        super().__init__(f"non-finite population at step {step}")
        self.step = step


class SubcriticalTau(ValueError):
    pass


class NonpositiveDensity(ValueError):
    pass


@dataclass
class KernelConfig:
    nx: int
    ny: int
    tau: float
    steps: int
    force: Tuple[float, float] = (0.0, 0.0)
    boundary: str = "periodic"
    initial: str = "uniform-rest"

    def __post_init__(self) -> None:
        self.force = (float(self.force[0]), float(self.force[1]))
        if self.nx < 1 or self.ny < 1:
            raise ValueError("lattice dimensions must be >= 1")
        if not self.tau > 0.5:
            raise SubcriticalTau(f"tau must exceed 0.5, got {self.tau}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.initial not in INITIALS:
            raise ValueError(f"unknown initial condition {self.initial!r}")


@dataclass
class LatticeField:
    """Two population planes; ``active`` indexes the current source."""

    nx: int
    ny: int
    f: np.ndarray  # shape (2, ny, nx, 9)
    active: int = 0

    @property
    def current(self) -> np.ndarray:
        return self.f[self.active]

    def swap(self) -> None:
        self.active ^= 1

    def total_mass(self) -> float:
        return float(self.current.sum())


@dataclass
class KernelReport:
    mlups: float
    wall_seconds: float
    setup_seconds: float
    cells: int
    steps: int
    rho: np.ndarray
    u: np.ndarray


def viscosity(tau: float) -> float:
    """Kinematic viscosity implied by the relaxation time."""
    if not tau > 0.5:
        raise SubcriticalTau(f"tau must exceed 0.5, got {tau}")
    return CS2 * (tau - 0.5)


def equilibrium(rho, u) -> np.ndarray:
    """Second-order Maxwell-Boltzmann equilibrium populations.

    Works per cell (rho scalar, u shape (2,)) and per field
    (rho (ny,nx), u (ny,nx,2)); the direction axis is appended.
    """
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(rho <= 0):
        raise NonpositiveDensity("density must be positive")
    cu = u @ _C2
    usq = (u * u).sum(axis=-1)[..., None]
    return W * rho[..., None] * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * usq)


def macroscopics(f, force: Sequence[float] = (0.0, 0.0)):
    """Density and force-corrected velocity from population moments."""
    f = np.asarray(f, dtype=float)
    rho = f.sum(axis=-1)
    if np.any(rho <= 0):
        raise NonpositiveDensity("density must be positive")
    u = f @ _CT
    u += 0.5 * np.asarray(force, dtype=float)
    u /= rho[..., None]
    return rho, u


def _guo_force(u: np.ndarray, force: Sequence[float], tau: float) -> np.ndarray:
    """Second-order body-force contribution to the collision step."""
    fvec = np.asarray(force, dtype=float)
    cf = fvec @ _C2  # (9,)
    uf = (u @ fvec)[..., None]
    cu = u @ _C2
    return (1.0 - 0.5 / tau) * W * (3.0 * (cf - uf) + 9.0 * cu * cf)


def uniform_rest(nx: int, ny: int) -> LatticeField:
    f = np.empty((2, ny, nx, Q))
    f[0] = W
    f[1] = 0.0
    return LatticeField(nx=nx, ny=ny, f=f)


def from_macroscopics(rho: np.ndarray, u: np.ndarray) -> LatticeField:
    ny, nx = np.asarray(rho).shape
    f = np.empty((2, ny, nx, Q))
    f[0] = equilibrium(rho, u)
    f[1] = 0.0
    return LatticeField(nx=nx, ny=ny, f=f)


def shear_perturbation(nx: int, ny: int, amplitude: float = 0.05) -> LatticeField:
    """Sinusoidal x-velocity profile across y, at rest density."""
    rho = np.ones((ny, nx))
    u = np.zeros((ny, nx, 2))
    y = np.arange(ny)
    u[..., 0] = amplitude * np.sin(2.0 * np.pi * y / ny)[:, None]
    return from_macroscopics(rho, u)


def initial_field(cfg: KernelConfig) -> LatticeField:
    if cfg.initial == "uniform-rest":
        return uniform_rest(cfg.nx, cfg.ny)
    return shear_perturbation(cfg.nx, cfg.ny)


_STREAM_IDX_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _stream_indices(ny: int, nx: int) -> np.ndarray:
    """Flat gather indices realizing one periodic streaming step."""
    idx = _STREAM_IDX_CACHE.get((ny, nx))
    if idx is None:
        y = np.arange(ny)[:, None, None]
        x = np.arange(nx)[None, :, None]
        i = np.arange(Q)[None, None, :]
        src_y = (y - CY[i]) % ny
        src_x = (x - CX[i]) % nx
        idx = ((src_y * nx + src_x) * Q + i).ravel()
        _STREAM_IDX_CACHE[(ny, nx)] = idx
    return idx


def collide_stream(field: LatticeField, cfg: KernelConfig, step: int = 0) -> LatticeField:
    """One collision + streaming step into the destination plane."""
    src = field.f[field.active]
    dst = field.f[field.active ^ 1]
    try:
        rho, u = macroscopics(src, cfg.force)
    except NonpositiveDensity as exc:
        # a blown-up run turns unphysical before it turns non-finite
        raise Instability(step) from exc
    feq = equilibrium(rho, u)
    fstar = src + (feq - src) / cfg.tau
    if cfg.force != (0.0, 0.0):
        fstar += _guo_force(u, cfg.force, cfg.tau)
    np.take(fstar.reshape(-1), _stream_indices(field.ny, field.nx), out=dst.reshape(-1))
    if cfg.boundary == "channel-walls-y":
        # half-way bounce-back: populations leaving through a wall re-enter
        # the same cell reversed; the periodic wrap-around is overwritten
        for i in _UP:
            dst[0, :, i] = fstar[0, :, OPPOSITE[i]]
        for i in _DOWN:
            dst[-1, :, i] = fstar[-1, :, OPPOSITE[i]]
    if not np.isfinite(dst).all():
        raise Instability(step)
    field.swap()
    return field


def run(cfg: KernelConfig, field: Optional[LatticeField] = None) -> LatticeField:
    """Advance ``cfg.steps`` steps from the given or initial field."""
    if field is None:
        field = initial_field(cfg)
    for step in range(cfg.steps):
        collide_stream(field, cfg, step)
    return field


def run_benchmark(cfg: KernelConfig) -> KernelReport:
    """Time the stepping loop (initialization excluded) and report MLUPS."""
    t0 = time.perf_counter()
    field = initial_field(cfg)
    t1 = time.perf_counter()
    for step in range(cfg.steps):
        collide_stream(field, cfg, step)
    wall = max(time.perf_counter() - t1, 1e-9)
    cells = cfg.nx * cfg.ny
    rho, u = macroscopics(field.current, cfg.force)
    return KernelReport(
        mlups=cells * cfg.steps / wall / 1e6,
        wall_seconds=wall,
        setup_seconds=t1 - t0,
        cells=cells,
        steps=cfg.steps,
        rho=rho,
        u=u,
    )


def metric_lines(report: KernelReport) -> list[str]:
    """The frozen per-run metric lines consumed by the output parsers."""
    return [
        f"MLUPS per process: {report.mlups:.4f}",
        f"time to solution: {report.wall_seconds:.6f} s",
        f"bytes per lattice update: {int(BYTES_PER_UPDATE)}",
    ]


def counter_table(report: KernelReport) -> list[str]:
    """Counter-tool style region table from the kernel's traffic model.

    Desk-scale stand-in for a hardware counter tool: rates derive from the
    documented per-update byte and FLOP model, not from hardware events.
    """
    oi = FLOPS_PER_UPDATE / BYTES_PER_UPDATE
    volume_gb = report.cells * report.steps * BYTES_PER_UPDATE / 1e9

    def rows(name: str, seconds: float) -> list[str]:
        updates_per_s = report.cells * report.steps / max(seconds, 1e-9)
        return [
            f"Region {name}",
            f"| DP [MFLOP/s] | {updates_per_s * FLOPS_PER_UPDATE / 1e6:.3f} |",
            f"| Memory bandwidth [MB/s] | {updates_per_s * BYTES_PER_UPDATE / 1e6:.3f} |",
            f"| Memory data volume [GB] | {volume_gb:.6f} |",
            f"| Operational intensity | {oi:.6f} |",
        ]

    return rows("stream_collide", report.wall_seconds) + rows(
        "run", report.wall_seconds + report.setup_seconds
    )


def _env_override(args: argparse.Namespace) -> argparse.Namespace:
    """CB_PARAM_* variables take precedence over command-line flags."""
    env = os.environ
    casts = {
        "nx": int,
        "ny": int,
        "steps": int,
        "tau": float,
        "force_x": float,
        "force_y": float,
        "boundary": str,
        "initial": str,
        "collision": str,
    }
    for name, cast in casts.items():
        raw = env.get(f"CB_PARAM_{name}")
        if raw is not None:
            setattr(args, name, cast(raw))
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cbench.lbm", description="D2Q9 SRT lattice-Boltzmann benchmark"
    )
    parser.add_argument("--nx", type=int, default=64)
    parser.add_argument("--ny", type=int, default=64)
    parser.add_argument("--steps", type=int, default=100)
    parser.add_argument("--tau", type=float, default=0.8)
    parser.add_argument("--force-x", dest="force_x", type=float, default=0.0)
    parser.add_argument("--force-y", dest="force_y", type=float, default=0.0)
    parser.add_argument("--boundary", choices=BOUNDARIES, default="periodic")
    parser.add_argument("--initial", choices=INITIALS, default="shear-perturbation")
    parser.add_argument("--collision", default="srt")
    parser.add_argument(
        "--no-counters",
        dest="counters",
        action="store_false",
        help="skip the counter-style region table",
    )
    args = _env_override(parser.parse_args(argv))

    if not args.collision.startswith("srt"):
        print(f"unsupported collision operator: {args.collision}", file=sys.stderr)
        return 1
    try:
        cfg = KernelConfig(
            nx=args.nx,
            ny=args.ny,
            tau=args.tau,
            steps=args.steps,
            force=(args.force_x, args.force_y),
            boundary=args.boundary,
            initial=args.initial,
        )
        report = run_benchmark(cfg)
    except (ValueError, Instability) as exc:
        print(f"benchmark failed: {exc}", file=sys.stderr)
        return 1

    print("D2Q9 SRT benchmark")
    print(f"lattice: {cfg.nx}x{cfg.ny} ({report.cells} cells)")
    print(f"collision operator: {args.collision}")
    print(f"tau: {cfg.tau}")
    print(f"steps: {cfg.steps}")
    for line in metric_lines(report):
        print(line)
    if args.counters:
        for line in counter_table(report):
            print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
