"""Conserved quantities, densities, Morawetz action and space-time norms."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .propagator import EquationSpec, hartree_potential
from .spectral import (
    Grid,
    Kernel,
    convolve_truncated_kernel,
    divergence,
    dot_sobolev_norm,
    gradient,
    lebesgue_norm,
    sobolev_norm,
    transform,
)

DEFAULT_LR = (4.0, 8.0)
DIRECTION = Kernel("direction")


@dataclass
class DiagnosticsRecord:
    """Monitored scalars at one instant.

    ``mass`` is the squared norm ||u||_2^2. ``lr_norms`` maps the exponent
    (as a string) to ||u||_{L^r}.
    """

    time: float
    mass: float
    kinetic: float
    potential: float
    energy: float
    momentum: list[float]
    h_half: float
    dot_h_half: float
    h1: float
    lr_norms: dict[str, float]
    morawetz_action: float
    correlation_density: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "DiagnosticsRecord":
        return cls(**json.loads(line))


def _lr_key(r: float) -> str:
    return "inf" if r == math.inf else f"{r:g}"


def densities(f: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """rho = |u|^2 / 2 and momentum density p_j = Im(conj(u) d_j u)."""
    rho = 0.5 * (f.real**2 + f.imag**2)
    if np.isrealobj(f):
        z = np.zeros_like(rho)
        return rho, z, z.copy()
    gx, gy = gradient(f, grid)
    return rho, np.imag(np.conj(f) * gx), np.imag(np.conj(f) * gy)


def mass(f: np.ndarray, grid: Grid) -> float:
    return float(grid.cell_area * np.sum(f.real**2 + f.imag**2))


def kinetic_energy(f: np.ndarray, grid: Grid) -> float:
    fh = transform(f, grid)
    return float(0.5 * np.sum(grid.k2 * (fh.real**2 + fh.imag**2)))


def potential_energy(f: np.ndarray, grid: Grid, eq: EquationSpec) -> float:
    if eq.kind == "nls":
        return float(grid.cell_area * np.sum(np.abs(f) ** (eq.p + 1)) / (eq.p + 1))
    if eq.kind == "hartree":
        V = hartree_potential(f, grid, eq.gamma)
        return float(0.25 * grid.cell_area * np.sum(V * (f.real**2 + f.imag**2)))
    return 0.0


def energy(f: np.ndarray, grid: Grid, eq: EquationSpec) -> float:
    return kinetic_energy(f, grid) + potential_energy(f, grid, eq)


def momentum(f: np.ndarray, grid: Grid) -> np.ndarray:
    _, p1, p2 = densities(f, grid)
    return grid.cell_area * np.array([p1.sum(), p2.sum()])


def morawetz_action(f: np.ndarray, grid: Grid) -> float:
    """M = 4 * int p . (K * rho) with K(x) = x/|x| (truncated to the box)."""
    rho, p1, p2 = densities(f, grid)
    if not (p1.any() or p2.any()):
        return 0.0
    k1, k2 = convolve_truncated_kernel(rho, grid, DIRECTION)
    return float(4 * grid.cell_area * np.sum(p1 * k1 + p2 * k2))


def correlation_density(f: np.ndarray, grid: Grid) -> float:
    """||D^{1/2} |u|^2||_2^2."""
    g = f.real**2 + f.imag**2
    gh = transform(g, grid)
    return float(np.sum(grid.kabs * (gh.real**2 + gh.imag**2)))


def record(
    f: np.ndarray,
    grid: Grid,
    eq: EquationSpec,
    t: float,
    lr: tuple[float, ...] = DEFAULT_LR,
) -> DiagnosticsRecord:
    kin = kinetic_energy(f, grid)
    pot = potential_energy(f, grid, eq)
    return DiagnosticsRecord(
        time=float(t),
        mass=mass(f, grid),
        kinetic=kin,
        potential=pot,
        energy=kin + pot,
        momentum=[float(c) for c in momentum(f, grid)],
        h_half=sobolev_norm(f, grid, 0.5),
        dot_h_half=dot_sobolev_norm(f, grid, 0.5),
        h1=sobolev_norm(f, grid, 1.0),
        lr_norms={_lr_key(r): lebesgue_norm(f, grid, r) for r in lr},
        morawetz_action=morawetz_action(f, grid),
        correlation_density=correlation_density(f, grid),
    )


class Recorder:
    """``diagnose`` callback for :func:`evolve` producing DiagnosticsRecords."""

    def __init__(self, grid: Grid, eq: EquationSpec, lr: tuple[float, ...] = DEFAULT_LR):
        self.grid, self.eq, self.lr = grid, eq, tuple(lr)

    def __call__(self, f: np.ndarray, t: float) -> DiagnosticsRecord:
        return record(f, self.grid, self.eq, t, self.lr)


@dataclass
class SpaceTimeAccumulator:
    """Running trapezoidal value of int ||u(t)||_{L^r}^q dt (running max for q = inf)."""

    q: float
    r: float
    value: float = 0.0
    count: int = 0
    last_time: float | None = field(default=None, repr=False)
    last_sample: float = field(default=0.0, repr=False)

    def __post_init__(self):
        if not self.q >= 1:
            raise ValueError(f"time exponent must be >= 1, got {self.q}")
        if not (self.r >= 1 or self.r == math.inf):
            raise ValueError(f"space exponent must be >= 1, got {self.r}")

    def add_norm(self, t: float, norm: float) -> "SpaceTimeAccumulator":
        if self.last_time is not None and not t > self.last_time:
            raise ValueError(f"samples must arrive in increasing time order ({t} after {self.last_time})")
        if self.q == math.inf:
            self.value = max(self.value, norm)
        else:
            s = norm**self.q
            if self.last_time is not None:
                self.value += 0.5 * (t - self.last_time) * (s + self.last_sample)
            self.last_sample = s
        self.last_time = t
        self.count += 1
        return self

    def norm(self) -> float:
        """The accumulated L^q_t L^r_x norm."""
        if self.q == math.inf:
            return self.value
        return self.value ** (1.0 / self.q)


def accumulate(acc: SpaceTimeAccumulator, f: np.ndarray, grid: Grid, t: float) -> SpaceTimeAccumulator:
    return acc.add_norm(t, lebesgue_norm(f, grid, acc.r))


def local_mass_residual(
    snapshots: list[tuple[float, np.ndarray]],
    grid: Grid,
    rtol: float = 1e-9,
) -> np.ndarray:
    """d_t rho (central difference) + div p at the middle of three snapshots."""
    if len(snapshots) != 3:
        raise ValueError("need exactly three snapshots")
    (t0, f0), (t1, f1), (t2, f2) = snapshots
    d1, d2 = t1 - t0, t2 - t1
    if not d1 > 0 or abs(d1 - d2) > rtol * max(abs(d1), abs(d2)):
        raise ValueError("snapshots must be equally spaced in increasing time")
    rho0, _, _ = densities(f0, grid)
    rho2, _, _ = densities(f2, grid)
    _, p1, p2 = densities(f1, grid)
    return (rho2 - rho0) / (t2 - t0) + divergence(p1, p2, grid)
