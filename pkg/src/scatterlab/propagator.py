"""Exact free flow and Strang split-step integration of NLS / Hartree."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .spectral import (
    BOUNDARY_MASS_TOL,
    BoundaryMassWarning,
    Grid,
    Kernel,
    boundary_mass_fraction,
    convolve_periodic_kernel,
    inverse_transform,
    transform,
)


class NumericalAbort(RuntimeError):
    """Non-finite samples appeared during time stepping."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class EquationSpec:
    kind: str = "linear"
    p: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.kind == "linear":
            if self.p is not None or self.gamma is not None:
                raise ValueError("linear equation takes no exponent")
        elif self.kind == "nls":
            if self.p is None or not self.p > 1:
                raise ValueError(f"NLS requires p > 1, got p={self.p}")
            if self.gamma is not None:
                raise ValueError("NLS takes no gamma")
        elif self.kind == "hartree":
            if self.gamma is None or not 0 < self.gamma < 2:
                raise ValueError(f"Hartree requires 0 < gamma < 2, got gamma={self.gamma}")
            if self.p is not None:
                raise ValueError("Hartree takes no p")
        else:
            raise ValueError(f"unknown equation kind {self.kind!r}")

    @classmethod
    def linear(cls) -> "EquationSpec":
        return cls("linear")

    @classmethod
    def nls(cls, p: float) -> "EquationSpec":
        return cls("nls", p=float(p))

    @classmethod
    def hartree(cls, gamma: float) -> "EquationSpec":
        return cls("hartree", gamma=float(gamma))

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    @property
    def in_scattering_range(self) -> bool:
        """2 < p < 3 for NLS, 1 < gamma < 2 for Hartree: the range where the wave operator is constructed."""
        if self.kind == "nls":
            return 2 < self.p < 3
        if self.kind == "hartree":
            return 1 < self.gamma < 2
        return True

    @property
    def exponent(self) -> float | None:
        return self.p if self.kind == "nls" else self.gamma

    @property
    def comparison_exponent(self) -> float:
        """Lebesgue exponent used for L^{p+1}-type distances (4/(3-gamma) for Hartree)."""
        if self.kind == "nls":
            return self.p + 1
        if self.kind == "hartree":
            return 4.0 / (3.0 - self.gamma)
        return 4.0

    def tag(self) -> str:
        if self.kind == "nls":
            return f"nls(p={self.p:g})"
        if self.kind == "hartree":
            return f"hartree(gamma={self.gamma:g})"
        return "linear"


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_start: float = 0.0
    t_end: float = 1.0
    dealias: bool | None = None
    record_every: int = 1

    def __post_init__(self):
        if self.dt == 0 or not math.isfinite(self.dt):
            raise ValueError("dt must be finite and nonzero")
        span = self.t_end - self.t_start
        if span != 0 and math.copysign(1.0, span) != math.copysign(1.0, self.dt):
            raise ValueError("sign of dt must match direction of t_end - t_start")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def step_sizes(self) -> list[float]:
        """Full steps followed by at most one shortened step landing on t_end."""
        span = self.t_end - self.t_start
        ratio = span / self.dt
        m = round(ratio)
        if abs(ratio - m) <= 1e-9 * max(1.0, abs(ratio)):
            return [self.dt] * int(m)
        m = math.floor(ratio)
        rest = span - m * self.dt
        return [self.dt] * m + [rest]

    def dealias_for(self, eq: EquationSpec) -> bool:
        if self.dealias is not None:
            return bool(self.dealias)
        return eq.kind == "nls" and eq.p >= 3


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    fields: list[np.ndarray] = field(default_factory=list)
    records: list[Any] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    boundary_mass_max: float = 0.0

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.fields[-1]


def free_symbol(grid: Grid, t: float) -> np.ndarray:
    return np.exp(-1j * grid.k2 * t)


def linear_propagate(f: np.ndarray, grid: Grid, t: float) -> np.ndarray:
    """U(t) f = exp(i t Laplacian) f, exact in Fourier space."""
    if t == 0:
        return np.array(f, dtype=complex, copy=True)
    return inverse_transform(transform(f, grid) * free_symbol(grid, t), grid)


def hartree_potential(f: np.ndarray, grid: Grid, gamma: float) -> np.ndarray:
    """|x|^-gamma * |f|^2 with the truncated power kernel, periodised.

    The periodic form keeps the flow translation invariant on the torus, so
    momentum is conserved even when mass reaches the box edge; for data inside
    |x| < L/4 it equals the linear convolution.
    """
    dens = f.real**2 + f.imag**2
    return convolve_periodic_kernel(dens, grid, Kernel.power(gamma))


def phase_potential(f: np.ndarray, grid: Grid, eq: EquationSpec) -> np.ndarray | None:
    """Real potential W with nonlinearity W*u, or None for the free equation."""
    if eq.kind == "nls":
        dens = f.real**2 + f.imag**2
        return dens ** (0.5 * (eq.p - 1))
    if eq.kind == "hartree":
        return hartree_potential(f, grid, eq.gamma)
    return None


def nonlinearity(f: np.ndarray, grid: Grid, eq: EquationSpec) -> np.ndarray:
    W = phase_potential(f, grid, eq)
    if W is None:
        return np.zeros_like(f, dtype=complex)
    return W * f


def _rotate(f: np.ndarray, W: np.ndarray, dt: float) -> np.ndarray:
    th = W * dt
    return f * (np.cos(th) - 1j * np.sin(th))


def nonlinear_phase_step(f: np.ndarray, grid: Grid, eq: EquationSpec, dt: float) -> np.ndarray:
    """Exact flow of i u_t = W(|u|) u over dt; preserves |u| pointwise."""
    W = phase_potential(f, grid, eq)
    if W is None:
        return np.array(f, dtype=complex, copy=True)
    return _rotate(f, W, dt)


def _dealias_coeffs(fh: np.ndarray, grid: Grid) -> np.ndarray:
    return fh * grid.dealias_mask


def strang_step(f: np.ndarray, grid: Grid, eq: EquationSpec, dt: float, dealias: bool = False) -> np.ndarray:
    """Half nonlinear phase, exact free step, half nonlinear phase."""
    u = nonlinear_phase_step(f, grid, eq, 0.5 * dt)
    uh = sfft.fft2(u) * free_symbol(grid, dt)
    if dealias:
        uh = _dealias_coeffs(uh, grid)
    u = sfft.ifft2(uh)
    u = nonlinear_phase_step(u, grid, eq, 0.5 * dt)
    if dealias:
        u = sfft.ifft2(_dealias_coeffs(sfft.fft2(u), grid))
    if not np.isfinite(u).all():
        raise NumericalAbort("non-finite samples after Strang step")
    return u


Hook = Callable[[float, np.ndarray, int], Any]


def evolve(
    f0: np.ndarray,
    grid: Grid,
    eq: EquationSpec,
    cfg: SolverConfig,
    hooks: Sequence[Hook] = (),
    diagnose: Callable[[np.ndarray, float], Any] | None = None,
    keep_fields: bool = True,
    check_boundary: bool = True,
) -> Trajectory:
    """Integrate from cfg.t_start to cfg.t_end recording every cfg.record_every steps.

    The initial and final states are always recorded. ``hooks`` are called as
    ``hook(t, u, step)`` at each recorded time; ``diagnose(u, t)`` results are
    stored in ``Trajectory.records``.
    """
    u = np.array(f0, dtype=complex, copy=True)
    if u.shape != (grid.n, grid.n):
        raise ValueError(f"initial field shape {u.shape} does not match grid n={grid.n}")
    steps = cfg.step_sizes()
    nsteps = len(steps)
    traj = Trajectory()
    warned = False

    def emit(step: int, t: float, state: np.ndarray) -> None:
        nonlocal warned
        traj.times.append(t)
        traj.steps.append(step)
        if keep_fields:
            traj.fields.append(state.copy())
        if diagnose is not None:
            traj.records.append(diagnose(state, t))
        for hook in hooks:
            hook(t, state, step)
        if check_boundary:
            frac = boundary_mass_fraction(state, grid)
            traj.boundary_mass_max = max(traj.boundary_mass_max, frac)
            if frac > BOUNDARY_MASS_TOL and not warned:
                warned = True
                warnings.warn(
                    f"boundary mass fraction {frac:.3e} exceeds {BOUNDARY_MASS_TOL:g} at t={t:g}",
                    BoundaryMassWarning,
                    stacklevel=3,
                )

    def time_at(k: int) -> float:
        if k == nsteps:
            return cfg.t_end
        return cfg.t_start + k * cfg.dt

    def recorded(k: int) -> bool:
        return k % cfg.record_every == 0 or k == nsteps

    emit(0, cfg.t_start, u)
    if nsteps == 0:
        return traj

    if eq.is_linear:
        uh0 = transform(u, grid)
        for k in range(1, nsteps + 1):
            if recorded(k):
                t = time_at(k)
                emit(k, t, inverse_transform(uh0 * free_symbol(grid, t - cfg.t_start), grid))
        return traj

    dealias_on = cfg.dealias_for(eq)
    if dealias_on:
        for k in range(1, nsteps + 1):
            try:
                u = strang_step(u, grid, eq, steps[k - 1], dealias=True)
            except NumericalAbort as exc:
                raise NumericalAbort(str(exc), time_at(k)) from None
            if recorded(k):
                emit(k, time_at(k), u)
        return traj

    # Consecutive half phases share |u| and fuse into one full phase.
    full = free_symbol(grid, cfg.dt)
    u = nonlinear_phase_step(u, grid, eq, 0.5 * steps[0])
    for k in range(1, nsteps + 1):
        dt = steps[k - 1]
        sym = full if dt == cfg.dt else free_symbol(grid, dt)
        u = sfft.ifft2(sfft.fft2(u) * sym)
        W = phase_potential(u, grid, eq)
        if k == nsteps or recorded(k) or steps[k] != dt:
            u = _rotate(u, W, 0.5 * dt)
            if not np.isfinite(u).all():
                raise NumericalAbort("non-finite samples after Strang step", time_at(k))
            if recorded(k):
                emit(k, time_at(k), u)
            if k < nsteps:
                u = _rotate(u, W, 0.5 * steps[k])
        else:
            u = _rotate(u, W, dt)
            if not np.isfinite(u).all():
                raise NumericalAbort("non-finite samples after Strang step", time_at(k))
    return traj
