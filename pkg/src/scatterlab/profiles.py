"""Initial-data and test-function profiles."""

from __future__ import annotations

import numpy as np

from .spectral import Grid


def gaussian(grid: Grid, amplitude: float = 1.0, width: float = 1.0, boost=(0.0, 0.0), center=(0.0, 0.0)) -> np.ndarray:
    """amplitude * exp(-|x-c|^2 / (2 width^2)) * exp(i boost.x)."""
    X, Y = grid.mesh
    dx, dy = X - center[0], Y - center[1]
    env = amplitude * np.exp(-(dx**2 + dy**2) / (2 * width**2))
    return env * np.exp(1j * (boost[0] * X + boost[1] * Y))


def plane_wave(grid: Grid, amplitude: float = 1.0, modes=(1, 0)) -> np.ndarray:
    """amplitude * exp(i k.x) with k = 2 pi modes / L on the frequency lattice."""
    X, Y = grid.mesh
    kx, ky = (2 * np.pi * m / grid.L for m in modes)
    return amplitude * np.exp(1j * (kx * X + ky * Y))


def bump(grid: Grid, amplitude: float = 1.0, radius: float = 4.0) -> np.ndarray:
    """Smooth compactly supported amplitude * exp(-1 / (1 - |x/R|^2)) on |x| < R."""
    s = (grid.radius / radius) ** 2
    out = np.zeros((grid.n, grid.n), dtype=complex)
    inside = s < 1
    out[inside] = amplitude * np.exp(-1.0 / (1.0 - s[inside]))
    return out
