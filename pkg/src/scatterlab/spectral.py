"""Periodic 2-D grid, Fourier multipliers, spatial norms and kernel convolutions.

Fields are plain ``(n, n)`` numpy arrays sampled at ``x_j = -L/2 + j*h`` on both
axes (row index = first coordinate). Spectral coefficients follow the
normalization ``h**2 * sum|u|**2 == sum|u_hat|**2`` so that every norm computed
from coefficients is grid independent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft

KERNEL_KINDS = ("power", "direction", "inverse")
BOUNDARY_MASS_TOL = 1e-8
SUBCELLS = 16


class BoundaryMassWarning(UserWarning):
    """Mass has leaked far enough out that the box no longer mimics the plane."""


@dataclass(frozen=True)
class Grid:
    n: int
    L: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 1 or (n & (n - 1)) != 0:
            raise ValueError(f"n must be a positive power of two, got {n!r}")
        if not self.L > 0:
            raise ValueError(f"box length must be positive, got {self.L!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def cell_area(self) -> float:
        return self.h**2

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.L + self.h * np.arange(self.n)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.x, indexing="ij")

    @cached_property
    def radius(self) -> np.ndarray:
        X, Y = self.mesh
        return np.hypot(X, Y)

    @cached_property
    def k1d(self) -> np.ndarray:
        """Angular frequencies 2*pi*k/L in FFT order, k in [-n/2, n/2)."""
        return 2 * np.pi * sfft.fftfreq(self.n, d=self.h)

    @cached_property
    def wavevector(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.k1d, self.k1d, indexing="ij")

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky = self.wavevector
        return kx**2 + ky**2

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        idx = np.abs(sfft.fftfreq(self.n) * self.n)
        keep = idx <= self.n / 3
        return keep[:, None] & keep[None, :]

    @cached_property
    def _norm(self) -> float:
        return self.h / self.n

    def zeros(self) -> np.ndarray:
        return np.zeros((self.n, self.n), dtype=complex)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.n * factor, self.L)


def _check_shape(f: np.ndarray, grid: Grid) -> None:
    if f.shape != (grid.n, grid.n):
        raise ValueError(f"field shape {f.shape} does not match grid n={grid.n}")


def transform(f: np.ndarray, grid: Grid) -> np.ndarray:
    _check_shape(f, grid)
    return sfft.fft2(f) * grid._norm


def inverse_transform(fh: np.ndarray, grid: Grid) -> np.ndarray:
    _check_shape(fh, grid)
    return sfft.ifft2(fh) / grid._norm


def apply_multiplier(f: np.ndarray, grid: Grid, symbol: np.ndarray) -> np.ndarray:
    """Apply a Fourier multiplier; real input gives real output."""
    out = sfft.ifft2(sfft.fft2(f) * symbol)
    return out.real if np.isrealobj(f) else out


def fractional_symbol(grid: Grid, s: float) -> np.ndarray:
    if s < -1:
        raise ValueError(f"fractional exponent must be >= -1, got {s}")
    if s == 0:
        return np.ones_like(grid.kabs)
    sym = np.zeros_like(grid.kabs)
    nz = grid.kabs > 0
    sym[nz] = grid.kabs[nz] ** s
    return sym


def apply_fractional_derivative(f: np.ndarray, grid: Grid, s: float) -> np.ndarray:
    """D^s f with symbol |xi|^s; the mean mode is dropped for every s != 0."""
    _check_shape(f, grid)
    return apply_multiplier(f, grid, fractional_symbol(grid, s))


def gradient(f: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    fh = sfft.fft2(f)
    kx, ky = grid.wavevector
    gx = sfft.ifft2(1j * kx * fh)
    gy = sfft.ifft2(1j * ky * fh)
    if np.isrealobj(f):
        return gx.real, gy.real
    return gx, gy


def divergence(fx: np.ndarray, fy: np.ndarray, grid: Grid) -> np.ndarray:
    kx, ky = grid.wavevector
    out = sfft.ifft2(1j * kx * sfft.fft2(fx) + 1j * ky * sfft.fft2(fy))
    return out.real if np.isrealobj(fx) and np.isrealobj(fy) else out


def dealias(f: np.ndarray, grid: Grid) -> np.ndarray:
    """2/3-rule truncation."""
    return sfft.ifft2(sfft.fft2(f) * grid.dealias_mask)


def _coeff_power(f: np.ndarray, grid: Grid) -> np.ndarray:
    fh = transform(f, grid)
    return fh.real**2 + fh.imag**2


def sobolev_norm(f: np.ndarray, grid: Grid, s: float) -> float:
    """Inhomogeneous H^s norm, weight (1 + |xi|^2)^(s/2)."""
    w = (1.0 + grid.k2) ** s
    return float(np.sqrt(np.sum(w * _coeff_power(f, grid))))


def dot_sobolev_norm(f: np.ndarray, grid: Grid, s: float) -> float:
    """Homogeneous H^s norm, weight |xi|^s (mean mode dropped for s != 0)."""
    w = fractional_symbol(grid, s) ** 2 if s >= -1 else None
    if w is None:
        raise ValueError(f"exponent must be >= -1, got {s}")
    return float(np.sqrt(np.sum(w * _coeff_power(f, grid))))


def l2_norm(f: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(grid.cell_area * np.sum(np.abs(f) ** 2)))


def lebesgue_norm(f: np.ndarray, grid: Grid, r: float) -> float:
    if r == np.inf:
        return float(np.max(np.abs(f))) if f.size else 0.0
    if not r >= 1:
        raise ValueError(f"Lebesgue exponent must be >= 1 or inf, got {r}")
    a = np.abs(f)
    m = a.max()
    if m == 0:
        return 0.0
    # scale out the max to keep |u|**r in range for large r
    return float(m * (grid.cell_area * np.sum((a / m) ** r)) ** (1.0 / r))


def boundary_mass_fraction(f: np.ndarray, grid: Grid) -> float:
    """Share of ||f||_2^2 lying outside the disc |x| < L/4."""
    dens = np.abs(f) ** 2
    total = dens.sum()
    if total == 0:
        return 0.0
    return float(dens[grid.radius >= grid.L / 4].sum() / total)


def warn_boundary_mass(f: np.ndarray, grid: Grid, where: str = "") -> float:
    frac = boundary_mass_fraction(f, grid)
    if frac > BOUNDARY_MASS_TOL:
        warnings.warn(
            f"boundary mass fraction {frac:.3e} exceeds {BOUNDARY_MASS_TOL:g}{where}",
            BoundaryMassWarning,
            stacklevel=3,
        )
    return frac


# --- truncated kernels -------------------------------------------------------


@dataclass(frozen=True)
class Kernel:
    """Convolution kernel on the plane, truncated to |x| <= L/2.

    ``power``: |x|^-gamma, ``direction``: x/|x| (two components),
    ``inverse``: 1/|x|.
    """

    kind: str
    gamma: float | None = field(default=None)

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "power":
            if self.gamma is None or not 0 < self.gamma < 2:
                raise ValueError(f"power kernel needs 0 < gamma < 2, got {self.gamma}")
        elif self.gamma is not None:
            raise ValueError(f"{self.kind} kernel takes no exponent")

    @classmethod
    def power(cls, gamma: float) -> "Kernel":
        return cls("power", float(gamma))

    @property
    def components(self) -> int:
        return 2 if self.kind == "direction" else 1

    def evaluate(self, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
        """Pointwise kernel values at nonzero offsets; shape (components, ...)."""
        r = np.hypot(dx, dy)
        if self.kind == "power":
            return (r ** (-self.gamma))[None]
        if self.kind == "inverse":
            return (1.0 / r)[None]
        return np.stack([dx / r, dy / r])

    def cell_average(self, h: float) -> np.ndarray:
        """Average over the cell [-h/2, h/2]^2 by SUBCELLS^2 midpoint quadrature."""
        m = (np.arange(SUBCELLS) + 0.5) / SUBCELLS * h - h / 2
        X, Y = np.meshgrid(m, m, indexing="ij")
        return self.evaluate(X, Y).mean(axis=(1, 2))


def kernel_samples(grid: Grid, kernel: Kernel, offsets: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Kernel values at grid offsets (multiples of h), truncated and with the
    singular cell replaced by its cell average. Shape (components, *offsets.shape)."""
    ox, oy = offsets
    dx, dy = ox * grid.h, oy * grid.h
    r = np.hypot(dx, dy)
    zero = (ox == 0) & (oy == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = kernel.evaluate(dx, dy)
    vals = np.where(r <= grid.L / 2 + 1e-12 * grid.L, vals, 0.0)
    if zero.any():
        avg = kernel.cell_average(grid.h)
        for c in range(kernel.components):
            vals[c][zero] = avg[c]
    return vals


def padded_size(n: int) -> int:
    # kernel offsets span [-n/2, n/2] per axis, data spans n: 3n/2 avoids wrap
    return 3 * n // 2 if n >= 2 else 2


@lru_cache(maxsize=32)
def _kernel_spectrum(grid: Grid, kernel: Kernel) -> np.ndarray:
    N = padded_size(grid.n)
    idx = np.arange(N)
    off = np.where(idx <= grid.n // 2, idx, idx - N)
    off = np.where(idx >= N - grid.n // 2, idx - N, off)
    ox, oy = np.meshgrid(off, off, indexing="ij")
    # only offsets in [-n/2, n/2] carry weight; anything else wraps into output
    inside = (np.abs(ox) <= grid.n // 2) & (np.abs(oy) <= grid.n // 2)
    vals = kernel_samples(grid, kernel, (ox, oy)) * inside
    spec = sfft.rfft2(vals, axes=(-2, -1))
    spec.setflags(write=False)
    return spec


def convolve_truncated_kernel(f: np.ndarray, grid: Grid, kernel: Kernel) -> np.ndarray | tuple[np.ndarray, ...]:
    """Linear (non-circular) convolution h^2 * sum_j K(x_i - x_j) f_j.

    Returns one real array for scalar kernels and a tuple of components for
    the direction kernel.
    """
    _check_shape(f, grid)
    f = np.asarray(f, dtype=float)
    N = padded_size(grid.n)
    fh = sfft.rfft2(f, s=(N, N))
    spec = _kernel_spectrum(grid, kernel)
    n = grid.n
    outs = tuple(
        sfft.irfft2(fh * spec[c], s=(N, N))[:n, :n] * grid.cell_area
        for c in range(kernel.components)
    )
    return outs[0] if kernel.components == 1 else outs


@lru_cache(maxsize=32)
def _periodic_kernel_spectrum(grid: Grid, kernel: Kernel) -> np.ndarray:
    off = np.fft.fftfreq(grid.n, 1.0 / grid.n)  # minimum-image offsets in [-n/2, n/2)
    ox, oy = np.meshgrid(off, off, indexing="ij")
    spec = sfft.rfft2(kernel_samples(grid, kernel, (ox, oy)), axes=(-2, -1))
    spec.setflags(write=False)
    return spec


def convolve_periodic_kernel(f: np.ndarray, grid: Grid, kernel: Kernel) -> np.ndarray | tuple[np.ndarray, ...]:
    """Circular convolution with the truncated kernel at minimum-image offsets.

    Agrees with :func:`convolve_truncated_kernel` while f vanishes outside
    |x| < L/4. Unlike it, the result commutes with translations of the torus,
    so a potential built from it conserves discrete momentum even after mass
    wraps around the box.
    """
    _check_shape(f, grid)
    f = np.asarray(f, dtype=float)
    fh = sfft.rfft2(f)
    spec = _periodic_kernel_spectrum(grid, kernel)
    outs = tuple(sfft.irfft2(fh * spec[c], s=f.shape) * grid.cell_area for c in range(kernel.components))
    return outs[0] if kernel.components == 1 else outs
