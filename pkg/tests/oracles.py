"""Slow, obviously-correct reference computations used as test oracles.

Everything here is written from the definitions with explicit loops or
closed forms and shares no code with the package beyond plain numpy.
"""

from __future__ import annotations

import math

import numpy as np

SUB = 16


def coords(n: int, L: float) -> np.ndarray:
    h = L / n
    return np.array([-L / 2 + j * h for j in range(n)])


def kernel_value(kind: str, dx: float, dy: float, gamma: float | None = None):
    r = math.hypot(dx, dy)
    if kind == "power":
        return (r ** (-gamma),)
    if kind == "inverse":
        return (1.0 / r,)
    return (dx / r, dy / r)


def singular_cell(kind: str, h: float, gamma: float | None = None):
    """Midpoint average over the SUB x SUB sub-cells of [-h/2, h/2]^2."""
    acc = None
    for a in range(SUB):
        for b in range(SUB):
            dx = (a + 0.5) / SUB * h - h / 2
            dy = (b + 0.5) / SUB * h - h / 2
            v = kernel_value(kind, dx, dy, gamma)
            acc = list(v) if acc is None else [s + t for s, t in zip(acc, v)]
    return tuple(s / SUB**2 for s in acc)


def brute_convolution(f: np.ndarray, L: float, kind: str, gamma: float | None = None) -> list[np.ndarray]:
    """h^2 sum_j K(x_i - x_j) f_j with K cut off beyond |x| = L/2, O(n^4)."""
    n = f.shape[0]
    h = L / n
    x = coords(n, L)
    centre = singular_cell(kind, h, gamma)
    ncomp = len(centre)
    out = [np.zeros((n, n)) for _ in range(ncomp)]
    for i1 in range(n):
        for i2 in range(n):
            acc = [0.0] * ncomp
            for j1 in range(n):
                for j2 in range(n):
                    dx, dy = x[i1] - x[j1], x[i2] - x[j2]
                    if i1 == j1 and i2 == j2:
                        k = centre
                    elif math.hypot(dx, dy) > L / 2 * (1 + 1e-12):
                        continue
                    else:
                        k = kernel_value(kind, dx, dy, gamma)
                    for c in range(ncomp):
                        acc[c] += k[c] * f[j1, j2]
            for c in range(ncomp):
                out[c][i1, i2] = h * h * acc[c]
    return out


def brute_periodic_convolution(f: np.ndarray, L: float, kind: str, gamma: float | None = None) -> list[np.ndarray]:
    """h^2 sum_j K(d_ij) f_j where d_ij is the minimum-image offset on the torus,
    each component of the index offset taken in [-n/2, n/2); O(n^4)."""
    n = f.shape[0]
    h = L / n
    centre = singular_cell(kind, h, gamma)
    ncomp = len(centre)
    out = [np.zeros((n, n)) for _ in range(ncomp)]

    def wrap(k):
        k %= n
        return k - n if k >= n - n // 2 and n > 1 else k

    for i1 in range(n):
        for i2 in range(n):
            acc = [0.0] * ncomp
            for j1 in range(n):
                for j2 in range(n):
                    dx, dy = wrap(i1 - j1) * h, wrap(i2 - j2) * h
                    if dx == 0 and dy == 0:
                        k = centre
                    elif math.hypot(dx, dy) > L / 2 * (1 + 1e-12):
                        continue
                    else:
                        k = kernel_value(kind, dx, dy, gamma)
                    for c in range(ncomp):
                        acc[c] += k[c] * f[j1, j2]
            for c in range(ncomp):
                out[c][i1, i2] = h * h * acc[c]
    return out


def spectral_gradient(f: np.ndarray, L: float) -> tuple[np.ndarray, np.ndarray]:
    n = f.shape[0]
    k = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
    fh = np.fft.fft2(f)
    return np.fft.ifft2(1j * k[:, None] * fh), np.fft.ifft2(1j * k[None, :] * fh)


def brute_morawetz(f: np.ndarray, L: float) -> float:
    """4 h^4 sum_{i != j} p(x_i) . (x_i - x_j)/|x_i - x_j| rho(x_j), |x_i - x_j| <= L/2."""
    n = f.shape[0]
    h = L / n
    x = coords(n, L)
    gx, gy = spectral_gradient(f, L)
    p1 = np.imag(np.conj(f) * gx)
    p2 = np.imag(np.conj(f) * gy)
    rho = 0.5 * np.abs(f) ** 2
    total = 0.0
    for i1 in range(n):
        for i2 in range(n):
            for j1 in range(n):
                for j2 in range(n):
                    if i1 == j1 and i2 == j2:
                        continue
                    dx, dy = x[i1] - x[j1], x[i2] - x[j2]
                    r = math.hypot(dx, dy)
                    if r > L / 2 * (1 + 1e-12):
                        continue
                    total += (p1[i1, i2] * dx + p2[i1, i2] * dy) / r * rho[j1, j2]
    return 4 * h**4 * total


def free_gaussian(X: np.ndarray, Y: np.ndarray, t: float) -> np.ndarray:
    """exp(i t Laplacian) applied to exp(-|x|^2/2): (1+2it)^-1 exp(-|x|^2 / (2(1+2it)))."""
    a = 1 + 2j * t
    return np.exp(-(X**2 + Y**2) / (2 * a)) / a


def free_gaussian_sup(t: float) -> float:
    return 1.0 / math.sqrt(1 + 4 * t * t)


def disk_integral_power(R: float, gamma: float) -> float:
    """int_{|y| < R} |y|^-gamma dy."""
    return 2 * math.pi * R ** (2 - gamma) / (2 - gamma)
