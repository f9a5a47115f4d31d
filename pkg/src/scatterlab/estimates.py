"""Numerical checks of the positivity claims and the space-time / decay bounds.

Every "lhs <~ rhs" statement becomes a :class:`RatioReport` compared against a
pinned ceiling (see ``scatterlab.pinned.baselines``).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Any, Sequence

import numpy as np
from scipy.integrate import trapezoid

from . import diagnostics as diag
from .propagator import EquationSpec, Trajectory, linear_propagate, nonlinearity
from .spectral import Grid, Kernel, convolve_truncated_kernel, lebesgue_norm

FIT_TRIM = 0.10


class BoxContaminationWarning(UserWarning):
    """Periodic images start to dominate a decay measurement."""


def load_baselines() -> dict[str, Any]:
    text = resources.files("scatterlab.pinned").joinpath("baselines.json").read_text()
    return json.loads(text)


def ceiling_for(name: str, default: float = math.inf) -> float:
    base = load_baselines()
    entry = base.get("ceilings", {}).get(name)
    return float(entry) if entry is not None else default


@dataclass
class RatioReport:
    check: str
    lhs: float
    rhs: float
    ceiling: float = math.inf
    context: dict[str, Any] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.lhs == 0:
            return 0.0
        if self.rhs <= 0:
            return math.inf
        return self.lhs / self.rhs

    @property
    def passed(self) -> bool:
        return self.ratio <= self.ceiling

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "ceiling": self.ceiling if math.isfinite(self.ceiling) else None,
            "pass": self.passed,
            "context": self.context,
        }


# --- pointwise kernels --------------------------------------------------------


def eta_kernel(x, y) -> np.ndarray:
    """eta_jk(x, y) = delta_jk / |x-y| - (x-y)_j (x-y)_k / |x-y|^3.

    Accepts single points or stacked (..., 2) arrays; returns (..., 2, 2).
    """
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise ValueError("eta kernel is singular at x == y")
    r = r[..., None, None]
    outer = d[..., :, None] * d[..., None, :]
    return np.eye(2) / r - outer / r**3


def check_eta_positivity(samples: int, seed: int, chunk: int = 200_000) -> dict[str, Any]:
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    min_form = math.inf
    min_eig = math.inf
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        x = rng.normal(scale=5.0, size=(m, 2))
        y = rng.normal(scale=5.0, size=(m, 2))
        a = rng.normal(size=(m, 2))
        eta = eta_kernel(x, y)
        form = np.einsum("ni,nij,nj->n", a, eta, a)
        # normalise by the natural size |a|^2 / |x-y| so the floor is scale free
        scale = np.sum(a**2, axis=1) / np.linalg.norm(x - y, axis=1)
        min_form = min(min_form, float(np.min(form / scale)))
        min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(eta) * np.linalg.norm(x - y, axis=1)[:, None])))
        done += m
    return {
        "check": "eta_positivity",
        "samples": samples,
        "seed": seed,
        "min_quadratic_form": min_form,
        "min_eigenvalue": min_eig,
        "pass": min_form >= -1e-14 and min_eig >= -1e-14,
    }


def p4_integrand(x, y, z) -> np.ndarray | float:
    """(x-y).(x-z)/|x-y| + (z-y).(z-x)/|z-y| for stacked (..., 2) points."""
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    xy = np.linalg.norm(x - y, axis=-1)
    zy = np.linalg.norm(z - y, axis=-1)
    xz = np.linalg.norm(x - z, axis=-1)
    if np.any(xy == 0) or np.any(zy == 0) or np.any(xz == 0):
        raise ValueError("degenerate triple: points must be pairwise distinct")
    val = np.sum((x - y) * (x - z), axis=-1) / xy + np.sum((z - y) * (z - x), axis=-1) / zy
    return float(val) if np.ndim(val) == 0 else val


def check_p4_positivity(samples: int, seed: int, chunk: int = 200_000) -> dict[str, Any]:
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    min_scaled = math.inf
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        x, y, z = (rng.normal(scale=5.0, size=(m, 2)) for _ in range(3))
        val = p4_integrand(x, y, z)
        scale = np.linalg.norm(x - y, axis=-1) + np.linalg.norm(z - y, axis=-1)
        min_scaled = min(min_scaled, float(np.min(val / scale)))
        done += m
    return {
        "check": "p4_positivity",
        "samples": samples,
        "seed": seed,
        "min_scaled_value": min_scaled,
        "pass": min_scaled >= -1e-12,
    }


# --- space-time estimates -----------------------------------------------------


def _records(trajectory: Trajectory, grid: Grid, eq: EquationSpec) -> list[diag.DiagnosticsRecord]:
    if trajectory.records:
        return trajectory.records
    return [diag.record(f, grid, eq, t) for t, f in zip(trajectory.times, trajectory.fields)]


def check_correlation_estimate(
    trajectory: Trajectory,
    grid: Grid,
    eq: EquationSpec,
    ceiling: float = math.inf,
    morawetz_tol: float = 1e-8,
) -> RatioReport:
    """(int ||D^{1/2}|u|^2||^2 dt)^{1/2} against sup||u||_{dot H^1/2} * sup||u||_2.

    Also records the intermediate Morawetz bound lhs^2 <= 2 sup|M| as
    ``context["morawetz_bound_ok"]``.
    """
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    recs = _records(trajectory, grid, eq)
    t = np.array([r.time for r in recs])
    corr = np.array([r.correlation_density for r in recs])
    integral = float(trapezoid(corr, t)) if len(t) > 1 else 0.0
    lhs = math.sqrt(max(integral, 0.0))
    rhs = max(r.dot_h_half for r in recs) * max(math.sqrt(r.mass) for r in recs)
    M = np.array([r.morawetz_action for r in recs])
    sup_m = float(np.max(np.abs(M)))
    return RatioReport(
        "correlation",
        lhs,
        rhs,
        ceiling,
        {
            "equation": eq.tag(),
            "grid": [grid.n, grid.L],
            "horizon": [float(t[0]), float(t[-1])],
            "sup_abs_morawetz": sup_m,
            "sup_morawetz": float(np.max(M)),
            "morawetz_increment": float(M[-1] - M[0]),
            "lhs_squared": integral,
            "morawetz_bound_ok": bool(integral <= 2 * sup_m + morawetz_tol),
        },
    )


def interpolated_exponents(r) -> tuple[Fraction, Fraction]:
    """Exponents of E(u0) and ||u0||_2 in the interpolated space-time bound."""
    r = Fraction(r).limit_denominator(10**6) if isinstance(r, float) else Fraction(r)
    return (r - 2) / (6 * r), 2 * (r + 1) / (3 * r)


def is_admissible(q: float, r: float, tol: float = 1e-12) -> bool:
    qi = 0.0 if q == math.inf else 1.0 / q
    return abs(3 * qi + 2.0 / r - 1.0) <= tol and 4 <= q <= math.inf and 2 <= r <= 8


def check_interpolated_bound(
    trajectory: Trajectory,
    grid: Grid,
    eq: EquationSpec,
    q: float,
    r: float,
    ceiling: float = math.inf,
) -> RatioReport:
    """||u||_{L^q_t L^r_x} against E(u0)^{(r-2)/6r} ||u0||_2^{2(r+1)/3r}."""
    if not is_admissible(q, r):
        raise ValueError(f"(q, r) = ({q}, {r}) violates 3/q + 2/r = 1, 4 <= q, 2 <= r <= 8")
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    acc = diag.SpaceTimeAccumulator(q, r)
    key = diag._lr_key(r)
    recs = trajectory.records
    if recs and all(key in rec.lr_norms for rec in recs):
        for rec in recs:
            acc.add_norm(rec.time, rec.lr_norms[key])
        e0, m0 = recs[0].energy, recs[0].mass
    else:
        for t, f in zip(trajectory.times, trajectory.fields):
            diag.accumulate(acc, f, grid, t)
        f0 = trajectory.fields[0]
        e0, m0 = diag.energy(f0, grid, eq), diag.mass(f0, grid)
    a, b = interpolated_exponents(r)
    rhs = e0 ** float(a) * math.sqrt(m0) ** float(b) if m0 > 0 else 0.0
    return RatioReport(
        f"interpolated_q{q:g}_r{r:g}",
        acc.norm(),
        rhs,
        ceiling,
        {
            "equation": eq.tag(),
            "q": q,
            "r": r,
            "energy_exponent": str(a),
            "mass_exponent": str(b),
            "horizon": [trajectory.times[0], trajectory.times[-1]],
        },
    )


def check_hls(f: np.ndarray, grid: Grid, gamma: float, ceiling: float = math.inf) -> RatioReport:
    """||(|x|^-gamma * |u|^2)||_2 against ||u||_{4/(3-gamma)}^2."""
    if not 1 < gamma < 2:
        raise ValueError(f"HLS check needs 1 < gamma < 2, got {gamma}")
    # plane inequality: use the non-circular convolution
    V = convolve_truncated_kernel(np.abs(f) ** 2, grid, Kernel.power(gamma))
    lhs = lebesgue_norm(V, grid, 2)
    rhs = lebesgue_norm(f, grid, 4.0 / (3.0 - gamma)) ** 2
    return RatioReport("hls", lhs, rhs, ceiling, {"gamma": gamma, "grid": [grid.n, grid.L]})


# --- decay probes --------------------------------------------------------------


def fit_loglog(x: Sequence[float], y: Sequence[float], trim: float = FIT_TRIM) -> float:
    """Least-squares slope of log y vs log x with the first/last ``trim`` dropped."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = int(math.floor(trim * len(x)))
    sl = slice(k, len(x) - k) if len(x) - 2 * k >= 2 else slice(None)
    slope, _ = np.polyfit(np.log(x[sl]), np.log(y[sl]), 1)
    return float(slope)


@dataclass
class DispersiveDecayFit:
    times: list[float]
    sup_norms: list[float]
    l4_norms: list[float]
    sup_exponent: float
    l4_exponent: float
    contaminated: bool = False

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def check_dispersive_decay(psi: np.ndarray, grid: Grid, times: Sequence[float]) -> DispersiveDecayFit:
    """Fit the log-log slopes of ||U(t)psi||_inf and ||U(t)psi||_4."""
    times = [float(t) for t in times]
    if any(t <= 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be positive and increasing")
    sup, l4 = [], []
    for t in times:
        u = linear_propagate(psi, grid, t)
        sup.append(lebesgue_norm(u, grid, math.inf))
        l4.append(lebesgue_norm(u, grid, 4))
    # a plateau in the sup norm means periodic images have caught up
    tail = max(2, len(times) // 5)
    local = fit_loglog(times[-tail:], sup[-tail:], trim=0.0)
    contaminated = local > -0.5
    if contaminated:
        warnings.warn(
            f"sup-norm decay flattens to slope {local:.2f}; enlarge the box",
            BoxContaminationWarning,
            stacklevel=2,
        )
    return DispersiveDecayFit(times, sup, l4, fit_loglog(times, sup), fit_loglog(times, l4), contaminated)


def pairing(f: np.ndarray, g: np.ndarray, grid: Grid) -> complex:
    """<f, g> = int f conj(g) dx."""
    return complex(grid.cell_area * np.vdot(g, f))


class PairingProbe:
    """Hook recording sigma -> <N(u(sigma)), U(sigma) psi> during :func:`evolve`."""

    def __init__(self, grid: Grid, eq: EquationSpec, psi: np.ndarray):
        self.grid, self.eq, self.psi = grid, eq, psi
        self.times: list[float] = []
        self.values: list[complex] = []

    def __call__(self, t: float, u: np.ndarray, step: int = 0) -> None:
        self.times.append(float(t))
        N = nonlinearity(u, self.grid, self.eq)
        self.values.append(pairing(N, linear_propagate(self.psi, self.grid, t), self.grid))


def pairing_series(trajectory: Trajectory, grid: Grid, eq: EquationSpec, psi: np.ndarray) -> PairingProbe:
    probe = PairingProbe(grid, eq, psi)
    for t, f in zip(trajectory.times, trajectory.fields):
        probe(t, f)
    return probe


def weak_decay_integral(times: Sequence[float], values: Sequence[complex], s: float, t: float) -> complex:
    """Trapezoidal int_s^t of a sampled pairing series; s and t must be sample times."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=complex)
    if not s < t:
        raise ValueError("need s < t")
    tol = 1e-9 * max(1.0, abs(t))
    if s < times[0] - tol or t > times[-1] + tol:
        raise ValueError(f"[{s}, {t}] lies outside the sampled window [{times[0]}, {times[-1]}]")
    i0 = int(np.argmin(np.abs(times - s)))
    i1 = int(np.argmin(np.abs(times - t)))
    if abs(times[i0] - s) > tol or abs(times[i1] - t) > tol:
        raise ValueError("window endpoints must coincide with sample times")
    return complex(trapezoid(values[i0 : i1 + 1], times[i0 : i1 + 1]))


@dataclass
class DecayProbe:
    """Weak time-decay measurements for one test function."""

    s_ladder: list[float]
    dyadic_integrals: list[float]
    windows: list[float]
    window_integrals: list[float]
    alpha_fit: float
    beta_fit: float

    @property
    def decreasing(self) -> bool:
        v = self.dyadic_integrals
        return all(b < a for a, b in zip(v, v[1:]))

    def to_dict(self) -> dict[str, Any]:
        d = dict(self.__dict__)
        d["decreasing"] = self.decreasing
        return d


def weak_decay_ladder(
    times: Sequence[float],
    values: Sequence[complex],
    s_ladder: Sequence[float],
    windows: Sequence[float] | None = None,
) -> DecayProbe:
    """|int_s^{2s}| along a dyadic ladder (long-time exponent beta) and
    |int_{s0}^{s0+tau}| for short windows tau (short-window exponent alpha)."""
    s_ladder = [float(s) for s in s_ladder]
    dyadic = [abs(weak_decay_integral(times, values, s, 2 * s)) for s in s_ladder]
    s0 = s_ladder[0]
    if windows is None:
        windows = [s0 / 8, s0 / 4, s0 / 2, s0]
    windows = [float(w) for w in windows]
    short = [abs(weak_decay_integral(times, values, s0, s0 + w)) for w in windows]
    beta = -fit_loglog(s_ladder, dyadic, trim=0.0) if all(v > 0 for v in dyadic) else math.nan
    alpha = fit_loglog(windows, short, trim=0.0) if all(v > 0 for v in short) else math.nan
    return DecayProbe(s_ladder, dyadic, windows, short, alpha, beta)
