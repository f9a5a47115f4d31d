"""Backward-from-infinity construction of the nonlinear solution matching a free wave.

For each horizon T the nonlinear equation is solved backward from
``w_T(T) = v(T) = U(T) u_plus`` down to t = 0. The family ``w_T(0)`` is compared
across a dyadic ladder of horizons, and the largest horizon's solution is run
forward again and compared with ``v(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import diagnostics as diag
from .estimates import fit_loglog
from .propagator import EquationSpec, SolverConfig, evolve, linear_propagate
from .spectral import Grid, l2_norm, lebesgue_norm, sobolev_norm

CAUCHY_TOL = 1e-12
SAMPLE_FRACTIONS = (1 / 8, 1 / 4, 1 / 2, 3 / 4, 1.0)


@dataclass
class WaveOperatorExperiment:
    u_plus: np.ndarray
    grid: Grid
    eq: EquationSpec
    horizons: list[float]
    dt: float
    dealias: bool | None = None

    def __post_init__(self):
        self.horizons = [float(T) for T in self.horizons]
        if not self.horizons or any(T <= 0 for T in self.horizons):
            raise ValueError("horizons must be positive")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ValueError("horizons must be strictly increasing")
        if self.dt <= 0:
            raise ValueError("dt is the (positive) step magnitude")
        self._cache: dict[float, np.ndarray] = {}

    @property
    def comparison_exponent(self) -> float:
        return self.eq.comparison_exponent

    def free(self, t: float) -> np.ndarray:
        return linear_propagate(self.u_plus, self.grid, t)


def distances(a: np.ndarray, b: np.ndarray, grid: Grid, r: float) -> dict[str, float]:
    d = a - b
    return {"h1": sobolev_norm(d, grid, 1.0), "l2": l2_norm(d, grid), "lp": lebesgue_norm(d, grid, r)}


def construct_wT(exp: WaveOperatorExperiment, T: float) -> np.ndarray:
    """w_T(0): start from v(T) and integrate the nonlinear flow back to t = 0."""
    T = float(T)
    if T in exp._cache:
        return exp._cache[T]
    cfg = SolverConfig(dt=-exp.dt, t_start=T, t_end=0.0, dealias=exp.dealias, record_every=10**9)
    traj = evolve(exp.free(T), exp.grid, exp.eq, cfg, keep_fields=True)
    w0 = traj.final
    exp._cache[T] = w0
    return w0


@dataclass
class ConvergenceReport:
    cauchy: list[dict[str, float]] = field(default_factory=list)
    forward: list[dict[str, float]] = field(default_factory=list)
    t_ref: float | None = None
    h1_decay_rate: float | None = None
    budget: dict[str, Any] = field(default_factory=dict)

    @property
    def cauchy_decreasing(self) -> bool:
        h = [row["h1"] for row in self.cauchy]
        return all(b < a + CAUCHY_TOL for a, b in zip(h, h[1:]))

    @property
    def cauchy_strictly_decreasing(self) -> bool:
        h = [row["h1"] for row in self.cauchy]
        return all(b < a for a, b in zip(h, h[1:]))

    def forward_at(self, t: float) -> dict[str, float]:
        for row in self.forward:
            if abs(row["t"] - t) <= 1e-9 * max(1.0, abs(t)):
                return row
        raise KeyError(t)

    def to_dict(self) -> dict[str, Any]:
        return {
            "cauchy": self.cauchy,
            "cauchy_decreasing": self.cauchy_decreasing,
            "forward": self.forward,
            "t_ref": self.t_ref,
            "h1_decay_rate": self.h1_decay_rate,
            "budget": self.budget,
        }

    def ndjson_rows(self) -> list[dict[str, Any]]:
        rows = [{"part": "cauchy", **row} for row in self.cauchy]
        rows += [{"part": "forward", **row} for row in self.forward]
        return rows


def cauchy_report(exp: WaveOperatorExperiment, horizons: Sequence[float] | None = None) -> ConvergenceReport:
    """Distances between w_T(0) for successive horizons."""
    horizons = list(exp.horizons if horizons is None else horizons)
    rep = ConvergenceReport()
    r = exp.comparison_exponent
    for T0, T1 in zip(horizons, horizons[1:]):
        d = distances(construct_wT(exp, T1), construct_wT(exp, T0), exp.grid, r)
        rep.cauchy.append({"T": T0, "T_next": T1, **d})
    return rep


def forward_convergence(
    exp: WaveOperatorExperiment,
    t_ref: float,
    sample_times: Sequence[float],
    report: ConvergenceReport | None = None,
    on_sample: Callable[[float, np.ndarray], Any] | None = None,
) -> ConvergenceReport:
    """Run w_{t_ref}(0) forward and measure ||w(t) - v(t)|| at the sample times.

    ``on_sample(t, u)`` sees the forward state at every sample time.
    """
    rep = report if report is not None else ConvergenceReport()
    times = sorted(float(t) for t in sample_times)
    if times and (times[0] < 0 or times[-1] > t_ref + 1e-12):
        raise ValueError("sample times must lie in [0, t_ref]")
    r = exp.comparison_exponent
    u = construct_wT(exp, t_ref)
    t_now = 0.0
    rep.t_ref = float(t_ref)
    rep.forward = []
    for t in times:
        if t > t_now:
            cfg = SolverConfig(dt=exp.dt, t_start=t_now, t_end=t, dealias=exp.dealias, record_every=10**9)
            u = evolve(u, exp.grid, exp.eq, cfg).final
            t_now = t
        if on_sample is not None:
            on_sample(t, u)
        v = exp.free(t)
        row = {"t": t, **distances(u, v, exp.grid, r), "v_lp": lebesgue_norm(v, exp.grid, r)}
        rep.forward.append(row)
    # near t_ref the distance is pinned to zero by construction, so fit the early half only
    pts = [(row["t"], row["h1"]) for row in rep.forward if 0 < row["t"] <= 0.5 * t_ref + 1e-12 and row["h1"] > 0]
    rep.h1_decay_rate = fit_loglog(*zip(*pts), trim=0.0) if len(pts) >= 2 else None
    return rep


def norm_budget_check(exp: WaveOperatorExperiment, report: ConvergenceReport | None = None, rtol: float = 1e-8) -> dict[str, Any]:
    """Mass of every w_T(0) against u_plus and the energy trend toward 1/2 ||grad u_plus||^2."""
    g, eq = exp.grid, exp.eq
    m_plus = diag.mass(exp.u_plus, g)
    target = diag.kinetic_energy(exp.u_plus, g)
    rows = []
    for T in exp.horizons:
        w = construct_wT(exp, T)
        kin = diag.kinetic_energy(w, g)
        pot = diag.potential_energy(w, g, eq)
        rows.append(
            {
                "T": T,
                "mass": diag.mass(w, g),
                "energy": kin + pot,
                "kinetic": kin,
                "potential": pot,
                "potential_fraction": pot / (kin + pot) if kin + pot > 0 else 0.0,
                "excess_fraction": (kin + pot - target) / (kin + pot) if kin + pot > 0 else 0.0,
            }
        )
    mass_ok = all(row["mass"] <= m_plus * (1 + rtol) for row in rows)
    mass_dev = max((abs(row["mass"] - m_plus) / m_plus for row in rows), default=0.0) if m_plus > 0 else 0.0
    excess = [row["energy"] - target for row in rows]
    # energy must approach the free kinetic energy from above
    tol = 1e-9 * max(1.0, abs(target))
    above = all(e >= -tol for e in excess)
    trend = all(b <= a + tol for a, b in zip(excess, excess[1:]))
    fractions = [row["potential_fraction"] for row in rows]
    excess_fr = [row["excess_fraction"] for row in rows]
    out = {
        "rows": rows,
        "mass_plus": m_plus,
        "kinetic_target": target,
        "max_rel_mass_deviation": mass_dev,
        "mass_ok": mass_ok,
        "energy_above_target": above,
        "energy_trend_ok": trend,
        "potential_fraction_decreasing": all(b < a for a, b in zip(fractions, fractions[1:])),
        "excess_fraction_decreasing": all(b < a for a, b in zip(excess_fr, excess_fr[1:])),
    }
    out["pass"] = bool(mass_ok and above and trend)
    if report is not None:
        report.budget = out
    return out


def run_experiment(
    exp: WaveOperatorExperiment,
    sample_fractions: Sequence[float] = SAMPLE_FRACTIONS,
    on_sample: Callable[[float, np.ndarray], Any] | None = None,
) -> ConvergenceReport:
    """Cauchy table, forward comparison at fractions of T_max, and the norm budget."""
    rep = cauchy_report(exp)
    t_ref = exp.horizons[-1]
    forward_convergence(exp, t_ref, [0.0] + [f * t_ref for f in sample_fractions], rep, on_sample)
    norm_budget_check(exp, rep)
    return rep


def default_horizons(t_first: float, t_max: float) -> list[float]:
    out, T = [], float(t_first)
    while T <= t_max * (1 + 1e-12):
        out.append(T)
        T *= 2
    return out


def min_box_length(t_max: float) -> float:
    return 8.0 * math.sqrt(t_max)
