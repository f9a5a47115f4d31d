"""Experiment orchestration: one run per output directory, and parameter sweeps.

A run directory holds

* ``manifest.json``      config echo (all defaults filled), versions, seed, exit code
* ``diagnostics.ndjson`` one :class:`DiagnosticsRecord` per line, streamed
* ``reports.json``       experiment-specific final report
* ``checkpoints/``       optional binary field checkpoints
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__
from . import diagnostics as diag
from . import estimates as est
from . import profiles
from .checkpoint import read_checkpoint, write_checkpoint
from .config import ConfigError, RunConfig, parse_config
from .propagator import NumericalAbort, SolverConfig, evolve
from .spectral import BoundaryMassWarning, Grid, sobolev_norm
from .wave_operator import WaveOperatorExperiment, default_horizons, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3
EXIT_VERIFY = 4

DECAY_SUP_TARGET = -1.0
DECAY_L4_TARGET = -0.5
DECAY_TOL = 0.05
LINEAR_CONTROL_TOL = 1e-11


@dataclass
class RunResult:
    exit_code: int
    out_dir: Path
    report: dict[str, Any] = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK


def initial_field(cfg: RunConfig, grid: Grid | None = None) -> np.ndarray:
    grid = grid or cfg.grid
    p = cfg.profile
    if p.kind == "gaussian":
        return profiles.gaussian(grid, p.amplitude, p.width, tuple(p.boost))
    if p.kind == "plane-wave":
        return profiles.plane_wave(grid, p.amplitude, tuple(p.modes))
    if p.kind == "bump":
        return profiles.bump(grid, p.amplitude, p.radius)
    head, f = read_checkpoint(p.path)
    if head.n != grid.n or head.L != grid.L:
        raise ConfigError(f"checkpoint grid (n={head.n}, L={head.L}) does not match config", "profile.path")
    if not np.isfinite(f).all():
        raise NumericalAbort("non-finite samples in initial field", cfg.solver.t_start)
    return f


def versions() -> dict[str, str]:
    return {
        "scatterlab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _dump_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n", encoding="utf-8")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


class _Sink:
    """Streams diagnostics records and checkpoints as a run progresses."""

    def __init__(self, out: Path, cfg: RunConfig):
        self.out, self.cfg = out, cfg
        self.grid = cfg.grid
        self.recorder = diag.Recorder(self.grid, cfg.equation, tuple(cfg.output.lr))
        self.fh = open(out / "diagnostics.ndjson", "w", encoding="utf-8")
        self.records: list[diag.DiagnosticsRecord] = []

    def write(self, f: np.ndarray, t: float) -> diag.DiagnosticsRecord:
        rec = self.recorder(f, t)
        self.fh.write(rec.to_json() + "\n")
        self.fh.flush()
        self.records.append(rec)
        return rec

    def checkpoint(self, f: np.ndarray, t: float, name: str) -> None:
        d = self.out / "checkpoints"
        d.mkdir(exist_ok=True)
        write_checkpoint(d / f"{name}.dspl", f, self.grid.L, t, self.cfg.equation)

    def close(self) -> None:
        self.fh.close()


def _drifts(records: list[diag.DiagnosticsRecord]) -> dict[str, float]:
    m0, e0 = records[0].mass, records[0].energy
    mom0 = np.array(records[0].momentum)
    return {
        "mass_rel_drift": max(abs(r.mass - m0) for r in records) / m0 if m0 > 0 else 0.0,
        "energy_rel_drift": max(abs(r.energy - e0) for r in records) / abs(e0) if e0 != 0 else 0.0,
        "momentum_drift": max(float(np.max(np.abs(np.array(r.momentum) - mom0))) for r in records),
    }


def _simulate(cfg: RunConfig, sink: _Sink):
    grid, eq = cfg.grid, cfg.equation
    every = cfg.output.checkpoint_every

    def hook(t, u, step):
        sink.write(u, t)
        if every and step % every == 0:
            sink.checkpoint(u, t, f"step_{step:08d}")

    traj = evolve(initial_field(cfg, grid), grid, eq, cfg.solver.solver_config(), hooks=(hook,), keep_fields=False)
    return traj, sink.records


def _run_simulate(cfg: RunConfig, sink: _Sink) -> tuple[dict[str, Any], bool]:
    traj, records = _simulate(cfg, sink)
    report = {
        "experiment": "simulate",
        "equation": cfg.equation.tag(),
        "steps": traj.steps[-1],
        "final_time": traj.times[-1],
        "records": len(records),
        "boundary_mass_max": traj.boundary_mass_max,
        **_drifts(records),
    }
    return report, True


def _ceiling(check: str, tag: str) -> float:
    ceilings = est.load_baselines().get("ceilings", {})
    value = ceilings.get(f"{check}:{tag}", ceilings.get(check))
    return math.inf if value is None else float(value)


def _run_verify(cfg: RunConfig, sink: _Sink) -> tuple[dict[str, Any], bool]:
    grid, eq, e = cfg.grid, cfg.equation, cfg.estimates
    if cfg.seed is None:
        raise ConfigError("verify-estimates requires a seed", "seed")
    traj, records = _simulate(cfg, sink)
    traj.records = records
    tag = eq.tag()
    corr = est.check_correlation_estimate(traj, grid, eq)
    corr.ceiling = _ceiling(corr.check, tag)
    interp = est.check_interpolated_bound(traj, grid, eq, e.q, e.r)
    interp.ceiling = _ceiling(interp.check, tag)
    f0 = initial_field(cfg, grid)
    hls = est.check_hls(f0, grid, e.hls_gamma)
    hls.ceiling = _ceiling(hls.check, tag)
    ratios = [corr, interp, hls]
    eta = est.check_eta_positivity(e.eta_samples, cfg.seed)
    p4 = est.check_p4_positivity(e.p4_samples, cfg.seed + 1)
    hand = {
        "collinear": est.p4_integrand((0, 0), (1, 0), (2, 0)),
        "right_angle": est.p4_integrand((1, 0), (0, 0), (0, 1)),
    }
    a, b = est.interpolated_exponents(e.r)
    checks = {
        "ratios": all(r.passed for r in ratios),
        "morawetz_bound": corr.context["morawetz_bound_ok"],
        "eta_positivity": eta["pass"],
        "p4_positivity": p4["pass"],
        "p4_hand_values": hand == {"collinear": 4.0, "right_angle": 2.0},
    }
    report = {
        "experiment": "verify-estimates",
        "equation": tag,
        "seed": cfg.seed,
        "ratio_reports": [r.to_dict() for r in ratios],
        "positivity": [eta, p4],
        "p4_hand_values": hand,
        "interpolated_exponents": {"energy": str(a), "mass": str(b)},
        "boundary_mass_max": traj.boundary_mass_max,
        **_drifts(records),
        "checks": checks,
        "pass": all(checks.values()),
    }
    return report, report["pass"]


def _run_wave_operator(cfg: RunConfig, sink: _Sink) -> tuple[dict[str, Any], bool]:
    grid, eq = cfg.grid, cfg.equation
    horizons = default_horizons(cfg.wave_operator.t_first, cfg.solver.horizon)
    exp = WaveOperatorExperiment(initial_field(cfg, grid), grid, eq, horizons, cfg.solver.dt, cfg.solver.dealias_flag())
    rep = run_experiment(exp, on_sample=lambda t, u: sink.write(u, t))
    (sink.out / "convergence.ndjson").write_text(
        "".join(json.dumps(_jsonable(row)) + "\n" for row in rep.ndjson_rows()), encoding="utf-8"
    )
    if cfg.output.checkpoint_every:
        for T in horizons:
            sink.checkpoint(exp._cache[T], 0.0, f"wT_{T:g}")
    t_ref = horizons[-1]
    fwd = {}
    if len(rep.forward) > 1:
        fwd = {"early": rep.forward_at(t_ref / 8)["h1"], "mid": rep.forward_at(t_ref / 2)["h1"]}
    if eq.kind == "linear":
        # control run: every distance is round-off, so monotonicity means nothing
        worst = max((row[k] for row in rep.cauchy + rep.forward for k in ("h1", "l2", "lp")), default=0.0)
        checks = {"linear_control": worst < LINEAR_CONTROL_TOL, "mass_budget": rep.budget["mass_ok"]}
    else:
        checks = {
            "cauchy_strictly_decreasing": rep.cauchy_strictly_decreasing,
            "forward_mid_below_early": bool(fwd and fwd["mid"] < fwd["early"]),
            "mass_budget": rep.budget["mass_ok"],
        }
    report = {
        "experiment": "wave-operator",
        "equation": eq.tag(),
        "horizons": horizons,
        "u_plus_h1": sobolev_norm(exp.u_plus, grid, 1.0),
        **rep.to_dict(),
        "forward_h1_early_vs_mid": fwd,
        "checks": checks,
    }
    return report, True


def _run_decay(cfg: RunConfig, sink: _Sink) -> tuple[dict[str, Any], bool]:
    grid, eq, d = cfg.grid, cfg.equation, cfg.decay
    free_grid = Grid(d.free_n, d.free_L)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", est.BoxContaminationWarning)
        fit = est.check_dispersive_decay(profiles.gaussian(free_grid, 1.0, d.free_width), free_grid, d.times)
    for w in caught:
        warnings.warn(w.message, w.category, stacklevel=2)

    if d.probe == "bump":
        psi = profiles.bump(grid, 1.0, d.probe_radius)
    else:
        psi = profiles.gaussian(grid, 1.0, d.probe_width)
    probe = est.PairingProbe(grid, eq, psi)
    sample_steps = int(round(d.sample_every / cfg.solver.dt))
    diag_steps = cfg.solver.record_every
    cadence = math.gcd(sample_steps, diag_steps)
    base = cfg.solver.solver_config()
    solver = SolverConfig(base.dt, base.t_start, base.t_end, base.dealias, cadence)
    nsteps = len(solver.step_sizes())

    def hook(t, u, step):
        if step % sample_steps == 0 or step == nsteps:
            probe(t, u)
        if step % diag_steps == 0 or step == nsteps:
            sink.write(u, t)

    traj = evolve(initial_field(cfg, grid), grid, eq, solver, hooks=(hook,), keep_fields=False)
    ladder = est.weak_decay_ladder(
        [t - cfg.solver.t_start for t in probe.times], probe.values, d.s_ladder
    )
    checks = {
        "sup_exponent": abs(fit.sup_exponent - DECAY_SUP_TARGET) <= DECAY_TOL,
        "l4_exponent": abs(fit.l4_exponent - DECAY_L4_TARGET) <= DECAY_TOL,
        "dyadic_decreasing": ladder.decreasing,
        "beta_positive": bool(ladder.beta_fit > 0),
    }
    report = {
        "experiment": "decay-probe",
        "equation": eq.tag(),
        "dispersive": {k: v for k, v in fit.to_dict().items()},
        "weak_decay": ladder.to_dict(),
        "boundary_mass_max": traj.boundary_mass_max,
        "checks": checks,
        "pass": all(checks.values()),
    }
    return report, True


_EXPERIMENTS = {
    "simulate": _run_simulate,
    "verify-estimates": _run_verify,
    "wave-operator": _run_wave_operator,
    "decay-probe": _run_decay,
}


def run(cfg: RunConfig, out_dir=None) -> RunResult:
    """Execute one configured experiment, writing its artifacts to ``out_dir``."""
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": cfg.to_dict(), "versions": versions(), "seed": cfg.seed, "experiment": cfg.experiment}
    sink = _Sink(out, cfg)
    report: dict[str, Any] = {}
    error = None
    try:
        with warnings.catch_warnings():
            if cfg.output.strict_boundary:
                warnings.simplefilter("error", BoundaryMassWarning)
            report, ok = _EXPERIMENTS[cfg.experiment](cfg, sink)
        code = EXIT_OK if ok else EXIT_VERIFY
    except NumericalAbort as exc:
        code, error = EXIT_ABORT, f"numerical abort at t={exc.time}: {exc}"
    except BoundaryMassWarning as exc:
        code, error = EXIT_ABORT, f"boundary mass violation: {exc}"
    finally:
        sink.close()
    if error is not None:
        report = {"experiment": cfg.experiment, "error": error, **report}
    _dump_json(out / "reports.json", report)
    manifest["exit_code"] = code
    _dump_json(out / "manifest.json", manifest)
    return RunResult(code, out, report, error)


# --- sweeps ---------------------------------------------------------------------

AXIS_ALIASES = {
    "p": "equation.p",
    "gamma": "equation.gamma",
    "T": "solver.horizon",
    "horizon": "solver.horizon",
    "n": "grid.n",
    "dt": "solver.dt",
}


def parse_axis(spec: str) -> tuple[str, list[Any]]:
    """``"p=2.2,2.5"`` -> ("p", [2.2, 2.5])."""
    name, sep, values = spec.partition("=")
    name = name.strip()
    if not sep or not values.strip():
        raise ConfigError(f"axis spec {spec!r} must look like name=v1,v2,...")
    if name not in AXIS_ALIASES:
        raise ConfigError(f"unknown sweep axis {name!r}; choose from {sorted(AXIS_ALIASES)}")
    out = []
    for raw in values.split(","):
        raw = raw.strip()
        try:
            out.append(int(raw) if name == "n" else float(raw))
        except ValueError:
            raise ConfigError(f"bad value {raw!r} for axis {name}") from None
    return name, out


def expand_axes(axes: Sequence[tuple[str, Sequence[Any]]]) -> list[dict[str, Any]]:
    """Cross product in axis order; the last axis varies fastest."""
    points: list[dict[str, Any]] = [{}]
    for name, values in axes:
        points = [{**pt, name: v} for pt in points for v in values]
    return points


def summarize(report: dict[str, Any]) -> dict[str, Any]:
    """Flat key scalars of a report for one CSV row."""
    exp = report.get("experiment")
    row: dict[str, Any] = {}
    if exp == "simulate" or exp == "verify-estimates":
        for key in ("mass_rel_drift", "energy_rel_drift", "momentum_drift", "boundary_mass_max"):
            if key in report:
                row[key] = report[key]
    if exp == "verify-estimates":
        for r in report.get("ratio_reports", []):
            row[f"ratio_{r['check']}"] = r["ratio"]
        row["pass"] = report.get("pass")
    if exp == "wave-operator":
        for c in report.get("cauchy", []):
            row[f"cauchy_h1_T{c['T']:g}"] = c["h1"]
        row["cauchy_decreasing"] = report.get("cauchy_decreasing")
        row["h1_decay_rate"] = report.get("h1_decay_rate")
    if exp == "decay-probe":
        row["sup_exponent"] = report["dispersive"]["sup_exponent"]
        row["l4_exponent"] = report["dispersive"]["l4_exponent"]
        row["beta_fit"] = report["weak_decay"]["beta_fit"]
        row["alpha_fit"] = report["weak_decay"]["alpha_fit"]
        row["dyadic_decreasing"] = report["weak_decay"]["decreasing"]
    return row


def _sweep_point(args: tuple[str, dict[str, Any], dict[str, Any], str]) -> dict[str, Any]:
    text, overrides, point, out = args
    row: dict[str, Any] = dict(point)
    try:
        cfg = parse_config(text, {**overrides, **{AXIS_ALIASES[k]: v for k, v in point.items()}})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryMassWarning)
            warnings.simplefilter("ignore", est.BoxContaminationWarning)
            res = run(cfg, out)
        row.update({"exit_code": res.exit_code, "error": res.error or ""})
        row.update(summarize(res.report))
    except ConfigError as exc:
        row.update({"exit_code": EXIT_CONFIG, "error": str(exc)})
    except Exception as exc:  # a failed point must not stop the sweep
        row.update({"exit_code": EXIT_ABORT, "error": f"{type(exc).__name__}: {exc}"})
    return row


def sweep(
    text: str,
    axes: Sequence[tuple[str, Sequence[Any]]],
    out_dir,
    overrides: dict[str, Any] | None = None,
    workers: int = 1,
) -> list[dict[str, Any]]:
    """Run the cross product of ``axes`` over a config template; writes sweep.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = expand_axes(axes)
    jobs = [(text, dict(overrides or {}), pt, str(out / f"run_{i:03d}")) for i, pt in enumerate(points)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs), os.cpu_count() or 1)) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]
    for i, row in enumerate(rows):
        row["run"] = f"run_{i:03d}"
    write_table(out / "sweep.csv", rows, [name for name, _ in axes])
    return rows


def write_table(path: Path, rows: list[dict[str, Any]], axis_names: Sequence[str]) -> None:
    columns = ["run", *axis_names, "exit_code", "error"]
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
