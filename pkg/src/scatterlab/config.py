"""Run configuration: TOML text in, validated :class:`RunConfig` out.

Schema (all sections optional unless noted)::

    experiment = "simulate"        # simulate | verify-estimates | wave-operator | decay-probe
    seed = 0                       # required for verify-estimates

    [equation]                     # required
    kind = "nls"                   # linear | nls | hartree
    p = 2.5                        # nls only
    gamma = 1.5                    # hartree only

    [grid]                         # required
    n = 256
    L = 40.0

    [solver]                       # dt and horizon required
    dt = 1e-3
    horizon = 10.0
    t_start = 0.0
    dealias = "auto"               # auto | true | false
    record_every = 10

    [profile]
    kind = "gaussian"              # gaussian | plane-wave | bump | file
    amplitude = 1.0
    width = 1.0                    # gaussian
    boost = [0.0, 0.0]             # gaussian
    modes = [1, 0]                 # plane-wave, integer lattice modes
    radius = 4.0                   # bump
    path = ""                      # file (checkpoint written by this package)

    [output]
    dir = "runs/out"
    strict_boundary = false
    checkpoint_every = 0           # steps; multiple of solver.record_every
    lr = [4.0, 8.0]                # Lebesgue exponents recorded in diagnostics

    [estimates]
    q = 4.0
    r = 8.0
    hls_gamma = 1.5
    eta_samples = 1000000
    p4_samples = 1000000

    [wave_operator]
    t_first = 4.0                  # dyadic ladder t_first * 2^k <= solver.horizon

    [decay]
    probe = "bump"                 # bump | gaussian
    probe_radius = 4.0
    probe_width = 1.0
    times = [2.0, ..., 20.0]       # dispersive-decay sample times
    s_ladder = [1, 2, 4, 8, 16, 32]
    sample_every = 0.0625          # time between pairing samples
    free_n = 256                   # grid for the free-flow decay fit
    free_L = 160.0
    free_width = 1.0               # width of the Gaussian used for that fit
"""

from __future__ import annotations

import dataclasses
import math
import re
from importlib import resources
from dataclasses import dataclass, field
from typing import Any

import tomli
import tomli_w

from .estimates import is_admissible
from .propagator import EquationSpec, SolverConfig
from .spectral import Grid

EXPERIMENTS = ("simulate", "verify-estimates", "wave-operator", "decay-probe")
PROFILE_KINDS = ("gaussian", "plane-wave", "bump", "file")


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        loc = []
        if field:
            loc.append(f"field '{field}'")
        if line:
            loc.append(f"line {line}")
        super().__init__(f"{message}" + (f" ({', '.join(loc)})" if loc else ""))
        self.field = field
        self.line = line


@dataclass
class SolverSection:
    dt: float
    horizon: float
    t_start: float = 0.0
    dealias: str = "auto"
    record_every: int = 1

    def dealias_flag(self) -> bool | None:
        return None if self.dealias == "auto" else self.dealias == "true"

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            dt=self.dt,
            t_start=self.t_start,
            t_end=self.t_start + self.horizon,
            dealias=self.dealias_flag(),
            record_every=self.record_every,
        )


@dataclass
class ProfileSection:
    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    boost: list[float] = field(default_factory=lambda: [0.0, 0.0])
    modes: list[int] = field(default_factory=lambda: [1, 0])
    radius: float = 4.0
    path: str = ""


@dataclass
class OutputSection:
    dir: str = "runs/out"
    strict_boundary: bool = False
    checkpoint_every: int = 0
    lr: list[float] = field(default_factory=lambda: [4.0, 8.0])


@dataclass
class EstimatesSection:
    q: float = 4.0
    r: float = 8.0
    hls_gamma: float = 1.5
    eta_samples: int = 1_000_000
    p4_samples: int = 1_000_000


@dataclass
class WaveOperatorSection:
    t_first: float = 4.0


@dataclass
class DecaySection:
    probe: str = "bump"
    probe_radius: float = 4.0
    probe_width: float = 1.0
    times: list[float] = field(default_factory=lambda: [2.0 + 0.5 * k for k in range(37)])
    s_ladder: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    sample_every: float = 0.0625
    free_n: int = 256
    free_L: float = 160.0
    free_width: float = 1.0


@dataclass
class RunConfig:
    equation: EquationSpec
    n: int
    L: float
    solver: SolverSection
    experiment: str = "simulate"
    seed: int | None = None
    profile: ProfileSection = field(default_factory=ProfileSection)
    output: OutputSection = field(default_factory=OutputSection)
    estimates: EstimatesSection = field(default_factory=EstimatesSection)
    wave_operator: WaveOperatorSection = field(default_factory=WaveOperatorSection)
    decay: DecaySection = field(default_factory=DecaySection)

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.L)

    def to_dict(self) -> dict[str, Any]:
        eq = {"kind": self.equation.kind}
        if self.equation.p is not None:
            eq["p"] = self.equation.p
        if self.equation.gamma is not None:
            eq["gamma"] = self.equation.gamma
        out: dict[str, Any] = {"experiment": self.experiment}
        if self.seed is not None:
            out["seed"] = self.seed
        out["equation"] = eq
        out["grid"] = {"n": self.n, "L": self.L}
        for name in ("solver", "profile", "output", "estimates", "wave_operator", "decay"):
            out[name] = dataclasses.asdict(getattr(self, name))
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())


_SECTIONS = {
    "solver": SolverSection,
    "profile": ProfileSection,
    "output": OutputSection,
    "estimates": EstimatesSection,
    "wave_operator": WaveOperatorSection,
    "decay": DecaySection,
}
_TOP = {"experiment", "seed", "equation", "grid", *_SECTIONS}


def _line_of(text: str, section: str | None, key: str) -> int | None:
    current = None
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            if section is not None and current == section and key == section:
                return i
            continue
        if current == section and pat.match(raw):
            return i
    return None


def _coerce(value: Any, target: Any, name: str, line: int | None):
    if value is None:
        return None
    origin = getattr(target, "__origin__", None)
    if target in (float, "float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", name, line)
        return float(value)
    if target in (int, "int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", name, line)
        return value
    if target in (bool, "bool"):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", name, line)
        return value
    if target in (str, "str"):
        if isinstance(value, bool):
            return "true" if value else "false"
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", name, line)
        return value
    if origin is list or str(target).startswith("list"):
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", name, line)
        inner = "int" if "int" in str(target) else "float"
        return [_coerce(v, inner, name, line) for v in value]
    return value


def _section(text: str, raw: dict, name: str, cls):
    data = raw.get(name, {})
    if not isinstance(data, dict):
        raise ConfigError("expected a table", name, _line_of(text, None, name))
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        line = _line_of(text, name, key)
        if key not in fields:
            raise ConfigError("unknown key", f"{name}.{key}", line)
        kwargs[key] = _coerce(value, fields[key].type, f"{name}.{key}", line)
    required = [f for f, spec in fields.items() if spec.default is dataclasses.MISSING and spec.default_factory is dataclasses.MISSING]
    for key in required:
        if key not in kwargs:
            raise ConfigError("missing required key", f"{name}.{key}")
    return cls(**kwargs)


def _check(cond: bool, message: str, field: str, text: str) -> None:
    if not cond:
        section, _, key = field.rpartition(".")
        raise ConfigError(message, field, _line_of(text, section or None, key))


def apply_overrides(raw: dict, overrides: dict[str, Any]) -> dict:
    """Set dotted keys (``"solver.dt"``) or top-level keys in a parsed document."""
    for key, value in overrides.items():
        section, _, name = key.rpartition(".")
        if not section:
            raw[name] = value
            continue
        table = raw.setdefault(section, {})
        if not isinstance(table, dict):
            raise ConfigError("expected a table", section)
        table[name] = value
    return raw


def parse_config(text: str, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Parse and validate a TOML run description; ``overrides`` win over the text."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed document: {exc}", None, int(m.group(1)) if m else None) from None
    if overrides:
        apply_overrides(raw, overrides)

    for key in raw:
        if key not in _TOP:
            raise ConfigError("unknown key", key, _line_of(text, None, key))

    experiment = raw.get("experiment", "simulate")
    _check(experiment in EXPERIMENTS, f"experiment must be one of {EXPERIMENTS}", "experiment", text)
    seed = raw.get("seed")
    if seed is not None:
        _check(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0, "seed must be a nonnegative integer", "seed", text)

    if "equation" not in raw:
        raise ConfigError("missing required section", "equation")
    eq_raw = raw["equation"]
    for key in eq_raw:
        if key not in ("kind", "p", "gamma"):
            raise ConfigError("unknown key", f"equation.{key}", _line_of(text, "equation", key))
    kind = eq_raw.get("kind")
    _check(kind in ("linear", "nls", "hartree"), "kind must be linear, nls or hartree", "equation.kind", text)
    try:
        if kind == "nls":
            if "p" not in eq_raw:
                raise ConfigError("missing required key", "equation.p")
            equation = EquationSpec.nls(_coerce(eq_raw["p"], float, "equation.p", _line_of(text, "equation", "p")))
        elif kind == "hartree":
            if "gamma" not in eq_raw:
                raise ConfigError("missing required key", "equation.gamma")
            equation = EquationSpec.hartree(_coerce(eq_raw["gamma"], float, "equation.gamma", _line_of(text, "equation", "gamma")))
        else:
            equation = EquationSpec.linear()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        bad = "p" if kind == "nls" else "gamma" if kind == "hartree" else "kind"
        raise ConfigError(f"out of range: {exc}", f"equation.{bad}", _line_of(text, "equation", bad)) from None

    if "grid" not in raw:
        raise ConfigError("missing required section", "grid")
    grid_raw = raw["grid"]
    for key in grid_raw:
        if key not in ("n", "L"):
            raise ConfigError("unknown key", f"grid.{key}", _line_of(text, "grid", key))
    for key in ("n", "L"):
        if key not in grid_raw:
            raise ConfigError("missing required key", f"grid.{key}")
    n = _coerce(grid_raw["n"], int, "grid.n", _line_of(text, "grid", "n"))
    L = _coerce(grid_raw["L"], float, "grid.L", _line_of(text, "grid", "L"))
    _check(n >= 2 and (n & (n - 1)) == 0, "n must be a power of two >= 2", "grid.n", text)
    _check(L > 0, "L must be positive", "grid.L", text)

    if "solver" not in raw:
        raise ConfigError("missing required section", "solver")
    sections = {name: _section(text, raw, name, cls) for name, cls in _SECTIONS.items()}
    cfg = RunConfig(equation=equation, n=n, L=L, experiment=experiment, seed=seed, **sections)
    _validate(cfg, text)
    return cfg


def _validate(cfg: RunConfig, text: str) -> None:
    s = cfg.solver
    _check(s.dt > 0 and math.isfinite(s.dt), "dt must be positive", "solver.dt", text)
    _check(s.horizon > 0, "horizon must be positive", "solver.horizon", text)
    _check(s.record_every >= 1, "record_every must be >= 1", "solver.record_every", text)
    _check(s.dealias in ("auto", "true", "false"), "dealias must be auto, true or false", "solver.dealias", text)

    p = cfg.profile
    _check(p.kind in PROFILE_KINDS, f"profile kind must be one of {PROFILE_KINDS}", "profile.kind", text)
    _check(p.width > 0, "width must be positive", "profile.width", text)
    _check(p.radius > 0, "radius must be positive", "profile.radius", text)
    _check(len(p.boost) == 2, "boost needs two components", "profile.boost", text)
    _check(len(p.modes) == 2, "modes needs two components", "profile.modes", text)
    _check(p.kind != "file" or bool(p.path), "file profile needs a path", "profile.path", text)

    o = cfg.output
    _check(o.checkpoint_every >= 0, "checkpoint_every must be >= 0", "output.checkpoint_every", text)
    _check(
        o.checkpoint_every == 0 or o.checkpoint_every % s.record_every == 0,
        "checkpoint_every must be a multiple of solver.record_every",
        "output.checkpoint_every",
        text,
    )
    _check(all(r >= 1 for r in o.lr), "Lebesgue exponents must be >= 1", "output.lr", text)

    e = cfg.estimates
    if cfg.experiment == "verify-estimates":
        _check(is_admissible(e.q, e.r), "(q, r) must satisfy 3/q + 2/r = 1 with 4 <= q, 2 <= r <= 8", "estimates.r", text)
        _check(1 < e.hls_gamma < 2, "hls_gamma must lie in (1, 2)", "estimates.hls_gamma", text)
        _check(e.eta_samples >= 1 and e.p4_samples >= 1, "sample counts must be >= 1", "estimates.eta_samples", text)
        if cfg.seed is None:
            raise ConfigError("verify-estimates requires a seed", "seed")

    w = cfg.wave_operator
    _check(w.t_first > 0, "t_first must be positive", "wave_operator.t_first", text)
    if cfg.experiment == "wave-operator":
        _check(w.t_first <= s.horizon, "t_first must not exceed solver.horizon", "wave_operator.t_first", text)

    d = cfg.decay
    if cfg.experiment == "decay-probe":
        _check(
            s.horizon >= 2 * max(d.s_ladder) - 1e-12,
            "horizon must cover the last dyadic window [s, 2s]",
            "solver.horizon",
            text,
        )
        ratio = d.sample_every / s.dt
        _check(abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1, "sample_every must be a multiple of dt", "decay.sample_every", text)
        # dyadic windows [s, 2s] and short windows s0 + s0/8 .. s0 + s0 must hit sample times
        s0 = min(d.s_ladder)
        ends = [*d.s_ladder, *(s0 / 8 * k for k in (1, 2, 4))]
        aligned = all(abs(x / d.sample_every - round(x / d.sample_every)) < 1e-9 for x in ends)
        _check(aligned, "s_ladder entries and s_ladder[0]/8 must be multiples of sample_every", "decay.s_ladder", text)
    _check(d.probe in ("bump", "gaussian"), "probe must be bump or gaussian", "decay.probe", text)
    _check(all(t > 0 for t in d.times) and all(b > a for a, b in zip(d.times, d.times[1:])), "times must be positive and increasing", "decay.times", text)
    _check(d.sample_every > 0, "sample_every must be positive", "decay.sample_every", text)
    _check(d.free_n >= 2 and (d.free_n & (d.free_n - 1)) == 0, "free_n must be a power of two", "decay.free_n", text)
    _check(d.free_L > 0 and d.free_width > 0, "free_L and free_width must be positive", "decay.free_L", text)
    _check(all(x > 0 for x in d.s_ladder), "s_ladder entries must be positive", "decay.s_ladder", text)


def read_config_text(path) -> str:
    """Text of a config file, or of a bundled one when given as ``pinned:NAME``."""
    path = str(path)
    if path.startswith("pinned:"):
        name = path.split(":", 1)[1]
        res = resources.files("scatterlab.pinned").joinpath(f"{name}.toml")
        if not res.is_file():
            raise ConfigError(f"no bundled config named {name!r}")
        return res.read_text(encoding="utf-8")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None


def load_config(path, overrides: dict[str, Any] | None = None) -> RunConfig:
    return parse_config(read_config_text(path), overrides)
