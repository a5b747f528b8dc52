"""Run configuration: flat ``section.key = value`` text, flags layered on top."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .asymptotics import DEFAULT_P_GRID
from .errors import ConfigError
from .fixed_point import FixedPointConfig
from .geometry import Domain, parse_domain
from .solver import SolverConfig
from .thresholds import KP_ENDPOINTS, GradientEstimateConstants, ProblemParams

FORMATS = ("csv", "json")
AUTO = "auto"


@dataclass(frozen=True)
class ParamsConfig:
    """Problem coefficients; ``m=None`` means ``m_fraction * min(m_p, m_inf)``."""

    lam: float = 1.0
    beta: float = 1.0
    m: float | None = None
    p: float = 10.0
    q: float = 2.0
    a: float = 2.0
    b: float = 1.0
    l: float = 2.0
    alpha: float = 1.0
    s: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not math.isfinite(v):
                raise ConfigError(f"params.{f.name} must be finite")
        if not self.p > 1:
            raise ConfigError("params.p must exceed 1")

    def problem(self, m: float | None = None, p: float | None = None) -> ProblemParams:
        mm = m if m is not None else (self.m if self.m is not None else 0.0)
        return ProblemParams(self.lam, self.beta, mm, p if p is not None else self.p, self.q, self.a,
                             self.b, self.l, self.alpha, self.s)


@dataclass(frozen=True)
class ThresholdsConfig:
    """``c=None`` calibrates c on the sweep grid; ``M=None`` uses M_p."""

    c: float | None = None
    gamma: float = 2.5
    kp_endpoint: str = "upper"
    M: float | None = None

    def __post_init__(self):
        if self.kp_endpoint not in KP_ENDPOINTS:
            raise ConfigError(f"thresholds.kp_endpoint must be one of {KP_ENDPOINTS}")
        GradientEstimateConstants(1.0 if self.c is None else self.c, self.gamma)
        if self.M is not None and not self.M > 0:
            raise ConfigError("thresholds.M must be positive")


@dataclass(frozen=True)
class SweepConfig:
    p_grid: tuple = DEFAULT_P_GRID
    m_fraction: float = 0.5
    workers: int = 1

    def __post_init__(self):
        grid = tuple(float(p) for p in self.p_grid)
        object.__setattr__(self, "p_grid", grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("sweep.p_grid must be strictly increasing")
        if not 0 < self.m_fraction < 1:
            raise ConfigError("sweep.m_fraction must lie in (0, 1)")
        if self.workers < 1:
            raise ConfigError("sweep.workers must be >= 1")


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "plap_output"
    formats: tuple = FORMATS

    def __post_init__(self):
        fm = tuple(self.formats)
        object.__setattr__(self, "formats", fm)
        if not fm or any(f not in FORMATS for f in fm):
            raise ConfigError(f"output.formats must be a non-empty subset of {FORMATS}")


@dataclass(frozen=True)
class RunConfig:
    domain: Domain = field(default_factory=Domain.ball)
    params: ParamsConfig = ParamsConfig()
    solver: SolverConfig = SolverConfig()
    fixed_point: FixedPointConfig = FixedPointConfig()
    thresholds: ThresholdsConfig = ThresholdsConfig()
    sweep: SweepConfig = SweepConfig()
    output: OutputConfig = OutputConfig()

    def __post_init__(self):
        # the k_p endpoint policy has one home: thresholds.kp_endpoint
        if self.fixed_point.kp_endpoint != self.thresholds.kp_endpoint:
            object.__setattr__(self, "fixed_point", replace(self.fixed_point, kp_endpoint=self.thresholds.kp_endpoint))

    def to_text(self) -> str:
        lines = [f"domain.{k} = {v}" for k, v in self.domain.to_config().items()]
        for section in SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                if f.name in HIDDEN.get(section, ()):
                    continue
                lines.append(f"{section}.{f.name} = {_format(getattr(obj, f.name))}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        out = {"domain": self.domain.to_config()}
        for section in SECTIONS:
            out[section] = dataclasses.asdict(getattr(self, section))
        return out

    def ge(self, c: float) -> GradientEstimateConstants:
        return GradientEstimateConstants(c, self.thresholds.gamma)


SECTIONS = {"params": ParamsConfig, "solver": SolverConfig, "fixed_point": FixedPointConfig,
            "thresholds": ThresholdsConfig, "sweep": SweepConfig, "output": OutputConfig}


HIDDEN = {"fixed_point": ("kp_endpoint",)}


def _format(v) -> str:
    if v is None:
        return AUTO
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_format(x) for x in v)
    return str(v)


def _convert(cls, name: str, raw: str):
    default = {f.name: f for f in fields(cls)}[name].default
    key = f"{cls.__name__}.{name}"
    raw = raw.strip()
    try:
        if default is None:
            return None if raw.lower() in (AUTO, "none", "") else float(raw)
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false"):
                raise ValueError
            return raw.lower() == "true"
        if isinstance(default, int):
            f = float(raw)
            if f != int(f):
                raise ValueError
            return int(f)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [t.strip() for t in raw.split(",") if t.strip()]
            if default and isinstance(default[0], float):
                return tuple(float(t) for t in items)
            return tuple(items)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_assignments(lines) -> dict:
    """``section.key = value`` lines to ``{section: {key: raw}}``; ``#`` starts a comment."""
    out: dict = {}
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected section.key = value, got {raw!r}")
        k, v = (t.strip() for t in line.split("=", 1))
        if "." not in k:
            raise ConfigError(f"key {k!r} needs a section prefix")
        section, key = k.split(".", 1)
        if section != "domain" and section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r}")
        out.setdefault(section, {})[key] = v
    return out


def build_config(assignments: dict, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    changes = {}
    if "domain" in assignments:
        kv = dict(base.domain.to_config())
        new = assignments["domain"]
        if "shape" in new and new["shape"] != kv["shape"]:
            kv = {}
        kv.update(new)
        changes["domain"] = parse_domain(kv)
    for section, cls in SECTIONS.items():
        if section not in assignments:
            continue
        known = {f.name for f in fields(cls)} - set(HIDDEN.get(section, ()))
        unknown = set(assignments[section]) - known
        if unknown:
            raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
        values = {k: _convert(cls, k, v) for k, v in assignments[section].items()}
        try:
            changes[section] = replace(getattr(base, section), **values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
    return replace(base, **changes)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    return build_config(parse_assignments(text.splitlines()), base)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
