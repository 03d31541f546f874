"""Scenario files: YAML documents validated into frozen dataclasses.

Unknown keys are rejected at every level, and ``ScenarioConfig.from_dict``
applied to ``to_dict()`` reproduces the config exactly.  Bundled scenarios
are addressed by name (``interval-constant-damping``, ``line-signchanging``).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from .errors import ConfigError

__all__ = [
    "CoefficientConfig",
    "CurveConfig",
    "SweepConfig",
    "SolverConfig",
    "EvolutionConfig",
    "OutputConfig",
    "ScenarioConfig",
    "load_config",
    "bundled_scenarios",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1


def _coerce(value: Any, tp: Any, where: str) -> Any:
    origin = typing.get_origin(tp)
    if origin in (Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        errors = []
        for arg in args:
            if arg is type(None):
                continue
            try:
                return _coerce(value, arg, where)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError(errors[0] if len(errors) == 1 else f"{where}: no admissible type for {value!r}")
    if origin in (list, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        (arg,) = typing.get_args(tp)[:1] or (Any,)
        return tuple(_coerce(v, arg, f"{where}[{i}]") for i, v in enumerate(value))
    if tp is Any:
        return value
    if dataclasses.is_dataclass(tp):
        return tp.from_dict(value, where)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        try:
            # YAML 1.1 reads "1e-8" as a string
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if tp is str:
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            raise ConfigError(f"{where}: expected a string or number, got {value!r}")
        return str(value)
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported field type {tp!r}")


def _plain(value: Any) -> Any:
    if dataclasses.is_dataclass(value):
        return value.to_dict()
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


class _Section:
    """Mixin: strict mapping <-> dataclass conversion."""

    @classmethod
    def from_dict(cls, data: Any, where: str = ""):
        name = where or cls.__name__
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{name}: expected a mapping, got {data!r}")
        hints = typing.get_type_hints(cls)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"{name}: unknown key(s) {', '.join(map(str, unknown))}")
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name in data:
                kwargs[f.name] = _coerce(data[f.name], hints[f.name], f"{name}.{f.name}")
            elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise ConfigError(f"{name}: missing required key {f.name!r}")
        obj = cls(**kwargs)
        obj.validate(name)
        return obj

    def validate(self, where: str) -> None:
        pass

    def to_dict(self) -> dict:
        return {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)}


@dataclass(frozen=True)
class CoefficientConfig(_Section):
    a: str
    b: str = "0"
    a_inf: Optional[float] = None
    b_inf: Optional[float] = None
    gamma_inf_0: Optional[float] = None
    boundary_fraction: float = 0.1
    inf_tolerance: float = 1e-2

    def validate(self, where):
        if not 0 < self.boundary_fraction < 0.5:
            raise ConfigError(f"{where}.boundary_fraction must lie in (0, 0.5)")
        if self.inf_tolerance <= 0:
            raise ConfigError(f"{where}.inf_tolerance must be positive")


@dataclass(frozen=True)
class CurveConfig(_Section):
    """Eigencurve sampling; ``mu_range`` is ``"auto"`` or ``[lo, hi]``."""

    k: int = 4
    samples: int = 801
    mu_range: Union[str, tuple[float, ...]] = "auto"
    radii: Optional[tuple[float, ...]] = None

    def validate(self, where):
        if self.k < 1:
            raise ConfigError(f"{where}.k must be at least 1")
        if self.samples < 3:
            raise ConfigError(f"{where}.samples must be at least 3")
        if isinstance(self.mu_range, str):
            if self.mu_range != "auto":
                raise ConfigError(f"{where}.mu_range must be 'auto' or [lo, hi]")
        elif len(self.mu_range) != 2 or not self.mu_range[0] < 0 < self.mu_range[1]:
            raise ConfigError(f"{where}.mu_range must be [lo, hi] with lo < 0 < hi")


@dataclass(frozen=True)
class SweepConfig(_Section):
    alpha_min: float
    alpha_max: float
    bracket: float = 1e-2

    def validate(self, where):
        if not 0 < self.alpha_min < self.alpha_max:
            raise ConfigError(f"{where}: need 0 < alpha_min < alpha_max")
        if self.bracket <= 0:
            raise ConfigError(f"{where}.bracket must be positive")


@dataclass(frozen=True)
class SolverConfig(_Section):
    eig_tol: float = 1e-8
    root_tol: float = 1e-10
    tangency_tol: float = 1e-6
    match_tol: float = 1e-6
    reality_tol: float = 1e-8
    dense_budget: int = 4000
    workers: Optional[int] = None


@dataclass(frozen=True)
class EvolutionConfig(_Section):
    """``initial`` is ``"random"`` or ``"dominant"`` (top real eigenvector)."""

    T: float = 10.0
    dt: Optional[float] = None
    alpha: Optional[float] = None
    initial: str = "random"
    tail_fraction: float = 0.5

    def validate(self, where):
        if self.T <= 0 or (self.dt is not None and not 0 < self.dt <= self.T):
            raise ConfigError(f"{where}: need T > 0 and 0 < dt <= T")
        if self.initial not in ("random", "dominant"):
            raise ConfigError(f"{where}.initial must be 'random' or 'dominant'")


@dataclass(frozen=True)
class OutputConfig(_Section):
    directory: str = "results"
    figures: bool = True


@dataclass(frozen=True)
class ScenarioConfig(_Section):
    domain: dict
    coefficients: CoefficientConfig
    alpha: tuple[float, ...] = ()
    name: str = "scenario"
    version: int = SCHEMA_VERSION
    seed: int = 0
    curves: CurveConfig = field(default_factory=CurveConfig)
    sweep: Optional[SweepConfig] = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    evolution: Optional[EvolutionConfig] = None
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self, where):
        if self.version != SCHEMA_VERSION:
            raise ConfigError(f"{where}.version {self.version} is not supported (expected {SCHEMA_VERSION})")
        if any(a < 0 for a in self.alpha):
            raise ConfigError(f"{where}.alpha values must be nonnegative")
        from .grid import build_grid

        build_grid(self.domain)

    def sha256(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def bundled_scenarios() -> list[str]:
    root = resources.files("dampspec") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def _read_text(source: str | Path) -> tuple[str, str]:
    path = Path(source)
    if path.is_file():
        return path.read_text(encoding="utf-8"), str(path)
    name = str(source)
    if name in bundled_scenarios():
        res = resources.files("dampspec") / "scenarios" / f"{name}.yaml"
        return res.read_text(encoding="utf-8"), f"bundled:{name}"
    raise ConfigError(f"no config file or bundled scenario named {name!r} (bundled: {', '.join(bundled_scenarios())})")


def load_config(source: str | Path) -> ScenarioConfig:
    """Parse a YAML file path or a bundled scenario name."""
    text, label = _read_text(source)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{label}: invalid YAML: {exc}") from exc
    return ScenarioConfig.from_dict(data, label)
