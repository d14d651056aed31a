"""Experiment configuration: an INI file with one section per component."""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from ..device import RobotImperfection
from ..dial_env import DialEnvConfig
from ..kinematics import RobotGeometry, WorkspaceCylinder, default_workspace
from ..policy import RepsConfig

TRANSPORTS = ("direct", "protocol")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    reps: RepsConfig = RepsConfig()
    env: DialEnvConfig = DialEnvConfig()
    geometry: RobotGeometry = RobotGeometry()
    workspace_diameter: float = 60.0
    workspace_height: float = 40.0
    # None: hang the cylinder from the all-zero servo pose
    workspace_z_top: Optional[float] = None
    robots: tuple[RobotImperfection, ...] = field(default_factory=lambda: tuple(
        RobotImperfection.from_seed(s) for s in (1, 2, 3)))
    runs_per_robot: int = 7
    seed_base: int = 0
    transport: str = "direct"
    eval_episodes: int = 100

    def __post_init__(self):
        if self.runs_per_robot < 1:
            raise ConfigError("runs_per_robot must be >= 1")
        if not self.robots:
            raise ConfigError("at least one robot profile is required")
        if self.transport not in TRANSPORTS:
            raise ConfigError(f"transport must be one of {TRANSPORTS}")

    def workspace(self) -> WorkspaceCylinder:
        if self.workspace_z_top is None:
            return default_workspace(self.geometry, self.workspace_diameter, self.workspace_height)
        return WorkspaceCylinder(self.workspace_diameter, self.workspace_height, self.workspace_z_top)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _coerce(value: str, default):
    if isinstance(default, bool):
        if value.strip().lower() in ("1", "true", "yes", "on"):
            return True
        if value.strip().lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        return _floats(value)
    if default is None:
        return None if value.strip().lower() in ("", "none") else float(value)
    return value.strip()


def _section(parser, name, cls, aliases=None):
    """Build ``cls`` from section ``name``; unknown keys are an error."""
    defaults = cls()
    kwargs = {}
    if not parser.has_section(name):
        return defaults
    names = {f.name for f in dataclasses.fields(cls)}
    for key, value in parser.items(name):
        attr = (aliases or {}).get(key, key)
        if attr not in names:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        try:
            kwargs[attr] = _coerce(value, getattr(defaults, attr))
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def _robot(parser, name) -> RobotImperfection:
    sec = parser[name]
    try:
        seed = sec.getint("seed", fallback=None)
        if seed is not None and not any(k in sec for k in ("geometry_scale", "angle_bias")):
            return RobotImperfection.from_seed(seed, servo_quantum=sec.getfloat("servo_quantum", fallback=1.0))
        return RobotImperfection(
            geometry_scale=_floats(sec.get("geometry_scale", "1 1 1")),
            servo_quantum=sec.getfloat("servo_quantum", fallback=0.0),
            angle_bias=_floats(sec.get("angle_bias", "0 0 0")),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    known = {"run", "reps", "env", "geometry", "workspace"}
    robot_sections = [s for s in parser.sections() if s.startswith("robot.")]
    for s in parser.sections():
        if s not in known and s not in robot_sections:
            raise ConfigError(f"unknown section [{s}]")
    env = _section(parser, "env", DialEnvConfig)
    kwargs = dict(
        reps=_section(parser, "reps", RepsConfig),
        env=env,
        geometry=_section(parser, "geometry", RobotGeometry),
    )
    if parser.has_section("workspace"):
        ws = parser["workspace"]
        for key in ws:
            if key not in ("diameter", "height", "z_top"):
                raise ConfigError(f"[workspace] unknown key {key!r}")
        try:
            kwargs["workspace_diameter"] = ws.getfloat("diameter", fallback=60.0)
            kwargs["workspace_height"] = ws.getfloat("height", fallback=40.0)
            z_top = ws.get("z_top", fallback="").strip()
            kwargs["workspace_z_top"] = float(z_top) if z_top and z_top.lower() != "none" else None
        except ValueError as exc:
            raise ConfigError(f"[workspace] {exc}") from None
    if robot_sections:
        order = sorted(robot_sections, key=lambda s: int(s.split(".", 1)[1]) if s.split(".", 1)[1].isdigit() else s)
        kwargs["robots"] = tuple(_robot(parser, s) for s in order)
    if parser.has_section("run"):
        run = parser["run"]
        for key in run:
            if key not in ("runs_per_robot", "seed_base", "transport", "eval_episodes"):
                raise ConfigError(f"[run] unknown key {key!r}")
        try:
            kwargs["runs_per_robot"] = run.getint("runs_per_robot", fallback=7)
            kwargs["seed_base"] = run.getint("seed_base", fallback=0)
            kwargs["eval_episodes"] = run.getint("eval_episodes", fallback=100)
        except ValueError as exc:
            raise ConfigError(f"[run] {exc}") from None
        kwargs["transport"] = run.get("transport", fallback="direct").strip()
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def default_config_text() -> str:
    return resources.files("deltaz.bench").joinpath("default.ini").read_text()


def default_config() -> ExperimentConfig:
    return parse_config(default_config_text())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return " ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "none"
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Fully resolved config text; ``parse_config`` reads it back to an equal value."""
    parser = configparser.ConfigParser(interpolation=None)
    parser["run"] = {
        "runs_per_robot": str(cfg.runs_per_robot),
        "seed_base": str(cfg.seed_base),
        "transport": cfg.transport,
        "eval_episodes": str(cfg.eval_episodes),
    }
    for name, obj in (("reps", cfg.reps), ("env", cfg.env), ("geometry", cfg.geometry)):
        parser[name] = {f.name: _fmt(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    parser["workspace"] = {
        "diameter": _fmt(cfg.workspace_diameter),
        "height": _fmt(cfg.workspace_height),
        "z_top": _fmt(cfg.workspace_z_top),
    }
    for i, r in enumerate(cfg.robots):
        sec = {
            "geometry_scale": _fmt(r.geometry_scale),
            "servo_quantum": _fmt(r.servo_quantum),
            "angle_bias": _fmt(r.angle_bias),
        }
        if r.seed is not None:
            sec["seed"] = str(r.seed)
        parser[f"robot.{i}"] = sec
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def with_overrides(cfg: ExperimentConfig, *, seed=None, transport=None, robots=None, runs=None) -> ExperimentConfig:
    changes = {}
    if seed is not None:
        changes["seed_base"] = seed
    if transport is not None:
        changes["transport"] = transport
    if runs is not None:
        changes["runs_per_robot"] = runs
    if robots is not None:
        if robots < 1:
            raise ConfigError("--robots must be >= 1")
        have = list(cfg.robots)
        extra = range(len(have) + 1, robots + 1)
        have += [RobotImperfection.from_seed(s) for s in extra]
        changes["robots"] = tuple(have[:robots])
    try:
        return dataclasses.replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
