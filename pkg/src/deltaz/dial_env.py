"""Potentiometer dial-turning environment.

A lever of length ``lever_length`` rotates about a vertical axle at ``pivot``.
The end-effector is a disc of radius ``effector_radius_contact`` that sweeps
through the lever's plane along straight segments; contact is quasi-static
and friction-free, so each step rotates the lever by the smallest angle that
clears the disc. The lever holds its angle when released and stops hard at
0 and ``pot_range``.

Pot angles (``phi``) are degrees in the potentiometer frame; the lever's
world heading is ``zero_heading + phi``, counter-clockwise positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import kinematics as kin

ADC_MAX = 1023


class EnvError(RuntimeError):
    pass


class NotReset(EnvError):
    pass


class ResetFailed(EnvError):
    pass


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class DialEnvConfig:
    pivot: tuple[float, float] = (0.0, -18.0)
    lever_length: float = 12.0
    lever_width: float = 2.0
    effector_radius_contact: float = 4.0
    # None: 2 mm above the floor of the workspace cylinder
    push_z: Optional[float] = None
    start_angle: float = 45.0
    target_angle: float = 170.0
    pot_range: float = 270.0
    zero_heading: float = 0.0
    adc_noise_sd: float = 0.0
    success_tol: float = 15.0
    step_len: float = 0.05
    contact_band: float = 2.0
    command_resolution: float = 0.01
    reset_mode: str = "kinematic"
    reward_from_adc: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pivot", tuple(float(v) for v in self.pivot[:2]))
        if not (0 <= self.start_angle <= self.pot_range and 0 <= self.target_angle <= self.pot_range):
            raise ValueError("start and target angles must lie within the pot travel")
        if not self.lever_length > self.effector_radius_contact >= 0:
            raise ValueError("need lever_length > effector_radius_contact >= 0")
        if self.lever_width < 0 or self.step_len <= 0 or self.pot_range <= 0:
            raise ValueError("bad lever width, step length or pot range")
        if self.reset_mode not in ("kinematic", "simulated"):
            raise ValueError(f"unknown reset_mode {self.reset_mode!r}")

    @property
    def contact_radius(self) -> float:
        """Disc radius plus lever half-width: centre-to-lever-axis clearance."""
        return self.effector_radius_contact + 0.5 * self.lever_width


@dataclass(frozen=True)
class StepOutcome:
    final_angle: float
    reward: float
    success: bool
    adc: int


def reward(phi: float, phi_d: float, tol: float = 15.0) -> float:
    err = phi - phi_d
    return (100.0 if abs(err) < tol else 0.0) - 1e-5 * err * err


def adc_from_angle(phi: float, cfg: DialEnvConfig, rng: Optional[np.random.Generator] = None) -> int:
    value = phi / cfg.pot_range * ADC_MAX
    if rng is not None and cfg.adc_noise_sd > 0:
        value += rng.normal(0.0, cfg.adc_noise_sd)
    code = math.floor(value + 0.5)
    return int(min(max(code, 0), ADC_MAX))


def angle_from_adc(a: int, cfg: DialEnvConfig) -> float:
    if not 0 <= a <= ADC_MAX:
        raise OutOfRange(f"ADC code {a} outside 0..{ADC_MAX}")
    return a / ADC_MAX * cfg.pot_range


def _wrap(deg):
    return (deg + 180.0) % 360.0 - 180.0


def _blocked_halfwidth(rho: np.ndarray, reach: float, length: float) -> np.ndarray:
    """Half-width (deg) of the arc of lever headings that overlap a disc centred
    at distance ``rho`` from the pivot; NaN where rotation cannot matter (disc
    beyond the tip or covering the axle)."""
    out = np.full(rho.shape, np.nan)
    valid = (rho > reach) & (rho < length + reach)
    r = rho[valid]
    shaft = r * r - reach * reach <= length * length
    with np.errstate(invalid="ignore"):
        along = np.degrees(np.arcsin(np.minimum(reach / r, 1.0)))
        cos_tip = (r * r + length * length - reach * reach) / (2.0 * r * length)
        tip = np.degrees(np.arccos(np.clip(cos_tip, -1.0, 1.0)))
    out[valid] = np.where(shaft, along, tip)
    return out


def _circle_crossings(a: np.ndarray, b: np.ndarray, radii, nudge: float = 1e-9) -> np.ndarray:
    """Segment parameters just before and after each crossing of a circle
    about the pivot. The blocked half-width has unbounded slope on these
    circles, so sampling them explicitly keeps the step size from biasing
    where contact starts and ends."""
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return np.empty(0)
    ad, aa = float(a @ d), float(a @ a)
    tau = nudge / math.sqrt(dd)
    out = []
    for r in radii:
        disc = ad * ad - dd * (aa - r * r)
        if disc <= 0.0:
            continue
        root = math.sqrt(disc)
        for t in ((-ad - root) / dd, (-ad + root) / dd):
            out.extend(v for v in (t - tau, t + tau) if 0.0 < v < 1.0)
    return np.asarray(out)


def sweep_path(points: Sequence, phi: float, cfg: DialEnvConfig, step_len: Optional[float] = None) -> float:
    """Push the lever along a polyline of disc centres; returns the final pot angle."""
    step = cfg.step_len if step_len is None else step_len
    pts = np.asarray([(p[0], p[1]) for p in points], dtype=float) - np.asarray(cfg.pivot)
    chunks = []
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, math.ceil(math.hypot(*(b - a)) / step))
        t = np.arange(n + 1) / n
        extra = _circle_crossings(a, b, (cfg.contact_radius, cfg.lever_length + cfg.contact_radius))
        if extra.size:
            t = np.unique(np.concatenate([t, extra]))
        seg = a + t[:, None] * (b - a)
        chunks.append(seg if not chunks else seg[1:])
    if not chunks:
        chunks.append(pts[:1])
    track = np.concatenate(chunks)
    rho = np.hypot(track[:, 0], track[:, 1])
    alpha = np.degrees(np.arctan2(track[:, 1], track[:, 0]))
    beta = _blocked_halfwidth(rho, cfg.contact_radius, cfg.lever_length)

    active = np.flatnonzero(~np.isnan(beta))
    if active.size == 0:
        return phi
    side = 0
    last = -2
    for k in active:
        k = int(k)
        if k != last + 1:
            side = 0
        last = k
        heading = cfg.zero_heading + phi
        d = _wrap(heading - alpha[k])
        b = beta[k]
        if abs(d) >= b:
            side = 0
            continue
        if side == 0:
            ref = _wrap(heading - alpha[k - 1]) if k > 0 else d
            side = 1 if ref > 0 else -1 if ref < 0 else (1 if d >= 0 else -1)
        edge = alpha[k] + side * b
        delta = side * ((side * (edge - heading)) % 360.0)
        phi = min(max(phi + delta, 0.0), cfg.pot_range)
    return float(phi)


def simulate_sweep(p_start, p_end, phi: float, cfg: DialEnvConfig, step_len: Optional[float] = None) -> float:
    """Lever angle after the disc moves in a straight line from ``p_start`` to ``p_end``."""
    return sweep_path([p_start, p_end], phi, cfg, step_len)


def clamp_to_workspace(p, ws: kin.WorkspaceCylinder):
    x, y, z = p
    r = math.hypot(x, y)
    if r > ws.radius:
        x, y = x * ws.radius / r, y * ws.radius / r
    return (x, y, min(max(z, ws.z_bottom), ws.z_top))


def quantize_point(p, resolution: float, ws: Optional[kin.WorkspaceCylinder] = None):
    """Round to the command grid, truncating toward the axis if rounding would
    step outside the workspace radius."""
    if resolution <= 0:
        return tuple(float(v) for v in p)
    digits = max(0, round(-math.log10(resolution)))
    q = tuple(float(f"{v:.{digits}f}") + 0.0 for v in p)
    if ws is not None and q[0] ** 2 + q[1] ** 2 > ws.radius ** 2:
        scale = 10 ** digits
        q = (math.trunc(p[0] * scale) / scale + 0.0, math.trunc(p[1] * scale) / scale + 0.0, q[2])
    return q


Realizer = Callable[[tuple], tuple]


class DialEnv:
    """Episodic dial-turning task with ``reset``/``step``.

    ``robot`` optionally maps a commanded Cartesian point to where the
    effector actually ends up (see ``deltaz.device.SimRobot``).
    """

    def __init__(self, cfg: DialEnvConfig = DialEnvConfig(), geometry: kin.RobotGeometry = kin.RobotGeometry(),
                 workspace: Optional[kin.WorkspaceCylinder] = None, robot: Optional[Realizer] = None,
                 seed: Optional[int] = None):
        self.cfg = cfg
        self.geometry = geometry
        self.workspace = workspace if workspace is not None else kin.default_workspace(geometry)
        self.robot = robot
        self.rng = np.random.default_rng(seed)
        self.push_z = cfg.push_z if cfg.push_z is not None else self.workspace.z_bottom + 2.0
        self.angle = cfg.start_angle
        self.needs_reset = True

    def in_contact_band(self, z: float) -> bool:
        return z <= self.push_z + self.cfg.contact_band

    def waypoints(self, params) -> tuple[tuple, tuple]:
        """Commanded Cartesian waypoints for normalized skill parameters."""
        w = kin.denormalize_params(params)
        out = []
        for rho, theta in ((w.rho1, w.theta1), (w.rho2, w.theta2)):
            p = kin.polar_to_cartesian(float(rho), float(theta), self.push_z)
            p = clamp_to_workspace(p, self.workspace)
            out.append(quantize_point(p, self.cfg.command_resolution, self.workspace))
        return out[0], out[1]

    def read_adc(self) -> int:
        return adc_from_angle(self.angle, self.cfg, self.rng)

    def outcome(self, adc: int) -> StepOutcome:
        """Outcome for the current lever state given one ADC reading of it."""
        phi = angle_from_adc(adc, self.cfg) if self.cfg.reward_from_adc else self.angle
        return StepOutcome(phi, reward(phi, self.cfg.target_angle, self.cfg.success_tol),
                           abs(phi - self.cfg.target_angle) < self.cfg.success_tol, adc)

    def observe(self) -> StepOutcome:
        return self.outcome(self.read_adc())

    def reset(self) -> StepOutcome:
        if self.cfg.reset_mode == "simulated":
            self.angle = self._sweep_reset(self.angle)
            if abs(self.angle - self.cfg.start_angle) > 1.0:
                raise ResetFailed(f"reset sweep left the lever at {self.angle:.3f} deg")
        else:
            self.angle = self.cfg.start_angle
        self.needs_reset = False
        obs = self.observe()
        return StepOutcome(obs.final_angle, 0.0, obs.success, obs.adc)

    def move(self, p_from, p_to):
        """Feed one realized straight motion of the effector into the world."""
        if self.in_contact_band(p_from[2]) and self.in_contact_band(p_to[2]):
            self.angle = simulate_sweep(p_from, p_to, self.angle, self.cfg)

    def step(self, params) -> StepOutcome:
        if self.needs_reset:
            raise NotReset("step() called without reset()")
        p1, p2 = self.waypoints(params)
        if self.robot is not None:
            p1, p2 = self.robot(p1), self.robot(p2)
        self.move(p1, p2)
        self.needs_reset = True
        return self.observe()

    def reset_path(self, phi: float, arc_step: float = 1.0) -> list[tuple[float, float]]:
        """Disc-centre polyline that drives the lever from ``phi`` back to start."""
        cfg = self.cfg
        if phi == cfg.start_angle:
            return []
        radius = 0.5 * (cfg.contact_radius + cfg.lever_length)
        beta = float(_blocked_halfwidth(np.array([radius]), cfg.contact_radius, cfg.lever_length)[0])
        # push toward start from the far side of the lever
        s = -1.0 if phi > cfg.start_angle else 1.0
        a0 = cfg.zero_heading + phi - s * (beta + 10.0)
        a1 = cfg.zero_heading + cfg.start_angle - s * beta
        n = max(1, math.ceil(abs(a1 - a0) / arc_step))
        px, py = cfg.pivot
        return [(px + radius * math.cos(math.radians(a)), py + radius * math.sin(math.radians(a)))
                for a in np.linspace(a0, a1, n + 1)]

    def _sweep_reset(self, phi: float) -> float:
        path = self.reset_path(phi)
        if not path:
            return phi
        return sweep_path(path, phi, self.cfg)
