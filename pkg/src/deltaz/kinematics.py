"""Closed-form kinematics of a rotary-servo delta robot.

Frame: origin at the centre of the motor plane, z up, so every reachable
effector position has z < 0. Arm ``i`` sits at azimuth ``ARM_AZIMUTHS[i]``.
Servo angles are in degrees, 0 = upper arm horizontal pointing outward,
positive = swinging downward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

ARM_AZIMUTHS = (0.0, 120.0, 240.0)


class KinematicsError(ValueError):
    pass


class Unreachable(KinematicsError):
    pass


class OutOfServoRange(KinematicsError):
    pass


class NoIntersection(KinematicsError):
    pass


class NegativeRadius(KinematicsError):
    pass


@dataclass(frozen=True)
class RobotGeometry:
    """Link dimensions of one robot, in mm.

    ``arm_scale`` multiplies the upper arm and forearm of each arm and is how
    a physical robot's manufacturing spread is represented; the nominal model
    has all ones. ``hinge_offset`` is carried for bookkeeping only, the
    rigid-link model ignores it.
    """

    base_radius: float = 20.0
    effector_radius: float = 21.5
    upper_arm: float = 35.0
    forearm: float = 37.0
    hinge_offset: float = 5.25
    servo_min: float = -60.0
    servo_max: float = 90.0
    arm_scale: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        lengths = (self.base_radius, self.effector_radius, self.upper_arm, self.forearm)
        if min(lengths) <= 0:
            raise ValueError("all link lengths must be positive")
        if self.forearm <= abs(self.base_radius - self.effector_radius):
            raise ValueError("forearm shorter than |base_radius - effector_radius|")
        if self.servo_min >= self.servo_max:
            raise ValueError("servo_min must be below servo_max")
        if len(self.arm_scale) != 3 or min(self.arm_scale) <= 0:
            raise ValueError("arm_scale needs three positive factors")
        object.__setattr__(self, "arm_scale", tuple(float(s) for s in self.arm_scale))

    def arm_lengths(self, i: int) -> tuple[float, float]:
        s = self.arm_scale[i]
        return self.upper_arm * s, self.forearm * s


@dataclass(frozen=True)
class WorkspaceCylinder:
    diameter: float = 60.0
    height: float = 40.0
    z_top: float = field(default=0.0)

    def __post_init__(self):
        if self.diameter <= 0 or self.height <= 0:
            raise ValueError("workspace diameter and height must be positive")

    @property
    def radius(self) -> float:
        return self.diameter / 2.0

    @property
    def z_bottom(self) -> float:
        return self.z_top - self.height


class SkillWaypoints(NamedTuple):
    rho1: float
    theta1: float
    rho2: float
    theta2: float


def _arm_frame(p, azimuth_deg):
    """Coordinates of ``p`` in the vertical plane of an arm: (radial, lateral, z)."""
    a = math.radians(azimuth_deg)
    c, s = math.cos(a), math.sin(a)
    return c * p[0] + s * p[1], -s * p[0] + c * p[1], p[2]


def _solve_arm(radial, lateral, z, geom: RobotGeometry, i: int) -> float:
    upper, fore = geom.arm_lengths(i)
    # the parallelogram keeps the forearm's lateral offset fixed, so in the arm
    # plane it acts as a link of reduced length
    planar_sq = fore * fore - lateral * lateral
    if planar_sq < 0:
        raise Unreachable(f"arm {i}: lateral offset {lateral:.3f} exceeds forearm")
    u = radial + geom.effector_radius - geom.base_radius
    a_coef = -2.0 * upper * u
    b_coef = 2.0 * upper * z
    c_coef = planar_sq - upper * upper - u * u - z * z
    m = math.hypot(a_coef, b_coef)
    if m == 0.0 or abs(c_coef) > m:
        raise Unreachable(f"arm {i}: target outside reach")
    phase = math.atan2(b_coef, a_coef)
    spread = math.acos(c_coef / m)
    best = None
    for t in (phase + spread, phase - spread):
        ex, ez = upper * math.cos(t), -upper * math.sin(t)
        # elbow on the outboard side of the shoulder-wrist line
        side = u * ez - z * ex
        if best is None or side > best[0]:
            best = (side, t)
    deg = math.degrees(best[1])
    deg = (deg + 180.0) % 360.0 - 180.0
    return deg


def inverse_kinematics(p, geom: RobotGeometry) -> tuple[float, float, float]:
    """Servo angles (deg) placing the effector centre at ``p``.

    Raises Unreachable when any arm cannot reach, OutOfServoRange when the
    solution exists but violates the servo limits.
    """
    p = tuple(float(v) for v in p)
    if not all(math.isfinite(v) for v in p):
        raise ValueError("target must be finite")
    angles = []
    for i, az in enumerate(ARM_AZIMUTHS):
        radial, lateral, z = _arm_frame(p, az)
        angles.append(_solve_arm(radial, lateral, z, geom, i))
    for i, t in enumerate(angles):
        if not geom.servo_min <= t <= geom.servo_max:
            raise OutOfServoRange(f"arm {i}: {t:.3f} deg outside [{geom.servo_min}, {geom.servo_max}]")
    return tuple(angles)


def elbow_positions(angles, geom: RobotGeometry) -> np.ndarray:
    out = np.empty((3, 3))
    for i, (az, t) in enumerate(zip(ARM_AZIMUTHS, angles)):
        upper, _ = geom.arm_lengths(i)
        a, th = math.radians(az), math.radians(t)
        rad = geom.base_radius + upper * math.cos(th)
        out[i] = (rad * math.cos(a), rad * math.sin(a), -upper * math.sin(th))
    return out


def _sphere_centres(angles, geom):
    elbows = elbow_positions(angles, geom)
    for i, az in enumerate(ARM_AZIMUTHS):
        a = math.radians(az)
        elbows[i, 0] -= geom.effector_radius * math.cos(a)
        elbows[i, 1] -= geom.effector_radius * math.sin(a)
    return elbows


def _trilaterate(centres: np.ndarray, radii) -> np.ndarray:
    p1, p2, p3 = centres
    r1, r2, r3 = radii
    d_vec = p2 - p1
    d = np.linalg.norm(d_vec)
    if d == 0.0:
        raise NoIntersection("coincident sphere centres")
    ex = d_vec / d
    v13 = p3 - p1
    i = ex @ v13
    ey_raw = v13 - i * ex
    j = np.linalg.norm(ey_raw)
    if j == 0.0:
        raise NoIntersection("collinear sphere centres")
    ey = ey_raw / j
    ez = np.cross(ex, ey)
    x = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d)
    y = (r1 * r1 - r3 * r3 + i * i + j * j) / (2.0 * j) - i * x / j
    h_sq = r1 * r1 - x * x - y * y
    if h_sq < 0.0:
        raise NoIntersection("forearm spheres do not meet")
    h = math.sqrt(h_sq)
    base = p1 + x * ex + y * ey
    a, b = base + h * ez, base - h * ez
    return a if a[2] < b[2] else b


def forward_kinematics(angles, geom: RobotGeometry, check_range: bool = True) -> tuple[float, float, float]:
    """Effector centre for servo ``angles`` (deg); the lower of the two
    trilateration solutions."""
    angles = tuple(float(t) for t in angles)
    if check_range:
        for i, t in enumerate(angles):
            if not geom.servo_min <= t <= geom.servo_max:
                raise OutOfServoRange(f"arm {i}: {t:.3f} deg outside servo range")
    centres = _sphere_centres(angles, geom)
    radii = [geom.arm_lengths(i)[1] for i in range(3)]
    return tuple(float(v) for v in _trilaterate(centres, radii))


def jacobian(angles, geom: RobotGeometry) -> np.ndarray:
    """d(position)/d(angles) in mm/deg, from the implicit loop-closure equations.

    Each arm imposes |p + r*u_i - e_i(theta_i)|^2 = L_i^2; differentiating gives
    A dp = B dtheta with A rows (p + r*u_i - e_i) and B diagonal.
    """
    p = np.array(forward_kinematics(angles, geom, check_range=False))
    elbows = elbow_positions(angles, geom)
    a_mat = np.empty((3, 3))
    b_diag = np.empty(3)
    for i, (az, t) in enumerate(zip(ARM_AZIMUTHS, angles)):
        upper, _ = geom.arm_lengths(i)
        a, th = math.radians(az), math.radians(t)
        u_i = np.array([math.cos(a), math.sin(a), 0.0])
        w = p + geom.effector_radius * u_i - elbows[i]
        d_elbow = upper * np.array([-math.sin(th) * math.cos(a), -math.sin(th) * math.sin(a), -math.cos(th)])
        a_mat[i] = w
        b_diag[i] = w @ d_elbow
    return np.linalg.solve(a_mat, np.diag(b_diag)) * (math.pi / 180.0)


def home_z(geom: RobotGeometry) -> float:
    return forward_kinematics((0.0, 0.0, 0.0), geom)[2]


def default_workspace(geom: RobotGeometry, diameter: float = 60.0, height: float = 40.0) -> WorkspaceCylinder:
    """Workspace cylinder hanging from the all-zero-angle pose."""
    return WorkspaceCylinder(diameter=diameter, height=height, z_top=home_z(geom))


def in_workspace(p, ws: WorkspaceCylinder) -> bool:
    x, y, z = p
    return x * x + y * y <= ws.radius * ws.radius and ws.z_bottom <= z <= ws.z_top


def polar_to_cartesian(rho: float, theta_deg: float, z: float) -> tuple[float, float, float]:
    if rho < 0:
        raise NegativeRadius(f"rho={rho}")
    if rho == 0:
        return (0.0, 0.0, float(z))
    t = math.radians(theta_deg)
    return (rho * math.cos(t), rho * math.sin(t), float(z))


RHO_MAX = 30.0
THETA_MAX = 180.0


def denormalize_params(s) -> SkillWaypoints:
    """Map normalized skill parameters in [-1, 1]^4 onto two polar waypoints.

    rho spans [0, 30] mm and theta spans [-180, 180] deg; inputs are clipped.
    """
    s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
    if s.shape != (4,):
        raise ValueError("expected four skill parameters")
    half = RHO_MAX / 2.0
    return SkillWaypoints(
        float(half * (s[0] + 1.0)),
        float(THETA_MAX * s[1]),
        float(half * (s[2] + 1.0)),
        float(THETA_MAX * s[3]),
    )
