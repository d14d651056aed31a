"""Serial line protocol, simulated robot hardware and a mock firmware.

Wire format (ASCII, one message per line)::

    G <x> <y> <z>      move effector to x-y-z (mm)
    A <a> <b> <c>      set servo angles (deg)
    P                  read potentiometer
    H                  home and reset the dial
    OK | ERR <code> | POT <0..1023>

Numbers are fixed to two decimals.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, TextIO, Union

import numpy as np

from . import kinematics as kin
from .dial_env import ADC_MAX, DialEnv, NotReset, StepOutcome


class BadCommand(ValueError):
    pass


class BadResponse(ValueError):
    pass


def _fmt(v: float) -> str:
    # "+ 0.0" folds -0.0 so that the text is canonical
    return f"{float(v) + 0.0:.2f}"


@dataclass(frozen=True)
class GotoXYZ:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class SetAngles:
    a: float
    b: float
    c: float


@dataclass(frozen=True)
class ReadPot:
    pass


@dataclass(frozen=True)
class Home:
    pass


Command = Union[GotoXYZ, SetAngles, ReadPot, Home]


class ErrCode(str, enum.Enum):
    UNREACHABLE = "UNREACHABLE"
    OUT_OF_WORKSPACE = "OUT_OF_WORKSPACE"
    BAD_CMD = "BAD_CMD"


@dataclass(frozen=True)
class Ok:
    pass


@dataclass(frozen=True)
class Err:
    code: ErrCode


@dataclass(frozen=True)
class Pot:
    value: int


Response = Union[Ok, Err, Pot]


def goto(x: float, y: float, z: float) -> GotoXYZ:
    """GotoXYZ snapped to the 0.01 mm wire grid."""
    return GotoXYZ(*(float(_fmt(v)) for v in (x, y, z)))


def set_angles(a: float, b: float, c: float) -> SetAngles:
    return SetAngles(*(float(_fmt(v)) for v in (a, b, c)))


def encode_command(c: Command) -> str:
    if isinstance(c, GotoXYZ):
        vals, op = (c.x, c.y, c.z), "G"
    elif isinstance(c, SetAngles):
        vals, op = (c.a, c.b, c.c), "A"
    elif isinstance(c, ReadPot):
        return "P\n"
    elif isinstance(c, Home):
        return "H\n"
    else:
        raise TypeError(f"not a command: {c!r}")
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("command fields must be finite")
    return f"{op} {' '.join(_fmt(v) for v in vals)}\n"


def _numbers(fields, n, line):
    if len(fields) != n:
        raise BadCommand(f"expected {n} numbers: {line!r}")
    try:
        vals = [float(f) for f in fields]
    except ValueError:
        raise BadCommand(f"non-numeric field: {line!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise BadCommand(f"non-finite field: {line!r}")
    return vals


def parse_command(line: str) -> Command:
    fields = line.strip().split()
    if not fields:
        raise BadCommand("empty line")
    op, args = fields[0], fields[1:]
    if op == "G":
        return GotoXYZ(*_numbers(args, 3, line))
    if op == "A":
        return SetAngles(*_numbers(args, 3, line))
    if op in ("P", "H"):
        if args:
            raise BadCommand(f"{op} takes no arguments: {line!r}")
        return ReadPot() if op == "P" else Home()
    raise BadCommand(f"unknown opcode {op!r}")


def encode_response(r: Response) -> str:
    if isinstance(r, Ok):
        return "OK\n"
    if isinstance(r, Err):
        return f"ERR {ErrCode(r.code).value}\n"
    if isinstance(r, Pot):
        if not 0 <= r.value <= ADC_MAX:
            raise ValueError(f"pot value {r.value} out of range")
        return f"POT {int(r.value)}\n"
    raise TypeError(f"not a response: {r!r}")


def parse_response(line: str) -> Response:
    fields = line.strip().split()
    if fields == ["OK"]:
        return Ok()
    if len(fields) == 2 and fields[0] == "ERR":
        try:
            return Err(ErrCode(fields[1]))
        except ValueError:
            raise BadResponse(f"unknown error code: {line!r}") from None
    if len(fields) == 2 and fields[0] == "POT" and fields[1].isdigit():
        value = int(fields[1])
        if value > ADC_MAX:
            raise BadResponse(f"pot value out of range: {line!r}")
        return Pot(value)
    raise BadResponse(f"malformed response: {line!r}")


@dataclass(frozen=True)
class RobotImperfection:
    """Per-robot deviations from the nominal model.

    ``geometry_scale`` scales the link lengths of each arm, ``servo_quantum``
    is the servo command resolution and ``angle_bias`` a fixed horn offset
    per servo (deg).
    """

    geometry_scale: tuple[float, float, float] = (1.0, 1.0, 1.0)
    servo_quantum: float = 0.0
    angle_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "geometry_scale", tuple(float(v) for v in self.geometry_scale))
        object.__setattr__(self, "angle_bias", tuple(float(v) for v in self.angle_bias))
        if len(self.geometry_scale) != 3 or len(self.angle_bias) != 3:
            raise ValueError("need three scale factors and three biases")
        if not all(0.9 <= s <= 1.1 for s in self.geometry_scale):
            raise ValueError("geometry_scale must lie within [0.9, 1.1]")
        if self.servo_quantum < 0:
            raise ValueError("servo_quantum must be >= 0")

    @classmethod
    def from_seed(cls, seed: int, scale_spread: float = 0.02, servo_quantum: float = 1.0,
                  bias_spread: float = 1.0) -> "RobotImperfection":
        rng = np.random.default_rng(seed)
        scale = 1.0 + rng.uniform(-scale_spread, scale_spread, 3)
        bias = rng.uniform(-bias_spread, bias_spread, 3)
        return cls(tuple(scale), servo_quantum, tuple(bias), seed)

    @property
    def is_identity(self) -> bool:
        return (self.geometry_scale == (1.0, 1.0, 1.0) and self.servo_quantum == 0.0
                and self.angle_bias == (0.0, 0.0, 0.0))


IDENTITY = RobotImperfection()


class SimRobot:
    """One physical robot with its own link lengths and servo errors.

    A commanded point is solved with IK on the robot's scaled linkage, the
    joint angles are quantized to the servo resolution and offset by the horn
    bias, and FK of that linkage gives where the effector really lands.
    Calling the instance maps a commanded point to its realized position.
    """

    def __init__(self, geometry: kin.RobotGeometry = kin.RobotGeometry(), imperfection: RobotImperfection = IDENTITY):
        self.geometry = geometry
        self.imperfection = imperfection
        self.physical = dataclasses.replace(
            geometry, arm_scale=tuple(a * b for a, b in zip(geometry.arm_scale, imperfection.geometry_scale)))

    def servo_output(self, angles) -> tuple[float, float, float]:
        q = self.imperfection.servo_quantum
        out = []
        for t, bias in zip(angles, self.imperfection.angle_bias):
            if q > 0:
                t = round(t / q) * q
            out.append(t + bias)
        return tuple(out)

    def realize_angles(self, angles) -> tuple[float, float, float]:
        return kin.forward_kinematics(self.servo_output(angles), self.physical, check_range=False)

    def __call__(self, p) -> tuple[float, float, float]:
        p = tuple(float(v) for v in p)
        if self.imperfection.is_identity:
            return p
        return self.realize_angles(kin.inverse_kinematics(p, self.physical))


class MockFirmware:
    """Serves the line protocol for one simulated robot attached to a dial."""

    def __init__(self, env: DialEnv, geometry: Optional[kin.RobotGeometry] = None,
                 imperfection: RobotImperfection = IDENTITY):
        self.env = env
        self.geometry = geometry if geometry is not None else env.geometry
        self.robot = SimRobot(self.geometry, imperfection)
        self.workspace = env.workspace
        self.home = (0.0, 0.0, self.workspace.z_top)
        self.position = self.robot(self.home)

    def _move_to(self, realized):
        self.env.move(self.position, realized)
        self.position = realized

    def handle(self, cmd: Command) -> Response:
        try:
            if isinstance(cmd, GotoXYZ):
                p = (cmd.x, cmd.y, cmd.z)
                if not kin.in_workspace(p, self.workspace):
                    return Err(ErrCode.OUT_OF_WORKSPACE)
                self._move_to(self.robot(p))
            elif isinstance(cmd, SetAngles):
                angles = (cmd.a, cmd.b, cmd.c)
                for t in angles:
                    if not self.geometry.servo_min <= t <= self.geometry.servo_max:
                        return Err(ErrCode.UNREACHABLE)
                self._move_to(self.robot.realize_angles(angles))
            elif isinstance(cmd, ReadPot):
                return Pot(self.env.read_adc())
            elif isinstance(cmd, Home):
                self._move_to(self.robot(self.home))
                self.env.reset()
            else:
                return Err(ErrCode.BAD_CMD)
        except kin.KinematicsError:
            return Err(ErrCode.UNREACHABLE)
        return Ok()

    def handle_line(self, line: str) -> str:
        try:
            cmd = parse_command(line)
        except BadCommand:
            return encode_response(Err(ErrCode.BAD_CMD))
        return encode_response(self.handle(cmd))

    def serve(self, rfile: TextIO, wfile: TextIO) -> None:
        """Answer every line from ``rfile`` until it closes."""
        try:
            for line in rfile:
                if not line.strip():
                    continue
                wfile.write(self.handle_line(line))
                wfile.flush()
        except (OSError, ValueError):
            # broken pipe or closed file: end the session
            return


Transport = Callable[[str], str]


def loopback(firmware: MockFirmware) -> Transport:
    return firmware.handle_line


def stream_transport(rfile: TextIO, wfile: TextIO) -> Transport:
    def transact(line: str) -> str:
        wfile.write(line)
        wfile.flush()
        reply = rfile.readline()
        if not reply:
            raise ConnectionError("device closed the stream")
        return reply
    return transact


class DeviceError(RuntimeError):
    pass


class ProtocolEnv:
    """reset/step over the wire.

    The client plans waypoints exactly like ``DialEnv.step``, drives the robot
    through hover, descent, sweep and lift, then reads the potentiometer. In
    simulation the ground-truth lever angle comes from ``env``; the reward uses
    the POT reading only when the env is configured to.
    """

    def __init__(self, transport: Transport, env: DialEnv):
        self.transport = transport
        self.env = env
        self.needs_reset = True

    def send(self, cmd: Command) -> Response:
        resp = parse_response(self.transport(encode_command(cmd)))
        if isinstance(resp, Err):
            raise DeviceError(f"{encode_command(cmd).strip()} -> {resp.code.value}")
        return resp

    def _read(self) -> StepOutcome:
        resp = self.send(ReadPot())
        if not isinstance(resp, Pot):
            raise DeviceError(f"expected POT, got {resp!r}")
        return self.env.outcome(resp.value)

    def reset(self) -> StepOutcome:
        self.send(Home())
        self.needs_reset = False
        obs = self._read()
        return StepOutcome(obs.final_angle, 0.0, obs.success, obs.adc)

    def step(self, params) -> StepOutcome:
        if self.needs_reset:
            raise NotReset("step() called without reset()")
        p1, p2 = self.env.waypoints(params)
        hover = self.env.workspace.z_top
        for p in ((p1[0], p1[1], hover), p1, p2, (p2[0], p2[1], hover)):
            self.send(goto(*p))
        self.needs_reset = True
        return self._read()


def run_script(firmware: MockFirmware, lines: Iterable[str]) -> list[str]:
    return [firmware.handle_line(line) for line in lines]
