"""Contact-force flight control: outer loop force/attitude commands and the
thrust state machine that manages surface engagement.

The machine has three states.  FREE passes the position controller's
thrust through while watching the sensed contact force; SEARCH ramps
thrust by a fixed increment per tick until the sensed force reaches the
desired contact force; HOLD latches the ramped thrust as a feedforward
term and runs a PID on the force error for a fixed dwell, after which the
engagement is complete.  All thrust quantities are normalized (dimension
less) commands; forces are newtons.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    DegenerateOrientationError,
    GRAVITY,
    UnitQuaternion,
    Vec3,
    cross_normalize,
    quat_to_basis,
)

MIN_DESIRED_FORCE = 0.1  # N, below this the commanded attitude is undefined


class ZeroDesiredForceError(ValueError):
    """Desired force too small to define a thrust direction."""


class SurfaceNotFoundError(RuntimeError):
    """Search band exhausted without making contact."""


class MachineState(enum.Enum):
    FREE = "FREE"
    SEARCH = "SEARCH"
    HOLD = "HOLD"


@dataclass(frozen=True)
class GainSet:
    """Position/velocity gain pairs for out-of-contact and in-contact flight."""

    kp_free: np.ndarray  # (3, 3)
    kv_free: np.ndarray
    kp_contact: np.ndarray
    kv_contact: np.ndarray

    def __post_init__(self) -> None:
        for name in ("kp_free", "kv_free", "kp_contact", "kv_contact"):
            m = getattr(self, name)
            if m.shape != (3, 3):
                raise ValueError(f"{name} must be 3x3")
            if not np.allclose(m, m.T):
                raise ValueError(f"{name} must be symmetric")
            if np.any(np.linalg.eigvalsh(m) <= 0.0):
                raise ValueError(f"{name} must be positive definite")

    @classmethod
    def from_diagonals(cls, kp_free, kv_free, kp_contact, kv_contact) -> "GainSet":
        return cls(*(np.diag(np.asarray(d, dtype=float)) for d in
                     (kp_free, kv_free, kp_contact, kv_contact)))


def tracking_errors(p_obs: Vec3, v_obs: Vec3, p_des: Vec3, v_des: Vec3) -> tuple[Vec3, Vec3]:
    """Position and velocity errors, observed minus desired."""
    return p_obs - p_des, v_obs - v_des


def select_gains(state: MachineState, gains: GainSet) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-contact gains in FREE, in-contact gains otherwise."""
    if state is MachineState.FREE:
        return gains.kp_free, gains.kv_free
    return gains.kp_contact, gains.kv_contact


def desired_force(e_p: Vec3, e_v: Vec3, gains: GainSet, mass: float,
                  state: MachineState, gravity: Vec3 = GRAVITY) -> Vec3:
    """World-frame force request from the PD position law plus gravity offload."""
    kp, kv = select_gains(state, gains)
    ep = np.asarray(e_p.as_tuple())
    ev = np.asarray(e_v.as_tuple())
    f = -kp @ ep - kv @ ev - mass * np.asarray(gravity.as_tuple())
    return Vec3(float(f[0]), float(f[1]), float(f[2]))


def commanded_orientation(f_des: Vec3, q_des: UnitQuaternion) -> UnitQuaternion:
    """Attitude whose body z points along the desired force.

    The commanded y axis is built from the desired x axis crossed into the
    thrust direction; the x axis follows from the desired z axis and is then
    re-orthonormalized against the other two so the result is a proper
    rotation even when the desired and commanded z axes disagree.
    """
    n = f_des.norm()
    if n <= MIN_DESIRED_FORCE:
        raise ZeroDesiredForceError(f"desired force norm {n:.3e} N too small")
    z_cmd = f_des.scaled(1.0 / n)
    x_des, _, z_des = quat_to_basis(q_des)
    y_cmd = cross_normalize(z_cmd, x_des)
    x_raw = y_cmd.cross(z_des)
    x_ortho = x_raw - z_cmd.scaled(x_raw.dot(z_cmd)) - y_cmd.scaled(x_raw.dot(y_cmd))
    handed = x_raw.dot(y_cmd.cross(z_cmd))
    if x_ortho.norm() <= 1e-8 or handed <= 0.0:
        raise DegenerateOrientationError("commanded frame collapsed or left-handed")
    return UnitQuaternion.from_rotation_columns(x_ortho.normalized(), y_cmd, z_cmd)


def desired_normalized_thrust(f_des: Vec3, q_obs: UnitQuaternion, k_f: float) -> float:
    """Project the force request onto the current body z and normalize."""
    if k_f <= 0.0:
        raise ValueError("thrust constant k_f must be positive")
    _, _, z_obs = quat_to_basis(q_obs)
    return k_f * f_des.dot(z_obs)


@dataclass(frozen=True)
class ThrustMachineParams:
    """Tuning for the engagement state machine.

    Defaults are simulation-tuned, not measured hardware values.  The HOLD
    update adds k*(f_oc - f_dc) terms to the latched thrust, and pressing
    up against an overhead surface means more thrust gives more contact
    force, so stabilizing gains are negative under this error convention.
    """

    delta_f: float = 0.006  # normalized thrust increment per SEARCH tick
    k_p: float = -0.01  # normalized thrust per N
    k_i: float = -0.9  # normalized thrust per N*s
    k_d: float = -0.0005  # normalized thrust per N/s
    hold_duration: float = 3.0  # s in HOLD before the engagement completes
    contact_deadband: float = 0.2  # N, sensed force that counts as contact
    max_thrust: float = 1.0  # normalized command ceiling

    def __post_init__(self) -> None:
        if self.delta_f <= 0.0 or self.hold_duration <= 0.0 or self.max_thrust <= 0.0:
            raise ValueError("delta_f, hold_duration and max_thrust must be positive")
        if self.contact_deadband < 0.0:
            raise ValueError("contact deadband must be non-negative")


@dataclass
class ThrustMachine:
    """Mutable engagement state; one instance per engagement attempt."""

    params: ThrustMachineParams = field(default_factory=ThrustMachineParams)
    state: MachineState = MachineState.FREE
    f_cmd: float = 0.0  # last issued normalized thrust
    f_hold: float = 0.0  # latched feedforward at HOLD entry
    integral: float = 0.0
    e_prev: float = 0.0
    t_prev: float = 0.0
    t_hold_start: float = 0.0
    done: bool = False
    saturated: bool = False

    def copy(self) -> "ThrustMachine":
        return replace(self)


def thrust_step(machine: ThrustMachine, f_des_hat: float, f_oc: float, f_dc: float,
                t: float) -> float:
    """Advance the engagement machine one controller tick.

    Mutates the machine in place and returns the clamped normalized thrust
    command.  Transition rules:

      FREE   -> output f_des_hat; enter SEARCH once f_oc exceeds the
                contact deadband.
      SEARCH -> ramp the previous command by delta_f; once f_oc >= f_dc,
                latch the ramped value as f_hold, zero the PID memory and
                enter HOLD.
      HOLD   -> output f_hold plus PID on (f_oc - f_dc); after
                hold_duration seconds the engagement is flagged done.

    Time must advance strictly between HOLD ticks so the PID dt is
    positive.
    """
    p = machine.params
    if machine.done:
        raise RuntimeError("engagement already complete; reset the machine")
    if not (math.isfinite(f_oc) and math.isfinite(f_dc) and math.isfinite(f_des_hat)):
        raise ValueError("non-finite input to thrust_step")

    if machine.state is MachineState.FREE:
        cmd = f_des_hat
        if f_oc > p.contact_deadband:
            machine.state = MachineState.SEARCH
    elif machine.state is MachineState.SEARCH:
        cmd = machine.f_cmd + p.delta_f
        if f_oc >= f_dc:
            machine.f_hold = cmd
            machine.integral = 0.0
            machine.e_prev = 0.0
            machine.t_prev = t
            machine.t_hold_start = t
            machine.state = MachineState.HOLD
    else:  # HOLD
        dt = t - machine.t_prev
        if dt <= 0.0:
            raise ValueError(f"HOLD tick requires advancing time, dt={dt!r}")
        e_curr = f_oc - f_dc
        machine.integral += p.k_i * e_curr * dt
        deriv = p.k_d * (e_curr - machine.e_prev) / dt
        cmd = machine.f_hold + p.k_p * e_curr + machine.integral + deriv
        machine.e_prev = e_curr
        machine.t_prev = t
        if t - machine.t_hold_start >= p.hold_duration:
            machine.done = True

    clamped = min(max(cmd, 0.0), p.max_thrust)
    machine.saturated = clamped != cmd
    machine.f_cmd = clamped
    return clamped


@dataclass(frozen=True)
class ForceProfile:
    """Desired contact force vs time in HOLD: offset + amplitude * sin."""

    offset: float
    amplitude: float = 0.0
    frequency_hz: float = 0.0

    def __post_init__(self) -> None:
        if self.offset <= 0.0:
            raise ValueError("desired contact force offset must be positive")
        if self.amplitude < 0.0 or self.frequency_hz < 0.0:
            raise ValueError("amplitude and frequency must be non-negative")

    def value(self, hold_time: float) -> float:
        """Force setpoint given seconds spent in HOLD (0 before HOLD entry)."""
        return self.offset + self.amplitude * math.sin(
            2.0 * math.pi * self.frequency_hz * hold_time)


@dataclass(frozen=True)
class SetpointSequence:
    """Vertical search band and lateral station-keeping target."""

    lateral: tuple[float, float] = (0.0, 0.0)
    z_low: float = 1.2
    z_high: float = 1.6
    search_speed: float = 0.08  # m/s upward ramp
    grace: float = 2.0  # s allowed at z_high while still out of contact

    def __post_init__(self) -> None:
        if self.z_high <= self.z_low:
            raise ValueError("z_high must exceed z_low")
        if self.search_speed <= 0.0 or self.grace < 0.0:
            raise ValueError("search speed must be positive, grace non-negative")


def search_trajectory(t: float, seq: SetpointSequence,
                      machine: ThrustMachine) -> tuple[Vec3, Vec3, UnitQuaternion]:
    """Setpoints for the engagement: ramp up until contact, freeze on HOLD.

    t is time since the engagement started.  While FREE or SEARCH the
    vertical setpoint ramps from z_low toward z_high; on HOLD entry it
    freezes at the height commanded at that moment.  Raises
    SurfaceNotFoundError if the ramp tops out and the grace period passes
    with the machine still FREE.
    """
    ramp_time = (seq.z_high - seq.z_low) / seq.search_speed
    if machine.state is MachineState.FREE and t > ramp_time + seq.grace:
        raise SurfaceNotFoundError(
            f"no contact by t={t:.2f}s with search band exhausted at {ramp_time:.2f}s")
    t_eff = min(t, machine.t_hold_start) if machine.state is MachineState.HOLD else t
    z = min(seq.z_low + seq.search_speed * max(t_eff, 0.0), seq.z_high)
    climbing = machine.state is not MachineState.HOLD and t_eff < ramp_time
    v = Vec3(0.0, 0.0, seq.search_speed if climbing else 0.0)
    p = Vec3(seq.lateral[0], seq.lateral[1], z)
    return p, v, UnitQuaternion.identity()
