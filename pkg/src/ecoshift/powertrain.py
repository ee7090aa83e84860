"""Plant models: longitudinal dynamics, gearbox, motor map, battery SoC.

Everything here is a pure function of its inputs (no shared mutable state),
so the same routines serve both the closed-loop plant and the controller's
prediction model. Speeds are m/s, torques N·m, powers W, SoC a fraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PowerLimitExceeded, ValidationError

_OMEGA_EPS = 1e-9  # guards the constant-power branch at standstill


@dataclass(frozen=True)
class VehicleParams:
    """Static longitudinal-dynamics parameters.

    mass kg, wheel_radius m, frontal_area m^2, drag_coeff and rolling_coeff
    dimensionless, air_density kg/m^3, gravity m/s^2.
    """

    mass: float = 1445.0
    wheel_radius: float = 0.3166
    frontal_area: float = 2.06
    drag_coeff: float = 0.312
    air_density: float = 1.2
    rolling_coeff: float = 0.0086
    gravity: float = 9.81

    def __post_init__(self):
        for name in ("mass", "wheel_radius", "frontal_area", "drag_coeff",
                     "air_density", "rolling_coeff", "gravity"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"vehicle {name} must be > 0")
        if self.drag_coeff >= 2.0:
            raise ValidationError("drag_coeff must be < 2")
        if self.rolling_coeff >= 0.1:
            raise ValidationError("rolling_coeff must be < 0.1")


@dataclass(frozen=True)
class GearboxSpec:
    """Discrete gear ratios plus the final drive.

    ``ratios`` are ordered by gear position and must strictly decrease.
    ``single_ratio`` is the total ratio of the one-speed variant used by the
    reduction-gear controllers (already including any final drive).
    """

    ratios: tuple = (3.05, 1.72, 0.92)
    final_drive: float = 4.2
    single_ratio: float = 7.2

    def __post_init__(self):
        if len(self.ratios) < 1:
            raise ValidationError("at least one gear ratio required")
        if any(r <= 0 for r in self.ratios) or self.final_drive <= 0 \
                or self.single_ratio <= 0:
            raise ValidationError("gear ratios must be positive")
        if any(a <= b for a, b in zip(self.ratios[1:], self.ratios[:-1])):
            raise ValidationError("gear ratios must strictly decrease")

    @property
    def num_gears(self) -> int:
        return len(self.ratios)

    def total_ratio(self, gear: int) -> float:
        """Combined gearbox x final-drive ratio for a gear position."""
        if not 1 <= gear <= self.num_gears:
            raise ValidationError(f"gear {gear} outside 1..{self.num_gears}")
        return self.ratios[gear - 1] * self.final_drive

    @property
    def max_total_ratio(self) -> float:
        return self.ratios[0] * self.final_drive


@dataclass(frozen=True)
class MotorMap:
    """Parametric motor envelope and loss model.

    Torque limit: min(stall_torque, corner_power / omega).
    Losses: c0 + c1*|omega| + c2*omega^2 + c3*T^2 (W), symmetric in torque
    sign, so efficiency is too. Efficiency is floored at ``eta_floor`` which
    is also the zero-power convention.
    """

    stall_torque: float = 70.0
    corner_power: float = 60000.0
    c0: float = 80.0
    c1: float = 0.0
    c2: float = 0.00245
    c3: float = 0.3675
    eta_floor: float = 0.1

    def __post_init__(self):
        if self.stall_torque <= 0 or self.corner_power <= 0:
            raise ValidationError("stall_torque and corner_power must be > 0")
        if any(c < 0 for c in (self.c0, self.c1, self.c2, self.c3)):
            raise ValidationError("loss coefficients must be >= 0")
        if not 0.0 < self.eta_floor < 1.0:
            raise ValidationError("eta_floor must lie in (0, 1)")

    def max_torque(self, omega):
        """Available torque magnitude at motor speed omega (rad/s)."""
        w = np.maximum(np.abs(omega), _OMEGA_EPS)
        return np.minimum(self.stall_torque, self.corner_power / w)

    def loss(self, omega, torque):
        """Loss power in W; even in both arguments."""
        w = np.abs(omega)
        return self.c0 + self.c1 * w + self.c2 * w * w + self.c3 * torque * torque

    def efficiency(self, omega, torque):
        """Mechanical-to-electrical conversion efficiency in [eta_floor, 1)."""
        p_mech = np.abs(omega * torque)
        eta = np.where(p_mech > 0.0,
                       p_mech / (p_mech + self.loss(omega, torque)),
                       self.eta_floor)
        eta = np.maximum(eta, self.eta_floor)
        if np.ndim(omega) == 0 and np.ndim(torque) == 0:
            return float(eta)
        return eta


@dataclass(frozen=True)
class BatteryPack:
    """Equivalent-circuit pack with SoC-affine open-circuit voltage and
    internal resistance.

    Voc(SoC) = v0*(1 + kv*(SoC - 0.5)),  Rb(SoC) = r0*(1 + kr*(0.5 - SoC)).
    ``capacity`` is in A*s. Discharge efficiency in (0, 1); recharge
    efficiency > 1 by convention (it divides regenerated power).
    """

    capacity: float = 55.0 * 3600.0
    v0: float = 350.0
    kv: float = 0.1
    r0: float = 0.1
    kr: float = 0.2
    eta_discharge: float = 0.9
    eta_charge: float = 1.11
    soc_min: float = 0.05
    soc_max: float = 0.95

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValidationError("battery capacity must be > 0")
        if not 0.0 < self.eta_discharge < 1.0:
            raise ValidationError("eta_discharge must lie in (0, 1)")
        if self.eta_charge <= 1.0:
            raise ValidationError("eta_charge must be > 1")
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise ValidationError("need 0 <= soc_min < soc_max <= 1")
        for s in (0.0, 1.0):
            if self.open_circuit_voltage(s) <= 0:
                raise ValidationError("Voc(SoC) must stay positive on [0,1]")
            if self.resistance(s) <= 0:
                raise ValidationError("Rb(SoC) must stay positive on [0,1]")

    def open_circuit_voltage(self, soc):
        return self.v0 * (1.0 + self.kv * (soc - 0.5))

    def resistance(self, soc):
        return self.r0 * (1.0 + self.kr * (0.5 - soc))

    def power_limit(self, soc):
        """Largest deliverable discharge power at a given SoC."""
        voc = self.open_circuit_voltage(soc)
        return voc * voc / (4.0 * self.resistance(soc))


@dataclass(frozen=True)
class Plant:
    """Bundle of the four static model blocks."""

    vehicle: VehicleParams = field(default_factory=VehicleParams)
    gearbox: GearboxSpec = field(default_factory=GearboxSpec)
    motor: MotorMap = field(default_factory=MotorMap)
    battery: BatteryPack = field(default_factory=BatteryPack)


def default_plant() -> Plant:
    """Plant with the stock parameter set used throughout the tests."""
    return Plant()


@dataclass
class VehicleState:
    position: float = 0.0
    speed: float = 0.0
    soc: float = 0.8
    gear: int = 1

    def validate(self, plant: Plant):
        if self.speed < 0:
            raise ValidationError("speed must be >= 0")
        if not plant.battery.soc_min <= self.soc <= plant.battery.soc_max:
            raise ValidationError("SoC outside pack bounds")
        if not 1 <= self.gear <= plant.gearbox.num_gears:
            raise ValidationError("gear outside range")


@dataclass
class PowertrainCommand:
    """One step of actuation: motor torque, shift signal, friction brake.

    The friction brake is carried for interface completeness but held at 0;
    the motor covers the full braking demand.
    """

    motor_torque: float
    shift: int = 0
    brake_torque: float = 0.0

    def __post_init__(self):
        if self.shift not in (-1, 0, 1):
            raise ValidationError("shift signal must be -1, 0, or 1")


def wheel_torque(cmd: PowertrainCommand, gearbox: GearboxSpec, gear: int) -> float:
    """Wheel torque produced by a command in the given gear."""
    return cmd.motor_torque * gearbox.total_ratio(gear) - cmd.brake_torque


def longitudinal_accel(v, t_wheel, params: VehicleParams, grade: float = 0.0):
    """Acceleration from wheel torque, drag, grade and rolling resistance.

    At standstill the speed-independent resistive terms cannot push the
    vehicle backwards: they are clamped so that a stopped vehicle with
    insufficient drive torque simply stays at rest.
    """
    p = params
    drive = t_wheel / (p.mass * p.wheel_radius) - p.gravity * math.sin(grade)
    resist = (p.air_density * p.frontal_area * p.drag_coeff * np.square(v)
              / (2.0 * p.mass) + p.rolling_coeff * p.gravity * math.cos(grade))
    standstill = np.asarray(v) <= 0.0
    resist = np.where(standstill, np.minimum(resist, np.maximum(drive, 0.0)),
                      resist)
    out = drive - resist
    if np.ndim(v) == 0 and np.ndim(t_wheel) == 0:
        return float(out)
    return out


def step_vehicle(state: VehicleState, t_wheel: float, ts: float,
                 params: VehicleParams, grade: float = 0.0) -> VehicleState:
    """One forward-Euler step of the position/speed states.

    Speed is clamped non-negative (forward motion only); SoC and gear pass
    through unchanged.
    """
    if ts <= 0:
        raise ValidationError("time step must be > 0")
    a = longitudinal_accel(state.speed, t_wheel, params, grade)
    return VehicleState(position=state.position + state.speed * ts,
                        speed=max(0.0, state.speed + a * ts),
                        soc=state.soc, gear=state.gear)


def motor_operating_point(v, t_wheel, gear: int, gearbox: GearboxSpec,
                          wheel_radius: float):
    """(motor speed rad/s, motor torque N·m) implied by a wheel state.

    Motor speed scales with the total ratio, motor torque inversely, so the
    mechanical power at the wheel is preserved across gears.
    """
    ratio = gearbox.total_ratio(gear)
    return ratio * v / wheel_radius, t_wheel / ratio


def max_motor_torque(omega, motor: MotorMap):
    """Torque-limit curve; non-increasing in motor speed."""
    return motor.max_torque(omega)


def motor_efficiency(omega, torque, motor: MotorMap):
    return motor.efficiency(omega, torque)


def battery_power(omega, t_motor, motor: MotorMap, pack: BatteryPack):
    """Electrical power drawn from (positive) or returned to (negative) the
    pack for a motor operating point.

    Traction divides the mechanical power by the discharge and motor
    efficiencies; regeneration divides by the recharge efficiency and the
    motor efficiency.
    """
    eta_m = motor.efficiency(omega, t_motor)
    p_mech = omega * t_motor
    eta_b = np.where(np.asarray(t_motor) >= 0,
                     pack.eta_discharge, pack.eta_charge)
    out = p_mech / (eta_b * eta_m)
    if np.ndim(omega) == 0 and np.ndim(t_motor) == 0:
        return float(out)
    return out


def soc_rate(p_batt, soc, pack: BatteryPack):
    """d(SoC)/dt for a battery power draw at the present SoC.

    Positive when the pack is being charged (p_batt < 0). Raises
    PowerLimitExceeded when the demanded power is beyond the pack's
    capability (negative discriminant).
    """
    voc = pack.open_circuit_voltage(soc)
    rb = pack.resistance(soc)
    disc = voc * voc - 4.0 * rb * p_batt
    if np.any(np.asarray(disc) < 0.0):
        raise PowerLimitExceeded(
            f"battery power {np.max(p_batt):.1f} W exceeds deliverable "
            f"{pack.power_limit(soc if np.ndim(soc) == 0 else float(np.min(soc))):.1f} W")
    out = -(voc - np.sqrt(disc)) / (2.0 * pack.capacity * rb)
    if np.ndim(p_batt) == 0 and np.ndim(soc) == 0:
        return float(out)
    return out


def step_soc(soc: float, p_batt: float, ts: float, pack: BatteryPack):
    """One Euler step of the SoC state.

    Returns (new_soc, clamped): the update is clamped to the pack's SoC
    window and the flag reports whether clamping occurred.
    """
    nxt = soc + soc_rate(p_batt, soc, pack) * ts
    clamped = nxt < pack.soc_min or nxt > pack.soc_max
    return min(max(nxt, pack.soc_min), pack.soc_max), clamped


def predict_soc_horizon(soc: float, p_batt_seq, ts: float, pack: BatteryPack) -> float:
    """SoC after applying a power sequence step by step.

    Voltage and resistance are re-evaluated at every predicted SoC, so this
    is exactly the fold of ``step_soc``. PowerLimitExceeded is re-raised
    with the offending step index.
    """
    seq = np.atleast_1d(np.asarray(p_batt_seq, dtype=float))
    if seq.size < 1:
        raise ValidationError("power sequence must have length >= 1")
    out = soc
    for i, p in enumerate(seq):
        try:
            out, _ = step_soc(out, float(p), ts, pack)
        except PowerLimitExceeded as exc:
            raise PowerLimitExceeded(str(exc), step=i) from None
    return out
