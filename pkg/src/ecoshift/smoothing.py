"""Stage 1: smooth the wheel-torque and speed trajectory over the horizon.

The decision vector is the wheel-torque sequence only; speeds and positions
are recomputed inside the objective by forward simulation. No battery or
gear variables appear at this stage. Speed-band and headway constraints
enter as one-sided quadratic penalties; the state-dependent torque bound is
frozen along a reference rollout and tightened once (two-pass solve).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteObjective, ValidationError
from .nlp import SmoothProgram, SolveSettings, minimize
from .powertrain import MotorMap, VehicleParams, longitudinal_accel

HARD_LIMIT_FACTOR = 100.0  # hard speed bounds are penalized this much
                           # harder than the soft bands
_BAND_FLOOR = 0.5          # m/s; below ~0.505 m/s the printed band inverts


def speed_band(v_ref):
    """Soft reference-tracking band [lo, hi] around a reference speed.

    Nominal band is [max(0.9*v_ref, 0.5), 1.1*v_ref]; near standstill that
    is infeasible, so the band degrades gracefully to [0, max(1.1*v_ref,
    0.5)].
    """
    v_ref = np.asarray(v_ref, dtype=float)
    degenerate = v_ref * 0.9 > v_ref * 1.1 - 1e-12  # only at v_ref == 0
    degenerate = v_ref < _BAND_FLOOR / 0.99 * 0.999  # v_ref < ~0.505
    lo = np.where(degenerate, 0.0, np.maximum(0.9 * v_ref, _BAND_FLOOR))
    hi = np.where(degenerate, np.maximum(1.1 * v_ref, _BAND_FLOOR),
                  1.1 * v_ref)
    return lo, hi


@dataclass
class SmoothingInput:
    """Everything stage 1 needs about the current step."""

    position: float
    speed: float
    preview: np.ndarray           # reference speeds, length N+1
    leader_positions: np.ndarray  # leader path, length N+1
    prev_torque: float            # wheel torque applied over the last step
    ts: float = 1.0
    grade: float = 0.0
    w2: float = 1.0
    w3: float = 1.0
    penalty_weight: float = 1e4
    tau_min: float = 1.0
    tau_max: float = 2.0
    delta: float = 5.0
    v_min: float = 0.0
    v_max: float = 120.0 / 3.6
    bound_ratio: float = 3.05 * 4.2  # total ratio in the torque bound

    def __post_init__(self):
        self.preview = np.asarray(self.preview, dtype=float)
        self.leader_positions = np.asarray(self.leader_positions, dtype=float)
        if self.preview.size < 2:
            raise ValidationError("preview must cover at least one step")
        if self.leader_positions.size != self.preview.size:
            raise ValidationError("leader window must match preview length")
        if min(self.w2, self.w3, self.penalty_weight) < 0:
            raise ValidationError("weights must be >= 0")

    @property
    def horizon(self) -> int:
        return self.preview.size - 1


@dataclass
class SmoothedPlan:
    torques: np.ndarray     # length N
    speeds: np.ndarray      # length N+1, consistent Euler rollout
    positions: np.ndarray   # length N+1
    objective: float
    guess_objective: float
    clipped: bool = False   # torque bound was active in the tracking guess
    degraded: bool = False  # solver failed; this is the fallback guess

    @property
    def horizon(self) -> int:
        return self.torques.size


def _resistance_torque(v, params: VehicleParams, grade: float):
    p = params
    drag = 0.5 * p.air_density * p.frontal_area * p.drag_coeff * v * v
    roll = p.mass * p.gravity * (math.sin(grade)
                                 + p.rolling_coeff * math.cos(grade))
    return (drag + roll) * p.wheel_radius


def steady_state_torque(v, params: VehicleParams, grade: float = 0.0):
    """Wheel torque that holds a constant speed."""
    return _resistance_torque(v, params, grade)


def torque_bound(v, motor: MotorMap, ratio: float, wheel_radius: float):
    """Wheel-torque magnitude available at speed v through a total ratio."""
    omega = ratio * np.asarray(v) / wheel_radius
    return motor.max_torque(omega) * ratio


def tracking_torque(speed: float, preview, params: VehicleParams,
                    motor: MotorMap, ratio: float, ts: float = 1.0,
                    grade: float = 0.0):
    """Inverse-dynamics torque sequence that lands each Euler step exactly
    on the next reference speed, clipped at the torque bound.

    Returns (torques, clipped) where ``clipped`` flags the steps at which
    the bound prevented exact tracking. Serves as the smoothing initial
    guess and as the exact-tracking comparison controller.
    """
    preview = np.asarray(preview, dtype=float)
    n = preview.size - 1
    torques = np.zeros(n)
    clipped = np.zeros(n, dtype=bool)
    v = float(speed)
    for i in range(n):
        a_need = (preview[i + 1] - v) / ts
        if v <= 0.0 and a_need <= 0.0:
            t_w = 0.0
        else:
            t_w = (params.mass * params.wheel_radius * a_need
                   + _resistance_torque(v, params, grade))
        cap = float(torque_bound(v, motor, ratio, params.wheel_radius))
        if abs(t_w) > cap:
            t_w = math.copysign(cap, t_w)
            clipped[i] = True
        torques[i] = t_w
        a = longitudinal_accel(v, t_w, params, grade)
        v = max(0.0, v + a * ts)
    return torques, clipped


def rollout(speed: float, position: float, torques, params: VehicleParams,
            ts: float = 1.0, grade: float = 0.0):
    """Euler rollout of a torque sequence; returns (speeds, positions)."""
    torques = np.asarray(torques, dtype=float)
    n = torques.size
    v = np.empty(n + 1)
    s = np.empty(n + 1)
    v[0], s[0] = speed, position
    for i in range(n):
        a = longitudinal_accel(v[i], torques[i], params, grade)
        s[i + 1] = s[i] + v[i] * ts
        v[i + 1] = max(0.0, v[i] + a * ts)
    return v, s


def build_smoothing_program(inp: SmoothingInput, motor: MotorMap,
                            params: VehicleParams,
                            bound_speeds) -> SmoothProgram:
    """Assemble the stage-1 program with the torque box evaluated at the
    given reference rollout speeds."""
    n = inp.horizon
    vr = inp.preview
    sr = inp.leader_positions
    lo_band, hi_band = speed_band(vr)
    bounds = torque_bound(np.asarray(bound_speeds)[:n], motor,
                          inp.bound_ratio, params.wheel_radius)
    p = params
    drag_c = 0.5 * p.air_density * p.frontal_area * p.drag_coeff
    roll = p.gravity * (math.sin(inp.grade)
                        + p.rolling_coeff * math.cos(inp.grade))
    inv_mr = 1.0 / (p.mass * p.wheel_radius)
    ts = inp.ts

    def objective(xs, penalty_scale=1.0):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        m = xs.shape[0]
        v = np.full(m, inp.speed)
        s = np.full(m, inp.position)
        t_prev = np.full(m, inp.prev_torque)
        pen = inp.penalty_weight * penalty_scale
        hard = HARD_LIMIT_FACTOR * pen
        cost = np.zeros(m)
        for i in range(n):
            # soft bands evaluated at the current index, as formulated
            cost += pen * np.square(np.maximum(lo_band[i] - v, 0.0))
            cost += pen * np.square(np.maximum(v - hi_band[i], 0.0))
            gap = sr[i] - s
            lo_h = inp.tau_min * (v + inp.delta)
            hi_h = inp.tau_max * (v + inp.delta)
            cost += pen * np.square(np.maximum(lo_h - gap, 0.0))
            cost += pen * np.square(np.maximum(gap - hi_h, 0.0))
            t = xs[:, i]
            drive = t * inv_mr
            resist = drag_c * v * v / p.mass + roll
            resist = np.where(v <= 0.0,
                              np.minimum(resist, np.maximum(drive, 0.0)),
                              resist)
            v1 = np.maximum(v + (drive - resist) * ts, 0.0)
            s = s + v * ts
            cost += inp.w2 * np.square(v1 - vr[i + 1])
            cost += inp.w3 * np.square(t - t_prev)
            cost += hard * np.square(np.maximum(v1 - inp.v_max, 0.0))
            cost += hard * np.square(np.maximum(inp.v_min - v1, 0.0))
            t_prev = t
            v = v1
        return cost

    return SmoothProgram(n=n, lower=-bounds, upper=bounds,
                         objective=objective,
                         penalty_weight=inp.penalty_weight)


def _project_speed_ceiling(inp, torques, params):
    """Clamp torques so the rollout never exceeds the hard speed ceiling."""
    torques = np.asarray(torques, dtype=float).copy()
    v = inp.speed
    changed = False
    for i in range(torques.size):
        a = longitudinal_accel(v, torques[i], params, inp.grade)
        v1 = max(0.0, v + a * inp.ts)
        if v1 > inp.v_max + 1e-12:
            a_need = (inp.v_max - v) / inp.ts
            torques[i] = (params.mass * params.wheel_radius * a_need
                          + _resistance_torque(v, params, inp.grade))
            v1 = inp.v_max
            changed = True
        v = v1
    return torques, changed


def solve_smoothing(inp: SmoothingInput, motor: MotorMap,
                    params: VehicleParams,
                    settings: SolveSettings = None) -> SmoothedPlan:
    """Run stage 1 and return the smoothed plan.

    The returned objective never exceeds the tracking guess's. On solver
    failure the guess itself is returned with ``degraded`` set.
    """
    settings = settings or SolveSettings(max_iter=90, step_tol=1e-8,
                                         obj_tol=1e-9)
    guess, clip_mask = tracking_torque(inp.speed, inp.preview, params, motor,
                                       inp.bound_ratio, inp.ts, inp.grade)
    guess_speeds, _ = rollout(inp.speed, inp.position, guess, params, inp.ts,
                              inp.grade)

    def attempt(x0, bound_speeds):
        prog = build_smoothing_program(inp, motor, params, bound_speeds)
        x0 = np.clip(x0, prog.lower, prog.upper)
        report = minimize(prog, x0, settings)
        return report.solution, prog.value(report.solution)

    guess_obj = None
    try:
        prog0 = build_smoothing_program(inp, motor, params, guess_speeds)
        guess_obj = prog0.value(np.clip(guess, prog0.lower, prog0.upper))
        x1, f1 = attempt(guess, guess_speeds)
        v1, _ = rollout(inp.speed, inp.position, x1, params, inp.ts,
                        inp.grade)
        x2, f2 = attempt(x1, v1)  # refresh the torque box once
        best, best_f = (x1, f1) if f1 <= f2 else (x2, f2)
        degraded = False
        if best_f > guess_obj:
            best, best_f = guess, guess_obj
    except NonFiniteObjective:
        if guess_obj is None:
            prog0 = build_smoothing_program(inp, motor, params, guess_speeds)
            guess_obj = prog0.value(guess)
        best, best_f, degraded = guess, guess_obj, True

    best, changed = _project_speed_ceiling(inp, best, params)
    if changed:
        prog0 = build_smoothing_program(inp, motor, params, guess_speeds)
        proj_f = prog0.value(best)
        if proj_f > guess_obj:
            best, _ = _project_speed_ceiling(inp, guess, params)
            proj_f = prog0.value(best)
        best_f = proj_f

    speeds, positions = rollout(inp.speed, inp.position, best, params,
                                inp.ts, inp.grade)
    return SmoothedPlan(torques=np.asarray(best, dtype=float), speeds=speeds,
                        positions=positions, objective=float(best_f),
                        guess_objective=float(guess_obj),
                        clipped=bool(clip_mask.any()), degraded=degraded)
