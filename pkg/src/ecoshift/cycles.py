"""Reference speed profiles: CSV ingest, previews, leader trace, builtins.

Cycle CSV schema: header line ``t,v``; one ``seconds,meters_per_second``
row per sample; ``#`` starts a comment line. Exported standard cycles
(UDDS, WLTC, LA92, US06) converted to m/s parse directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .errors import ParseError, ValidationError
from .powertrain import VehicleState

SPEED_LIMIT = 120.0 / 3.6  # global validity bound on reference speeds, m/s


@dataclass(frozen=True)
class DriveCycle:
    name: str
    ts: float
    speeds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "speeds",
                           np.asarray(self.speeds, dtype=float))
        if self.ts <= 0:
            raise ValidationError("cycle sample period must be > 0")
        if self.speeds.ndim != 1 or self.speeds.size < 2:
            raise ValidationError("cycle needs at least 2 samples")
        if np.any(self.speeds < 0):
            raise ValidationError("cycle speeds must be >= 0")
        if np.any(self.speeds > SPEED_LIMIT + 1e-9):
            raise ValidationError(
                f"cycle speeds exceed {SPEED_LIMIT:.2f} m/s")

    def __len__(self):
        return self.speeds.size

    @property
    def duration(self) -> float:
        return (self.speeds.size - 1) * self.ts


def load_cycle(path, expected_ts: float = 1.0) -> DriveCycle:
    """Read and validate a cycle CSV, resampling to ``expected_ts``.

    Resampling is linear interpolation on the source time grid. Raises
    ParseError (with line number) on malformed rows and ValidationError on
    semantic problems (negative speed, non-monotone time).
    """
    path = Path(path)
    times, speeds = [], []
    header_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                cols = [c.strip().lower() for c in line.split(",")]
                if cols != ["t", "v"]:
                    raise ParseError(f"expected header 't,v', got {line!r}",
                                     line=lineno)
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"expected 2 fields, got {len(parts)}",
                                 line=lineno)
            try:
                times.append(float(parts[0]))
                speeds.append(float(parts[1]))
            except ValueError:
                raise ParseError(f"non-numeric row {line!r}",
                                 line=lineno) from None
    if not header_seen:
        raise ParseError("missing 't,v' header", line=1)
    if len(times) < 2:
        raise ValidationError(f"{path.name}: need at least 2 samples")
    t = np.asarray(times)
    v = np.asarray(speeds)
    if np.any(np.diff(t) <= 0):
        raise ValidationError(f"{path.name}: time column must be increasing")
    if np.any(v < 0):
        raise ValidationError(f"{path.name}: negative speed")
    source_ts = float(t[1] - t[0])
    if abs(source_ts - expected_ts) > 1e-9 or np.ptp(np.diff(t)) > 1e-9:
        grid = np.arange(t[0], t[-1] + 1e-9, expected_ts)
        v = np.interp(grid, t, v)
    return DriveCycle(name=path.stem, ts=expected_ts, speeds=v)


def save_cycle(cycle: DriveCycle, path) -> None:
    """Write a cycle in the CSV schema accepted by ``load_cycle``."""
    path = Path(path)
    lines = ["t,v"]
    for k, v in enumerate(cycle.speeds):
        lines.append(f"{k * cycle.ts:.6g},{v!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def leader_position(cycle: DriveCycle, initial_gap: float,
                    pad: int = 0) -> np.ndarray:
    """Leader position trace implied by the reference speeds.

    Forward-Euler integration (matching the plant discretization):
    position[k] = gap + Ts * sum(speeds[:k]). ``pad`` appends extra steps
    holding the final speed so horizon windows past the cycle end stay
    defined.
    """
    v = cycle.speeds
    if pad > 0:
        v = np.concatenate([v, np.full(pad, v[-1])])
    pos = np.empty(v.size)
    pos[0] = initial_gap
    pos[1:] = initial_gap + cycle.ts * np.cumsum(v[:-1])
    return pos


def preview(cycle: DriveCycle, k: int, n: int) -> np.ndarray:
    """Reference speeds v[k..k+n] (length n+1), holding the final sample
    beyond the cycle end."""
    if k >= len(cycle):
        raise ValidationError(f"preview start {k} beyond cycle end")
    idx = np.minimum(np.arange(k, k + n + 1), len(cycle) - 1)
    return cycle.speeds[idx].copy()


GradeProfile = Union[float, Callable[[float], float]]


@dataclass
class Scenario:
    """A cycle plus the initial closed-loop conditions."""

    cycle: DriveCycle
    initial_gap: float
    initial_state: VehicleState
    grade: GradeProfile = 0.0

    def grade_at(self, position: float) -> float:
        if callable(self.grade):
            return float(self.grade(position))
        return float(self.grade)

    def validate_gap(self, tau_min: float, tau_max: float, delta: float):
        v0 = self.initial_state.speed
        lo, hi = tau_min * (v0 + delta), tau_max * (v0 + delta)
        if not lo <= self.initial_gap <= hi:
            raise ValidationError(
                f"initial gap {self.initial_gap:.2f} outside headway band "
                f"[{lo:.2f}, {hi:.2f}] at {v0:.2f} m/s")


def default_gap(v0: float, tau_min: float = 1.0, tau_max: float = 2.0,
                delta: float = 5.0) -> float:
    """Midpoint of the headway band at the initial speed."""
    return 0.5 * (tau_min + tau_max) * (v0 + delta)


def make_scenario(cycle: DriveCycle, initial_soc: float = 0.8,
                  initial_gear: int = 1, gap: float = None) -> Scenario:
    v0 = float(cycle.speeds[0])
    if gap is None:
        gap = default_gap(v0)
    state = VehicleState(position=0.0, speed=v0, soc=initial_soc,
                         gear=initial_gear)
    return Scenario(cycle=cycle, initial_gap=gap, initial_state=state)


_URBAN_SEED = 20240517
_HIGHWAY_SEED = 20240518


def _bounded_profile(accels, v0, v_lo, v_hi, dv_max):
    """Integrate an acceleration sequence with speed and rate clamps."""
    v = np.empty(len(accels) + 1)
    v[0] = v0
    for i, a in enumerate(accels):
        dv = float(np.clip(a, -dv_max, dv_max))
        v[i + 1] = min(max(v[i] + dv, v_lo), v_hi)
    return v


def synthesize_urban(duration: int = 600) -> DriveCycle:
    """Deterministic stop-and-go city profile, 0-60 km/h."""
    rng = np.random.default_rng(_URBAN_SEED)
    accels = []
    while len(accels) < duration:
        accels.extend([0.0] * int(rng.integers(4, 10)))  # dwell at rest
        target = float(rng.uniform(8.0, 15.8))
        a_up = float(rng.uniform(0.55, 0.8))
        n_up = int(np.ceil(target / a_up))
        accels.extend([a_up] * n_up)
        n_cruise = int(rng.integers(18, 45))
        jitter = 0.0
        for _ in range(n_cruise):
            jitter = 0.55 * jitter + float(rng.uniform(-0.32, 0.32))
            accels.append(jitter)
        a_dn = float(rng.uniform(0.5, 0.75))
        accels.extend([-a_dn] * int(np.ceil(target / a_dn) + 2))
    v = _bounded_profile(np.asarray(accels[:duration]), 0.0, 0.0,
                         16.4, 0.82)
    v[-1] = 0.0
    v[-2] = min(v[-2], 0.6)
    return DriveCycle(name="urban", ts=1.0, speeds=v)


def synthesize_highway(duration: int = 400) -> DriveCycle:
    """Deterministic highway profile, 60-110 km/h, mild oscillation."""
    rng = np.random.default_rng(_HIGHWAY_SEED)
    accels = []
    # warm up from 60 km/h to mid-band
    warm = 18
    accels.extend([0.42] * warm)
    jitter = 0.0
    t = 0
    while len(accels) < duration:
        t += 1
        wave = 0.30 * np.sin(2 * np.pi * t / 95.0)
        jitter = 0.6 * jitter + float(rng.uniform(-0.18, 0.18))
        accels.append(wave + jitter)
    v0 = 60.0 / 3.6 + 0.4
    v = _bounded_profile(np.asarray(accels[:duration]), v0,
                         0.0, 30.4, 0.5)
    # the floor applies after warm-up only; enforce it explicitly
    v[warm:] = np.maximum(v[warm:], 60.0 / 3.6 + 0.05)
    return DriveCycle(name="highway", ts=1.0, speeds=v)


def synthesize_cycles() -> dict:
    """Builtin deterministic test cycles keyed by name."""
    return {"urban": synthesize_urban(), "highway": synthesize_highway()}
