"""Small box-constrained smooth minimizer used by both continuous stages.

The decision vectors here are short torque sequences (n <= 8), with the
horizon dynamics folded into the objective by forward simulation (single
shooting). The solver contract is what matters, not the method: the
returned point is always inside the box, never worse than the initial
guess, and the whole solve is deterministic for fixed inputs.

Implementation: projected gradient with a Barzilai-Borwein step length and
Armijo backtracking; gradients by central finite differences evaluated in
one batched objective call.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonFiniteObjective, ValidationError

_FD_EPS = 1e-6
_ARMIJO = 1e-4


@dataclass
class SmoothProgram:
    """A box-bounded smooth objective.

    ``objective(X, penalty_scale)`` must accept a 2-D batch of decision
    vectors (m, n) and return (m,) values; soft-constraint penalties are
    quadratic terms already folded into the objective by the builders, with
    ``penalty_weight`` recording their base weight so a solve can rescale
    them (``penalty_scale`` multiplies the base weight).
    """

    n: int
    lower: np.ndarray
    upper: np.ndarray
    objective: Callable[[np.ndarray, float], np.ndarray]
    penalty_weight: float = 0.0

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != (self.n,) or self.upper.shape != (self.n,):
            raise ValidationError("bound shapes must match dimension")
        if not (np.all(np.isfinite(self.lower))
                and np.all(np.isfinite(self.upper))):
            raise ValidationError("box bounds must be finite")
        if np.any(self.lower > self.upper):
            raise ValidationError("lower bound above upper bound")

    def value(self, x, penalty_scale: float = 1.0) -> float:
        out = self.objective(np.atleast_2d(np.asarray(x, dtype=float)),
                             penalty_scale)
        return float(np.asarray(out)[0])

    def value_batch(self, xs, penalty_scale: float = 1.0) -> np.ndarray:
        return np.asarray(self.objective(np.asarray(xs, dtype=float),
                                         penalty_scale))


@dataclass
class SolveSettings:
    max_iter: int = 200
    step_tol: float = 1e-9
    obj_tol: float = 1e-11
    penalty_schedule: tuple = (1.0,)

    def __post_init__(self):
        if self.step_tol <= 0 or self.obj_tol <= 0:
            raise ValidationError("tolerances must be > 0")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")


@dataclass
class SolveReport:
    solution: np.ndarray
    objective: float
    converged: bool
    iterations: int
    wall_time: float


def fd_gradient(program: SmoothProgram, x: np.ndarray,
                penalty_scale: float = 1.0) -> np.ndarray:
    """Central-difference gradient via one batched objective call."""
    n = program.n
    h = _FD_EPS * (1.0 + np.abs(x))
    batch = np.tile(x, (2 * n, 1))
    batch[np.arange(n), np.arange(n)] += h
    batch[n + np.arange(n), np.arange(n)] -= h
    vals = program.value_batch(batch, penalty_scale)
    g = (vals[:n] - vals[n:]) / (2.0 * h)
    bad = ~np.isfinite(g)
    if np.any(bad):
        f0 = program.value(x, penalty_scale)
        for i in np.flatnonzero(bad):
            fp, fm = vals[i], vals[n + i]
            if np.isfinite(fp):
                g[i] = (fp - f0) / h[i]
            elif np.isfinite(fm):
                g[i] = (f0 - fm) / h[i]
            else:
                raise NonFiniteObjective(
                    f"objective non-finite near x[{i}]")
    return g


def minimize(program: SmoothProgram, x0, settings: SolveSettings = None) -> SolveReport:
    """Descend from x0 inside the box; never returns a worse point.

    On hitting the iteration limit the best point found so far is returned
    with ``converged=False`` instead of raising.
    """
    t_start = time.perf_counter()
    settings = settings or SolveSettings()
    x0 = np.asarray(x0, dtype=float).copy()
    if x0.shape != (program.n,):
        raise ValidationError("x0 shape mismatch")
    if np.any(x0 < program.lower - 1e-9) or np.any(x0 > program.upper + 1e-9):
        raise ValidationError("x0 outside box bounds")
    x0 = np.clip(x0, program.lower, program.upper)

    final_scale = settings.penalty_schedule[-1]
    f0_final = program.value(x0, final_scale)
    if not np.isfinite(f0_final):
        raise NonFiniteObjective("objective non-finite at initial guess")

    x = x0.copy()
    total_iters = 0
    converged = False
    for scale in settings.penalty_schedule:
        x, iters, converged = _descend(program, x, scale, settings)
        total_iters += iters

    f_final = program.value(x, final_scale)
    if not np.isfinite(f_final) or f_final > f0_final:
        x, f_final = x0, f0_final
    return SolveReport(solution=x, objective=f_final, converged=converged,
                       iterations=total_iters,
                       wall_time=time.perf_counter() - t_start)


def _descend(program, x0, scale, settings):
    lo, hi = program.lower, program.upper
    x = x0.copy()
    f = program.value(x, scale)
    if not np.isfinite(f):
        raise NonFiniteObjective("objective non-finite at initial guess")
    best_x, best_f = x.copy(), f
    g = fd_gradient(program, x, scale)
    alpha = 1.0 / max(float(np.max(np.abs(g))), 1e-12)
    alpha = min(alpha, 1e6)
    flat_count = 0
    converged = False
    it = 0
    while it < settings.max_iter:
        it += 1
        xt = np.clip(x - alpha * g, lo, hi)
        d = xt - x
        dmax = float(np.max(np.abs(d)))
        if dmax <= settings.step_tol * (1.0 + float(np.max(np.abs(x)))):
            converged = True
            break
        gd = float(np.dot(g, d))
        t, fn, xn, accepted = 1.0, None, None, False
        for _ in range(30):
            cand = x + t * d
            fc = program.value(cand, scale)
            if np.isfinite(fc) and fc <= f + _ARMIJO * t * min(gd, 0.0):
                fn, xn, accepted = fc, cand, True
                break
            t *= 0.5
        if not accepted:
            alpha *= 0.25
            if alpha < 1e-14:
                break
            continue
        gn = fd_gradient(program, xn, scale)
        s = xn - x
        y = gn - g
        sy = float(np.dot(s, y))
        if sy > 1e-18:
            alpha = float(np.dot(s, s)) / sy
        else:
            alpha *= 2.0
        alpha = float(np.clip(alpha, 1e-12, 1e8))
        if abs(fn - f) <= settings.obj_tol * (1.0 + abs(f)):
            flat_count += 1
            if flat_count >= 2:
                x, f, g = xn, fn, gn
                if fn < best_f:
                    best_x, best_f = xn.copy(), fn
                converged = True
                break
        else:
            flat_count = 0
        x, f, g = xn, fn, gn
        if f < best_f:
            best_x, best_f = x.copy(), f
    return best_x, it, converged


def plain_objective(fn: Callable[[np.ndarray], float]):
    """Adapt a scale-less scalar function to the batched program protocol."""
    def wrapped(xs, penalty_scale=1.0):
        xs = np.atleast_2d(xs)
        return np.asarray([fn(row) for row in xs], dtype=float)
    return wrapped
