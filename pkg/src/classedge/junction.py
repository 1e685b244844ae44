"""Triple-junction estimation inside a rectangle.

A triple junction is a point where three probability channels are equal.
The primary method linearises each channel about the current iterate and
solves, in the least-squares sense, for a point where the three tangent
planes meet a common auxiliary height.  When that fails to land inside the
rectangle (or the linear system degenerates), a bounded simplex search on
the pairwise squared-difference objective takes over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .field import MultiClassField


class SingularStepError(ArithmeticError):
    """The three tangent planes do not determine a meeting point."""


class JunctionNotFoundError(ArithmeticError):
    """Both the tangent-plane stage and the fallback search failed."""


class JunctionMethod(Enum):
    TANGENT_PLANE = "tangent_plane"
    FALLBACK = "fallback"


@dataclass(frozen=True)
class JunctionProblem:
    """Three contested channels of a field, searched within bounds.

    ``tolerance`` stops the tangent-plane iteration on step norm;
    ``value_tolerance`` is the acceptance threshold on the objective
    (defaults to ``tolerance``; the two have different units).
    """

    field: MultiClassField
    classes: tuple[int, int, int]
    bounds: tuple[float, float, float, float]  # x_lo, y_lo, x_hi, y_hi
    tolerance: float = 1e-12
    value_tolerance: float | None = None
    max_iterations: int = 50
    max_evals: int = 500

    def __post_init__(self):
        a, b, c = self.classes
        if len({a, b, c}) != 3:
            raise ValueError("junction classes must be pairwise distinct")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    @property
    def g_tol(self) -> float:
        return self.tolerance if self.value_tolerance is None else self.value_tolerance

    @property
    def center(self) -> tuple[float, float]:
        x_lo, y_lo, x_hi, y_hi = self.bounds
        return 0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi)

    def contains(self, x, y) -> bool:
        x_lo, y_lo, x_hi, y_hi = self.bounds
        return x_lo <= x <= x_hi and y_lo <= y <= y_hi


@dataclass(frozen=True)
class JunctionResult:
    point: tuple[float, float]
    method: JunctionMethod
    residual: float  # objective value at the point


def junction_objective(problem: JunctionProblem, p) -> float:
    """Sum of squared pairwise channel differences; zero iff all equal."""
    probs = problem.field.probabilities(float(p[0]), float(p[1]))
    a, b, c = problem.classes
    fa, fb, fc = probs[a], probs[b], probs[c]
    return (fa - fb) ** 2 + (fa - fc) ** 2 + (fb - fc) ** 2


def tangent_plane_step(problem: JunctionProblem, p) -> tuple[float, float]:
    """One least-squares solve of the three tangent-plane equations.

    Row i is ``a_i X + b_i Y - Z = a_i x + b_i y - z_i`` with (a_i, b_i)
    the channel gradient and z_i the channel value at p.
    """
    x, y = float(p[0]), float(p[1])
    probs = problem.field.probabilities(x, y)
    rows = np.empty((3, 3))
    rhs = np.empty(3)
    for r, c in enumerate(problem.classes):
        gx, gy = problem.field.gradient(x, y, c)
        rows[r] = (gx, gy, -1.0)
        rhs[r] = gx * x + gy * y - probs[c]
    solution, _, rank, _ = np.linalg.lstsq(rows, rhs, rcond=None)
    if rank < 3:
        raise SingularStepError("tangent planes are degenerate (parallel gradients)")
    return float(solution[0]), float(solution[1])


def derivative_free_minimize(objective, bounds, tolerance, max_evals):
    """Nelder-Mead simplex search clamped to bounds by projection.

    Standard coefficients (reflect 1, expand 2, contract 0.5, shrink 0.5);
    starts at the rectangle center with simplex scale a quarter of the
    shorter side.  Returns the best point seen when the budget runs out.
    """
    x_lo, y_lo, x_hi, y_hi = bounds
    if not (x_lo < x_hi and y_lo < y_hi):
        raise ValueError("bounds must be non-degenerate")

    def clamp(pt):
        return (min(max(pt[0], x_lo), x_hi), min(max(pt[1], y_lo), y_hi))

    evals = 0

    def f(pt):
        nonlocal evals
        evals += 1
        return objective(pt)

    start = (0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi))
    scale = 0.25 * min(x_hi - x_lo, y_hi - y_lo)
    simplex = [
        start,
        clamp((start[0] + scale, start[1])),
        clamp((start[0], start[1] + scale)),
    ]
    values = [f(pt) for pt in simplex]

    while evals < max_evals:
        order = sorted(range(3), key=lambda i: values[i])
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        spread = max(
            abs(simplex[i][j] - simplex[0][j]) for i in (1, 2) for j in (0, 1)
        )
        if spread < tolerance and values[2] - values[0] < tolerance:
            break
        cx = 0.5 * (simplex[0][0] + simplex[1][0])
        cy = 0.5 * (simplex[0][1] + simplex[1][1])
        worst = simplex[2]

        refl = clamp((cx + (cx - worst[0]), cy + (cy - worst[1])))
        f_refl = f(refl)
        if f_refl < values[0]:
            exp = clamp((cx + 2.0 * (cx - worst[0]), cy + 2.0 * (cy - worst[1])))
            f_exp = f(exp)
            if f_exp < f_refl:
                simplex[2], values[2] = exp, f_exp
            else:
                simplex[2], values[2] = refl, f_refl
            continue
        if f_refl < values[1]:
            simplex[2], values[2] = refl, f_refl
            continue
        contr = clamp((cx + 0.5 * (worst[0] - cx), cy + 0.5 * (worst[1] - cy)))
        f_contr = f(contr)
        if f_contr < values[2]:
            simplex[2], values[2] = contr, f_contr
            continue
        best = simplex[0]
        for i in (1, 2):
            simplex[i] = clamp((
                best[0] + 0.5 * (simplex[i][0] - best[0]),
                best[1] + 0.5 * (simplex[i][1] - best[1]),
            ))
            values[i] = f(simplex[i])

    i_best = min(range(3), key=lambda i: values[i])
    return simplex[i_best]


def find_triple_junction(problem: JunctionProblem) -> JunctionResult:
    """Tangent-plane iteration from the rectangle center, with fallback.

    Accepts a tangent-plane result when the step norm drops below the
    tolerance with the iterate inside bounds and the objective below its
    threshold.  Otherwise minimises the objective directly and applies the
    same acceptance test.  Raises JunctionNotFoundError when both fail.
    """
    x, y = problem.center
    converged = False
    for _ in range(problem.max_iterations):
        try:
            nx, ny = tangent_plane_step(problem, (x, y))
        except SingularStepError:
            break
        step = math.hypot(nx - x, ny - y)
        if not (math.isfinite(nx) and math.isfinite(ny)):
            break
        x, y = nx, ny
        if step < problem.tolerance:
            converged = True
            break
    if converged and problem.contains(x, y):
        residual = junction_objective(problem, (x, y))
        if residual < problem.g_tol:
            return JunctionResult((x, y), JunctionMethod.TANGENT_PLANE, residual)

    fx, fy = derivative_free_minimize(
        lambda p: junction_objective(problem, p),
        problem.bounds,
        min(problem.tolerance, 1e-9),
        problem.max_evals,
    )
    residual = junction_objective(problem, (fx, fy))
    if residual < problem.g_tol and problem.contains(fx, fy):
        return JunctionResult((fx, fy), JunctionMethod.FALLBACK, residual)
    raise JunctionNotFoundError(
        f"no junction of classes {problem.classes} in {problem.bounds} "
        f"(best objective {residual:.3e})"
    )
