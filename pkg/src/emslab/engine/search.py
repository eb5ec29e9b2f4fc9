"""Scalar root bracketing and golden-section search used by the trade-off solvers."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

from emslab.errors import ConvergenceError

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchResult:
    argument: float
    value: float
    iterations: int


def golden_maximize(
    fn: Callable[[float], float],
    lower: float,
    upper: float,
    *,
    tol: float,
    max_iterations: int = 200,
) -> SearchResult:
    """Maximise a unimodal ``fn`` on [lower, upper].

    The interior estimate is compared against both endpoints; ties go to the smaller
    argument.
    """
    if upper < lower:
        msg = f"empty bracket [{lower}, {upper}]"
        raise ValueError(msg)
    a, b = lower, upper
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = fn(x1), fn(x2)
    iterations = 0
    while b - a > tol and iterations < max_iterations:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = fn(x2)
        iterations += 1
    if b - a > tol:
        msg = f"golden-section search did not reach width {tol} in {max_iterations} steps"
        raise ConvergenceError(msg)

    candidates = [(lower, fn(lower)), (x1, f1) if f1 >= f2 else (x2, f2), (upper, fn(upper))]
    best_x, best_f = candidates[0]
    for x, fx in candidates[1:]:
        if fx > best_f:
            best_x, best_f = x, fx
    logger.debug("golden search on [%g, %g]: x=%g f=%g (%d steps)", lower, upper, best_x,
                 best_f, iterations)
    return SearchResult(best_x, best_f, iterations)


def bisect_increasing(
    fn: Callable[[float], float],
    target: float,
    lower: float,
    upper: float,
    *,
    tol: float,
    max_iterations: int = 200,
) -> float:
    """Largest x in [lower, upper] (to ``tol``) with fn(x) <= target, fn nondecreasing."""
    if fn(upper) <= target:
        return upper
    if fn(lower) > target:
        msg = f"target {target} below the bracket value at {lower}"
        raise ConvergenceError(msg)
    a, b = lower, upper
    for _ in range(max_iterations):
        if b - a <= tol:
            return a
        mid = 0.5 * (a + b)
        if fn(mid) <= target:
            a = mid
        else:
            b = mid
    msg = f"bisection did not reach width {tol} in {max_iterations} steps"
    raise ConvergenceError(msg)
