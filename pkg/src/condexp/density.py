"""Simple-function approximation and truncation schedules.

``staircase`` quantizes a G-measurable variable onto a dyadic grid of
``2**k`` cells spanning ``[min X, max X]``; on each cell it takes the
smallest value X attains there. The result is simple, G-measurable, below X,
within one cell width of X, and it recovers X exactly once every cell holds
at most one distinct value.

``l1_extension_trace`` follows E(truncate(X, n)|G) along an increasing
truncation schedule and checks it against the contraction bound
``|E(X_n|G) - E(X|G)|_1 <= |X_n - X|_1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .errors import ValidationError
from .prob_space import ProbabilitySpace, RandomVariable, as_variable, norm1, norm2
from .sigma_algebra import SigmaAlgebra, require_measurable
from .solvers import solve_oracle

# Floating-point allowance on the envelope and contraction comparisons,
# relative to the size of the quantities involved.
ROUNDING_RTOL = 1e-12


@dataclass
class ApproximationTrace:
    levels: List[float] = field(default_factory=list)
    errors_l2: List[float] = field(default_factory=list)
    errors_l1: List[float] = field(default_factory=list)
    # staircase: grid width per level; truncation: |X_n - X|_1 per level
    step_width: List[float] = field(default_factory=list)
    bound_holds: bool = True

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "errors_l2": list(self.errors_l2),
            "errors_l1": list(self.errors_l1),
            "bounds": list(self.step_width),
            "bound_holds": self.bound_holds,
        }


def _cell_floor(values: np.ndarray, live: np.ndarray, lo: float, width: float, cells: int):
    idx = np.clip(np.floor((values - lo) / width), 0, cells).astype(np.int64)
    out = np.empty_like(values)
    for c in np.unique(idx):
        in_cell = idx == c
        pool = in_cell & live if np.any(in_cell & live) else in_cell
        out[in_cell] = values[pool].min()
    return out


def staircase(space: ProbabilitySpace, G: SigmaAlgebra, X, k: int) -> RandomVariable:
    """Dyadic simple-function approximation of a G-measurable X at level k."""
    if k < 1:
        raise ValidationError("staircase level k must be >= 1")
    x = require_measurable(space, G, X, "X").values
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return RandomVariable(x.copy())
    cells = 2 ** k
    width = (hi - lo) / cells
    return RandomVariable(_cell_floor(x, ~space.null_mask, lo, width, cells))


def approximation_trace(space: ProbabilitySpace, G: SigmaAlgebra, X, k_max: int) -> ApproximationTrace:
    """Staircase errors for ``k = 1..k_max`` against the ``range / 2**k`` envelope."""
    if k_max < 1:
        raise ValidationError("k_max must be >= 1")
    X = require_measurable(space, G, X, "X")
    spread = float(X.values.max() - X.values.min())
    trace = ApproximationTrace()
    for k in range(1, k_max + 1):
        S = staircase(space, G, X, k)
        diff = X.values - S.values
        width = spread / 2 ** k
        trace.levels.append(k)
        trace.errors_l2.append(norm2(space, diff))
        trace.errors_l1.append(norm1(space, diff))
        trace.step_width.append(width)
    slack = ROUNDING_RTOL * spread
    trace.bound_holds = all(e <= w + slack for e, w in zip(trace.errors_l2, trace.step_width))
    return trace


def truncate(X, n: float) -> RandomVariable:
    """Clamp every value of X to ``[-n, n]``."""
    if not n > 0:
        raise ValidationError("truncation level must be positive")
    values = X.values if isinstance(X, RandomVariable) else np.asarray(X, dtype=float)
    return RandomVariable(np.clip(values, -n, n))


def l1_extension_trace(
    space: ProbabilitySpace, G: SigmaAlgebra, X, n_schedule: Sequence[float]
) -> ApproximationTrace:
    """Track ``E(truncate(X, n)|G)`` against ``E(X|G)`` along ``n_schedule``."""
    schedule = [float(n) for n in n_schedule]
    if not schedule:
        raise ValidationError("truncation schedule is empty")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValidationError("truncation schedule must be increasing")
    X = as_variable(space, X)
    xi = solve_oracle(space, G, X).xi.values
    trace = ApproximationTrace()
    ok = True
    for n in schedule:
        Xn = truncate(X, n)
        xi_n = solve_oracle(space, G, Xn).xi.values
        err = norm1(space, xi_n - xi)
        bound = norm1(space, Xn.values - X.values)
        trace.levels.append(n)
        trace.errors_l1.append(err)
        trace.errors_l2.append(norm2(space, xi_n - xi))
        trace.step_width.append(bound)
        ok &= err <= bound + ROUNDING_RTOL * (norm1(space, X) + norm1(space, Xn))
    trace.bound_holds = bool(ok)
    return trace


__all__ = ["ApproximationTrace", "staircase", "approximation_trace", "truncate", "l1_extension_trace"]
