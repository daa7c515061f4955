"""The linear functional T, the energy J and their Gateaux derivatives.

For a fixed X on a finite space with conditioning sigma-algebra G:

    T(Y)       = <X, Y>
    J(Y)       = 1/2 <Y, Y> - T(Y)
    J'_Z(Y)    = <Z, Y> - T(Y)
    J''_Z(Y,W) = <Y, W>

Since J is exactly quadratic, every difference quotient has a closed-form
defect and :func:`check_derivatives` tests those identities at finite step
sizes instead of extrapolating to zero.

Difference quotients are evaluated in extended precision (``np.longdouble``).
In double precision the point ``u + t*v`` is itself rounded by about
``eps*|u|``, which at ``t = 1e-6`` already perturbs the quotient by ``1e-10``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import SizeMismatchError, ValidationError
from .prob_space import ProbabilitySpace, RandomVariable, as_variable, norm2
from .sigma_algebra import SigmaAlgebra, require_measurable

FUNCTIONALS = ("T", "J", "half_norm")
DEFAULT_STEPS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)

# Tolerances used by check_derivatives (see the docstring there for scales).
T_TOL = 1e-12
J_TOL = 1e-10
SECOND_TOL = 1e-10

_LD = np.longdouble


@dataclass(frozen=True, eq=False)
class EnergyProblem:
    """A space, the variable X being conditioned, and the sigma-algebra G."""

    space: ProbabilitySpace
    x: RandomVariable
    g: SigmaAlgebra

    def __post_init__(self):
        object.__setattr__(self, "x", as_variable(self.space, self.x))
        if self.g.space_size != self.space.size:
            raise SizeMismatchError(
                f"sigma-algebra on {self.g.space_size} outcomes, space has {self.space.size}"
            )


def _vals(problem: EnergyProblem, Y) -> np.ndarray:
    return as_variable(problem.space, Y).values


def t_apply(problem: EnergyProblem, Y) -> float:
    p = problem.space.weights
    return math.fsum(p * problem.x.values * _vals(problem, Y))


def half_norm(problem: EnergyProblem, Y) -> float:
    y = _vals(problem, Y)
    return math.fsum(0.5 * problem.space.weights * y * y)


def j_eval(problem: EnergyProblem, Y) -> float:
    p, x, y = problem.space.weights, problem.x.values, _vals(problem, Y)
    return math.fsum(np.concatenate([0.5 * p * y * y, -p * x * y]))


def j_gateaux(problem: EnergyProblem, Z, Y) -> float:
    """First derivative of J at ``Z`` in the direction ``Y``."""
    p, x = problem.space.weights, problem.x.values
    z, y = _vals(problem, Z), _vals(problem, Y)
    return math.fsum(np.concatenate([p * z * y, -p * x * y]))


def j_second(problem: EnergyProblem, Y, W) -> float:
    """Second derivative of J; the same bilinear form at every base point."""
    return math.fsum(problem.space.weights * _vals(problem, Y) * _vals(problem, W))


def _ld_value(problem: EnergyProblem, functional_id: str, y: np.ndarray) -> np.longdouble:
    p = problem.space.weights.astype(_LD)
    x = problem.x.values.astype(_LD)
    if functional_id == "T":
        return np.sum(p * x * y)
    if functional_id == "half_norm":
        return np.sum(p * y * y) / 2
    if functional_id == "J":
        return np.sum(p * (y * y / 2 - x * y))
    raise ValidationError(f"unknown functional {functional_id!r}; expected one of {FUNCTIONALS}")


def directional_quotient(problem: EnergyProblem, functional_id: str, u, v, t: float) -> float:
    """``(F(u + t v) - F(u)) / t`` for ``F`` in ``T``, ``J`` or ``half_norm``."""
    if t == 0 or not math.isfinite(t):
        raise ValidationError("step t must be finite and nonzero")
    u_ld = _vals(problem, u).astype(_LD)
    v_ld = _vals(problem, v).astype(_LD)
    t_ld = _LD(t)
    shifted = _ld_value(problem, functional_id, u_ld + t_ld * v_ld)
    return float((shifted - _ld_value(problem, functional_id, u_ld)) / t_ld)


def gateaux_quotient(problem: EnergyProblem, u, v, w, t: float) -> float:
    """``(J'_{u + t v}(w) - J'_u(w)) / t``, the second-derivative quotient."""
    if t == 0 or not math.isfinite(t):
        raise ValidationError("step t must be finite and nonzero")
    p = problem.space.weights.astype(_LD)
    x = problem.x.values.astype(_LD)
    u_ld, v_ld, w_ld = (_vals(problem, a).astype(_LD) for a in (u, v, w))
    t_ld = _LD(t)

    def first(z):
        return np.sum(p * (z - x) * w_ld)

    return float((first(u_ld + t_ld * v_ld) - first(u_ld)) / t_ld)


@dataclass
class DerivativeCheckReport:
    direction_count: int
    step_sizes: list
    max_defect: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)
    # formula -> list of max scaled defects, one per step size
    per_step: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        return {
            "direction_count": self.direction_count,
            "step_sizes": list(self.step_sizes),
            "formulas": {
                name: {
                    "max_defect": self.max_defect[name],
                    "tolerance": self.tolerance[name],
                    "pass": self.passed[name],
                    "per_step": self.per_step[name],
                }
                for name in self.max_defect
            },
            "pass": self.ok,
        }


def validate_steps(steps: Sequence[float]) -> list:
    steps = [float(s) for s in steps]
    if not steps:
        raise ValidationError("need at least one step size")
    if any(not (s > 0 and math.isfinite(s)) for s in steps):
        raise ValidationError("step sizes must be positive and finite")
    if any(b >= a for a, b in zip(steps, steps[1:])):
        raise ValidationError("step sizes must be strictly decreasing")
    return steps


def random_measurable(G: SigmaAlgebra, rng: np.random.Generator) -> RandomVariable:
    """G-measurable variable with independent atom values uniform on [-1, 1]."""
    return G.lift(rng.uniform(-1.0, 1.0, size=G.n_atoms))


def check_derivatives(
    problem: EnergyProblem,
    directions: int = 20,
    steps: Sequence[float] = DEFAULT_STEPS,
    seed: int = 0,
) -> DerivativeCheckReport:
    """Check the closed-form derivatives of T, the half squared norm and J.

    For seeded random G-measurable ``u, v, w`` and every step ``t``, with
    ``h = t/2 * |v|^2``:

    * ``T_first``: ``|q_T - T(v)|`` scaled by ``max(1, |X| |v|)``, tolerance 1e-12
    * ``half_norm_first``: ``|q_N - <u,v> - h|`` scaled by ``|u| |v| + h``
    * ``J_first``: ``|q_J - J'_u(v) - h|`` scaled by ``|v| (|u| + |X|) + h``
    * ``J_second``: ``|(J'_{u+tv}(w) - J'_u(w))/t - <v,w>|`` scaled by ``max(1, |v| |w|)``

    The scales are the Cauchy-Schwarz bounds of the terms being compared.
    """
    if directions < 1:
        raise ValidationError("directions must be >= 1")
    steps = validate_steps(steps)
    rng = np.random.default_rng(seed)
    space = problem.space
    nx = norm2(space, problem.x)
    names = ("T_first", "half_norm_first", "J_first", "J_second")
    tol = {"T_first": T_TOL, "half_norm_first": J_TOL, "J_first": J_TOL, "J_second": SECOND_TOL}
    per_step = {name: [0.0] * len(steps) for name in names}

    for _ in range(directions):
        u, v, w = (random_measurable(problem.g, rng) for _ in range(3))
        nu, nv, nw = norm2(space, u), norm2(space, v), norm2(space, w)
        t_v = t_apply(problem, v)
        uv = j_second(problem, u, v)
        vw = j_second(problem, v, w)
        grad = j_gateaux(problem, u, v)
        for k, t in enumerate(steps):
            h = 0.5 * t * nv * nv
            defects = {
                "T_first": abs(directional_quotient(problem, "T", u, v, t) - t_v)
                / max(1.0, nx * nv),
                "half_norm_first": _rel(
                    directional_quotient(problem, "half_norm", u, v, t) - uv - h, nu * nv + h
                ),
                "J_first": _rel(
                    directional_quotient(problem, "J", u, v, t) - grad - h, nv * (nu + nx) + h
                ),
                "J_second": abs(gateaux_quotient(problem, u, v, w, t) - vw) / max(1.0, nv * nw),
            }
            for name, d in defects.items():
                per_step[name][k] = max(per_step[name][k], d)

    report = DerivativeCheckReport(direction_count=directions, step_sizes=steps)
    for name in names:
        report.per_step[name] = per_step[name]
        report.max_defect[name] = max(per_step[name])
        report.tolerance[name] = tol[name]
        report.passed[name] = report.max_defect[name] <= tol[name]
    return report


def _rel(diff: float, scale: float) -> float:
    if scale == 0.0:
        return abs(diff)
    return abs(diff) / scale


def _two_product(a: np.ndarray, b: np.ndarray):
    # Dekker: a*b == hi + lo exactly (barring overflow and underflow)
    def split(v):
        c = 134217729.0 * v
        high = c - (c - v)
        return high, v - high

    hi = a * b
    ah, al = split(a)
    bh, bl = split(b)
    lo = ((ah * bh - hi) + ah * bl + al * bh) + al * bl
    return hi, lo


def minimum_gap(problem: EnergyProblem, xi, Y) -> float:
    """``J(Y) - J(xi)`` for G-measurable ``xi`` and ``Y``.

    Evaluated as ``1/2 |Y - xi|^2 + <xi - X, Y - xi>`` atom by atom, with the
    residual ``xi P(B) - int_B X`` of each atom formed from exact products.
    Summing J(Y) and J(xi) directly would lose the gap to cancellation when
    Y is close to xi. When ``xi`` is the conditional expectation the residual
    vanishes up to the rounding of xi and the gap is ``1/2 |Y - xi|^2``.
    """
    space, G = problem.space, problem.g
    xi = require_measurable(space, G, xi, "xi")
    Y = require_measurable(space, G, Y, "Y")
    p, x, z = space.weights, problem.x.values, xi.values
    pz = _two_product(p, z)
    px = _two_product(p, x)
    terms = []
    for a in G.atoms:
        m = list(a)
        mass = math.fsum(p[m])
        if mass == 0.0:
            continue
        i = next(k for k in m if p[k] > 0)
        d = Y.values[i] - z[i]
        residual = math.fsum(np.concatenate([pz[0][m], pz[1][m], -px[0][m], -px[1][m]]))
        terms += [0.5 * mass * d * d, d * residual]
    return math.fsum(terms)
