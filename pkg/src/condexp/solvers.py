"""Three routes to E(X|G) and checks of the identities it must satisfy.

* ``solve_oracle``: atom averages, the finite-space Radon-Nikodym derivative.
* ``solve_projection``: orthogonal projection via the Gram (normal) equations
  over any spanning G-measurable basis.
* ``solve_gradient``: descent on the energy J in atom coordinates.

Conventions: atoms of probability zero get the value 0 (E(X|G) is only
defined almost surely); their positions are listed in ``null_atom_indices``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConvergenceError, ValidationError
from .functional import EnergyProblem, minimum_gap, random_measurable
from .prob_space import (
    ProbabilitySpace,
    RandomVariable,
    as_variable,
    integrate_over,
    norm2,
)
from .sigma_algebra import (
    SigmaAlgebra,
    atom_values_of,
    indicator,
    is_measurable,
    refines,
    require_measurable,
)

METHODS = ("oracle", "projection", "gradient")
NULL_CONVENTION = "E(X|G) is set to 0 on atoms of probability zero"

DEFINING_TOL = 1e-12
PRODUCT_TOL = 1e-10
DIRICHLET_RTOL = 1e-10
TOWER_TOL = 1e-11
ZERO_GAP_DIST = 1e-9
GRAM_RTOL = 1e-12


@dataclass
class CondExpResult:
    xi: RandomVariable
    atom_values: np.ndarray
    method: str
    iterations: int = 0
    final_gradient_norm: float = 0.0
    null_atom_indices: List[int] = field(default_factory=list)
    converged: bool = True
    # gradient method only: J at each iterate, and J(c_{k+1}) - J(c_k) per step
    objective_trace: List[float] = field(default_factory=list)
    energy_decrements: List[float] = field(default_factory=list)
    gram_rank: Optional[int] = None


@dataclass(frozen=True)
class GradientConfig:
    """Settings for :func:`solve_gradient`.

    ``step_policy`` is ``"jacobi"`` (scale each coordinate by 1/P(atom), exact
    in one step) or ``"fixed"`` with step ``eta``; ``eta=None`` means
    ``1 / max_j P(atom_j)``. ``initial_point`` is ``"zero"``,
    ``"unconditional_mean"`` or a sequence of per-atom starting values.
    """

    step_policy: str = "jacobi"
    eta: Optional[float] = None
    tolerance: float = 1e-10
    max_iterations: int = 10_000
    initial_point: object = "zero"

    def __post_init__(self):
        if self.step_policy not in ("jacobi", "fixed"):
            raise ValidationError(f"unknown step policy {self.step_policy!r}")
        if self.eta is not None and not self.eta > 0:
            raise ValidationError("fixed step eta must be positive")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if isinstance(self.initial_point, str):
            if self.initial_point not in ("zero", "unconditional_mean"):
                raise ValidationError(f"unknown initial point {self.initial_point!r}")
        else:
            object.__setattr__(self, "initial_point", tuple(float(v) for v in self.initial_point))


@dataclass
class Check:
    name: str
    max_defect: float
    tolerance: float
    passed: bool


@dataclass
class VerificationReport:
    checks: List[Check] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def overall_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, max_defect: float, tolerance: float) -> Check:
        check = Check(name, float(max_defect), float(tolerance), bool(max_defect <= tolerance))
        self.checks.append(check)
        return check

    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def extend(self, other: "VerificationReport") -> "VerificationReport":
        self.checks.extend(other.checks)
        self.notes.extend(n for n in other.notes if n not in self.notes)
        self.details.update(other.details)
        return self

    def to_dict(self) -> dict:
        return {
            "checks": [
                {"name": c.name, "max_defect": c.max_defect, "tolerance": c.tolerance, "pass": c.passed}
                for c in self.checks
            ],
            "details": dict(self.details),
            "notes": list(self.notes),
            "overall_pass": self.overall_pass,
        }


def _atom_integrals(space: ProbabilitySpace, G: SigmaAlgebra, X) -> np.ndarray:
    return np.array([integrate_over(space, X, a) for a in G.atoms])


def _null_atoms(probs: np.ndarray) -> List[int]:
    return [int(j) for j in np.flatnonzero(probs == 0.0)]


def _result(G, atom_values, method, probs, **kw) -> CondExpResult:
    vals = np.array(atom_values, dtype=float)
    vals[probs == 0.0] = 0.0
    return CondExpResult(
        xi=G.lift(vals), atom_values=vals, method=method, null_atom_indices=_null_atoms(probs), **kw
    )


def solve_oracle(space: ProbabilitySpace, G: SigmaAlgebra, X) -> CondExpResult:
    """Average of X over each atom."""
    X = as_variable(space, X)
    probs = G.atom_probabilities(space)
    sums = _atom_integrals(space, G, X)
    vals = np.zeros(G.n_atoms)
    live = probs > 0
    vals[live] = sums[live] / probs[live]
    return _result(G, vals, "oracle", probs)


def pivoted_cholesky(A: np.ndarray, rtol: float = GRAM_RTOL):
    """Rank-revealing Cholesky of a symmetric PSD matrix.

    Returns ``L`` with ``A ~= L @ L.T`` and ``L.shape[1]`` equal to the
    numerical rank: pivoting stops once the largest remaining diagonal
    entry falls to ``rtol * max(diag(A))`` or below.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValidationError("Gram matrix must be square")
    piv = np.arange(n)
    threshold = rtol * max(float(np.max(np.diag(A))) if n else 0.0, 0.0)
    rank = n
    for i in range(n):
        d = np.diag(A)[i:]
        j = i + int(np.argmax(d))
        if d[j - i] <= threshold:
            rank = i
            break
        if j != i:
            A[:, [i, j]] = A[:, [j, i]]
            A[[i, j], :] = A[[j, i], :]
            piv[[i, j]] = piv[[j, i]]
        A[i, i] = math.sqrt(A[i, i])
        A[i + 1:, i] /= A[i, i]
        A[i + 1:, i + 1:] -= np.outer(A[i + 1:, i], A[i + 1:, i])
    L = np.tril(A)[:, :rank]
    inverse = np.empty(n, dtype=int)
    inverse[piv] = np.arange(n)
    return L[inverse, :]


def min_norm_psd_solve(A: np.ndarray, b: np.ndarray, rtol: float = GRAM_RTOL):
    """Minimum-norm solution of ``A c = b`` for symmetric PSD ``A``.

    With ``A = L L^T`` and ``L`` of full column rank, ``A^+ = (L^T)^+ L^+``.
    Returns ``(c, rank)``.
    """
    L = pivoted_cholesky(A, rtol)
    rank = L.shape[1]
    if rank == 0:
        return np.zeros(len(b)), 0
    y = np.linalg.lstsq(L, b, rcond=None)[0]
    c = np.linalg.lstsq(L.T, y, rcond=None)[0]
    return c, rank


def solve_projection(
    space: ProbabilitySpace, G: SigmaAlgebra, X, basis: Optional[Sequence] = None
) -> CondExpResult:
    """Project X onto span(basis) by solving ``sum_j c_j <e_j, e_i> = T(e_i)``.

    The default basis is the atom indicators, for which the Gram matrix is
    diag(P(atom)). Redundant bases are fine: the coefficients are the
    minimum-norm solution, and the projection itself is unique.
    """
    X = as_variable(space, X)
    probs = G.atom_probabilities(space)
    if basis is None:
        basis = [indicator(space.size, a) for a in G.atoms]
    basis = [require_measurable(space, G, e, f"basis element {k}") for k, e in enumerate(basis)]
    if not basis:
        raise ValidationError("basis must be nonempty")
    E = np.array([e.values for e in basis])
    p = space.weights
    m = len(basis)
    gram = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            gram[i, j] = gram[j, i] = math.fsum(p * E[i] * E[j])
    rhs = np.array([math.fsum(p * X.values * E[i]) for i in range(m)])
    coef, rank = min_norm_psd_solve(gram, rhs)
    n_live = int(np.count_nonzero(probs > 0))
    if rank < n_live:
        raise ValidationError(
            f"basis spans a {rank}-dimensional subspace; L2(G) has dimension {n_live}"
        )
    xi = RandomVariable(coef @ E)
    return _result(G, atom_values_of(space, G, xi), "projection", probs, gram_rank=rank)


def _energy(c, probs, b) -> float:
    return math.fsum(np.concatenate([0.5 * probs * c * c, -c * b]))


def _energy_change(c_old, c_new, probs, b) -> float:
    # J(c + d) - J(c) = sum d (P c - b + P d / 2); avoids cancelling two O(|J|) values
    d = c_new - c_old
    return math.fsum(np.concatenate([d * (probs * c_old), -d * b, 0.5 * probs * d * d]))


def solve_gradient(
    space: ProbabilitySpace, G: SigmaAlgebra, X, config: GradientConfig = GradientConfig()
) -> CondExpResult:
    """Minimize J over L2(G) by gradient descent in atom coordinates.

    The gradient component on atom j is ``c_j P(B_j) - T(1_{B_j})``; the
    stopping metric is its Euclidean norm over atoms of positive probability.
    Raises :class:`ConvergenceError` (carrying the last iterate) when
    ``max_iterations`` is exhausted.
    """
    X = as_variable(space, X)
    probs = G.atom_probabilities(space)
    live = probs > 0
    b = _atom_integrals(space, G, X)
    P = probs[live]
    rhs = b[live]

    c = np.zeros(G.n_atoms)
    if not isinstance(config.initial_point, str):
        if len(config.initial_point) != G.n_atoms:
            raise ValidationError(f"initial point needs {G.n_atoms} atom values")
        c = np.array(config.initial_point)
    elif config.initial_point == "unconditional_mean":
        c[live] = math.fsum(space.weights * X.values)
    if config.step_policy == "jacobi":
        step = 1.0 / P
    else:
        step = config.eta if config.eta is not None else 1.0 / float(np.max(P))

    cl = c[live]
    grad = cl * P - rhs
    gnorm = float(np.linalg.norm(grad))
    trace = [_energy(cl, P, rhs)]
    decrements = []
    it = 0
    while gnorm > config.tolerance and it < config.max_iterations:
        new = cl - step * grad
        decrements.append(_energy_change(cl, new, P, rhs))
        trace.append(trace[-1] + decrements[-1])
        cl = new
        grad = cl * P - rhs
        gnorm = float(np.linalg.norm(grad))
        it += 1
    c[live] = cl
    converged = gnorm <= config.tolerance
    result = _result(
        G,
        c,
        "gradient",
        probs,
        iterations=it,
        final_gradient_norm=gnorm,
        converged=converged,
        objective_trace=trace,
        energy_decrements=decrements,
    )
    if not converged:
        raise ConvergenceError(
            f"gradient norm {gnorm:.3e} > {config.tolerance:.1e} after {it} iterations", result
        )
    return result


def solve(space, G, X, method: str = "oracle", config: Optional[GradientConfig] = None, basis=None):
    if method == "oracle":
        return solve_oracle(space, G, X)
    if method == "projection":
        return solve_projection(space, G, X, basis)
    if method == "gradient":
        return solve_gradient(space, G, X, config or GradientConfig())
    raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")


def _atom_name(G: SigmaAlgebra, j: int) -> str:
    return f"atom[{j}]{{" + ",".join(map(str, G.atoms[j])) + "}"


def verify_defining_property(
    space: ProbabilitySpace,
    G: SigmaAlgebra,
    X,
    xi,
    tol: float = DEFINING_TOL,
    union_samples: int = 32,
    seed: int = 0,
) -> VerificationReport:
    """Check that X and xi have equal integrals over every atom of G.

    Matching on atoms is already sufficient; a seeded sample of unions of
    atoms is checked as well. The tolerance is scaled by ``1 + |X|_2``.
    """
    X = as_variable(space, X)
    xi = require_measurable(space, G, xi, "xi")
    scaled = tol * (1.0 + norm2(space, X))
    report = VerificationReport(notes=[NULL_CONVENTION])
    for j, a in enumerate(G.atoms):
        defect = abs(integrate_over(space, X, a) - integrate_over(space, xi, a))
        report.add(f"defining_property:{_atom_name(G, j)}", defect, scaled)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(union_samples):
        chosen = np.flatnonzero(rng.random(G.n_atoms) < 0.5)
        B = G.union(chosen)
        worst = max(worst, abs(integrate_over(space, X, B) - integrate_over(space, xi, B)))
    if union_samples:
        report.add(f"defining_property:unions[{union_samples}]", worst, scaled)
    return report


def verify_product_identity(
    space: ProbabilitySpace,
    G: SigmaAlgebra,
    X,
    xi,
    sample_count: int = 100,
    seed: int = 0,
    tol: float = PRODUCT_TOL,
) -> VerificationReport:
    """Check ``<X, Y> = <xi, Y>`` for atom indicators and random G-measurable Y.

    Each defect is divided by ``1 + |X|_2 |Y|_2`` before comparing to ``tol``.
    """
    X = as_variable(space, X)
    xi = require_measurable(space, G, xi, "xi")
    nx = norm2(space, X)
    p = space.weights

    def defect(Y):
        y = Y.values
        d = abs(math.fsum(np.concatenate([p * X.values * y, -p * xi.values * y])))
        return d / (1.0 + nx * norm2(space, Y))

    report = VerificationReport(notes=[NULL_CONVENTION])
    report.add(
        "product_identity:atom_indicators",
        max(defect(indicator(space.size, a)) for a in G.atoms),
        tol,
    )
    if sample_count:
        rng = np.random.default_rng(seed)
        worst = max(defect(random_measurable(G, rng)) for _ in range(sample_count))
        report.add(f"product_identity:random[{sample_count}]", worst, tol)
    return report


def dirichlet_check(
    space: ProbabilitySpace,
    G: SigmaAlgebra,
    X,
    xi,
    sample_count: int = 100,
    seed: int = 0,
    rtol: float = DIRICHLET_RTOL,
) -> VerificationReport:
    """Check that xi minimizes J: ``J(Y) - J(xi) = 1/2 |Y - xi|^2 >= 0``.

    Besides the seeded random Y, ``Y = xi`` is included so the equality case
    is exercised: a zero gap is only allowed when ``|Y - xi|_2 <= 1e-9``.
    """
    problem = EnergyProblem(space, X, G)
    xi = require_measurable(space, G, xi, "xi")
    rng = np.random.default_rng(seed)
    samples = [xi] + [random_measurable(G, rng) for _ in range(sample_count)]
    p = space.weights
    worst_neg = worst_rel = worst_zero = 0.0
    for Y in samples:
        gap = minimum_gap(problem, xi, Y)
        diff = Y.values - xi.values
        half = math.fsum(0.5 * p * diff * diff)
        worst_neg = max(worst_neg, -gap)
        if half > 0:
            worst_rel = max(worst_rel, abs(gap - half) / half)
        if gap <= 0:
            worst_zero = max(worst_zero, math.sqrt(2 * half))
    report = VerificationReport(notes=[NULL_CONVENTION])
    report.add("dirichlet:gap_nonnegative", worst_neg, 0.0)
    report.add("dirichlet:gap_equals_half_sq_distance", worst_rel, rtol)
    report.add("dirichlet:zero_gap_only_at_minimizer", worst_zero, ZERO_GAP_DIST)
    return report


def tower_check(
    space: ProbabilitySpace,
    G_coarse: SigmaAlgebra,
    G_fine: SigmaAlgebra,
    X,
    tol: float = TOWER_TOL,
) -> VerificationReport:
    """Check ``E(E(X|fine)|coarse) = E(X|coarse)`` on non-null outcomes."""
    if not refines(G_fine, G_coarse):
        raise ValidationError("tower check needs G_fine to refine G_coarse")
    X = as_variable(space, X)
    inner = solve_oracle(space, G_fine, X).xi
    lhs = solve_oracle(space, G_coarse, inner).xi.values
    rhs = solve_oracle(space, G_coarse, X).xi.values
    live = ~space.null_mask
    defect = float(np.max(np.abs(lhs - rhs)[live])) if live.any() else 0.0
    report = VerificationReport(notes=[NULL_CONVENTION])
    report.add("tower:nested_equals_direct", defect, tol)
    report.details["tower"] = {"nested": lhs.tolist(), "direct": rhs.tolist()}
    return report


def agree_almost_surely(space: ProbabilitySpace, a: CondExpResult, b: CondExpResult) -> float:
    """L2 distance between two solutions."""
    return norm2(space, a.xi.values - b.xi.values)


__all__ = [
    "CondExpResult",
    "GradientConfig",
    "VerificationReport",
    "Check",
    "solve",
    "solve_oracle",
    "solve_projection",
    "solve_gradient",
    "verify_defining_property",
    "verify_product_identity",
    "dirichlet_check",
    "tower_check",
    "pivoted_cholesky",
    "min_norm_psd_solve",
    "is_measurable",
]
