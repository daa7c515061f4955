from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condexp import (
    EnergyProblem,
    check_derivatives,
    directional_quotient,
    discrete,
    expectation,
    generate,
    indicator,
    j_eval,
    j_gateaux,
    j_second,
    minimum_gap,
    new_space,
    norm2,
    solve_oracle,
    t_apply,
)
from condexp.errors import MeasurabilityError, SizeMismatchError, ValidationError
from condexp.functional import gateaux_quotient, random_measurable

from problems import problems

SPACE = new_space([0.25] * 4)
G = generate(4, [{0, 1}])
PROBLEM = EnergyProblem(SPACE, [1, 2, 3, 4], G)
XI = [1.5, 1.5, 3.5, 3.5]


def test_problem_size_mismatch():
    with pytest.raises(SizeMismatchError):
        EnergyProblem(SPACE, [1, 2, 3], G)
    with pytest.raises(SizeMismatchError):
        EnergyProblem(SPACE, [1, 2, 3, 4], discrete(3))


def test_t_apply_examples():
    assert t_apply(PROBLEM, [0] * 4) == 0.0
    assert t_apply(PROBLEM, [1] * 4) == expectation(SPACE, [1, 2, 3, 4])
    assert t_apply(PROBLEM, [1, 1, 0, 0]) == 0.75


def test_j_eval_examples():
    assert j_eval(PROBLEM, [0] * 4) == 0.0
    assert j_eval(PROBLEM, [1, 2, 3, 4]) == -3.75
    xi = solve_oracle(SPACE, G, [1, 2, 3, 4]).xi
    assert j_eval(PROBLEM, xi) == -0.5 * j_second(PROBLEM, xi, xi) == -3.625


def test_j_gateaux_examples():
    for Y in ([1, 1, 0, 0], [0, 0, 1, 1], [2, 2, -1, -1]):
        assert j_gateaux(PROBLEM, XI, Y) == 0.0
    assert j_gateaux(PROBLEM, [0] * 4, [1] * 4) == -2.5
    assert j_gateaux(PROBLEM, [2] * 4, [1, 1, 0, 0]) == 0.25


def test_j_second_examples():
    one = indicator(4, {0})
    assert j_second(PROBLEM, one, one) == 0.25
    assert j_second(PROBLEM, one, [0] * 4) == 0.0
    assert j_second(EnergyProblem(new_space([1, 2, 3]), [0, 0, 0], discrete(3)), [1] * 3, [1] * 3) == 1.0


def test_directional_quotient_linear_functional_is_exact():
    rng = np.random.default_rng(1)
    u, v = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
    for t in (1.0, 0.3, 1e-3, 1e-6):
        assert directional_quotient(PROBLEM, "T", u, v, t) == pytest.approx(t_apply(PROBLEM, v), abs=1e-13)


def test_directional_quotient_half_norm_expansion():
    rng = np.random.default_rng(2)
    u, v = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
    for t in (0.5, 1e-2, 1e-5):
        expected = j_second(PROBLEM, u, v) + t / 2 * norm2(SPACE, v) ** 2
        assert directional_quotient(PROBLEM, "half_norm", u, v, t) == pytest.approx(expected, rel=1e-12)


def test_directional_quotient_energy_defect():
    rng = np.random.default_rng(3)
    u, v = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
    for t in (1e-1, 1e-2, 1e-3):
        lhs = directional_quotient(PROBLEM, "J", u, v, t) - j_gateaux(PROBLEM, u, v)
        assert lhs == pytest.approx(t / 2 * norm2(SPACE, v) ** 2, rel=1e-10)


def test_directional_quotient_errors():
    with pytest.raises(ValidationError):
        directional_quotient(PROBLEM, "J", XI, XI, 0.0)
    with pytest.raises(ValidationError):
        directional_quotient(PROBLEM, "K", XI, XI, 0.1)


def test_check_derivatives_random_64():
    rng = np.random.default_rng(64)
    space = new_space(rng.uniform(0.1, 1, 64))
    G64 = generate(64, [set(range(0, 64, 3)), set(range(10, 40))])
    report = check_derivatives(EnergyProblem(space, rng.normal(size=64), G64), 20, seed=5)
    assert report.step_sizes == [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    assert report.ok, report.to_dict()
    assert report.max_defect["T_first"] <= 1e-12


def test_check_derivatives_single_step():
    report = check_derivatives(PROBLEM, 3, steps=[0.1])
    assert report.ok and report.per_step["J_first"][0] < 1e-14


@pytest.mark.parametrize("steps", [[], [0.1, 0.1], [0.01, 0.1], [-0.1], [float("inf")]])
def test_check_derivatives_rejects_bad_steps(steps):
    with pytest.raises(ValidationError):
        check_derivatives(PROBLEM, 2, steps=steps)


def test_minimum_gap_examples():
    assert minimum_gap(PROBLEM, XI, XI) == 0.0
    shifted = np.array(XI) + indicator(4, {2, 3}).values
    assert minimum_gap(PROBLEM, XI, shifted) == pytest.approx(0.5 * 0.5, rel=1e-15)
    # exact value of 1/2 |xi|^2 = 1/2 * 1/4 * (2 * 1.5^2 + 2 * 3.5^2) = 29/8
    half_sq = Fraction(1, 2) * Fraction(1, 4) * (2 * Fraction(3, 2) ** 2 + 2 * Fraction(7, 2) ** 2)
    assert minimum_gap(PROBLEM, XI, [0] * 4) == float(half_sq) == 3.625


def _exact_j(space, x, y):
    p = [Fraction(float(v)) for v in space.weights]
    return sum(pi * (Fraction(float(b)) ** 2 / 2 - Fraction(float(a)) * Fraction(float(b))) for pi, a, b in zip(p, x, y))


@pytest.mark.parametrize("seed", range(20))
def test_minimum_gap_matches_exact_difference(seed):
    # xi here is an arbitrary measurable point, not the minimizer
    space, G, X = problems(1, seed=seed)[0]
    rng = np.random.default_rng(seed)
    Z = random_measurable(G, rng)
    # Y within 1e-7 of Z makes naive J(Y) - J(Z) lose almost every digit
    Y = G.lift(Z.values[[a[0] for a in G.atoms]] + 1e-7 * rng.uniform(-1, 1, G.n_atoms))
    problem = EnergyProblem(space, X, G)
    exact = _exact_j(space, X, Y.values) - _exact_j(space, X, Z.values)
    assert minimum_gap(problem, Z, Y) == pytest.approx(float(exact), rel=1e-12, abs=1e-300)


def test_minimum_gap_requires_measurable_inputs():
    with pytest.raises(MeasurabilityError):
        minimum_gap(PROBLEM, XI, [1, 2, 3, 4])
    with pytest.raises(MeasurabilityError):
        minimum_gap(PROBLEM, [1, 2, 3, 4], XI)


# ---- properties on random problems ---------------------------------------------

RANDOM = problems(30, seed=11)


@pytest.mark.parametrize("space, G, X", RANDOM)
def test_linearity_in_direction(space, G, X):
    problem = EnergyProblem(space, X, G)
    rng = np.random.default_rng(0)
    Y, W, Z = (rng.uniform(-1, 1, space.size) for _ in range(3))
    a, b = rng.uniform(-3, 3, 2)
    scale = norm2(space, X) * (abs(a) * norm2(space, Y) + abs(b) * norm2(space, W)) + 1e-300
    lhs = t_apply(problem, a * Y + b * W)
    assert abs(lhs - a * t_apply(problem, Y) - b * t_apply(problem, W)) <= 1e-12 * scale
    lhs = j_gateaux(problem, Z, a * Y + b * W)
    rhs = a * j_gateaux(problem, Z, Y) + b * j_gateaux(problem, Z, W)
    assert abs(lhs - rhs) <= 1e-12 * (scale + norm2(space, Z) * scale / max(norm2(space, X), 1e-300))


@pytest.mark.parametrize("space, G, X", RANDOM)
def test_continuity_bound(space, G, X):
    problem = EnergyProblem(space, X, G)
    rng = np.random.default_rng(1)
    for _ in range(20):
        Y = rng.normal(size=space.size)
        assert abs(t_apply(problem, Y)) <= norm2(space, X) * norm2(space, Y) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 29), st.floats(1e-6, 10.0), st.integers(0, 2**32 - 1))
def test_quadratic_expansion_is_exact(k, t, seed):
    space, G, X = RANDOM[k]
    problem = EnergyProblem(space, X, G)
    rng = np.random.default_rng(seed)
    u, v = rng.uniform(-1, 1, space.size), rng.uniform(-1, 1, space.size)
    nv = norm2(space, v)
    diff = directional_quotient(problem, "J", u, v, t) - j_gateaux(problem, u, v) - t / 2 * nv**2
    scale = nv * (norm2(space, u) + norm2(space, X)) + t / 2 * nv**2
    assert abs(diff) <= 1e-10 * scale


@pytest.mark.parametrize("space, G, X", RANDOM[:10])
def test_second_derivative_is_base_point_free(space, G, X):
    problem = EnergyProblem(space, X, G)
    rng = np.random.default_rng(2)
    v, w, u1, u2 = (random_measurable(G, rng) for _ in range(4))
    q1 = gateaux_quotient(problem, u1, v, w, 1e-3)
    q2 = gateaux_quotient(problem, u2, v, w, 1e-3)
    assert q1 == pytest.approx(q2, abs=1e-12)
    assert q1 == pytest.approx(j_second(problem, v, w), abs=1e-12)


@pytest.mark.parametrize("space, G, X", RANDOM)
def test_positive_definite(space, G, X):
    problem = EnergyProblem(space, X, G)
    rng = np.random.default_rng(3)
    for _ in range(20):
        Y = random_measurable(G, rng)
        if norm2(space, Y) > 1e-9:
            assert j_second(problem, Y, Y) > 0


@pytest.mark.parametrize("space, G, X", RANDOM)
def test_oracle_is_critical_point(space, G, X):
    problem = EnergyProblem(space, X, G)
    xi = solve_oracle(space, G, X).xi
    for a in G.atoms:
        assert abs(j_gateaux(problem, xi, indicator(space.size, a))) <= 1e-11
