import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as npoly

from multioracle.catalog import example_game, random_polynomial_game
from multioracle.game import ContinuousGame, Polynomial, expected_utility_vs_pure
from multioracle.oracles import (
    CallableObjective, MultivariatePolynomial, OracleConfig, UnivariatePolynomial,
    best_response, best_response_multistart, best_response_univariate_poly,
    induce_objective, poly_gradient,
)
from multioracle.spaces import Box, Circle, Finite, Simplex, canonicalize, dirac, sample

from reference import grid_maximum

LINE = Box([-1], [1])


def test_induced_objective_example1():
    f = induce_objective(example_game(1), 0, [None, dirac(LINE, 0.63)])
    assert isinstance(f, UnivariatePolynomial)
    assert f.coefficients == pytest.approx([-0.63, 2 * 0.63 ** 2, -1.0], abs=1e-15)
    assert 2 * 0.63 ** 2 == pytest.approx(0.7938)


def test_induced_objective_example2_against_direct_evaluation():
    g = example_game(2)
    p1 = canonicalize([[0.11], [-1.0]], [0.4419, 0.5581], LINE)
    f = induce_objective(g, 1, [p1, None])
    assert len(f.coefficients) == 4  # cubic in y
    ys = np.random.default_rng(0).uniform(-1, 1, 10)
    for y in ys:
        assert f(np.array([[y]]))[0] == pytest.approx(
            expected_utility_vs_pure(g, 1, [y], [p1, None]), abs=1e-12)


def test_induced_objective_for_blackbox_is_a_closure():
    g = example_game(3)
    f = induce_objective(g, 0, [None, dirac(Circle(), 1.0)])
    assert isinstance(f, CallableObjective)
    assert f(np.array([[0.3]]))[0] == pytest.approx(np.cos(0.3) - np.cos(0.3 - 1.0))


def test_univariate_examples():
    br = best_response_univariate_poly(UnivariatePolynomial(np.array([-0.63, 0.7938, -1.0])), -1, 1)
    assert br.strategy[0] == pytest.approx(0.3969, abs=1e-12)
    assert br.value == pytest.approx(0.7938 ** 2 / 4 - 0.63, abs=1e-12)
    assert br.certified_global
    br = best_response_univariate_poly(np.array([5.0]), -1, 1)
    assert (br.strategy[0], br.value) == (-1, 5.0)
    br = best_response_univariate_poly(np.array([0.0, 1.0]), -1, 1)
    assert (br.strategy[0], br.value) == (1, 1.0)


def test_multistart_concave_quadratic():
    c = np.array([0.3, -0.2, 0.7])
    f = CallableObjective(lambda X: -np.sum((X - c) ** 2, axis=-1))
    br = best_response_multistart(f, Box([-1] * 3, [1] * 3), rng=np.random.default_rng(0))
    assert np.allclose(br.strategy, c, atol=1e-6)
    assert not br.certified_global


def test_multistart_polynomial_concave_quadratic():
    # -(x - 0.3)^2 - (y + 0.2)^2 as a one-block polynomial
    p = Polynomial([(-1.0, [[2, 0]]), (0.6, [[1, 0]]), (-1.0, [[0, 2]]), (-0.4, [[0, 1]])], [2])
    br = best_response_multistart(MultivariatePolynomial(p), Box([-1, -1], [1, 1]),
                                  rng=np.random.default_rng(0))
    assert np.allclose(br.strategy, [0.3, -0.2], atol=1e-6)


def test_multistart_torus():
    alpha = 1.0
    f = CallableObjective(lambda X: alpha * np.cos(X[..., 0]) - np.cos(X[..., 0] - np.pi))
    br = best_response_multistart(f, Circle(), rng=np.random.default_rng(0))
    assert abs(br.strategy[0]) <= 1e-6
    assert br.value == pytest.approx(alpha + 1, abs=1e-10)


def test_multistart_linear_on_simplex_picks_vertex():
    c = np.array([0.1, 0.5, -0.3, 0.45, 0.2])
    f = CallableObjective(lambda X: X @ c)
    br = best_response_multistart(f, Simplex(5), rng=np.random.default_rng(0))
    assert np.allclose(br.strategy, np.eye(5)[1])


def test_best_response_examples():
    g = example_game(1)
    br = best_response(g, 0, [None, dirac(LINE, 0.63)])
    assert br.strategy[0] == pytest.approx(0.3969, abs=1e-12)

    single = ContinuousGame([Finite([[2.0]]), Finite([[1.0], [3.0]])],
                            [Polynomial([(1.0, [[1], [1]])], [1, 1])] * 2)
    br = best_response(single, 0, [None, dirac(single.spaces[1], [3.0])])
    assert br.strategy.tolist() == [2.0]

    blotto = example_game(4)
    br = best_response(blotto, 0, [None, dirac(Simplex(5), np.full(5, 0.2))],
                       rng=np.random.default_rng(0))
    assert br.value == pytest.approx(0.48, abs=1e-12)
    assert np.sort(br.strategy).tolist() == [0, 0, 0, 0, 1]
    assert not br.certified_global


def test_exact_mode_rejects_non_polynomial_objectives():
    with pytest.raises(ValueError):
        best_response(example_game(3), 0, [None, dirac(Circle(), 0.0)], OracleConfig(mode="poly-exact"))


def test_oracle_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(mode="sos")
    with pytest.raises(ValueError):
        OracleConfig(starts=0)


def random_others(game, i, rng, support=3):
    out = []
    for k, sp in enumerate(game.spaces):
        if k == i:
            out.append(None)
            continue
        m = int(rng.integers(1, support + 1))
        out.append(canonicalize(np.array([sample(sp, rng) for _ in range(m)]), rng.random(m) + 0.1, sp))
    return out


@settings(max_examples=60, deadline=None)
@given(ex=st.sampled_from([1, 2, 3, 4, 5]), seed=st.integers(0, 2**32 - 1))
def test_best_response_value_and_dominance(ex, seed):
    g = example_game(ex)
    rng = np.random.default_rng(seed)
    i = int(rng.integers(g.n_players))
    others = random_others(g, i, rng)
    atoms = np.array([sample(g.spaces[i], rng) for _ in range(4)])
    br = best_response(g, i, others, OracleConfig(starts=4, iterations=60), atoms=atoms, rng=rng)
    assert abs(br.value - expected_utility_vs_pure(g, i, br.strategy, others)) <= 1e-10
    for x in atoms:
        assert br.value >= expected_utility_vs_pure(g, i, x, others) - 1e-10


@settings(max_examples=60, deadline=None)
@given(ex=st.sampled_from([1, 2, 5]), seed=st.integers(0, 2**32 - 1))
def test_induced_polynomial_consistency(ex, seed):
    g = example_game(ex)
    rng = np.random.default_rng(seed)
    i = int(rng.integers(g.n_players))
    others = random_others(g, i, rng)
    f = induce_objective(g, i, others)
    xs = rng.uniform(-1, 1, size=(20, 1))
    direct = [expected_utility_vs_pure(g, i, x, others) for x in xs]
    assert np.allclose(f(xs), direct, atol=1e-9, rtol=0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 3))
def test_gradient_matches_finite_differences(seed, dim):
    g = random_polynomial_game(2, degree=4, dim=dim, seed=seed)
    rng = np.random.default_rng(seed)
    others = random_others(g, 0, rng)
    poly = g.utilities[0].collapse(0, others)
    X = rng.uniform(0.05, 0.95, size=(5, dim))
    grad = poly_gradient(poly, X)
    h = 1e-6
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = h
        fd = (poly.evaluate([X + e]) - poly.evaluate([X - e])) / (2 * h)
        scale = np.maximum(np.abs(grad[:, j]), 1.0)
        assert np.all(np.abs(fd - grad[:, j]) <= 1e-5 * scale)


def test_univariate_oracle_matches_dense_grid():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        deg = int(rng.integers(0, 9))
        coefs = rng.normal(size=deg + 1)
        lo, hi = np.sort(rng.uniform(-2, 2, size=2))
        br = best_response_univariate_poly(coefs, lo, hi)
        _, v = grid_maximum(lambda x: npoly.polyval(x, coefs), lo, hi)
        assert br.value >= v - 1e-6
        assert abs(br.value - npoly.polyval(br.strategy[0], coefs)) <= 1e-12
        assert lo <= br.strategy[0] <= hi
