import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multioracle.equilibrium import (
    exploitability, solve_general, solve_polymatrix_zero_sum, solve_subgame,
    solve_zero_sum_bimatrix, subgame_from_payoffs,
)
from multioracle.game import FiniteSubgame

from reference import exhaustive_gap, expected_payoff

PENNIES = np.array([[1.0, -1.0], [-1.0, 1.0]])
RPS = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])


def zero_sum(A):
    return subgame_from_payoffs([A, -A])


def polymatrix_subgame(mats, shape):
    """Tensors and pairwise structure from bilateral matrices {(i, k): M}."""
    n = len(shape)
    tensors = []
    for i in range(n):
        t = np.zeros(shape)
        for (a, k), M in mats.items():
            if a != i:
                continue
            s = [1] * n
            s[i], s[k] = M.shape
            t = t + (M if i < k else M.T).reshape(s)
        tensors.append(t)
    sub = subgame_from_payoffs(tensors, pairwise=mats)
    return sub


def random_zero_sum_pairs(rng, n, m):
    mats = {}
    for i, k in itertools.combinations(range(n), 2):
        A = rng.normal(size=(m, m))
        mats[(i, k)] = A
        mats[(k, i)] = -A.T
    return mats


def value_by_support_enumeration(A):
    """Minimax value of a small zero-sum game by trying every equal-size support pair."""
    m, n = A.shape
    best = None
    for k in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                S = A[np.ix_(rows, cols)]
                # column player indifferent over rows' payoffs, row player over columns'
                M = np.block([[S.T, -np.ones((k, 1))], [np.ones((1, k)), np.zeros((1, 1))]])
                N = np.block([[S, -np.ones((k, 1))], [np.ones((1, k)), np.zeros((1, 1))]])
                rhs = np.zeros(k + 1)
                rhs[-1] = 1
                try:
                    zx = np.linalg.solve(M, rhs)
                    zy = np.linalg.solve(N, rhs)
                except np.linalg.LinAlgError:
                    continue
                x, y = np.zeros(m), np.zeros(n)
                x[list(rows)], y[list(cols)] = zx[:k], zy[:k]
                if x.min() < -1e-12 or y.min() < -1e-12:
                    continue
                if (A.T @ x).min() >= zx[k] - 1e-10 and (A @ y).max() <= zy[k] + 1e-10:
                    return zx[k]
    return best


def test_matching_pennies_and_rps():
    eq = solve_zero_sum_bimatrix(zero_sum(PENNIES))
    assert np.allclose(eq.weights[0], [0.5, 0.5]) and np.allclose(eq.weights[1], [0.5, 0.5])
    assert expected_payoff(PENNIES, eq.weights) == pytest.approx(0.0, abs=1e-12)
    eq = solve_zero_sum_bimatrix(zero_sum(RPS))
    assert np.allclose(eq.weights[0], 1 / 3) and np.allclose(eq.weights[1], 1 / 3)


def test_two_by_two_closed_form():
    A = np.array([[3.0, 1.0], [0.0, 2.0]])
    eq = solve_zero_sum_bimatrix(zero_sum(A))
    assert eq.weights[0] == pytest.approx([0.5, 0.5], abs=1e-9)
    assert eq.weights[1] == pytest.approx([0.25, 0.75], abs=1e-9)
    assert expected_payoff(A, eq.weights) == pytest.approx(1.5, abs=1e-9)


def test_lp_values_match_support_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(30):
        A = rng.normal(size=(3, 3))
        eq = solve_zero_sum_bimatrix(zero_sum(A))
        x, y = eq.weights
        row_value = (A.T @ x).min()
        col_value = (A @ y).max()
        assert abs(row_value - col_value) <= 1e-9
        assert abs(row_value - value_by_support_enumeration(A)) <= 1e-8


def test_single_edge_polymatrix_agrees_with_bimatrix():
    rng = np.random.default_rng(1)
    for _ in range(10):
        A = rng.normal(size=(5, 5))
        sub = polymatrix_subgame({(0, 1): A, (1, 0): -A.T}, (5, 5))
        v_poly = expected_payoff(A, solve_polymatrix_zero_sum(sub).weights)
        v_lp = expected_payoff(A, solve_zero_sum_bimatrix(zero_sum(A)).weights)
        assert abs(v_poly - v_lp) <= 1e-8


def test_constant_polymatrix_returns_zero_gap():
    mats = {(i, k): np.zeros((3, 3)) for i in range(3) for k in range(3) if i != k}
    eq = solve_polymatrix_zero_sum(polymatrix_subgame(mats, (3, 3, 3)))
    assert eq.certified_gap == 0.0


def test_random_three_player_polymatrix_is_certified_exhaustively():
    rng = np.random.default_rng(2)
    for _ in range(10):
        mats = random_zero_sum_pairs(rng, 3, 4)
        sub = polymatrix_subgame(mats, (4, 4, 4))
        eq = solve_polymatrix_zero_sum(sub)
        assert exhaustive_gap(sub.payoffs, eq.weights) <= 1e-8
        assert eq.certified


def test_polymatrix_without_structure_falls_back():
    sub = subgame_from_payoffs([PENNIES, -PENNIES])
    with pytest.warns(RuntimeWarning, match="bilateral"):
        eq = solve_polymatrix_zero_sum(sub)
    assert eq.certified_gap <= 1e-6


def test_prisoners_dilemma():
    u1 = np.array([[-1.0, -3.0], [0.0, -2.0]])
    eq = solve_general(subgame_from_payoffs([u1, u1.T]))
    assert eq.weights[0].tolist() == [0.0, 1.0] and eq.weights[1].tolist() == [0.0, 1.0]
    assert eq.certified_gap == 0.0


def test_rps_as_general_sum():
    eq = solve_general(subgame_from_payoffs([RPS, -RPS], zero_sum=False), tol=1e-6)
    assert eq.certified_gap <= 1e-6
    assert np.allclose(eq.weights[0], 1 / 3, atol=1e-3)


def test_battle_of_the_sexes():
    u1 = np.array([[2.0, 0.0], [0.0, 1.0]])
    u2 = np.array([[1.0, 0.0], [0.0, 2.0]])
    sub = subgame_from_payoffs([u1, u2])
    eq = solve_general(sub, tol=1e-6)
    assert exhaustive_gap([u1, u2], eq.weights) <= 1e-6


def test_exploitability_examples():
    sub = zero_sum(PENNIES)
    assert exploitability(sub, [[1, 0], [1, 0]]).max() == pytest.approx(2.0)
    const = subgame_from_payoffs([np.ones((3, 3)), np.ones((3, 3))])
    assert np.all(exploitability(const, [np.full(3, 1 / 3)] * 2) == 0)
    eq = solve_zero_sum_bimatrix(sub)
    assert exploitability(sub, eq.weights).max() <= 1e-9


def test_dispatch():
    assert solve_subgame(zero_sum(RPS)).method == "lp"
    mats = random_zero_sum_pairs(np.random.default_rng(0), 3, 2)
    assert solve_subgame(polymatrix_subgame(mats, (2, 2, 2))).method.startswith("polymatrix")
    u1 = np.array([[2.0, 0.0], [0.0, 1.0]])
    assert solve_subgame(subgame_from_payoffs([u1, u1.T])).method not in ("lp", "polymatrix-lp")
    with pytest.raises(ValueError):
        solve_subgame(zero_sum(RPS), master="simplex")


def test_dispatch_uses_general_solver_without_zero_sum_flag():
    u1 = np.array([[2.0, 0.0], [0.0, 1.0]])
    sub = FiniteSubgame([np.zeros((2, 1)), np.zeros((2, 1))], [u1, u1], zero_sum=False)
    assert solve_subgame(sub).method not in ("lp", "polymatrix-lp")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 3), m=st.integers(2, 4))
def test_certified_gap_is_the_exhaustive_gap(seed, n, m):
    rng = np.random.default_rng(seed)
    tensors = [rng.normal(size=(m,) * n) for _ in range(n)]
    sub = subgame_from_payoffs(tensors)
    eq = solve_general(sub, tol=1e-6, seed=seed)
    assert eq.certified_gap == pytest.approx(max(0.0, exhaustive_gap(tensors, eq.weights)), abs=1e-12)
    assert eq.certified == (eq.certified_gap <= 1e-6)
    for w in eq.weights:
        assert w.min() >= 0 and abs(w.sum() - 1) <= 1e-12


def test_general_solver_certifies_random_3x3_games():
    ok = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        tensors = [rng.normal(size=(3, 3)) for _ in range(2)]
        eq = solve_general(subgame_from_payoffs(tensors), tol=1e-6, seed=seed)
        ok += eq.certified
    assert ok >= 95
