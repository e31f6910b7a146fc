import numpy as np
import pytest

from multioracle.catalog import builtin, example_game, random_finite_game
from multioracle.driver import (
    CONVERGED, MAX_ITERATIONS, SolveConfig, certify_epsilon, instability, solve,
)
from multioracle.game import ContinuousGame, Polynomial, payoffs
from multioracle.oracles import best_response
from multioracle.spaces import Box, Finite, Profile, dirac

from reference import exhaustive_gap, finite_game_tables, finite_profile_weights

LINE = Box([-1], [1])


def matching_pennies():
    A = [[1.0, -1.0], [-1.0, 1.0]]
    sp = Finite([1, 2])
    return ContinuousGame([sp, sp], [builtin("table", payoffs=A),
                                     builtin("table", payoffs=(-np.array(A)).tolist())],
                          zero_sum=True, name="matching pennies")


def constant_game():
    u = Polynomial([(2.0, [[0], [0]])], [1, 1])
    return ContinuousGame([LINE, LINE], [u, u])


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(epsilon=-1)
    with pytest.raises(ValueError):
        SolveConfig(max_iterations=0)
    with pytest.raises(ValueError):
        SolveConfig(epsilon=1e-3, master_tol=1e-3)
    assert SolveConfig(epsilon=1e-3).master_tol == pytest.approx(1e-4)
    assert SolveConfig(epsilon=0.0).master_tol == 1e-9


def test_example1_solve():
    r = solve(example_game(1), SolveConfig(epsilon=1e-3))
    assert r.terminated == CONVERGED and r.iterations <= 10
    assert r.payoffs == pytest.approx([-0.47, 0.47], abs=0.02)
    assert r.epsilon_certified <= 1e-3


def test_finite_game_with_exact_stop():
    g = matching_pennies()
    r = solve(g, SolveConfig(epsilon=0.0, initial_strategies=[[[1.0]], [[1.0]]], max_iterations=10))
    assert r.terminated == CONVERGED
    assert r.iterations <= 4
    for s in r.profile:
        assert s.weights == pytest.approx([0.5, 0.5], abs=1e-9)


def test_blotto_solve():
    r = solve(example_game(4), SolveConfig(epsilon=1e-3))
    assert r.terminated == CONVERGED
    assert r.payoffs == pytest.approx([0.0, 0.0], abs=0.01)


def test_instability_examples():
    g = matching_pennies()
    prof = Profile([dirac(g.spaces[0], [1.0]), dirac(g.spaces[1], [1.0])])
    brs = [best_response(g, i, prof.others(i)) for i in range(2)]
    inst = instability(g, prof, brs)
    assert inst.max() == pytest.approx(2.0)
    const = constant_game()
    prof = Profile([dirac(LINE, 0.3), dirac(LINE, -0.5)])
    brs = [best_response(const, i, prof.others(i)) for i in range(2)]
    assert np.all(instability(const, prof, brs) == 0)


def test_first_iteration_of_matching_pennies_has_positive_instability():
    r = solve(matching_pennies(), SolveConfig(epsilon=0.0, initial_strategies=[[[1.0]], [[1.0]]],
                                              max_iterations=1))
    assert r.terminated == MAX_ITERATIONS
    assert r.trace[0].instability.max() > 0


def test_constant_game_converges_immediately():
    r = solve(constant_game(), SolveConfig(epsilon=0.0))
    assert r.terminated == CONVERGED and r.iterations == 1
    assert certify_epsilon(constant_game(), r.profile) == 0


def test_certify_examples():
    g = example_game(1)
    r = solve(g, SolveConfig(epsilon=1e-3))
    assert certify_epsilon(g, r.profile) <= 1e-3 + 1e-6
    short = solve(g, SolveConfig(epsilon=1e-3, max_iterations=1))
    assert short.terminated == MAX_ITERATIONS
    assert certify_epsilon(g, short.profile) > 1e-3


def test_trace_invariants_and_growth():
    g = example_game(2)
    cfg = SolveConfig(epsilon=1e-3, record_wasserstein=True)
    r = solve(g, cfg)
    assert len(r.trace) == r.iterations
    assert r.trace[0].wasserstein_step is None
    for a, b in zip(r.trace, r.trace[1:]):
        growth = np.array(b.subgame_sizes) - np.array(a.subgame_sizes)
        assert np.all((growth == 0) | (growth == 1))
        assert b.wasserstein_step is not None and b.wasserstein_step >= 0
    for t in r.trace:
        assert t.instability.min() >= -cfg.master_tol
        assert set(t.timings) == {"master_ms", "oracle_ms", "metric_ms"}
    assert [len(s) for s in r.strategy_lists] == list(r.trace[-1].subgame_sizes)


def test_solve_is_deterministic():
    g = example_game(3)
    a = solve(g, SolveConfig(seed=4))
    b = solve(g, SolveConfig(seed=4))
    assert a.iterations == b.iterations
    for ta, tb in zip(a.trace, b.trace):
        assert np.array_equal(ta.instability, tb.instability)
        assert np.array_equal(ta.payoffs, tb.payoffs)
    for sa, sb in zip(a.profile, b.profile):
        assert sa == sb


def test_max_iterations_returns_best_profile():
    r = solve(example_game(2), SolveConfig(epsilon=1e-12, max_iterations=3))
    assert r.terminated == MAX_ITERATIONS
    assert r.epsilon_certified == min(t.max_instability for t in r.trace)
    assert r.payoffs == pytest.approx(payoffs(example_game(2), r.profile))


def test_initial_strategies_are_validated():
    with pytest.raises(ValueError):
        solve(example_game(1), SolveConfig(initial_strategies=[[[0.1]], []]))


def test_converged_runs_pass_certification_with_exact_oracles():
    for ex in (1, 2, 5):
        g = example_game(ex)
        r = solve(g, SolveConfig(epsilon=1e-3))
        assert r.terminated == CONVERGED
        assert r.epsilon_certified <= 1e-3
        assert certify_epsilon(g, r.profile) <= 1e-3 + 1e-6


def test_random_finite_games_terminate_exactly():
    for seed in range(10):
        acts = (2 + seed % 3, 3, 2)[: 2 + seed % 2]
        g = random_finite_game(acts, seed=seed)
        r = solve(g, SolveConfig(epsilon=0.0, seed=seed, max_iterations=int(np.prod(acts)) + 5))
        assert r.terminated == CONVERGED
        assert r.iterations <= np.prod(acts)
        tables = finite_game_tables(g)
        assert exhaustive_gap(tables, finite_profile_weights(g, r.profile)) <= 1e-8
