"""The multiple oracle loop.

Each iteration solves the finite subgame spanned by the strategies sampled so
far, asks every player's oracle for a best response against the subgame
equilibrium, and stops once no player can gain more than ``epsilon`` by
switching to that best response. Otherwise the best responses are added to
the strategy lists and the loop repeats.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import solve_subgame
from .game import ContinuousGame, payoffs, restrict
from .metrics import distance_matrix, profile_distance
from .oracles import BestResponse, OracleConfig, best_response
from .spaces import DEDUP_RADIUS, Profile, sample

__all__ = [
    "SolveConfig",
    "IterationTrace",
    "SolveResult",
    "CONVERGED",
    "MAX_ITERATIONS",
    "solve",
    "instability",
    "certify_epsilon",
]

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"


@dataclass
class SolveConfig:
    epsilon: float = 1e-3
    max_iterations: int = 100
    seed: int = 0
    initial_strategies: list | None = None
    master_tol: float | None = None
    membership_tol: float = DEDUP_RADIUS
    record_wasserstein: bool = False
    master: str = "auto"
    oracle: OracleConfig = field(default_factory=OracleConfig)

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")
        if self.master_tol is None:
            self.master_tol = max(self.epsilon / 10, 1e-9)
            if 0 < self.epsilon <= self.master_tol:
                # the floor would swallow a tiny epsilon
                self.master_tol = self.epsilon / 10
        if self.epsilon > 0 and self.master_tol >= self.epsilon:
            raise ValueError("master_tol must be below epsilon")


@dataclass
class IterationTrace:
    iteration: int
    instability: np.ndarray
    payoffs: np.ndarray
    subgame_sizes: tuple
    master_certified_gap: float
    master_certified: bool
    master_method: str
    wasserstein_step: float | None = None
    timings: dict = field(default_factory=dict)

    @property
    def max_instability(self) -> float:
        return float(np.max(self.instability))


@dataclass
class SolveResult:
    profile: Profile
    payoffs: np.ndarray
    epsilon_certified: float
    iterations: int
    trace: list
    terminated: str
    strategy_lists: list

    @property
    def converged(self) -> bool:
        return self.terminated == CONVERGED


def instability(game: ContinuousGame, profile: Profile, best_responses) -> np.ndarray:
    """Per-player gain of the best response over the current expected payoff."""
    current = payoffs(game, profile)
    return np.array([br.value for br in best_responses]) - current


def _best_responses(game, profile, config: OracleConfig, lists, seed, iteration) -> list[BestResponse]:
    out = []
    for i in range(game.n_players):
        rng = np.random.default_rng([seed, iteration, i])
        out.append(best_response(game, i, profile.others(i), config,
                                 atoms=None if lists is None else lists[i], rng=rng))
    return out


def solve(game: ContinuousGame, config: SolveConfig | None = None) -> SolveResult:
    config = config or SolveConfig()
    rng = np.random.default_rng(config.seed)
    if config.initial_strategies is not None:
        lists = [np.asarray(s, dtype=float).reshape(-1, sp.dim)
                 for s, sp in zip(config.initial_strategies, game.spaces)]
        if len(lists) != game.n_players or any(len(s) == 0 for s in lists):
            raise ValueError("need a nonempty initial strategy list for every player")
    else:
        lists = [sample(sp, rng)[None] for sp in game.spaces]

    trace: list[IterationTrace] = []
    best = None
    previous = None
    for j in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        subgame = restrict(game, lists)
        eq = solve_subgame(subgame, config.master, config.master_tol, seed=config.seed + j)
        t1 = time.perf_counter()
        profile = eq.profile
        current = payoffs(game, profile)
        brs = _best_responses(game, profile, config.oracle, lists, config.seed, j)
        gains = np.array([br.value for br in brs]) - current
        t2 = time.perf_counter()
        step = None
        if config.record_wasserstein and previous is not None:
            step = profile_distance(previous, profile, game.spaces)
        t3 = time.perf_counter()
        if not eq.certified:
            log.warning("iteration %d: master gap %.3g not certified", j, eq.certified_gap)
        trace.append(IterationTrace(
            iteration=j, instability=gains, payoffs=current,
            subgame_sizes=tuple(len(s) for s in lists),
            master_certified_gap=eq.certified_gap, master_certified=eq.certified,
            master_method=eq.method, wasserstein_step=step,
            timings={"master_ms": 1e3 * (t1 - t0), "oracle_ms": 1e3 * (t2 - t1),
                     "metric_ms": 1e3 * (t3 - t2)}))
        log.info("iteration %d: max instability %.3g, sizes %s, master %s gap %.3g (%.0f ms)",
                 j, gains.max(), trace[-1].subgame_sizes, eq.method, eq.certified_gap,
                 1e3 * (t3 - t0))
        if best is None or gains.max() < best[2].max():
            best = (profile, current, gains)
        previous = profile

        if gains.max() <= config.epsilon:
            return SolveResult(profile, current, float(gains.max()), j, trace, CONVERGED, lists)

        grown = False
        for i, br in enumerate(brs):
            d = distance_matrix(game.spaces[i], lists[i], br.strategy[None])[:, 0]
            if d.min() > config.membership_tol:
                lists[i] = np.vstack([lists[i], br.strategy])
                grown = True
        if not grown and gains.max() <= max(config.epsilon, config.master_tol):
            # nothing new to add: the remaining gap is the master solver's tolerance
            return SolveResult(profile, current, float(gains.max()), j, trace, CONVERGED, lists)

    profile, current, gains = best
    return SolveResult(profile, current, float(gains.max()), config.max_iterations,
                       trace, MAX_ITERATIONS, lists)


def certify_epsilon(game: ContinuousGame, profile: Profile,
                    oracle: OracleConfig | None = None) -> float:
    """Independent post-hoc exploitability estimate of ``profile``.

    Uses exact oracles where they apply and a 64-start multistart elsewhere,
    always seeded with the profile's own atoms.
    """
    oracle = oracle or OracleConfig(starts=64, seed=12345)
    current = payoffs(game, profile)
    gains = []
    for i in range(game.n_players):
        rng = np.random.default_rng([oracle.seed, i])
        br = best_response(game, i, profile.others(i), oracle, atoms=profile[i].atoms, rng=rng)
        gains.append(br.value - current[i])
    return float(max(gains))
