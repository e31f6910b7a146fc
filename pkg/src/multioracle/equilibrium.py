"""Equilibria of finite subgames (the master problem).

Three solvers are provided: the minimax LP for two-player zero-sum games,
the Cai-Daskalakis LP for zero-sum polymatrix games, and a general n-player
routine (regret matching+ with support polishing and a support-enumeration
fallback). Every result carries a gap certified by enumerating all pure
deviations of the subgame.
"""

from __future__ import annotations

import itertools
import math
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .game import FiniteSubgame, _contract
from .spaces import Finite, Profile, canonicalize

__all__ = [
    "FiniteEquilibrium",
    "MasterSolverError",
    "subgame_from_payoffs",
    "exploitability",
    "solve_zero_sum_bimatrix",
    "solve_polymatrix_zero_sum",
    "solve_general",
    "solve_subgame",
]

log = logging.getLogger(__name__)

LP_GAP = 1e-8
RM_WORK = 2 * 10**8
POLISH_WORK = 3 * 10**8
WEIGHT_FLOOR = 1e-12
_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


class MasterSolverError(RuntimeError):
    pass


@dataclass(eq=False)
class FiniteEquilibrium:
    weights: list
    certified_gap: float
    certified: bool
    method: str
    profile: Profile
    gains: np.ndarray

    def __repr__(self):
        return (f"FiniteEquilibrium(method={self.method!r}, gap={self.certified_gap:.3g}, "
                f"certified={self.certified})")


def subgame_from_payoffs(payoffs, zero_sum: bool | None = None, pairwise=None) -> FiniteSubgame:
    """Wrap raw payoff tensors (one per player) as a subgame over action indices."""
    tensors = [np.asarray(t, dtype=float) for t in payoffs]
    shape = tensors[0].shape
    if any(t.shape != shape for t in tensors) or len(shape) != len(tensors):
        raise ValueError("need one n-dimensional payoff tensor per player, all of equal shape")
    lists = [np.arange(m, dtype=float)[:, None] for m in shape]
    if zero_sum is None:
        zero_sum = bool(np.max(np.abs(sum(tensors))) <= 1e-9)
    spaces = [Finite(lst) for lst in lists]
    return FiniteSubgame(lists, tensors, zero_sum, pairwise, spaces)


def _deviation_payoffs(tensors, weights, i):
    return _contract(tensors[i], weights, skip=(i,))


def exploitability(subgame: FiniteSubgame, weights) -> np.ndarray:
    """Best pure-deviation gain of every player against ``weights``."""
    weights = [np.asarray(w, dtype=float) for w in weights]
    gains = np.empty(subgame.n_players)
    for i in range(subgame.n_players):
        dev = _deviation_payoffs(subgame.payoffs, weights, i)
        gains[i] = dev.max() - weights[i] @ dev
    return gains


def _clean(w):
    w = np.where(np.asarray(w, dtype=float) > WEIGHT_FLOOR, w, 0.0)
    s = w.sum()
    if s <= 0:
        raise MasterSolverError("solver returned an all-zero strategy")
    return w / s


def _finish(subgame, weights, method, tol) -> FiniteEquilibrium:
    weights = [_clean(w) for w in weights]
    gains = exploitability(subgame, weights)
    gap = float(max(gains.max(), 0.0))
    spaces = subgame.spaces or [Finite(lst) for lst in subgame.strategy_lists]
    profile = Profile([canonicalize(lst, w, sp)
                       for lst, w, sp in zip(subgame.strategy_lists, weights, spaces)])
    return FiniteEquilibrium(weights, gap, gap <= tol, method, profile, gains)


def _polish(tensors, supports, x0=None, iterations=30):
    """Newton solve of the indifference system on fixed supports.

    Unknowns are the weights on each support plus one value per player;
    equations say every supported action earns the value and weights sum to
    one. Returns full weight vectors, or None if the solution is infeasible.
    """
    n = len(tensors)
    shape = tensors[0].shape
    sizes = [len(s) for s in supports]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    nx = offsets[-1]

    def unpack(z):
        ws = []
        for i in range(n):
            w = np.zeros(shape[i])
            w[supports[i]] = z[offsets[i]:offsets[i + 1]]
            ws.append(w)
        return ws

    z = np.empty(nx + n)
    for i in range(n):
        if x0 is None:
            z[offsets[i]:offsets[i + 1]] = 1.0 / sizes[i]
        else:
            xi = np.asarray(x0[i], dtype=float)[supports[i]]
            z[offsets[i]:offsets[i + 1]] = xi / xi.sum() if xi.sum() > 0 else 1.0 / sizes[i]
    ws = unpack(z)
    for i in range(n):
        z[nx + i] = _deviation_payoffs(tensors, ws, i)[supports[i]].mean()

    scale = max(1.0, max(float(np.abs(t).max()) for t in tensors))
    m = nx + n
    for _ in range(iterations):
        ws = unpack(z)
        r = np.empty(m)
        J = np.zeros((m, m))
        row = 0
        for i in range(n):
            dev = _deviation_payoffs(tensors, ws, i)[supports[i]]
            r[row:row + sizes[i]] = dev - z[nx + i]
            J[row:row + sizes[i], nx + i] = -1.0
            for k in range(n):
                if k == i:
                    continue
                sub = _contract(tensors[i], ws, skip=(i, k))
                if k < i:
                    sub = sub.T
                J[row:row + sizes[i], offsets[k]:offsets[k + 1]] = sub[np.ix_(supports[i], supports[k])]
            row += sizes[i]
        for i in range(n):
            r[row + i] = z[offsets[i]:offsets[i + 1]].sum() - 1.0
            J[row + i, offsets[i]:offsets[i + 1]] = 1.0
        if np.max(np.abs(r)) <= 1e-14 * scale:
            break
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        z = z - step
        if not np.all(np.isfinite(z)):
            return None
    ws = unpack(z)
    for w in ws:
        if w.min() < -1e-9:
            return None
    return [np.maximum(w, 0.0) / np.maximum(w, 0.0).sum() for w in ws]


def _improve_by_polish(subgame, eq: FiniteEquilibrium, tol, threshold=1e-9):
    if eq.certified_gap <= 1e-13:
        return eq
    supports = [np.flatnonzero(w > threshold) for w in eq.weights]
    polished = _polish(subgame.payoffs, supports, eq.weights)
    if polished is None:
        return eq
    cand = _finish(subgame, polished, eq.method, tol)
    return cand if cand.certified_gap < eq.certified_gap else eq


def solve_zero_sum_bimatrix(subgame: FiniteSubgame, tol: float = LP_GAP) -> FiniteEquilibrium:
    """Minimax strategies of a two-player zero-sum subgame by linear programming."""
    if subgame.n_players != 2 or not subgame.zero_sum:
        raise MasterSolverError("minimax LP needs a certified two-player zero-sum subgame")
    A = subgame.payoffs[0]
    x = _maximin(A)
    y = _maximin(-A.T)
    eq = _finish(subgame, [x, y], "lp", max(tol, LP_GAP))
    return _improve_by_polish(subgame, eq, max(tol, LP_GAP))


def _maximin(A):
    """Row strategy maximizing the worst-case payoff of matrix ``A``."""
    m, n = A.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-A.T, np.ones((n, 1))])
    A_eq = np.concatenate([np.ones(m), [0.0]])[None]
    bounds = [(0, None)] * m + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=[1.0],
                  bounds=bounds, method="highs-ds", options=_LP_OPTIONS)
    if res.status != 0:
        raise MasterSolverError(f"minimax LP failed: {res.message}")
    return res.x[:m]


def solve_polymatrix_zero_sum(subgame: FiniteSubgame, tol: float = LP_GAP,
                              seed: int = 0) -> FiniteEquilibrium:
    """Equilibrium of a zero-sum polymatrix subgame via one LP.

    Minimizes the sum of per-player values ``w_i`` subject to ``w_i`` bounding
    every pure deviation payoff of player ``i``; for globally zero-sum
    polymatrix games the minimizers are exactly the equilibria.
    """
    if subgame.pairwise is None:
        warnings.warn("subgame has no bilateral structure; using the general solver",
                      RuntimeWarning, stacklevel=2)
        return solve_general(subgame, tol, seed=seed)
    if not subgame.zero_sum:
        raise MasterSolverError("polymatrix LP needs a certified zero-sum subgame")
    n = subgame.n_players
    sizes = subgame.shape
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    nx = offsets[-1]
    c = np.concatenate([np.zeros(nx), np.ones(n)])
    rows = []
    for i in range(n):
        block = np.zeros((sizes[i], nx + n))
        for (a, k), M in subgame.pairwise.items():
            if a == i:
                block[:, offsets[k]:offsets[k + 1]] += M
        block[:, nx + i] = -1.0
        rows.append(block)
    A_ub = np.vstack(rows)
    A_eq = np.zeros((n, nx + n))
    for i in range(n):
        A_eq[i, offsets[i]:offsets[i + 1]] = 1.0
    bounds = [(0, None)] * nx + [(None, None)] * n
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(nx), A_eq=A_eq, b_eq=np.ones(n),
                  bounds=bounds, method="highs-ds", options=_LP_OPTIONS)
    if res.status != 0:
        raise MasterSolverError(f"polymatrix LP failed: {res.message}")
    weights = [res.x[offsets[i]:offsets[i + 1]] for i in range(n)]
    eq = _finish(subgame, weights, "polymatrix-lp", max(tol, LP_GAP))
    return _improve_by_polish(subgame, eq, max(tol, LP_GAP))


def _pure_equilibrium(tensors):
    ok = np.ones(tensors[0].shape, dtype=bool)
    for i, t in enumerate(tensors):
        ok &= t >= t.max(axis=i, keepdims=True)
    hits = np.argwhere(ok)
    return None if len(hits) == 0 else tuple(hits[0])


def _regret_matching_plus(tensors, x0, iterations, check_every):
    """Alternating RM+ with linearly weighted averaging; yields running averages."""
    n = len(tensors)
    x = [np.array(xi, dtype=float) for xi in x0]
    q = [np.zeros_like(xi) for xi in x]
    avg = [np.zeros_like(xi) for xi in x]
    total = 0.0
    for t in range(1, iterations + 1):
        for i in range(n):
            u = _deviation_payoffs(tensors, x, i)
            q[i] = np.maximum(q[i] + u - x[i] @ u, 0.0)
            s = q[i].sum()
            if s > 0:
                x[i] = q[i] / s
        for i in range(n):
            avg[i] += t * x[i]
        total += t
        if t % check_every == 0 or t == iterations:
            yield [a / total for a in avg]


def _support_profiles(shape, max_support, limit):
    """Support profiles in order of increasing total size, at most ``limit`` of them.

    Two-player profiles use equal support sizes (nondegenerate games).
    """
    n = len(shape)
    sizes = [range(1, min(max_support, m) + 1) for m in shape]
    if n == 2:
        size_profiles = [(k, k) for k in sizes[0] if k in sizes[1]]
    else:
        size_profiles = sorted(itertools.product(*sizes), key=sum)
    count = 0
    for ks in size_profiles:
        for combo in itertools.product(*[itertools.combinations(range(m), k)
                                         for m, k in zip(shape, ks)]):
            if count >= limit:
                return
            count += 1
            yield [np.array(c) for c in combo]


def _support_count(shape, max_support):
    return int(np.prod([sum(math.comb(m, k) for k in range(1, min(max_support, m) + 1)) for m in shape]))


def solve_general(subgame: FiniteSubgame, tol: float = 1e-6, seed: int = 0,
                  restarts: int = 10, iterations: int = 2000, check_every: int = 100,
                  max_support: int = 4, enumeration_limit: int = 20000) -> FiniteEquilibrium:
    """Certified approximate equilibrium of an arbitrary finite n-player subgame.

    Order of attack: pure-equilibrium scan, regret matching+ restarts (each
    checkpoint is also polished on its support), then support enumeration.
    The returned gap is always the exhaustive deviation gap; if no candidate
    reaches ``tol`` the best one is returned with ``certified=False``.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    tensors = subgame.payoffs
    shape = subgame.shape
    n = len(shape)
    cells = int(np.prod(shape))
    # keep the work roughly bounded on big subgames: one RM+ sweep touches every
    # cell n times, one Newton polish about 30 n^2 times
    restarts = max(1, min(restarts, RM_WORK // (iterations * n * cells)))
    polish_limit = max(50, min(enumeration_limit, POLISH_WORK // (30 * n * n * cells)))
    extra_starts = 4 if polish_limit >= 4 * min(enumeration_limit, _support_count(shape, max_support)) else 0
    best: FiniteEquilibrium | None = None
    tried: set = set()
    rng = np.random.default_rng(seed)

    def consider(weights, method):
        nonlocal best
        eq = _finish(subgame, weights, method, tol)
        if best is None or eq.certified_gap < best.certified_gap:
            best = eq
        return eq.certified

    def polish(supports, x0, method):
        key = tuple(tuple(s.tolist()) for s in supports)
        if key in tried:
            return False
        tried.add(key)
        polished = _polish(tensors, supports, x0)
        if polished is not None and consider(polished, method):
            return True
        if n < 3 or x0 is not None:
            return False
        # with three or more players the indifference system is polynomial and
        # Newton from the uniform point can land on an infeasible root
        for _ in range(extra_starts):
            start = [np.zeros(m) for m in shape]
            for s, w in zip(supports, start):
                w[s] = rng.dirichlet(np.ones(len(s)))
            polished = _polish(tensors, supports, start)
            if polished is not None and consider(polished, method):
                return True
        return False

    if np.prod(shape) <= 200_000:
        pure = _pure_equilibrium(tensors)
        if pure is not None:
            weights = [np.eye(m)[a] for m, a in zip(shape, pure)]
            if consider(weights, "pure"):
                return best

    for r in range(restarts):
        x0 = [np.full(m, 1.0 / m) if r == 0 else rng.dirichlet(np.ones(m)) for m in shape]
        for avg in _regret_matching_plus(tensors, x0, iterations, check_every):
            if consider(avg, "regret"):
                return best
            for threshold in (1e-3, 1e-2):
                supports = [np.flatnonzero(a > threshold * a.max()) for a in avg]
                if polish(supports, avg, "regret+polish"):
                    return best

    for supports in _support_profiles(shape, max_support, polish_limit):
        if polish(supports, None, "support-enumeration"):
            return best

    log.warning("general solver did not certify gap %.3g (best %.3g)", tol, best.certified_gap)
    return best


def solve_subgame(subgame: FiniteSubgame, master: str = "auto", tol: float = 1e-6,
                  seed: int = 0) -> FiniteEquilibrium:
    """Dispatch to the master solver matching the subgame's structure."""
    if master == "auto":
        if subgame.zero_sum and subgame.n_players == 2:
            master = "lp"
        elif subgame.zero_sum and subgame.pairwise is not None:
            master = "polymatrix-lp"
        else:
            master = "regret"
    if master == "lp":
        return solve_zero_sum_bimatrix(subgame, tol)
    if master == "polymatrix-lp":
        return solve_polymatrix_zero_sum(subgame, tol, seed=seed)
    if master == "regret":
        return solve_general(subgame, tol, seed=seed)
    raise ValueError(f"unknown master solver {master!r}")
