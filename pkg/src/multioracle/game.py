"""Continuous games, utility functions and finite subgames.

Every utility exposes ``evaluate(xs)``, where ``xs`` holds one array per
player with the player's coordinates on the last axis. The leading axes of
the arrays broadcast against each other, so a whole payoff tensor (or a batch
of candidate deviations) is produced by a single call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .spaces import MixedStrategy, Profile, StrategySpace, as_point, contains, sample

__all__ = [
    "Polynomial",
    "BlackBox",
    "PolymatrixSum",
    "ContinuousGame",
    "FiniteSubgame",
    "DomainError",
    "ZeroSumError",
    "utility",
    "expected_utility",
    "expected_utility_vs_pure",
    "payoff_against",
    "payoffs",
    "restrict",
    "check_zero_sum",
]

MEMBERSHIP_TOL = 1e-9
ZERO_SUM_TOL = 1e-9
ZERO_SUM_SPOT_CHECKS = 100


class DomainError(ValueError):
    pass


class ZeroSumError(ValueError):
    pass


class Polynomial:
    """Sparse polynomial in the variables of several players.

    ``terms`` is a list of ``(coef, blocks)`` with one exponent vector per
    player block. Repeated monomials are merged and zero coefficients dropped.
    """

    kind = "polynomial"

    def __init__(self, terms, dims: Sequence[int]):
        self.dims = tuple(int(d) for d in dims)
        merged: dict[tuple, float] = {}
        for pos, (coef, blocks) in enumerate(terms):
            if len(blocks) != len(self.dims):
                raise ValueError(
                    f"term {pos}: {len(blocks)} exponent blocks, expected {len(self.dims)}")
            key = []
            for b, (block, d) in enumerate(zip(blocks, self.dims)):
                block = tuple(int(e) for e in np.atleast_1d(block))
                if len(block) != d:
                    raise ValueError(
                        f"term {pos}: exponent block {b} has length {len(block)}, expected {d}")
                if any(e < 0 for e in block):
                    raise ValueError(f"term {pos}: negative exponent in block {b}")
                key.append(block)
            key = tuple(key)
            merged[key] = merged.get(key, 0.0) + float(coef)
        keys = [k for k, c in merged.items() if c != 0.0]
        self.coefs = np.array([merged[k] for k in keys], dtype=float)
        self.exponents = [
            np.array([k[b] for k in keys], dtype=int).reshape(len(keys), d)
            for b, d in enumerate(self.dims)
        ]

    @classmethod
    def from_arrays(cls, coefs, exponents, dims):
        blocks = [np.asarray(e).reshape(len(coefs), d) for e, d in zip(exponents, dims)]
        return cls([(c, [b[t] for b in blocks]) for t, c in enumerate(coefs)], dims)

    @property
    def terms(self) -> list[tuple[float, list[list[int]]]]:
        return [(float(c), [e[t].tolist() for e in self.exponents])
                for t, c in enumerate(self.coefs)]

    def degree(self) -> int:
        if len(self.coefs) == 0:
            return 0
        return int(sum(e.sum(axis=1) for e in self.exponents).max())

    def evaluate(self, xs):
        if len(xs) != len(self.dims):
            raise ValueError("wrong number of argument blocks")
        if len(self.coefs) == 0:
            return np.zeros(np.broadcast_shapes(*[np.shape(x)[:-1] for x in xs]))
        prod = None
        for x, e in zip(xs, self.exponents):
            if not e.any():
                continue
            x = np.asarray(x, dtype=float)
            mono = np.prod(x[..., None, :] ** e, axis=-1)
            prod = mono if prod is None else prod * mono
        if prod is None:
            shape = np.broadcast_shapes(*[np.shape(x)[:-1] for x in xs])
            return np.full(shape, self.coefs.sum())
        return prod @ self.coefs

    def moments(self, block: int, strategy: MixedStrategy) -> np.ndarray:
        """Expected value of every monomial's block ``block`` under ``strategy``."""
        e = self.exponents[block]
        mono = np.prod(strategy.atoms[:, None, :] ** e[None, :, :], axis=-1)
        return strategy.weights @ mono

    def collapse(self, keep: int, others: Sequence[MixedStrategy | None]) -> "Polynomial":
        """Integrate out every block except ``keep`` against ``others``."""
        c = self.coefs.copy()
        for b, s in enumerate(others):
            if b == keep:
                continue
            c = c * self.moments(b, s)
        return Polynomial.from_arrays(c, [self.exponents[keep]], [self.dims[keep]])

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if self.dims != other.dims:
            raise ValueError("cannot add polynomials over different variables")
        return Polynomial(self.terms + other.terms, self.dims)

    def __neg__(self):
        return Polynomial([(-c, b) for c, b in self.terms], self.dims)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dims == other.dims and _term_set(self) == _term_set(other)

    def __repr__(self):
        return f"Polynomial({len(self.coefs)} terms, dims={self.dims})"


def _term_set(p: Polynomial):
    return {tuple(tuple(b) for b in blocks): c for c, blocks in p.terms}


class BlackBox:
    """Utility given by a vectorized callable.

    ``fn(xs)`` must be deterministic, free of side effects and broadcast over
    the leading axes of its arguments. ``name``/``params`` identify a builtin
    so the utility can be written to a game file.
    """

    kind = "blackbox"

    def __init__(self, fn: Callable, name: str | None = None, params: Mapping | None = None):
        self.fn = fn
        self.name = name
        self.params = dict(params or {})

    def evaluate(self, xs):
        shape = np.broadcast_shapes(*[np.shape(x)[:-1] for x in xs])
        return np.broadcast_to(np.asarray(self.fn(xs), dtype=float), shape)

    def __repr__(self):
        return f"BlackBox({self.name or self.fn!r})"


class PolymatrixSum:
    """Utility of ``player`` as a sum of bilateral terms.

    ``terms[k]`` is a utility over the argument blocks ``[x_player, x_k]``.
    """

    kind = "polymatrix"

    def __init__(self, player: int, terms: Mapping[int, object]):
        self.player = int(player)
        if self.player in terms:
            raise ValueError("a player cannot have a bilateral term with itself")
        self.terms = {int(k): t for k, t in sorted(terms.items())}

    def evaluate(self, xs):
        shape = np.broadcast_shapes(*[np.shape(x)[:-1] for x in xs])
        total = np.zeros(shape)
        for k, term in self.terms.items():
            total = total + term.evaluate([xs[self.player], xs[k]])
        return total

    def is_polynomial(self) -> bool:
        return all(isinstance(t, Polynomial) for t in self.terms.values())

    def __repr__(self):
        return f"PolymatrixSum(player={self.player}, neighbours={list(self.terms)})"


@dataclass(eq=False)
class ContinuousGame:
    spaces: list
    utilities: list
    zero_sum: bool = False
    name: str = ""
    check_seed: int = field(default=0, repr=False)

    def __post_init__(self):
        self.spaces = list(self.spaces)
        self.utilities = list(self.utilities)
        if len(self.spaces) != len(self.utilities) or not self.spaces:
            raise ValueError("need one strategy space and one utility per player")
        for i, u in enumerate(self.utilities):
            if isinstance(u, Polynomial) and u.dims != tuple(s.dim for s in self.spaces):
                raise ValueError(f"utility {i}: polynomial blocks {u.dims} do not match spaces")
            if isinstance(u, PolymatrixSum):
                if u.player != i:
                    raise ValueError(f"utility {i}: polymatrix sum declared for player {u.player}")
                for k in u.terms:
                    if not 0 <= k < len(self.spaces):
                        raise ValueError(f"utility {i}: neighbour {k} out of range")
        if self.zero_sum:
            check_zero_sum(self, ZERO_SUM_SPOT_CHECKS, np.random.default_rng(self.check_seed))

    @property
    def n_players(self) -> int:
        return len(self.spaces)

    def is_polymatrix(self) -> bool:
        return all(isinstance(u, PolymatrixSum) for u in self.utilities)


def check_zero_sum(game: ContinuousGame, samples: int, rng, tol: float = ZERO_SUM_TOL):
    """Spot-check that utilities sum to zero; raises :class:`ZeroSumError`."""
    pts = [np.stack([sample(s, rng) for _ in range(samples)]) for s in game.spaces]
    total = sum(u.evaluate(pts) for u in game.utilities)
    worst = float(np.max(np.abs(total)))
    if worst > tol:
        raise ZeroSumError(f"game declared zero-sum but utilities sum to {worst:.3g}")
    return worst


def _check_domain(game, i, x):
    x = as_point(game.spaces[i], x)
    if not contains(game.spaces[i], x, MEMBERSHIP_TOL):
        raise DomainError(f"strategy {x.tolist()} of player {i} lies outside {game.spaces[i]!r}")
    return x


def utility(game: ContinuousGame, i: int, x: Sequence) -> float:
    """u_i at a pure profile ``x``."""
    xs = [_check_domain(game, k, xk) for k, xk in enumerate(x)]
    if len(xs) != game.n_players:
        raise ValueError("profile length does not match player count")
    return float(game.utilities[i].evaluate([a[None] for a in xs])[0])


def _grid_arrays(arrays):
    n = len(arrays)
    out = []
    for k, a in enumerate(arrays):
        shape = [1] * n + [a.shape[-1]]
        shape[k] = a.shape[0]
        out.append(a.reshape(shape))
    return out


def _contract(tensor, weights, skip=()):
    """Contract tensor axes against weight vectors, keeping axes in ``skip``."""
    for k in reversed(range(len(weights))):
        if k in skip:
            continue
        tensor = np.tensordot(tensor, weights[k], axes=([k], [0]))
    return tensor


def _evaluate_grid(u, arrays) -> np.ndarray:
    shape = tuple(a.shape[0] for a in arrays)
    return np.broadcast_to(u.evaluate(_grid_arrays(arrays)), shape)


def expected_utility(game: ContinuousGame, i: int, profile: Profile) -> float:
    u = game.utilities[i]
    if isinstance(u, PolymatrixSum):
        p_i = profile[i]
        total = 0.0
        for k, term in u.terms.items():
            m = _evaluate_grid(term, [p_i.atoms, profile[k].atoms])
            total += p_i.weights @ m @ profile[k].weights
        return float(total)
    t = _evaluate_grid(u, [s.atoms for s in profile])
    return float(_contract(t, [s.weights for s in profile]))


def payoffs(game: ContinuousGame, profile: Profile) -> np.ndarray:
    return np.array([expected_utility(game, i, profile) for i in range(game.n_players)])


def payoff_against(game: ContinuousGame, i: int, X, others: Sequence[MixedStrategy | None]) -> np.ndarray:
    """U_i(x, p_{-i}) for every row x of ``X`` (vectorized, no domain check)."""
    X = np.asarray(X, dtype=float).reshape(-1, game.spaces[i].dim)
    u = game.utilities[i]
    if isinstance(u, PolymatrixSum):
        total = np.zeros(len(X))
        for k, term in u.terms.items():
            m = _evaluate_grid(term, [X, others[k].atoms])
            total += m @ others[k].weights
        return total
    arrays = [X if k == i else s.atoms for k, s in enumerate(others)]
    t = _evaluate_grid(u, arrays)
    weights = [None if k == i else s.weights for k, s in enumerate(others)]
    return _contract(t, weights, skip=(i,))


def expected_utility_vs_pure(game: ContinuousGame, i: int, x, others: Sequence[MixedStrategy | None]) -> float:
    x = _check_domain(game, i, x)
    return float(payoff_against(game, i, x[None], others)[0])


@dataclass(eq=False)
class FiniteSubgame:
    """Payoff tensors of a game restricted to finite strategy lists.

    ``pairwise[(i, k)]`` holds bilateral payoff matrices when every utility is
    a :class:`PolymatrixSum`; it is ``None`` otherwise.
    """

    strategy_lists: list
    payoffs: list
    zero_sum: bool = False
    pairwise: dict | None = None
    spaces: list | None = None

    @property
    def n_players(self) -> int:
        return len(self.strategy_lists)

    @property
    def shape(self) -> tuple:
        return tuple(len(s) for s in self.strategy_lists)


def restrict(game: ContinuousGame, strategy_lists) -> FiniteSubgame:
    lists = []
    for i, lst in enumerate(strategy_lists):
        arr = np.asarray(lst, dtype=float).reshape(-1, game.spaces[i].dim)
        if len(arr) == 0:
            raise ValueError(f"strategy list of player {i} is empty")
        for x in arr:
            _check_domain(game, i, x)
        lists.append(arr)
    if len(lists) != game.n_players:
        raise ValueError("need one strategy list per player")

    pairwise = None
    if game.is_polymatrix():
        pairwise = {}
        tensors = []
        n = game.n_players
        for i, u in enumerate(game.utilities):
            t = np.zeros(tuple(len(s) for s in lists))
            for k, term in u.terms.items():
                m = np.array(_evaluate_grid(term, [lists[i], lists[k]]))
                pairwise[(i, k)] = m
                shape = [1] * n
                shape[i], shape[k] = m.shape
                t = t + (m if i < k else m.T).reshape(shape)
            tensors.append(t)
    else:
        tensors = [np.array(_evaluate_grid(u, lists)) for u in game.utilities]

    zero_sum = bool(game.zero_sum and np.max(np.abs(sum(tensors))) <= ZERO_SUM_TOL)
    return FiniteSubgame(lists, tensors, zero_sum, pairwise, list(game.spaces))
