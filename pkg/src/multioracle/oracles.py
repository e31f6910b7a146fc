"""Best-response oracles.

Against finitely supported opponents the payoff of player ``i`` is a function
of ``x_i`` alone. For polynomial utilities it is again a polynomial, obtained
by integrating the opponents' variables out exactly. One-dimensional
polynomial objectives on an interval are maximized globally by enumerating
critical points; everything else goes through projected multistart search.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .game import ContinuousGame, Polynomial, PolymatrixSum, payoff_against
from .spaces import MixedStrategy, StrategySpace, project, sample

__all__ = [
    "OracleConfig",
    "BestResponse",
    "UnivariatePolynomial",
    "MultivariatePolynomial",
    "CallableObjective",
    "induce_objective",
    "poly_gradient",
    "best_response_univariate_poly",
    "best_response_multistart",
    "best_response_finite",
    "best_response",
]

ORACLE_MODES = ("auto", "poly-exact", "multistart")


@dataclass(frozen=True)
class OracleConfig:
    mode: str = "auto"
    starts: int = 16
    iterations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ORACLE_MODES:
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        if self.starts < 1:
            raise ValueError("need at least one start")


@dataclass(frozen=True)
class BestResponse:
    strategy: np.ndarray
    value: float
    certified_global: bool
    method: str = ""


@dataclass(frozen=True)
class UnivariatePolynomial:
    """Coefficients in increasing degree order, trailing zeros trimmed."""

    coefficients: np.ndarray

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        return npoly.polyval(X[..., 0], self.coefficients)


@dataclass(frozen=True)
class MultivariatePolynomial:
    poly: Polynomial

    def __call__(self, X):
        return self.poly.evaluate([np.asarray(X, dtype=float)])


@dataclass(frozen=True)
class CallableObjective:
    fn: Callable

    def __call__(self, X):
        return np.asarray(self.fn(np.asarray(X, dtype=float)), dtype=float)


def _to_univariate(poly: Polynomial) -> UnivariatePolynomial:
    exps = poly.exponents[0][:, 0] if len(poly.coefs) else np.zeros(0, dtype=int)
    coefs = np.zeros(int(exps.max(initial=0)) + 1)
    np.add.at(coefs, exps, poly.coefs)
    return UnivariatePolynomial(npoly.polytrim(coefs))


def induce_objective(game: ContinuousGame, i: int, others: Sequence[MixedStrategy | None]):
    """The map x -> U_i(x, p_{-i}) in the most explicit form available."""
    u = game.utilities[i]
    poly = None
    if isinstance(u, Polynomial):
        poly = u.collapse(i, others)
    elif isinstance(u, PolymatrixSum) and u.is_polynomial():
        poly = Polynomial([], [game.spaces[i].dim])
        for k, term in u.terms.items():
            poly = poly + term.collapse(0, [None, others[k]])
    if poly is not None:
        if game.spaces[i].dim == 1:
            return _to_univariate(poly)
        return MultivariatePolynomial(poly)
    return CallableObjective(lambda X: payoff_against(game, i, X, others))


def poly_gradient(poly: Polynomial, X) -> np.ndarray:
    """Analytic gradient of a one-block polynomial at the rows of ``X``."""
    X = np.asarray(X, dtype=float)
    E = poly.exponents[0]
    grad = np.zeros(X.shape)
    for j in range(X.shape[-1]):
        ej = E[:, j]
        active = ej > 0
        if not active.any():
            continue
        Ed = E[active].copy()
        Ed[:, j] -= 1
        mono = np.prod(X[..., None, :] ** Ed, axis=-1)
        grad[..., j] = mono @ (poly.coefs[active] * ej[active])
    return grad


def best_response_univariate_poly(objective, lo: float, hi: float) -> BestResponse:
    """Global maximum of a polynomial on [lo, hi] over endpoints and critical points."""
    coefs = np.asarray(getattr(objective, "coefficients", objective), dtype=float)
    coefs = npoly.polytrim(coefs) if coefs.size else np.zeros(1)
    if not lo < hi:
        if lo == hi:
            return BestResponse(np.array([lo]), float(npoly.polyval(lo, coefs)), True, "poly-exact")
        raise ValueError("empty interval")
    if len(coefs) <= 1:
        return BestResponse(np.array([lo]), float(coefs[0]), True, "poly-exact")
    d1 = npoly.polyder(coefs)
    d2 = npoly.polyder(d1)
    cands = [lo, hi]
    if len(d1) > 1:
        roots = npoly.polyroots(d1)
        scale = 1.0 + np.abs(roots)
        for r in roots[np.abs(roots.imag) <= 1e-4 * scale].real:
            if lo - 1e-9 <= r <= hi + 1e-9:
                cands.append(_refine_root(d1, d2, min(max(r, lo), hi), lo, hi))
    xs = np.array(cands)
    vals = npoly.polyval(xs, coefs)
    k = int(np.argmax(vals))
    return BestResponse(np.array([xs[k]]), float(vals[k]), True, "poly-exact")


def _refine_root(d1, d2, x, lo, hi, steps=20):
    for _ in range(steps):
        slope = npoly.polyval(x, d2)
        if slope == 0:
            break
        nx = x - npoly.polyval(x, d1) / slope
        if not lo <= nx <= hi:
            break
        if abs(nx - x) <= 1e-15 * (1 + abs(x)):
            x = nx
            break
        x = nx
    return x


def _directions(space: StrategySpace) -> np.ndarray:
    d = space.dim
    if space.kind == "simplex":
        dirs = [np.eye(d)[a] - np.eye(d)[b] for a in range(d) for b in range(d) if a != b]
        return np.array(dirs)
    eye = np.eye(d)
    return np.concatenate([eye, -eye])


def _initial_step(space: StrategySpace) -> float:
    if space.kind == "box":
        return 0.25 * float(np.max(space.upper - space.lower)) or 1.0
    if space.kind == "circle":
        return 1.0
    return 0.5


def _start_points(space, starts, rng, extra):
    pts = [sample(space, rng) for _ in range(starts)]
    pts.extend(space.vertices())
    if extra is not None:
        pts.extend(np.asarray(extra, dtype=float).reshape(-1, space.dim))
    return project(space, np.array(pts))


def _pattern_search(f, space, P, iterations):
    D = _directions(space)
    vals = f(P)
    h = np.full(len(P), _initial_step(space))
    for _ in range(iterations):
        live = h > 1e-12
        if not live.any():
            break
        idx = np.flatnonzero(live)
        cand = project(space, P[idx, None, :] + h[idx, None, None] * D[None])
        cv = f(cand.reshape(-1, space.dim)).reshape(len(idx), len(D))
        best = np.argmax(cv, axis=1)
        bv = cv[np.arange(len(idx)), best]
        up = bv > vals[idx] + 1e-15 * (1.0 + np.abs(vals[idx]))
        moved = idx[up]
        P[moved] = cand[up, best[up]]
        vals[moved] = bv[up]
        h[idx[~up]] *= 0.5
    return P, vals


def _gradient_ascent(poly, space, P, iterations):
    f = lambda X: poly.evaluate([X])
    vals = f(P)
    eta = np.full(len(P), _initial_step(space))
    for _ in range(iterations):
        live = eta > 1e-12
        if not live.any():
            break
        idx = np.flatnonzero(live)
        g = poly_gradient(poly, P[idx])
        norm = np.linalg.norm(g, axis=1, keepdims=True)
        step = g / np.maximum(norm, 1e-300)
        cand = project(space, P[idx] + eta[idx, None] * step)
        cv = f(cand)
        up = cv > vals[idx] + 1e-15 * (1.0 + np.abs(vals[idx]))
        P[idx[up]] = cand[up]
        vals[idx[up]] = cv[up]
        eta[idx[~up]] *= 0.5
    return P, vals


def best_response_multistart(objective, space: StrategySpace, starts: int = 16,
                             iterations: int = 200, rng=None, extra_starts=None) -> BestResponse:
    """Best local optimum over sampled starts, cheap extreme points and ``extra_starts``.

    Polynomial objectives use projected normalized-gradient ascent; anything
    else uses a projected compass search. Both halve their step on failure.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    P = _start_points(space, starts, rng, extra_starts)
    if isinstance(objective, MultivariatePolynomial):
        P, vals = _gradient_ascent(objective.poly, space, P, iterations)
    elif isinstance(objective, UnivariatePolynomial):
        poly = Polynomial([(c, [[e]]) for e, c in enumerate(objective.coefficients)], [1])
        P, vals = _gradient_ascent(poly, space, P, iterations)
    else:
        P, vals = _pattern_search(objective, space, P, iterations)
    k = int(np.argmax(vals))
    return BestResponse(P[k].copy(), float(vals[k]), False, "multistart")


def best_response_finite(objective, space: StrategySpace) -> BestResponse:
    vals = np.asarray(objective(space.points))
    k = int(np.argmax(vals))
    return BestResponse(np.array(space.points[k]), float(vals[k]), True, "enumeration")


def best_response(game: ContinuousGame, i: int, others: Sequence[MixedStrategy | None],
                  config: OracleConfig = OracleConfig(), atoms=None, rng=None) -> BestResponse:
    """Some best response of player ``i``; never worse than any of ``atoms``."""
    space = game.spaces[i]
    objective = induce_objective(game, i, others)
    exact_ok = isinstance(objective, UnivariatePolynomial) and space.kind == "box"
    if config.mode == "poly-exact" and not exact_ok and space.kind != "finite":
        raise ValueError(f"exact oracle needs a univariate polynomial on an interval (player {i})")

    if space.kind == "finite":
        br = best_response_finite(objective, space)
    elif exact_ok and config.mode != "multistart":
        br = best_response_univariate_poly(objective, float(space.lower[0]), float(space.upper[0]))
    else:
        if rng is None:
            rng = np.random.default_rng([config.seed, i])
        br = best_response_multistart(objective, space, config.starts, config.iterations,
                                      rng, extra_starts=atoms)

    x = project(space, br.strategy[None])[0]
    value = float(payoff_against(game, i, x[None], others)[0])
    if atoms is not None and len(atoms):
        atoms = np.asarray(atoms, dtype=float).reshape(-1, space.dim)
        atom_vals = payoff_against(game, i, atoms, others)
        k = int(np.argmax(atom_vals))
        if atom_vals[k] > value:
            x, value = atoms[k].copy(), float(atom_vals[k])
    return BestResponse(x, value, br.certified_global, br.method)
