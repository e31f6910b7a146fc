"""Example games and random game generators."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .game import BlackBox, ContinuousGame, Polynomial, PolymatrixSum
from .spaces import Box, Circle, Finite, Simplex

__all__ = [
    "EXAMPLES",
    "REPORTED_PAYOFFS",
    "BUILTINS",
    "builtin",
    "example_game",
    "GeneratorSpec",
    "random_zero_sum_polymatrix",
    "random_polynomial_game",
    "random_finite_game",
]


def _poly2(terms):
    """Polynomial in two scalar blocks from (coef, a, b) meaning coef * x^a * y^b."""
    return Polynomial([(c, [[a], [b]]) for c, a, b in terms], [1, 1])


# builtin black-box utilities, keyed by name; each factory takes the params dict

def _torus(params):
    i = int(params["player"])
    phi = float(params["phi"])
    alpha = float(params["alpha"])

    def fn(xs):
        own, other = xs[i][..., 0], xs[1 - i][..., 0]
        return alpha * np.cos(own - phi) - np.cos(own - other)

    return fn


def _blotto(params):
    sign = float(params.get("sign", 1.0))

    def fn(xs):
        d = xs[0] - xs[1]
        return sign * np.sum(np.sign(d) * d * d, axis=-1)

    return fn


def _table(params):
    table = np.asarray(params["payoffs"], dtype=float)
    base = int(params.get("base", 1))

    def fn(xs):
        idx = tuple(np.rint(x[..., 0]).astype(int) - base for x in xs)
        return table[idx]

    return fn


BUILTINS = {"torus": _torus, "blotto": _blotto, "table": _table}


def builtin(name: str, **params) -> BlackBox:
    if name not in BUILTINS:
        raise ValueError(f"unknown builtin utility {name!r}")
    return BlackBox(BUILTINS[name](params), name=name, params=params)


def _example1():
    u = _poly2([(2, 1, 2), (-1, 2, 0), (-1, 0, 1)])
    return ContinuousGame([Box([-1], [1])] * 2, [u, -u], zero_sum=True,
                          name="zero-sum polynomial")


def _example2():
    u1 = _poly2([(-3, 2, 2), (-2, 3, 0), (3, 0, 3), (2, 1, 1), (-1, 1, 0)])
    u2 = _poly2([(2, 2, 2), (1, 2, 1), (-4, 0, 3), (-1, 2, 0), (4, 0, 1)])
    return ContinuousGame([Box([-1], [1])] * 2, [u1, u2], name="general-sum polynomial")


def _example3():
    phi = (0.0, np.pi / 8)
    alpha = (1.0, 1.5)
    utils = [builtin("torus", player=i, phi=phi[i], alpha=alpha[i]) for i in range(2)]
    return ContinuousGame([Circle(), Circle()], utils, name="torus")


def _example4():
    utils = [builtin("blotto", sign=1.0), builtin("blotto", sign=-1.0)]
    return ContinuousGame([Simplex(5), Simplex(5)], utils, zero_sum=True, name="general blotto")


def _example5():
    # terms are (coef, own power, other power)
    u12 = _poly2([(-2, 1, 2), (5, 1, 1), (-1, 0, 1)])
    u13 = _poly2([(-2, 2, 0), (-4, 1, 1), (-2, 0, 1)])
    u21 = _poly2([(2, 2, 1), (-2, 0, 2), (-5, 1, 1), (1, 1, 0)])
    u23 = _poly2([(-2, 1, 2), (-2, 2, 0), (5, 1, 1)])
    u31 = _poly2([(4, 0, 2), (4, 1, 1), (2, 1, 0)])
    u32 = _poly2([(2, 2, 1), (2, 0, 2), (-5, 1, 1)])
    utils = [PolymatrixSum(0, {1: u12, 2: u13}),
             PolymatrixSum(1, {0: u21, 2: u23}),
             PolymatrixSum(2, {0: u31, 1: u32})]
    return ContinuousGame([Box([-1], [1])] * 3, utils, zero_sum=True,
                          name="three-player polynomial network")


EXAMPLES = {1: _example1, 2: _example2, 3: _example3, 4: _example4, 5: _example5}

# equilibrium payoffs published for the example games, used as reference values
REPORTED_PAYOFFS = {
    1: (-0.47, 0.47),
    2: (1.13, 1.81),
    3: (0.32, 1.29),
    4: (0.0, 0.0),
    5: (-1.23, 0.26, 0.97),
}


def example_game(game_id: int) -> ContinuousGame:
    try:
        return EXAMPLES[int(game_id)]()
    except KeyError:
        raise ValueError(f"no example game {game_id!r}; choose from {sorted(EXAMPLES)}") from None


def _complete_edges(players):
    return list(itertools.combinations(range(players), 2))


def random_zero_sum_polymatrix(players: int = 3, actions: int | None = 20, degree: int | None = None,
                               edges=None, monomials: int = 3, seed: int = 0,
                               rng: np.random.Generator | None = None) -> ContinuousGame:
    """Random globally zero-sum network game.

    With ``actions`` set, each edge gets a Gaussian payoff matrix ``A`` and the
    pair of bilateral utilities ``(A, -A.T)`` over finite action sets
    {1, ..., actions}. With ``degree`` set instead, each edge gets
    ``monomials`` random monomials on [-1, 1]^2 and the negated transpose.
    """
    if players < 2:
        raise ValueError("need at least two players")
    if (actions is None) == (degree is None):
        raise ValueError("set exactly one of actions (finite) or degree (polynomial)")
    rng = rng if rng is not None else np.random.default_rng(seed)
    edges = _complete_edges(players) if edges is None else [tuple(e) for e in edges]
    terms: list[dict] = [{} for _ in range(players)]
    if actions is not None:
        for i, k in edges:
            A = rng.standard_normal((actions, actions))
            terms[i][k] = builtin("table", payoffs=A.tolist())
            terms[k][i] = builtin("table", payoffs=(-A.T).tolist())
        spaces = [Finite(np.arange(1, actions + 1))] * players
        name = f"random polymatrix {players}x{actions}"
    else:
        if degree < 1:
            raise ValueError("degree must be >= 1")
        pairs = [(a, b) for a in range(degree + 1) for b in range(degree + 1) if 1 <= a + b <= degree]
        for i, k in edges:
            chosen = rng.choice(len(pairs), size=monomials, replace=False)
            mono = [(float(rng.standard_normal()), *pairs[c]) for c in chosen]
            terms[i][k] = _poly2(mono)
            terms[k][i] = _poly2([(-c, b, a) for c, a, b in mono])
        spaces = [Box([-1], [1])] * players
        name = f"random polynomial network {players}p deg{degree}"
    utils = [PolymatrixSum(i, terms[i]) for i in range(players)]
    return ContinuousGame(spaces, utils, zero_sum=True, name=name)


def _exponent_vectors(nvars, degree):
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), total):
            e = np.zeros(nvars, dtype=int)
            for v in combo:
                e[v] += 1
            out.append(e)
    return np.array(out)


def random_polynomial_game(players: int = 2, degree: int = 4, dim: int = 1,
                           monomials: int | None = None, seed: int = 0,
                           rng: np.random.Generator | None = None) -> ContinuousGame:
    """General-sum game with random polynomial payoffs on [0, 1]^dim.

    Every utility has i.i.d. standard normal coefficients on all monomials of
    total degree <= ``degree`` (or on a random subset of ``monomials`` of them).
    """
    if players < 2 or degree < 1:
        raise ValueError("need players >= 2 and degree >= 1")
    rng = rng if rng is not None else np.random.default_rng(seed)
    E = _exponent_vectors(players * dim, degree)
    dims = [dim] * players
    utils = []
    for _ in range(players):
        rows = E if monomials is None else E[rng.choice(len(E), size=min(monomials, len(E)), replace=False)]
        coefs = rng.standard_normal(len(rows))
        blocks = [rows[:, p * dim:(p + 1) * dim] for p in range(players)]
        utils.append(Polynomial.from_arrays(coefs, blocks, dims))
    spaces = [Box(np.zeros(dim), np.ones(dim))] * players
    return ContinuousGame(spaces, utils, name=f"random polynomial {players}p deg{degree} dim{dim}")


def random_finite_game(actions, seed: int = 0, rng: np.random.Generator | None = None) -> ContinuousGame:
    """General-sum finite game with Gaussian payoff tables over {1, ..., m_i}."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    shape = tuple(int(a) for a in actions)
    utils = [builtin("table", payoffs=rng.standard_normal(shape).tolist()) for _ in shape]
    spaces = [Finite(np.arange(1, m + 1)) for m in shape]
    return ContinuousGame(spaces, utils, name=f"random finite {'x'.join(map(str, shape))}")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    players: int
    seed: int = 0
    actions: int | None = None
    degree: int | None = None
    dim: int = 1
    monomials: int | None = None
    edges: tuple | None = field(default=None)

    def __post_init__(self):
        if self.kind not in ("polymatrix", "polynomial"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.players < 2:
            raise ValueError("players must be >= 2")
        if self.degree is not None and self.degree < 1:
            raise ValueError("degree must be >= 1")

    def build(self, rng: np.random.Generator | None = None) -> ContinuousGame:
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        if self.kind == "polymatrix":
            return random_zero_sum_polymatrix(self.players, self.actions, self.degree, self.edges,
                                              self.monomials or 3, rng=rng)
        return random_polynomial_game(self.players, self.degree or 4, self.dim, self.monomials, rng=rng)
