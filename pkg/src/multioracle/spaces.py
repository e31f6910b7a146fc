"""Strategy spaces, finitely supported mixed strategies and profiles.

Pure strategies are plain 1-d float arrays whose length is the dimension of
the space they live in. Mixed strategies store their atoms as a 2-d array
(one row per atom) with a matching weight vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "DEDUP_RADIUS",
    "SIMPLEX_SUM_TOL",
    "StrategySpace",
    "Box",
    "Simplex",
    "Circle",
    "Finite",
    "MixedStrategy",
    "Profile",
    "as_point",
    "contains",
    "sample",
    "project",
    "project_simplex",
    "wrap_angle",
    "canonicalize",
    "dirac",
]

DEDUP_RADIUS = 1e-8
SIMPLEX_SUM_TOL = 1e-9

_KINDS = ("box", "simplex", "circle", "finite")


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StrategySpace:
    """A compact strategy set.

    ``kind`` is one of ``box``, ``simplex``, ``circle`` or ``finite``. A
    finite space is an explicit list of points (one row each); it is how
    finite games are run through the continuous pipeline.
    """

    kind: str
    dim: int
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    points: np.ndarray | None = None
    metric: str = "euclidean"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.metric not in ("euclidean", "arc"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == "arc" and self.kind != "circle":
            raise ValueError("arc metric is only defined on the circle")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")

    def __eq__(self, other):
        if not isinstance(other, StrategySpace):
            return NotImplemented
        if (self.kind, self.dim, self.metric) != (other.kind, other.dim, other.metric):
            return False
        for a, b in ((self.lower, other.lower), (self.upper, other.upper),
                     (self.points, other.points)):
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True

    def __hash__(self):
        return hash((self.kind, self.dim, self.metric))

    def __repr__(self):
        if self.kind == "box":
            return f"Box({self.lower.tolist()}, {self.upper.tolist()})"
        if self.kind == "simplex":
            return f"Simplex({self.dim})"
        if self.kind == "circle":
            return f"Circle(metric={self.metric!r})"
        return f"Finite({len(self.points)} points, dim={self.dim})"

    def vertices(self) -> np.ndarray:
        """Extreme points that are cheap to enumerate (used as oracle starts)."""
        if self.kind == "simplex":
            return np.eye(self.dim)
        if self.kind == "box" and self.dim <= 4:
            grids = np.meshgrid(*zip(self.lower, self.upper), indexing="ij")
            return np.stack([g.ravel() for g in grids], axis=1)
        if self.kind == "finite":
            return np.array(self.points)
        return np.empty((0, self.dim))


def Box(lower, upper) -> StrategySpace:
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("box bounds must be vectors of equal length")
    if np.any(lower > upper):
        raise ValueError("box lower bound exceeds upper bound")
    return StrategySpace("box", len(lower), _frozen(lower), _frozen(upper))


def Simplex(dim: int) -> StrategySpace:
    return StrategySpace("simplex", int(dim))


def Circle(metric: str = "arc") -> StrategySpace:
    return StrategySpace("circle", 1, metric=metric)


def Finite(points) -> StrategySpace:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("finite space needs a nonempty list of points")
    return StrategySpace("finite", pts.shape[1], points=_frozen(pts))


def wrap_angle(theta):
    """Map angles to the canonical range [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=float) + np.pi, 2 * np.pi) - np.pi


def as_point(space: StrategySpace, x) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (space.dim,):
        raise ValueError(
            f"point of dimension {arr.size} does not match space of dimension {space.dim}")
    return arr


def contains(space: StrategySpace, x, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    x = as_point(space, x)
    if not np.all(np.isfinite(x)):
        return False
    if space.kind == "box":
        return bool(np.all(x >= space.lower - tol) and np.all(x <= space.upper + tol))
    if space.kind == "simplex":
        return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= max(tol, SIMPLEX_SUM_TOL))
    if space.kind == "circle":
        return True
    d = np.linalg.norm(space.points - x, axis=1)
    return bool(d.min() <= tol)


def sample(space: StrategySpace, rng: np.random.Generator) -> np.ndarray:
    if space.kind == "box":
        return space.lower + (space.upper - space.lower) * rng.random(space.dim)
    if space.kind == "simplex":
        return rng.dirichlet(np.ones(space.dim))
    if space.kind == "circle":
        return np.array([-np.pi + 2 * np.pi * rng.random()])
    return np.array(space.points[rng.integers(len(space.points))])


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of the rows of ``v`` onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    flat = v.reshape(-1, v.shape[-1])
    u = -np.sort(-flat, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, flat.shape[1] + 1)
    rho = np.count_nonzero(u - css / k > 0, axis=1)
    theta = css[np.arange(len(flat)), rho - 1] / rho
    return np.maximum(flat - theta[:, None], 0.0).reshape(v.shape)


def project(space: StrategySpace, x) -> np.ndarray:
    """Nearest point of the space (rows of a 2-d array are projected independently)."""
    x = np.asarray(x, dtype=float)
    if space.kind == "box":
        return np.clip(x, space.lower, space.upper)
    if space.kind == "simplex":
        return project_simplex(x)
    if space.kind == "circle":
        return wrap_angle(x)
    flat = x.reshape(-1, space.dim)
    d = np.linalg.norm(flat[:, None, :] - space.points[None, :, :], axis=2)
    return space.points[np.argmin(d, axis=1)].reshape(x.shape)


def _distance(space: StrategySpace, x: np.ndarray, y: np.ndarray) -> float:
    if space.kind == "circle" and space.metric == "arc":
        d = abs(float(x[0] - y[0])) % (2 * np.pi)
        return min(d, 2 * np.pi - d)
    return float(np.linalg.norm(x - y))


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    """Finitely supported probability measure over one strategy space.

    Build instances with :func:`canonicalize` (or :func:`dirac`); the
    constructor itself does not merge or renormalize.
    """

    atoms: np.ndarray
    weights: np.ndarray
    space: StrategySpace = field(repr=False)

    def __len__(self):
        return len(self.weights)

    def __iter__(self) -> Iterator[tuple[np.ndarray, float]]:
        return iter(zip(self.atoms, self.weights))

    def __eq__(self, other):
        if not isinstance(other, MixedStrategy):
            return NotImplemented
        return (self.space == other.space
                and np.array_equal(self.atoms, other.atoms)
                and np.array_equal(self.weights, other.weights))

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms


def dirac(space: StrategySpace, x) -> MixedStrategy:
    return canonicalize([as_point(space, x)], [1.0], space)


def canonicalize(atoms, weights, space: StrategySpace, tau: float = DEDUP_RADIUS) -> MixedStrategy:
    """Drop zero weights, merge atoms closer than ``tau`` and renormalize.

    Merged atoms sit at their weight-averaged position, projected back onto
    the space. The result is a fixed point: canonicalizing it again returns an
    identical strategy.
    """
    w = np.asarray(weights, dtype=float).ravel()
    pts = np.asarray(atoms, dtype=float).reshape(len(w), space.dim) if len(w) else None
    if len(w) == 0:
        raise ValueError("mixed strategy has an empty support")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    keep = w > 0
    if not keep.any():
        raise ValueError("mixed strategy has an empty support (all weights are zero)")
    pts, w = pts[keep], w[keep]

    while True:
        merged_pts, merged_w, changed = _merge_once(pts, w, space, tau)
        pts, w = merged_pts, merged_w
        if not changed:
            break

    for k, x in enumerate(pts):
        if not contains(space, x, 0.0):
            pts[k] = project(space, x)

    total = w.sum()
    if abs(total - 1.0) > 1e-15:
        w = w / total
    return MixedStrategy(_frozen(pts), _frozen(w), space)


def _merge_once(pts, w, space, tau):
    reps: list[np.ndarray] = []
    groups: list[list[int]] = []
    for k, x in enumerate(pts):
        for g, r in enumerate(reps):
            if _distance(space, r, x) <= tau:
                groups[g].append(k)
                break
        else:
            reps.append(x)
            groups.append([k])
    if all(len(g) == 1 for g in groups):
        return pts.copy(), w.copy(), False
    new_pts = np.empty((len(groups), space.dim))
    new_w = np.empty(len(groups))
    for g, members in enumerate(groups):
        ww = w[members]
        new_w[g] = ww.sum()
        if len(members) == 1:
            new_pts[g] = pts[members[0]]
            continue
        base = pts[members[0]]
        offsets = pts[members] - base
        if space.kind == "circle":
            offsets = wrap_angle(offsets)
        new_pts[g] = project(space, base + (ww @ offsets) / ww.sum())
    return new_pts, new_w, True


@dataclass(frozen=True)
class Profile:
    """One mixed strategy per player."""

    strategies: tuple[MixedStrategy, ...]

    def __init__(self, strategies: Sequence[MixedStrategy]):
        object.__setattr__(self, "strategies", tuple(strategies))

    def __len__(self):
        return len(self.strategies)

    def __getitem__(self, i) -> MixedStrategy:
        return self.strategies[i]

    def __iter__(self):
        return iter(self.strategies)

    def others(self, i: int) -> list[MixedStrategy | None]:
        """Strategies with player ``i``'s entry blanked out (the p_{-i} view)."""
        return [None if k == i else s for k, s in enumerate(self.strategies)]

    def replace(self, i: int, strategy: MixedStrategy) -> "Profile":
        s = list(self.strategies)
        s[i] = strategy
        return Profile(s)
