"""Ground metrics, order-1 Wasserstein distance and total variation.

The Wasserstein distance between two finitely supported measures is the
optimal value of a transportation problem. It is solved here by the
transportation simplex method (north-west corner start, u-v potentials,
cycle pivots), which is exact and needs nothing beyond numpy.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .spaces import DEDUP_RADIUS, MixedStrategy, Profile, StrategySpace, as_point

__all__ = [
    "TransportPlan",
    "MetricReport",
    "WassersteinBounds",
    "TransportError",
    "ground_distance",
    "distance_matrix",
    "transport",
    "wasserstein",
    "total_variation",
    "wasserstein_bounds",
    "profile_distance",
    "metric_report",
]

REDUCED_COST_TOL = 1e-9


class TransportError(RuntimeError):
    pass


def ground_distance(space: StrategySpace, x, y) -> float:
    x = as_point(space, x)
    y = as_point(space, y)
    return float(distance_matrix(space, x[None], y[None])[0, 0])


def distance_matrix(space: StrategySpace, xs, ys) -> np.ndarray:
    """Pairwise ground distances between the rows of ``xs`` and ``ys``."""
    xs = np.asarray(xs, dtype=float).reshape(-1, space.dim)
    ys = np.asarray(ys, dtype=float).reshape(-1, space.dim)
    if space.kind == "circle" and space.metric == "arc":
        d = np.abs(xs[:, None, 0] - ys[None, :, 0]) % (2 * np.pi)
        return np.minimum(d, 2 * np.pi - d)
    return np.linalg.norm(xs[:, None, :] - ys[None, :, :], axis=2)


@dataclass(frozen=True)
class TransportPlan:
    """Coupling of two measures, stored sparsely as {(source, target): mass}."""

    entries: dict
    shape: tuple

    def dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for (i, j), m in self.entries.items():
            out[i, j] = m
        return out

    def cost(self, costs) -> float:
        costs = np.asarray(costs)
        return float(sum(m * costs[i, j] for (i, j), m in self.entries.items()))


def _northwest_corner(a, b):
    m, n = len(a), len(b)
    a, b = a.copy(), b.copy()
    x = np.zeros((m, n))
    basis = []
    i = j = 0
    while True:
        basis.append((i, j))
        if i == m - 1 and j == n - 1:
            x[i, j] = max(a[i], 0.0)
            break
        if j == n - 1 or (i < m - 1 and a[i] <= b[j]):
            q = max(a[i], 0.0)
            x[i, j] = q
            b[j] -= q
            a[i] = 0.0
            i += 1
        else:
            q = max(b[j], 0.0)
            x[i, j] = q
            a[i] -= q
            b[j] = 0.0
            j += 1
    return x, basis


def _potentials(costs, basis, m, n):
    adj = [[] for _ in range(m + n)]
    for i, j in basis:
        adj[i].append(m + j)
        adj[m + j].append(i)
    pot = np.full(m + n, np.nan)
    pot[0] = 0.0
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nb in adj[node]:
            if np.isnan(pot[nb]):
                i, j = (node, nb - m) if node < m else (nb, node - m)
                pot[nb] = costs[i, j] - pot[node]
                queue.append(nb)
    return pot[:m], pot[m:], adj


def _tree_path(adj, start, goal):
    prev = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nb in adj[node]:
            if nb not in prev:
                prev[nb] = node
                queue.append(nb)
    path = [goal]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def transport(a, b, costs, max_pivots: int | None = None):
    """Minimum-cost transportation between supplies ``a`` and demands ``b``.

    Returns ``(value, plan)`` where ``plan`` is the dense optimal coupling.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    costs = np.asarray(costs, dtype=float)
    m, n = len(a), len(b)
    if costs.shape != (m, n):
        raise ValueError(f"cost matrix shape {costs.shape} does not match ({m}, {n})")
    if abs(a.sum() - b.sum()) > 1e-9:
        raise ValueError("supplies and demands have different total mass")
    x, basis = _northwest_corner(a, b)
    in_basis = np.zeros((m, n), dtype=bool)
    for cell in basis:
        in_basis[cell] = True
    scale = max(1.0, float(np.abs(costs).max(initial=0.0)))
    if max_pivots is None:
        max_pivots = 50 * (m + n) * (m + n)
    bland_after = 10 * (m + n)

    for it in range(max_pivots + 1):
        u, v, adj = _potentials(costs, basis, m, n)
        reduced = costs - u[:, None] - v[None, :]
        reduced[in_basis] = 0.0
        negative = reduced < -REDUCED_COST_TOL * scale
        if not negative.any():
            return float((costs * x).sum()), x
        if it == max_pivots:
            break
        if it < bland_after:
            r, c = np.unravel_index(np.argmin(reduced), reduced.shape)
        else:
            # Bland's rule guards against cycling on degenerate bases.
            r, c = np.argwhere(negative)[0]
        path = _tree_path(adj, int(r), m + int(c))
        cells = [(r, c)]
        for p, q in zip(path[:-1], path[1:]):
            cells.append((p, q - m) if p < m else (q, p - m))
        minus = cells[1::2]
        theta = min(x[cell] for cell in minus)
        leaving = next(cell for cell in minus if x[cell] == theta)
        for k, cell in enumerate(cells):
            x[cell] += theta if k % 2 == 0 else -theta
        x[leaving] = 0.0
        x[x < 0] = 0.0
        basis.remove(tuple(int(t) for t in leaving))
        in_basis[leaving] = False
        basis.append((int(r), int(c)))
        in_basis[r, c] = True
    raise TransportError(f"transportation simplex did not converge in {max_pivots} pivots")


def _check_same_space(p: MixedStrategy, q: MixedStrategy, space):
    if space is None:
        if p.space != q.space:
            raise ValueError(f"measures live in different spaces: {p.space!r} and {q.space!r}")
        space = p.space
    if p.atoms.shape[1] != space.dim or q.atoms.shape[1] != space.dim:
        raise ValueError("measures do not live in the given space")
    return space


def wasserstein(p: MixedStrategy, q: MixedStrategy,
                space: StrategySpace | None = None) -> tuple[float, TransportPlan]:
    space = _check_same_space(p, q, space)
    costs = distance_matrix(space, p.atoms, q.atoms)
    value, x = transport(p.weights, q.weights, costs)
    entries = {(int(i), int(j)): float(x[i, j]) for i, j in zip(*np.nonzero(x > 0))}
    return value, TransportPlan(entries, x.shape)


def _merged_masses(p: MixedStrategy, q: MixedStrategy, space, tau):
    pts: list[np.ndarray] = []
    mass_p: list[float] = []
    mass_q: list[float] = []

    def slot(x):
        if pts:
            d = distance_matrix(space, np.array(pts), x[None])[:, 0]
            k = int(np.argmin(d))
            if d[k] <= tau:
                return k
        pts.append(x)
        mass_p.append(0.0)
        mass_q.append(0.0)
        return len(pts) - 1

    for x, w in p:
        mass_p[slot(x)] += w
    for x, w in q:
        mass_q[slot(x)] += w
    return np.array(pts), np.array(mass_p), np.array(mass_q)


def total_variation(p: MixedStrategy, q: MixedStrategy,
                    space: StrategySpace | None = None, tau: float = DEDUP_RADIUS) -> float:
    space = _check_same_space(p, q, space)
    _, mp, mq = _merged_masses(p, q, space, tau)
    return float(min(1.0, 0.5 * np.abs(mp - mq).sum()))


class WassersteinBounds(NamedTuple):
    lower: float
    upper: float
    d_min_defined: bool


def wasserstein_bounds(p: MixedStrategy, q: MixedStrategy,
                       space: StrategySpace | None = None,
                       tau: float = DEDUP_RADIUS) -> WassersteinBounds:
    """Total-variation sandwich ``d_min * tv <= W1 <= d_max * tv``."""
    space = _check_same_space(p, q, space)
    pts, mp, mq = _merged_masses(p, q, space, tau)
    if len(pts) < 2:
        return WassersteinBounds(0.0, 0.0, False)
    tv = min(1.0, 0.5 * np.abs(mp - mq).sum())
    d = distance_matrix(space, pts, pts)
    off = d[~np.eye(len(pts), dtype=bool)]
    return WassersteinBounds(float(off.min() * tv), float(d.max() * tv), True)


def profile_distance(a: Profile, b: Profile, spaces: Sequence[StrategySpace] | None = None) -> float:
    """Max over players of the per-player Wasserstein distance."""
    if len(a) != len(b):
        raise ValueError("profiles have different player counts")
    spaces = spaces or [s.space for s in a]
    return max(wasserstein(pa, pb, sp)[0] for pa, pb, sp in zip(a, b, spaces))


@dataclass(frozen=True)
class MetricReport:
    wasserstein: float
    total_variation: float
    lower_bound: float
    upper_bound: float
    d_min_defined: bool
    plan: TransportPlan


def metric_report(p: MixedStrategy, q: MixedStrategy,
                  space: StrategySpace | None = None) -> MetricReport:
    w, plan = wasserstein(p, q, space)
    bounds = wasserstein_bounds(p, q, space)
    return MetricReport(w, total_variation(p, q, space), bounds.lower, bounds.upper,
                        bounds.d_min_defined, plan)
