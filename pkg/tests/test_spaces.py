import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multioracle.metrics import distance_matrix
from multioracle.spaces import (
    Box, Circle, Finite, Profile, Simplex, as_point, canonicalize, contains, dirac,
    project, project_simplex, sample, wrap_angle,
)


def test_contains_examples():
    assert contains(Box([-1], [1]), [0.5], 0.0)
    assert contains(Simplex(5), [0, 1, 0, 0, 0], 0.0)
    assert not contains(Box([-1], [1]), [1.2], 0.1)
    assert contains(Box([-1], [1]), [1.05], 0.1)


def test_contains_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        as_point(Box([-1, -1], [1, 1]), [0.0])


def test_sample_box_is_deterministic():
    a = sample(Box([-1], [1]), np.random.default_rng(3))
    b = sample(Box([-1], [1]), np.random.default_rng(3))
    assert np.array_equal(a, b)
    assert -1 <= a[0] <= 1


def test_sample_simplex_and_circle_ranges():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = sample(Simplex(5), rng)
        assert x.min() >= 0 and abs(x.sum() - 1) <= 1e-12
        t = sample(Circle(), rng)
        assert -np.pi <= t[0] < np.pi


def test_canonicalize_examples():
    m = canonicalize([[0.4], [0.4]], [0.5, 0.5], Box([-1], [1]), 1e-9)
    assert m.atoms.tolist() == [[0.4]] and m.weights.tolist() == [1.0]
    m = canonicalize([[0.1], [0.9]], [0.3, 0.3], Box([-1], [1]), 1e-9)
    assert np.allclose(m.weights, [0.5, 0.5])
    with pytest.raises(ValueError):
        canonicalize([[0.1]], [0.0], Box([-1], [1]))


def test_canonicalize_merges_across_the_circle_seam():
    m = canonicalize([[-np.pi], [np.pi - 1e-10]], [0.5, 0.5], Circle(), 1e-8)
    assert len(m) == 1
    assert -np.pi <= m.atoms[0, 0] < np.pi


def test_canonicalize_rejects_negative_weights():
    with pytest.raises(ValueError):
        canonicalize([[0.1], [0.2]], [1.5, -0.5], Box([-1], [1]))


def test_mixed_strategy_is_read_only():
    m = dirac(Box([-1], [1]), 0.3)
    with pytest.raises(ValueError):
        m.weights[0] = 0.5


def test_wrap_angle_range():
    t = wrap_angle(np.array([np.pi, -np.pi, 3 * np.pi, 7.0]))
    assert np.all(t >= -np.pi) and np.all(t < np.pi)
    assert np.isclose(t[0], -np.pi)


def test_project_simplex_matches_brute_force_on_small_cases():
    # compare with a dense search over the 2-simplex
    rng = np.random.default_rng(1)
    grid = np.array([(a, b, 1 - a - b) for a in np.linspace(0, 1, 201)
                     for b in np.linspace(0, 1, 201) if a + b <= 1 + 1e-12])
    for _ in range(10):
        v = rng.normal(size=3)
        p = project_simplex(v)
        d_best = np.min(np.linalg.norm(grid - v, axis=1))
        assert np.linalg.norm(p - v) <= d_best + 1e-12
        assert p.min() >= 0 and abs(p.sum() - 1) < 1e-12


def test_profile_others_blanks_own_entry():
    sp = Box([0], [1])
    prof = Profile([dirac(sp, 0.1), dirac(sp, 0.2), dirac(sp, 0.3)])
    others = prof.others(1)
    assert others[1] is None and others[0] is prof[0]
    assert prof.replace(0, dirac(sp, 0.9))[0].atoms[0, 0] == 0.9


def test_finite_space_vertices_are_its_points():
    sp = Finite([1, 2, 3])
    assert sp.vertices().ravel().tolist() == [1, 2, 3]
    assert contains(sp, [2.0], 0.0) and not contains(sp, [2.5], 0.1)
    assert project(sp, np.array([[2.4]]))[0, 0] == 2.0


spaces = st.sampled_from([Box([-1], [1]), Box([0, -2], [1, 2]), Simplex(3), Circle()])


@settings(max_examples=200, deadline=None)
@given(space=spaces, seed=st.integers(0, 2**32 - 1))
def test_sample_always_inside(space, seed):
    x = sample(space, np.random.default_rng(seed))
    assert contains(space, x, 1e-15)
    assert np.array_equal(x, sample(space, np.random.default_rng(seed)))


@settings(max_examples=200, deadline=None)
@given(space=spaces, seed=st.integers(0, 2**32 - 1), k=st.integers(1, 6),
       tau=st.sampled_from([1e-9, 1e-3, 0.3]))
def test_canonicalize_invariants(space, seed, k, tau):
    rng = np.random.default_rng(seed)
    pts = np.array([sample(space, rng) for _ in range(k)])
    if k > 1:
        pts[1] = pts[0]  # force at least one merge
    w = rng.random(k)
    w[rng.random(k) < 0.2] = 0.0
    if w.sum() == 0:
        w[0] = 1.0
    m = canonicalize(pts, w, space, tau)
    assert abs(m.weights.sum() - 1) <= 1e-12
    assert m.weights.min() > 0
    for x in m.atoms:
        assert contains(space, x, 1e-12)
    d = distance_matrix(space, m.atoms, m.atoms)
    assert np.all(d[~np.eye(len(m), dtype=bool)] > tau)
    again = canonicalize(m.atoms, m.weights, space, tau)
    assert again == m
