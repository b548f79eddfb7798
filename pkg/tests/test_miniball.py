import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize

from closure.errors import DomainError
from closure.geometry import exp_map, geodesic_dist_so3, quat_from_matrix, random_rotation, rot_z, uniform_ball
from closure.miniball import megb_so3, min_enclosing_ball, relative_ratio

from oracles import miniball_bruteforce

point_sets = st.integers(3, 4).flatmap(
    lambda d: arrays(np.float64, st.tuples(st.integers(1, 25), st.just(d)), elements=st.floats(-1, 1))
)


def test_single_point():
    b = min_enclosing_ball([[0.3, -0.2, 0.5]])
    assert np.array_equal(b.center, [0.3, -0.2, 0.5]) and b.radius == 0.0


def test_two_points():
    p, q = np.array([1.0, 2.0, 3.0]), np.array([-1.0, 0.0, 2.0])
    b = min_enclosing_ball([p, q])
    assert np.allclose(b.center, (p + q) / 2, atol=1e-15)
    assert abs(b.radius - np.linalg.norm(p - q) / 2) < 1e-15


def test_regular_simplex():
    P = np.eye(4)
    b = min_enclosing_ball(P)
    assert np.allclose(b.center, 0.25, atol=1e-15)
    assert abs(b.radius - math.sqrt(0.75)) < 1e-15


def test_matches_bruteforce_r4(rng):
    for _ in range(10):
        P = rng.uniform(-1, 1, (40, 4))
        assert abs(min_enclosing_ball(P).radius - miniball_bruteforce(P)) < 1e-9


def test_cospherical_points(rng):
    # every point on the unit sphere and spanning it: ball is the unit ball
    P = rng.normal(size=(30, 3))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    P = np.vstack([P, [[0, 0, 1], [0, 0, -1]]])
    b = min_enclosing_ball(P)
    assert abs(b.radius - miniball_bruteforce(P)) < 1e-9


def test_collinear_points():
    P = np.array([[0.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0], [2.0, 0, 0]])
    b = min_enclosing_ball(P)
    assert np.allclose(b.center, [1.5, 0, 0]) and abs(b.radius - 1.5) < 1e-15


def test_errors():
    with pytest.raises(DomainError):
        min_enclosing_ball(np.zeros((0, 3)))
    with pytest.raises(DomainError):
        min_enclosing_ball([[np.nan, 0, 0]])


@settings(max_examples=100, deadline=None)
@given(point_sets)
def test_enclosure(P):
    b = min_enclosing_ball(P)
    assert np.all(np.linalg.norm(P - b.center, axis=1) <= b.radius + 1e-9)
    assert all(b.contains(p) for p in P)


@settings(max_examples=100, deadline=None)
@given(point_sets, st.randoms(use_true_random=False))
def test_permutation_and_duplicate_invariance(P, rnd):
    b = min_enclosing_ball(P)
    perm = list(range(len(P)))
    rnd.shuffle(perm)
    b2 = min_enclosing_ball(P[perm])
    assert np.array_equal(b.center, b2.center) and b.radius == b2.radius
    b3 = min_enclosing_ball(np.vstack([P, P[: len(P) // 2 + 1]]))
    assert np.array_equal(b.center, b3.center) and b.radius == b3.radius


@settings(max_examples=100, deadline=None)
@given(point_sets, st.integers(0, 2**31))
def test_subset_radius_never_exceeds_superset(P, seed):
    rng = np.random.default_rng(seed)
    mask = rng.random(len(P)) < 0.5
    if not mask.any():
        mask[0] = True
    assert min_enclosing_ball(P[mask]).radius <= min_enclosing_ball(P).radius + 1e-12


# -- SO(3) -------------------------------------------------------------------


def test_megb_single_rotation(rng):
    R = random_rotation(rng)
    g = megb_so3(R[None])
    assert geodesic_dist_so3(g.center, R) < 1e-12 and g.radius < 1e-12


def test_megb_pair_is_midpoint():
    g = megb_so3(np.stack([np.eye(3), rot_z(0.8)]))
    assert geodesic_dist_so3(g.center, rot_z(0.4)) < 1e-9
    assert abs(g.radius - 0.4) < 1e-9


def _search_center(S, C0):
    f = lambda v: float(np.max(geodesic_dist_so3((exp_map(v) @ C0)[None], S)))
    best = None
    for x0 in [np.zeros(3)] + [0.05 * np.eye(3)[k] for k in range(3)]:
        r = minimize(f, x0, method="Nelder-Mead", options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 4000})
        best = r.fun if best is None else min(best, r.fun)
    return best


def test_megb_matches_center_search(rng):
    for _ in range(3):
        C0 = random_rotation(rng)
        S = exp_map(uniform_ball(rng, 200, 0.4)) @ C0
        g = megb_so3(S)
        ref = _search_center(S, C0)
        assert abs(g.radius - ref) < 2e-3
        # an exact ball can only be smaller than what a local search finds
        assert g.radius <= ref + 1e-6


def test_megb_quaternion_input_and_sign_invariance(rng):
    C0 = random_rotation(rng)
    S = exp_map(uniform_ball(rng, 50, 0.5)) @ C0
    q = quat_from_matrix(S)
    g1 = megb_so3(S)
    g2 = megb_so3(q)
    flip = np.where(rng.random(50) < 0.5, -1.0, 1.0)
    g3 = megb_so3(q * flip[:, None])
    assert abs(g1.radius - g2.radius) < 1e-12
    assert np.max(np.abs(g2.center - g3.center)) < 1e-12 and abs(g2.radius - g3.radius) < 1e-12


def test_megb_enclosure_and_permutation(rng):
    S = exp_map(uniform_ball(rng, 80, 0.7)) @ random_rotation(rng)
    g = megb_so3(S)
    assert np.all(geodesic_dist_so3(g.center[None], S) <= g.radius + 1e-9)
    g2 = megb_so3(S[rng.permutation(80)])
    assert np.max(np.abs(g.center - g2.center)) < 1e-12 and abs(g.radius - g2.radius) < 1e-12


def test_megb_spread_error():
    with pytest.raises(DomainError, match="quarter-sphere"):
        megb_so3(np.stack([np.eye(3), rot_z(2.0), rot_z(-2.0)]))
    with pytest.raises(DomainError):
        megb_so3(np.zeros((0, 3, 3)))


def test_relative_ratio():
    assert relative_ratio(1.0, 1.0) == 1.0
    assert relative_ratio(0.0, 5.0) == 0.0
    with pytest.raises(DomainError):
        relative_ratio(1.0, 0.0)
    with pytest.raises(DomainError):
        relative_ratio(-1.0, 1.0)
