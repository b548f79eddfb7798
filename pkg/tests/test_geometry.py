import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from closure.errors import DomainError
from closure.geometry import (
    Pose,
    axis_angle,
    canonical_quat,
    chord_to_geodesic_radius,
    chordal_mean,
    exp_map,
    geodesic_dist_so3,
    geodesic_dist_so3_arccos,
    geodesic_to_chord,
    is_rotation,
    log_map,
    matmul3,
    matrix_from_quat,
    project_so3,
    quat_from_matrix,
    random_rotation,
    rot_x,
    rot_z,
    slerp,
    stereographic,
)

from oracles import quat_dist, quat_ref, rot_from_quat_ref

quats = arrays(np.float64, 4, elements=st.floats(-1, 1)).filter(lambda q: np.linalg.norm(q) > 0.1)
vecs_in_pi = arrays(np.float64, 3, elements=st.floats(-1.8, 1.8)).filter(lambda v: np.linalg.norm(v) < math.pi - 1e-3)


def test_distance_basic_values():
    assert geodesic_dist_so3(np.eye(3), np.eye(3)) == 0.0
    assert abs(geodesic_dist_so3(np.eye(3), rot_z(math.pi / 2)) - math.pi / 2) < 1e-15


def test_distance_matches_quaternion_formula(rng):
    for _ in range(200):
        a, b = random_rotation(rng), random_rotation(rng)
        expected = quat_dist(quat_ref(a), quat_ref(b))
        assert abs(geodesic_dist_so3(a, b) - expected) < 1e-9


def test_distance_matches_arccos_form_away_from_ends(rng):
    for _ in range(100):
        a, b = random_rotation(rng), random_rotation(rng)
        assert abs(geodesic_dist_so3(a, b) - geodesic_dist_so3_arccos(a, b)) < 1e-7


def test_distance_batched_equals_scalar(rng):
    A, B = random_rotation(rng, 50), random_rotation(rng, 50)
    d = geodesic_dist_so3(A, B)
    assert np.array_equal(d, [geodesic_dist_so3(a, b) for a, b in zip(A, B)])


@settings(max_examples=100, deadline=None)
@given(quats, quats)
def test_distance_symmetric_exactly(qa, qb):
    a, b = matrix_from_quat(qa), matrix_from_quat(qb)
    assert geodesic_dist_so3(a, b) == geodesic_dist_so3(b, a)


def test_triangle_inequality(rng):
    A, B, C = (random_rotation(rng, 1000) for _ in range(3))
    assert np.all(geodesic_dist_so3(A, C) <= geodesic_dist_so3(A, B) + geodesic_dist_so3(B, C) + 1e-9)


@settings(max_examples=100, deadline=None)
@given(quats, quats, quats)
def test_bi_invariance(qa, qb, qg):
    a, b, g = (matrix_from_quat(q) for q in (qa, qb, qg))
    d = geodesic_dist_so3(a, b)
    assert abs(geodesic_dist_so3(g @ a, g @ b) - d) < 1e-9
    assert abs(geodesic_dist_so3(a @ g, b @ g) - d) < 1e-9


@settings(max_examples=100, deadline=None)
@given(quats)
def test_double_cover(q):
    assert geodesic_dist_so3(matrix_from_quat(q), matrix_from_quat(-q)) < 1e-9


def test_exp_basic_values():
    assert np.array_equal(exp_map(np.zeros(3)), np.eye(3))
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.allclose(exp_map([0, 0, math.pi / 2]), expected, atol=1e-15)


def test_log_basic_values():
    assert np.array_equal(log_map(np.eye(3)), np.zeros(3))
    assert np.allclose(log_map(rot_x(0.3)), [0.3, 0.0, 0.0], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(vecs_in_pi)
def test_log_exp_round_trip(v):
    R = exp_map(v)
    assert is_rotation(R)
    assert np.max(np.abs(log_map(R) - v)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(quats)
def test_exp_log_round_trip(q):
    R = matrix_from_quat(q)
    if geodesic_dist_so3(np.eye(3), R) > math.pi - 1e-4:
        return
    assert np.max(np.abs(exp_map(log_map(R)) - R)) < 1e-9


def test_log_rejects_branch_cut():
    with pytest.raises(DomainError, match="branch cut"):
        log_map(rot_z(math.pi))


def test_exp_batched_matches_scalar(rng):
    V = rng.normal(size=(40, 3))
    assert np.array_equal(exp_map(V), np.stack([exp_map(v) for v in V]))


def test_small_angle_log_is_accurate():
    R = exp_map([1e-12, -2e-12, 3e-12])
    assert np.allclose(log_map(R), [1e-12, -2e-12, 3e-12], rtol=1e-6, atol=0)


def test_axis_angle_near_pi():
    u = np.array([1.0, 2.0, 2.0]) / 3.0
    w, g = axis_angle(exp_map(u * (math.pi - 1e-8)))
    assert abs(g - (math.pi - 1e-8)) < 1e-9
    assert np.allclose(w, u, atol=1e-7)


@settings(max_examples=200, deadline=None)
@given(quats)
def test_quaternion_round_trip(q):
    R = matrix_from_quat(q)
    q2 = quat_from_matrix(R)
    assert abs(np.linalg.norm(q2) - 1) < 1e-12
    assert np.max(np.abs(matrix_from_quat(q2) - R)) < 1e-9
    assert np.max(np.abs(R - rot_from_quat_ref(q))) < 1e-12


def test_quaternion_matches_scipy(rng):
    for R in random_rotation(rng, 100):
        q, ref = quat_from_matrix(R), quat_ref(R)
        assert min(np.max(np.abs(q - ref)), np.max(np.abs(q + ref))) < 1e-12
        assert q[0] >= 0


def test_canonical_quat_and_stereographic():
    q = np.array([-0.5, 0.5, -0.5, 0.5])
    assert np.array_equal(canonical_quat(q), -q)
    assert np.array_equal(canonical_quat([0.0, -1.0, 0.0, 0.0]), [0.0, 1.0, 0.0, 0.0])
    assert np.array_equal(stereographic(np.array([1.0, 0, 0, 0])), np.zeros(3))
    assert np.allclose(stereographic(q), stereographic(-q))


def test_project_so3_examples(rng):
    R = random_rotation(rng)
    assert np.allclose(project_so3(R), R, atol=1e-14)
    assert np.allclose(project_so3(2 * np.eye(3)), np.eye(3), atol=1e-15)
    assert np.allclose(project_so3(R @ np.diag([3.0, 2.0, 1.0])), R, atol=1e-12)


def test_project_so3_fixes_reflection(rng):
    R = random_rotation(rng)
    P = project_so3(R @ np.diag([1.0, 1.0, -0.5]))
    assert is_rotation(P)


def test_project_so3_degenerate():
    with pytest.raises(DomainError, match="degenerate projection"):
        project_so3(np.zeros((3, 3)))
    with pytest.raises(DomainError):
        project_so3(np.full((3, 3), np.nan))


def test_slerp_examples(rng):
    a, b = random_rotation(rng), random_rotation(rng)
    if geodesic_dist_so3(a, b) > 3.0:
        b = slerp(a, b, 0.5)
    assert np.allclose(slerp(a, b, 0.0), a, atol=1e-15)
    assert np.array_equal(slerp(a, b, 1.0), b)
    assert np.allclose(slerp(np.eye(3), rot_z(0.8), 0.5), rot_z(0.4), atol=1e-15)


def test_slerp_constant_speed(rng):
    a = random_rotation(rng)
    b = a @ exp_map([0.3, -0.7, 0.4])
    d = geodesic_dist_so3(a, b)
    for s in (0.1, 0.25, 0.6, 0.9):
        assert abs(geodesic_dist_so3(a, slerp(a, b, s)) - s * d) < 1e-12


def test_slerp_antipodal_raises():
    with pytest.raises(DomainError, match="antipodal"):
        slerp(np.eye(3), rot_z(math.pi), 0.5)


def test_chord_to_geodesic_examples():
    assert chord_to_geodesic_radius(0.0) == 0.0
    assert abs(chord_to_geodesic_radius(2 * math.sqrt(2)) - math.pi) < 1e-15
    with pytest.raises(DomainError):
        chord_to_geodesic_radius(3.0)
    with pytest.raises(DomainError):
        chord_to_geodesic_radius(-0.1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, math.pi - 1e-6))
def test_chord_round_trip_numeric(theta):
    # chord measured as the Frobenius norm of R_z(theta) - I
    chord = float(np.linalg.norm(rot_z(theta) - np.eye(3)))
    assert abs(chord_to_geodesic_radius(chord) - theta) < 1e-7 or theta > 3.1
    assert abs(geodesic_to_chord(theta) - chord) < 1e-12


def test_chord_round_trip_closed_form(rng):
    for th in rng.uniform(0, math.pi, 200):
        assert abs(chord_to_geodesic_radius(2 * math.sqrt(2) * math.sin(th / 2)) - th) < 1e-7 or th > 3.1
    for th in rng.uniform(0, 3.0, 200):
        assert abs(chord_to_geodesic_radius(geodesic_to_chord(th)) - th) < 1e-10


def test_chordal_mean_of_pair_is_midpoint():
    for th in (0.2, 1.0, 2.0):
        assert geodesic_dist_so3(chordal_mean(np.stack([np.eye(3), rot_z(th)])), rot_z(th / 2)) < 1e-12


def test_chordal_mean_order_independent(rng):
    S = random_rotation(rng, 30)
    perm = rng.permutation(30)
    assert np.array_equal(chordal_mean(S), chordal_mean(S[perm]))


def test_matmul3_matches_numpy(rng):
    A, B = rng.normal(size=(10, 3, 3)), rng.normal(size=(10, 3, 3))
    assert np.allclose(matmul3(A, B), A @ B, atol=1e-14)


def test_pose_is_immutable():
    p = Pose(np.eye(3), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        p.translation[0] = 5.0
    with pytest.raises(DomainError):
        Pose(np.eye(3), [np.inf, 0, 0])
