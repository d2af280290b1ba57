import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehcmm.errors import InvalidInputError
from ehcmm.se3 import (
    AxisAngle,
    RigidTransform,
    Twist,
    compose,
    exp_so3,
    inverse,
    log_so3,
    psi,
    rodrigues,
    rot_z,
    rotation_angle,
    skew,
    slerp_rotation,
    vee,
)

from oracles import rodrigues_series, rotation_log_angle

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def test_rodrigues_matches_power_series():
    rng = np.random.default_rng(1)
    for _ in range(200):
        k = rng.normal(size=3)
        k /= np.linalg.norm(k)
        a = rng.uniform(-math.pi, math.pi)
        assert np.allclose(rodrigues(AxisAngle(k, a)), rodrigues_series(k, a), atol=1e-12)


def test_rodrigues_rejects_non_unit_axis():
    with pytest.raises(InvalidInputError):
        rodrigues(AxisAngle([0.0, 0.0, 2.0], 0.3))


def test_quarter_turn_about_z():
    R = rodrigues(AxisAngle([0.0, 0.0, 1.0], math.pi / 2))
    assert np.allclose(R @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-15)


def test_log_angle_matches_trace_formula():
    rng = np.random.default_rng(2)
    for _ in range(200):
        R = random_rotation(rng)
        assert abs(np.linalg.norm(log_so3(R)) - rotation_log_angle(R)) < 1e-9


def test_log_exp_roundtrip_including_pi():
    rng = np.random.default_rng(3)
    for _ in range(200):
        R = random_rotation(rng)
        assert np.allclose(exp_so3(log_so3(R)), R, atol=1e-9)
    for axis in ([1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0] / np.sqrt(2)):
        R = rodrigues(AxisAngle(np.array(axis), math.pi))
        assert np.allclose(exp_so3(log_so3(R)), R, atol=1e-9)
        assert abs(np.linalg.norm(log_so3(R)) - math.pi) < 1e-9


def test_near_pi_branch_is_continuous():
    k = np.array([0.3, -0.4, 0.866])
    k /= np.linalg.norm(k)
    for eps in (1e-3, 1e-5, 1e-7, 1e-9):
        R = rodrigues(AxisAngle(k, math.pi - eps))
        assert abs(np.linalg.norm(log_so3(R)) - (math.pi - eps)) < 1e-6
        assert np.allclose(exp_so3(log_so3(R)), R, atol=1e-8)


def test_skew_vee():
    v = np.array([0.1, -2.0, 3.0])
    w = np.array([1.0, 0.5, -0.2])
    assert np.allclose(skew(v) @ w, np.cross(v, w))
    assert np.allclose(vee(skew(v)), v)


def test_compose_and_inverse():
    rng = np.random.default_rng(4)
    for _ in range(50):
        A = RigidTransform(random_rotation(rng), rng.normal(size=3))
        B = RigidTransform(random_rotation(rng), rng.normal(size=3))
        assert np.allclose((A @ B).matrix, A.matrix @ B.matrix, atol=1e-12)
        assert np.allclose(compose(A, inverse(A)).matrix, np.eye(4), atol=1e-12)


def test_psi_decoupled_translation():
    T = RigidTransform(np.eye(3), [0.2, 0.0, 0.0])
    tw = psi(T)
    assert np.allclose(tw.linear, [0.2, 0, 0]) and np.allclose(tw.angular, 0)


def test_twist_vector_roundtrip():
    v = np.arange(6.0)
    assert np.allclose(Twist.from_vector(v).as_vector(), v)


def test_from_matrix_validates_shape():
    with pytest.raises(InvalidInputError):
        RigidTransform.from_matrix(np.eye(3))


def test_slerp_endpoints_and_midpoint():
    R0 = np.eye(3)
    R1 = rot_z(math.radians(60))
    assert np.allclose(slerp_rotation(R0, R1, 0.0), R0)
    assert np.allclose(slerp_rotation(R0, R1, 1.0), R1)
    assert np.allclose(slerp_rotation(R0, R1, 0.5), rot_z(math.radians(30)), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(vec3)
def test_exp_is_rotation(rv):
    R = exp_so3(rv)
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(R) - 1.0) < 1e-12


@settings(max_examples=200, deadline=None)
@given(vec3)
def test_log_inverts_exp_inside_pi(rv):
    n = np.linalg.norm(rv)
    if n >= math.pi - 1e-6:
        rv = rv / n * (math.pi - 1e-3)
    assert np.allclose(log_so3(exp_so3(rv)), rv, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(vec3, vec3)
def test_rotation_angle_of_relative_is_symmetric(a, b):
    Ra, Rb = exp_so3(a), exp_so3(b)
    assert abs(rotation_angle(Ra.T @ Rb) - rotation_angle(Rb.T @ Ra)) < 1e-9
