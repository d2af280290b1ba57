import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehcmm.errors import InvalidInputError
from ehcmm.mpbs import (
    approach_pose,
    blend,
    in_frustum,
    monitoring_pose,
    pointing_rotation,
    servo_target,
)
from ehcmm.se3 import RigidTransform, exp_so3, rot_z, rotation_angle

from oracles import point_in_pyramid


def _random_rotation(rng):
    v = rng.normal(size=3)
    return exp_so3(v / np.linalg.norm(v) * rng.uniform(0, math.pi))


def _random_pose(rng):
    return RigidTransform(_random_rotation(rng), rng.uniform(-2, 2, 3))


def test_aligned_target_gives_identity():
    T = monitoring_pose([0, 0, 0], [0, 0, 2.0])
    assert np.array_equal(T.rotation, np.eye(3))
    assert np.array_equal(T.translation, np.zeros(3))


def test_quarter_turn_maps_z_onto_x():
    T = monitoring_pose([0, 0, 0], [1.0, 0, 0])
    assert np.allclose(T.rotation[:, 2], [1, 0, 0], atol=1e-12)
    # axis z x x = +y, angle pi/2
    ry = np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0.0]])
    assert np.allclose(T.rotation, ry, atol=1e-12)


def test_pointing_is_exact_on_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(500):
        R = _random_rotation(rng)
        p, t = rng.normal(size=3), rng.normal(size=3)
        T = monitoring_pose(p, t, R)
        d = (t - p) / np.linalg.norm(t - p)
        assert abs(T.rotation[:, 2] @ d - 1.0) < 1e-9
        assert np.allclose(T.rotation.T @ T.rotation, np.eye(3), atol=1e-12)


def test_pointing_rotation_is_minimal():
    rng = np.random.default_rng(1)
    for _ in range(200):
        z = rng.normal(size=3)
        z /= np.linalg.norm(z)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        R = pointing_rotation(z, d)
        assert rotation_angle(R) == pytest.approx(math.acos(np.clip(z @ d, -1, 1)), abs=1e-9)
        # the rotation axis is orthogonal to both vectors
        assert np.allclose(R @ np.cross(z, d), np.cross(z, d), atol=1e-9)


def test_antiparallel_is_deterministic_half_turn():
    R1 = pointing_rotation([0, 0, 1.0], [0, 0, -1.0])
    R2 = pointing_rotation([0, 0, 1.0], [0, 0, -1.0])
    assert np.array_equal(R1, R2)
    assert np.allclose(R1 @ [0, 0, 1.0], [0, 0, -1.0], atol=1e-12)
    # x preference: the half-turn is about world x
    assert np.allclose(R1 @ [1.0, 0, 0], [1.0, 0, 0], atol=1e-12)
    # z already along x: fall back to y
    R3 = pointing_rotation([1.0, 0, 0], [-1.0, 0, 0])
    assert np.allclose(R3 @ [0, 1.0, 0], [0, 1.0, 0], atol=1e-12)


def test_coincident_points_rejected():
    with pytest.raises(InvalidInputError):
        monitoring_pose([1, 2, 3], [1, 2, 3])


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 2**31 - 1))
def test_monitoring_rotation_independent_of_distance(scale, seed):
    rng = np.random.default_rng(seed)
    R = _random_rotation(rng)
    p = rng.normal(size=3)
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    a = monitoring_pose(p, p + u, R).rotation
    b = monitoring_pose(p, p + scale * u, R).rotation
    assert np.allclose(a, b, atol=1e-12)


def test_blend_endpoints_exact():
    rng = np.random.default_rng(2)
    g, m = _random_pose(rng), _random_pose(rng)
    assert blend(g, m, 1.0) is g
    assert blend(g, m, 0.0) is m


def test_blend_geodesic_midpoint():
    g = RigidTransform(rot_z(math.radians(60)), [1.0, 0, 0])
    m = RigidTransform(np.eye(3), [0, 0, 0])
    b = blend(g, m, 0.5)
    assert np.allclose(b.rotation, rot_z(math.radians(30)), atol=1e-12)
    assert np.allclose(b.translation, [0.5, 0, 0])


def test_blend_rejects_out_of_range():
    g = RigidTransform.identity()
    with pytest.raises(InvalidInputError):
        blend(g, g, 1.5)
    with pytest.raises(InvalidInputError):
        blend(g, g, -0.1)


def test_blend_orthonormal_on_many_pairs():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        g, m = _random_pose(rng), _random_pose(rng)
        for s in rng.uniform(0, 1, 5):
            R = blend(g, m, float(s)).rotation
            worst = max(worst, float(np.abs(R.T @ R - np.eye(3)).max()),
                        abs(float(np.linalg.det(R)) - 1.0))
    assert worst < 1e-9


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_blend_angle_is_monotone_in_s(seed, s1, s2):
    rng = np.random.default_rng(seed)
    g, m = _random_pose(rng), _random_pose(rng)
    lo, hi = sorted((s1, s2))
    a_lo = rotation_angle(m.rotation.T @ blend(g, m, lo).rotation)
    a_hi = rotation_angle(m.rotation.T @ blend(g, m, hi).rotation)
    assert a_lo <= a_hi + 1e-9


def test_blend_path_is_continuous():
    rng = np.random.default_rng(4)
    for _ in range(50):
        g, m = _random_pose(rng), _random_pose(rng)
        prev = m.rotation
        for s in np.linspace(0, 1, 201)[1:]:
            R = blend(g, m, float(s)).rotation
            # steps bounded by the total angle / 200 (plus rounding)
            assert rotation_angle(prev.T @ R) <= math.pi / 200 + 1e-9
            prev = R


def test_servo_target_ends():
    rng = np.random.default_rng(5)
    grasp, ee = _random_pose(rng), _random_pose(rng)
    st1 = servo_target(grasp, ee, 1.0)
    assert st1.blended is grasp
    st0 = servo_target(grasp, ee, 0.0)
    d = grasp.translation - ee.translation
    assert abs(st0.blended.rotation[:, 2] @ d / np.linalg.norm(d) - 1.0) < 1e-9
    assert np.array_equal(st0.blended.translation, grasp.translation)


def test_frustum_trivial_cases():
    cam = RigidTransform.identity()
    assert in_frustum(cam, [0, 0, 5.0], 1.0, 0.8, 10.0)
    assert not in_frustum(cam, [0, 0, -1.0], 1.0, 0.8, 10.0)
    assert not in_frustum(cam, [0, 0, 11.0], 1.0, 0.8, 10.0)
    with pytest.raises(InvalidInputError):
        in_frustum(cam, [0, 0, 1.0], math.pi, 0.8, 10.0)


def test_frustum_matches_plane_oracle():
    rng = np.random.default_rng(6)
    hits = 0
    for _ in range(5000):
        cam = _random_pose(rng)
        hf, vf = rng.uniform(0.2, 2.5), rng.uniform(0.2, 2.5)
        tgt = cam.translation + rng.normal(size=3) * 2.0
        a = in_frustum(cam, tgt, hf, vf, 3.0)
        b = point_in_pyramid(cam.rotation, cam.translation, tgt, hf, vf, 3.0)
        assert a == b
        hits += a
    assert 200 < hits < 4800


def test_approach_pose_axes():
    T = approach_pose([1, 2, 3], [1.0, 0, 0])
    assert np.allclose(T.rotation[:, 2], [1, 0, 0])
    assert np.allclose(T.rotation[:, 0], [0, 0, -1])
    down = approach_pose([0, 0, 0], [0, 0, -1.0])
    assert np.allclose(down.rotation[:, 2], [0, 0, -1])
    assert np.allclose(down.rotation[:, 0], [-1, 0, 0])
    rolled = approach_pose([0, 0, 0], [0, 1.0, 0], roll=0.7)
    assert np.allclose(rolled.rotation[:, 2], [0, 1, 0])
    assert np.allclose(rolled.rotation.T @ rolled.rotation, np.eye(3))
    with pytest.raises(InvalidInputError):
        approach_pose([0, 0, 0], [0, 0, 0])
