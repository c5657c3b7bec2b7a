import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mapbench.geometry import (
    Pose2,
    RelPose,
    compose,
    ominus,
    pair_residual,
    transform_pose,
    wrap_angle,
    wrap_angles,
)

finite_angle = st.floats(-50.0, 50.0, allow_nan=False)


def test_wrap_basics():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)  # (-pi, pi]: -pi maps to pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(2 * math.pi) == pytest.approx(0.0)


@given(finite_angle)
def test_wrap_range(theta):
    w = wrap_angle(theta)
    assert -math.pi < w <= math.pi
    # same direction
    assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(theta), abs_tol=1e-9)


def test_wrap_angles_matches_scalar():
    thetas = np.linspace(-10, 10, 101)
    vec = wrap_angles(thetas)
    for t, v in zip(thetas, vec):
        assert wrap_angle(t) == pytest.approx(v, abs=1e-15)


def test_ominus_identity_frame():
    d = ominus(Pose2(0, 0, 0), Pose2(1, 0, math.pi / 2))
    assert (d.dx, d.dy) == (1.0, 0.0)
    assert d.dtheta == pytest.approx(math.pi / 2)


def test_ominus_same_pose_is_zero():
    a = Pose2(3.2, -1.5, 0.7)
    d = ominus(a, a)
    assert (d.dx, d.dy, d.dtheta) == (0.0, 0.0, 0.0)


def test_ominus_rotated_frame():
    # hand evaluation of the 2-D rotation matrix
    d = ominus(Pose2(0, 0, math.pi / 2), Pose2(0, 1, math.pi / 2))
    assert d.dx == pytest.approx(1.0)
    assert d.dy == pytest.approx(0.0, abs=1e-12)
    assert d.dtheta == 0.0


def test_ominus_compose_roundtrip():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = Pose2(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        d = RelPose(*rng.uniform(-2, 2, 2), rng.uniform(-math.pi, math.pi))
        back = ominus(a, compose(a, d))
        assert back.dx == pytest.approx(d.dx, abs=1e-12)
        assert back.dy == pytest.approx(d.dy, abs=1e-12)
        assert back.dtheta == pytest.approx(d.dtheta, abs=1e-12)


def test_pair_residual_identity_when_matching():
    est_i, est_j = Pose2(0, 0, 0), Pose2(2, 1, 0.3)
    r = pair_residual(est_i, est_j, est_i, est_j)
    assert (r.dx, r.dy, r.dtheta) == (0.0, 0.0, 0.0)


def test_pair_residual_pure_offset():
    gt_i, gt_j = Pose2(0, 0, 0), Pose2(1, 0, 0)
    est_i, est_j = Pose2(0, 0, 0), Pose2(1.1, 0, 0)
    r = pair_residual(est_i, est_j, gt_i, gt_j)
    assert r.translation_norm() == pytest.approx(0.1)
    assert r.dtheta == 0.0


def test_pair_residual_frame_invariant_numerically():
    rng = np.random.default_rng(11)
    est_i, est_j = Pose2(0.3, 0.4, 0.2), Pose2(2.0, 1.0, 1.1)
    gt_i, gt_j = Pose2(0.31, 0.38, 0.22), Pose2(1.97, 1.04, 1.08)
    base = pair_residual(est_i, est_j, gt_i, gt_j)
    for _ in range(100):
        g = Pose2(*rng.uniform(-10, 10, 2), rng.uniform(-math.pi, math.pi))
        r = pair_residual(*(transform_pose(g, p) for p in (est_i, est_j, gt_i, gt_j)))
        assert r.translation_norm() == pytest.approx(base.translation_norm(), abs=1e-12)
        assert r.dtheta == pytest.approx(base.dtheta, abs=1e-12)


def test_theta_wrapped_on_construction():
    assert Pose2(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)
    assert RelPose(0, 0, -3 * math.pi).dtheta == pytest.approx(math.pi)
