import numpy as np
import pytest

from constrained_svgd import se3
from constrained_svgd.errors import GeometryError


def random_transforms(rng, n, max_angle=3.0):
    axis = rng.standard_normal((n, 3))
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    angle = rng.uniform(0, max_angle, n)
    return se3.Transform(se3.so3_exp(axis * angle[:, None]), rng.uniform(-2, 2, (n, 3)))


def test_identity_round_trip():
    T = se3.Transform.identity()
    np.testing.assert_array_equal(se3.se3_log(T), np.zeros(6))
    E = se3.se3_exp(np.zeros(6))
    np.testing.assert_array_equal(E.R, np.eye(3))
    np.testing.assert_array_equal(E.t, np.zeros(3))


def test_quarter_turn_about_z():
    c, s = np.cos(np.pi / 2), np.sin(np.pi / 2)
    T = se3.Transform(np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]]))
    np.testing.assert_allclose(se3.se3_log(T), [0, 0, 0, 0, 0, np.pi / 2], atol=1e-15)


def test_exp_log_round_trip_1000():
    rng = np.random.default_rng(0)
    T = random_transforms(rng, 1000)
    back = se3.se3_exp(se3.se3_log(T))
    err = np.linalg.norm(back.matrix() - T.matrix(), axis=(1, 2))
    assert err.max() < 1e-9


def test_log_exp_round_trip_on_screws():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((500, 3))
    w *= (rng.uniform(0, 3.0, 500) / np.linalg.norm(w, axis=1))[:, None]
    xi = np.concatenate([rng.uniform(-1, 1, (500, 3)), w], axis=1)
    np.testing.assert_allclose(se3.se3_log(se3.se3_exp(xi)), xi, atol=1e-9)


def test_so3_round_trip_preserves_angle():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((1000, 3))
    w *= (rng.uniform(0, 3.0, 1000) / np.linalg.norm(w, axis=1))[:, None]
    back = se3.so3_log(se3.so3_exp(w))
    assert np.max(np.linalg.norm(back - w, axis=1)) < 1e-9
    np.testing.assert_allclose(se3.rotation_angle(se3.so3_exp(w)), np.linalg.norm(w, axis=1), atol=1e-12)


@pytest.mark.parametrize("angle", [1e-12, 1e-9, 1e-7, 1e-5])
def test_small_angles(angle):
    w = np.array([angle, -angle / 2, angle / 3])
    np.testing.assert_allclose(se3.so3_log(se3.so3_exp(w)), w, rtol=1e-9, atol=1e-20)
    xi = np.concatenate([[0.3, -0.2, 0.1], w])
    np.testing.assert_allclose(se3.se3_log(se3.se3_exp(xi)), xi, rtol=1e-9, atol=1e-15)


def test_rotation_at_pi_is_a_branch_error():
    R = se3.so3_exp(np.array([0.0, 0.0, np.pi]))
    with pytest.raises(GeometryError):
        se3.so3_log(R)
    w = se3.so3_log(R, strict=False)
    assert np.isclose(np.linalg.norm(w), np.pi)
    np.testing.assert_allclose(se3.so3_exp(w), R, atol=1e-12)


def test_non_strict_log_near_pi():
    rng = np.random.default_rng(3)
    axis = rng.standard_normal((200, 3))
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    w = axis * (np.pi - rng.uniform(0, 2e-3, 200))[:, None]
    back = se3.so3_log(se3.so3_exp(w), strict=False)
    np.testing.assert_allclose(back, w, atol=1e-7)


def test_composition_and_inverse():
    rng = np.random.default_rng(4)
    A, B, C = (random_transforms(rng, 1) for _ in range(3))
    left = ((A @ B) @ C).matrix()
    right = (A @ (B @ C)).matrix()
    assert np.max(np.abs(left - right)) < 1e-12
    ident = (A @ A.inverse()).matrix()
    assert np.max(np.abs(ident - np.eye(4))) < 1e-12


def test_validate_rejects_bad_rotation():
    with pytest.raises(GeometryError):
        se3.Transform(np.diag([1.0, 1.0, -1.0])).validate()
    with pytest.raises(GeometryError):
        se3.Transform(2 * np.eye(3)).validate()


def test_weighted_screw_norm():
    assert se3.weighted_screw_norm(np.zeros(6)) == 0.0
    xi = np.array([1.0, -2.0, 0.5, 0.1, 0.2, 0.3])
    assert np.isclose(se3.weighted_screw_norm(xi, np.eye(6)), xi @ xi)
    assert se3.weighted_screw_norm([1, 0, 0, 1, 0, 0], np.diag([1, 1, 1, 2, 2, 2.0])) == 3.0


def test_fk_zero_configuration_is_product_of_offsets():
    arm = se3.default_arm()
    T = se3.fk(arm, np.zeros(6))
    np.testing.assert_allclose(T.R, np.eye(3))
    np.testing.assert_allclose(T.t, [0, 0, 1.45])


def test_fk_single_revolute_joint():
    chain = se3.KinematicChain([se3.Joint([0, 0, 1.0], se3.Transform.identity())], lo=[-3.0], hi=[3.0],
                               tool=se3.Transform.translation([1.0, 0, 0]))
    np.testing.assert_allclose(se3.fk(chain, [np.pi / 2]).t, [0, 1, 0], atol=1e-15)


def geometric_position_jacobian(chain, q):
    """Joint k moves the end point by axis_k x (p_end - origin_k)."""
    T = se3.Transform.identity()
    axes, origins = [], []
    for k, joint in enumerate(chain.joints):
        T = T @ joint.offset
        axes.append(T.R @ joint.axis)
        origins.append(T.t.copy())
        T = T @ se3.Transform(se3.so3_exp(q[k] * joint.axis))
    p = (T @ chain.tool).t
    return np.stack([np.cross(a, p - o) for a, o in zip(axes, origins)], axis=1)


def test_fk_position_jacobian_matches_central_differences():
    arm = se3.default_arm()
    rng = np.random.default_rng(5)
    for q in rng.uniform(-2.5, 2.5, (20, 6)):
        fd = se3.central_difference(lambda Q: se3.fk(arm, Q).t, q)[0]
        np.testing.assert_allclose(fd, geometric_position_jacobian(arm, q), atol=1e-8)


def test_pose_cost_zero_at_target():
    arm = se3.default_arm()
    q = np.array([0.2, -0.4, 0.9, 0.1, 0.3, -0.5])
    target = se3.fk(arm, q)
    value, grad = se3.pose_cost_and_grad(arm, q, target)
    assert value < 1e-24
    assert np.max(np.abs(grad)) < 1e-6


def test_pose_cost_gradient_two_stencils_agree():
    arm = se3.default_arm()
    rng = np.random.default_rng(6)
    target = se3.fk(arm, rng.uniform(-1, 1, 6))
    W = np.diag([1, 1, 1, 0.5, 0.5, 0.5])
    Q = rng.uniform(-1.5, 1.5, (30, 6))
    _, fine = se3.pose_cost_and_grad(arm, Q, target, W)
    _, coarse = se3.pose_cost_and_grad(arm, Q, target, W, step=1e-4)
    assert np.max(np.abs(fine - coarse)) < 1e-3


def test_pose_cost_left_invariant():
    arm = se3.default_arm()
    rng = np.random.default_rng(7)
    q = rng.uniform(-1, 1, 6)
    target = random_transforms(rng, 1)
    G = random_transforms(rng, 1)
    direct = se3.weighted_screw_norm(se3.relative_screw(se3.fk(arm, q), target))
    moved = se3.weighted_screw_norm(se3.relative_screw(G @ se3.fk(arm, q), G @ target))
    np.testing.assert_allclose(direct, moved, rtol=1e-10)
