import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from constrained_svgd import se3
from constrained_svgd.errors import ContractError, DegenerateInputError, InvalidStateError, ParameterError
from constrained_svgd.svgd import (
    StepControl,
    backtracking_line_search,
    median_bandwidth,
    project_box,
    rbf_kernel,
    se3_kernel,
    svgd_direction,
)

coords = st.floats(-5, 5, allow_nan=False)


def particle_sets(min_n=2, max_n=8, d=2):
    return st.integers(min_n, max_n).flatmap(lambda n: arrays(float, (n, d), elements=coords))


def test_median_bandwidth_example():
    X = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert np.isclose(median_bandwidth(X), 25.0 / np.log(3.0))


def test_median_bandwidth_coincident_particles_fall_back_to_one():
    assert median_bandwidth(np.ones((5, 3))) == 1.0


def test_median_bandwidth_needs_two_particles():
    with pytest.raises(DegenerateInputError):
        median_bandwidth(np.zeros((1, 2)))


def test_rbf_kernel_values_and_gradient():
    X = np.array([[0.0, 0.0], [1.0, 0.0]])
    ker = rbf_kernel(X, 2.0)
    np.testing.assert_allclose(ker.K, [[1, np.exp(-0.5)], [np.exp(-0.5), 1]])
    # d/dx_j exp(-|x_j - x_i|^2 / h) = 2 (x_i - x_j) / h * k
    np.testing.assert_allclose(ker.gradK[0, 1], [np.exp(-0.5), 0.0])
    np.testing.assert_allclose(ker.gradK[1, 0], [-np.exp(-0.5), 0.0])
    np.testing.assert_array_equal(ker.gradK[0, 0], [0.0, 0.0])


def test_rbf_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5, 3))
    h = 1.7
    ker = rbf_kernel(X, h)
    step = 1e-6
    for j in range(5):
        for k in range(3):
            Xp, Xm = X.copy(), X.copy()
            Xp[j, k] += step
            Xm[j, k] -= step
            fd = (rbf_kernel(Xp, h).K[j] - rbf_kernel(Xm, h).K[j]) / (2 * step)
            fd[j] = 0.0
            np.testing.assert_allclose(ker.gradK[j, :, k], fd, atol=1e-8)


def test_rbf_rejects_bad_input():
    with pytest.raises(ParameterError):
        rbf_kernel(np.zeros((2, 2)), 0.0)
    with pytest.raises(ContractError):
        rbf_kernel(np.zeros(3), 1.0)


@settings(max_examples=50, deadline=None)
@given(particle_sets())
def test_rbf_kernel_is_symmetric_with_unit_diagonal(X):
    ker = rbf_kernel(X, median_bandwidth(X))
    np.testing.assert_allclose(ker.K, ker.K.T)
    np.testing.assert_array_equal(np.diag(ker.K), 1.0)
    assert np.all((ker.K >= 0) & (ker.K <= 1))
    np.testing.assert_allclose(ker.gradK, -np.swapaxes(ker.gradK, 0, 1), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(particle_sets(min_n=1))
def test_direction_is_pure_drift_without_repulsion_partner(X):
    """A lone particle follows its own score."""
    x = X[:1]
    g = np.array([[0.3, -1.2]])
    ker = rbf_kernel(x, 1.0)
    np.testing.assert_allclose(svgd_direction(x, g, ker), g)


def test_direction_worked_example():
    X = np.array([[0.0, 0.0], [1.0, 0.0]])
    G = np.array([[1.0, 0.0], [0.0, 1.0]])
    ker = rbf_kernel(X, 1.0)
    e = np.exp(-1.0)
    # repulsion from x1 pushes x0 towards -x and vice versa
    expected = 0.5 * np.array([
        G[0] + e * G[1] + np.array([-2 * e, 0.0]),
        e * G[0] + G[1] + np.array([2 * e, 0.0]),
    ])
    np.testing.assert_allclose(svgd_direction(X, G, ker), expected)


def test_direction_shape_contract():
    X = np.zeros((3, 2))
    with pytest.raises(ContractError):
        svgd_direction(X, np.zeros((3, 3)), rbf_kernel(X, 1.0))


def test_line_search_takes_largest_decreasing_step():
    ctl = StepControl(eps0=1.0, beta=0.5, max_backtracks=10, min_eps=1e-6)
    X = np.array([[1.0]])

    def objective(Y):
        return float(np.sum(Y**2))

    # X - eps*2.0 decreases the objective only for eps < 1
    assert backtracking_line_search(objective, X, np.array([[-2.0]]), ctl) == 0.5
    assert backtracking_line_search(objective, X, np.array([[1.0]]), ctl) == 1e-6


def test_line_search_rejects_nan_trials():
    ctl = StepControl(eps0=1.0, beta=0.5, max_backtracks=5, min_eps=1e-3)

    def objective(Y):
        y = float(Y[0, 0])
        return np.nan if y < 0.6 else y

    assert backtracking_line_search(objective, np.array([[1.0]]), np.array([[-1.0]]), ctl) == 0.25


def test_line_search_needs_finite_start():
    with pytest.raises(InvalidStateError):
        backtracking_line_search(lambda Y: np.inf, np.zeros((1, 1)), np.ones((1, 1)), StepControl())


def test_step_control_validation():
    with pytest.raises(ParameterError):
        StepControl(beta=1.0)
    with pytest.raises(ParameterError):
        StepControl(eps0=1e-7, min_eps=1e-6)


@settings(max_examples=100, deadline=None)
@given(arrays(float, (6, 3), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_projection_lands_in_box_and_is_idempotent(X):
    lo = np.array([-1.0, -np.inf, 0.0])
    hi = np.array([1.0, 2.0, np.inf])
    Y = project_box(X, lo, hi)
    assert np.all(Y >= lo) and np.all(Y <= hi)
    np.testing.assert_array_equal(project_box(Y, lo, hi), Y)
    inside = (X >= lo) & (X <= hi)
    np.testing.assert_array_equal(Y[inside], X[inside])


def test_projection_rejects_inverted_box():
    with pytest.raises(ParameterError):
        project_box(np.zeros((1, 1)), [1.0], [0.0])


def test_se3_kernel_identical_poses_and_symmetry():
    rng = np.random.default_rng(1)
    X = np.concatenate([rng.uniform(-1, 1, (6, 3)), rng.uniform(-1, 1, (6, 3))], axis=1)
    ker = se3_kernel(X)
    np.testing.assert_allclose(np.diag(ker.K), 1.0)
    np.testing.assert_allclose(ker.K, ker.K.T, atol=1e-12)


def test_se3_kernel_accepts_transforms_and_validates_them():
    T = [se3.Transform.identity(), se3.Transform.translation([1.0, 0, 0])]
    ker = se3_kernel(T, h=1.0)
    assert np.isclose(ker.K[0, 1], np.exp(-1.0))
    with pytest.raises(se3.GeometryError):
        se3_kernel([se3.Transform(2 * np.eye(3)), se3.Transform.identity()])


def test_se3_kernel_on_pure_translations_is_rbf():
    """Translation-only poses reduce to the Euclidean RBF kernel."""
    rng = np.random.default_rng(2)
    X = np.zeros((4, 6))
    X[:, :3] = rng.standard_normal((4, 3))
    ker = se3_kernel(X, h=1.3)
    ref = rbf_kernel(X[:, :3], 1.3)
    np.testing.assert_allclose(ker.K, ref.K, atol=1e-12)
    np.testing.assert_allclose(ker.gradK[:, :, :3], ref.gradK, atol=1e-7)


@settings(max_examples=50, deadline=None)
@given(particle_sets(max_n=10, d=3))
def test_closed_form_repulsion_matches_full_gradient(X):
    h = median_bandwidth(X)
    full = rbf_kernel(X, h)
    fast = rbf_kernel(X, h, full_gradient=False)
    np.testing.assert_allclose(fast.K, full.K, atol=1e-12)
    scale = 1.0 + np.max(np.abs(X)) / h
    np.testing.assert_allclose(fast.repulsion_sum(), full.gradK.sum(axis=0), atol=1e-10 * scale)
