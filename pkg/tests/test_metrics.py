import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from liograph.errors import InvalidArgumentError
from liograph.factors import LINEAR
from liograph.metrics import rpe
from liograph.solver import gauss_newton
from liograph.synth import dead_reckoning, generate


def test_identical_is_zero():
    t = np.cumsum(np.ones((6, 3)), axis=0)
    assert rpe(t, t) == (0.0, 0.0)


def test_single_bad_step():
    n = 6
    truth = np.column_stack([np.arange(n, dtype=float), np.zeros(n)])
    est = truth.copy()
    est[3:, 1] += 0.3  # step 3->4 is (1, 0.3)
    rmse, mx = rpe(est, truth)
    assert mx == pytest.approx(0.3)
    assert rmse == pytest.approx(np.sqrt(0.09 / (n - 1)))


def test_rotated_frame_does_not_change_norm():
    truth = np.array([[0.0, 0, np.pi / 2], [0, 1, np.pi / 2], [0, 2, np.pi / 2]])
    est = truth.copy()
    est[2, :2] += [0.1, 0.0]
    assert rpe(est, truth)[1] == pytest.approx(0.1)


def test_noise_free_linear_solve():
    g, truth = generate(20, LINEAR, noise={"gps": 0, "lidar": 0})
    x, _ = gauss_newton(g, dead_reckoning(g) + 1.0)
    assert rpe(x, truth)[0] < 1e-9


def test_mismatch():
    with pytest.raises(InvalidArgumentError):
        rpe(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(InvalidArgumentError):
        rpe(np.zeros((1, 2)), np.zeros((1, 2)))
    with pytest.raises(InvalidArgumentError):
        rpe(np.zeros((2, 2)), np.zeros((2, 2)), indices=[1, 2], truth_indices=[1, 3])


@settings(max_examples=50)
@given(arrays(np.float64, (5, 3), elements=st.floats(-50, 50)))
def test_rpe_self_zero_and_rmse_le_max(t):
    assert rpe(t, t) == (0.0, 0.0)
    rmse, mx = rpe(t + np.arange(15).reshape(5, 3) * 0.01, t)
    assert rmse <= mx + 1e-15
