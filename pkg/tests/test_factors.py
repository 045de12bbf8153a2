import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chains import random_spd
from liograph.errors import CovarianceError, KeyframeIndexError, LayoutError
from liograph.factors import (FULL, LAYOUTS, LINEAR, POSE, BetweenFactor, GpsFactor, MotionFactor,
                              PriorFactor, StateLayout, cost, linearize, mahalanobis, residual,
                              wrap_angle)
from liograph.graph import assemble
from liograph.synth import generate


def fd_jacobian(factor, states, layout, key, h=1e-6):
    """Central differences of the measurement model, i.e. minus d(residual)."""
    d = layout.state_dim
    cols = []
    for c in range(d):
        sp, sm = states.copy(), states.copy()
        sp[key - 1, c] += h
        sm[key - 1, c] -= h
        diff = residual(factor, sm, layout) - residual(factor, sp, layout)
        if layout.has_theta and len(diff) >= 3 and factor.type_name in ("BETWEEN", "PRIOR"):
            diff[2] = wrap_angle(diff[2])
        cols.append(diff / (2 * h))
    return np.column_stack(cols)


def make_factor(kind, layout, rng, states, index=1):
    """A factor of ``kind`` whose residual at ``states`` is small (away from angle wrap)."""
    if kind == "gps":
        return GpsFactor(index=index, sigma=random_spd(rng, 2), z=states[index - 1, :2] + rng.normal(size=2))
    if kind == "prior":
        return PriorFactor(index=index, sigma=random_spd(rng, layout.state_dim),
                           z=states[index - 1] + 0.1 * rng.normal(size=layout.state_dim))
    if kind == "between":
        proto = BetweenFactor(index=index, sigma=np.eye(layout.pose_dim), z=np.zeros(layout.pose_dim))
        z = proto.predict([states[index - 1], states[index]], layout) + 0.1 * rng.normal(size=layout.pose_dim)
        return BetweenFactor(index=index, sigma=random_spd(rng, layout.pose_dim), z=z)
    dim = 2 + layout.vel_dim + layout.bias_dim
    return MotionFactor(index=index, dt=rng.uniform(0.1, 2.0), sigma=random_spd(rng, dim),
                        z=rng.normal(size=dim))


def random_states(rng, layout, n=2):
    x = rng.uniform(-10, 10, size=(n, layout.state_dim))
    if layout.has_theta:
        x[:, 2] = rng.uniform(-np.pi, np.pi, size=n)
    return x


KINDS = [(lay, kind) for lay in ("linear", "pose", "full") for kind in ("gps", "prior", "between", "motion")
         if not (kind == "motion" and lay != "full")]


@pytest.mark.parametrize("layout_name,kind", KINDS)
def test_jacobians_match_finite_differences(layout_name, kind):
    layout = LAYOUTS[layout_name]
    rng = np.random.default_rng(KINDS.index((layout_name, kind)))
    for _ in range(50):
        states = random_states(rng, layout)
        f = make_factor(kind, layout, rng, states)
        for key, jac in zip(f.keys, f.jacobians([states[k - 1] for k in f.keys], layout)):
            np.testing.assert_allclose(jac, fd_jacobian(f, states, layout, key), atol=1e-5)


def test_residual_examples():
    gps = GpsFactor(index=1, sigma=np.eye(2), z=[1.0, 2.0])
    np.testing.assert_array_equal(residual(gps, np.array([[1.0, 2.0]]), LINEAR), [0, 0])
    b = BetweenFactor(index=1, sigma=np.eye(2), z=[1.0, 0.0])
    np.testing.assert_array_equal(residual(b, np.array([[0.0, 0], [1, 0]]), LINEAR), [0, 0])
    bp = BetweenFactor(index=1, sigma=np.eye(3), z=[1.0, 0.0, 0.0])
    states = np.array([[0.0, 0.0, np.pi / 2], [0.0, 1.0, np.pi / 2]])
    np.testing.assert_allclose(residual(bp, states, POSE), [0, 0, 0], atol=1e-15)


def test_gps_block_identity_whitening():
    gps = GpsFactor(index=1, sigma=np.eye(2), z=[4.0, 5.0])
    row = linearize(gps, np.array([[1.0, 1.0, 0.3]]), POSE)
    np.testing.assert_array_equal(row.block(1), [[1, 0, 0], [0, 1, 0]])
    np.testing.assert_array_equal(row.residual, [3, 4])


def test_gps_diagonal_whitening():
    gps = GpsFactor(index=1, sigma=np.diag([4.0, 9.0]), z=[2.0, 3.0])
    row = linearize(gps, np.zeros((1, 2)), LINEAR)
    np.testing.assert_allclose(row.residual, [1, 1])


def test_whitener_inverts_covariance():
    rng = np.random.default_rng(1)
    s = random_spd(rng, 5)
    f = MotionFactor(index=1, dt=0.5, sigma=s)
    w = f.whitener
    np.testing.assert_allclose(w @ s @ w.T, np.eye(5), atol=1e-10)
    assert np.allclose(np.triu(w, 1), 0)


def test_linearize_matches_raw_product():
    """Structural column writes agree with the plain W @ J product."""
    rng = np.random.default_rng(2)
    for layout in (LINEAR, POSE, FULL):
        states = random_states(rng, layout)
        for kind in ("gps", "prior", "between", "motion"):
            if kind == "motion" and not layout.vel_dim:
                continue
            f = make_factor(kind, layout, rng, states)
            row = linearize(f, states, layout)
            jacs = f.jacobians([states[k - 1] for k in f.keys], layout)
            for (key, blk), jac in zip(row.blocks, jacs):
                np.testing.assert_allclose(blk, f.whitener @ jac, atol=1e-12)


def test_cost_examples():
    gps = GpsFactor(index=1, sigma=np.eye(2), z=[3.0, 4.0])
    assert cost([gps], np.zeros((1, 2)), LINEAR) == 25.0
    assert mahalanobis(gps, np.zeros((1, 2)), LINEAR) == 25.0
    assert cost([gps], np.array([[3.0, 4.0]]), LINEAR) == 0.0


def test_cost_equals_assembled_residual_norm():
    graph, truth = generate(12, FULL, seed=3)
    states = truth + 0.1
    _, eps = assemble(graph, states)
    assert cost(graph.factors(), states, FULL) == pytest.approx(eps @ eps, rel=1e-12)


def test_covariance_errors():
    with pytest.raises(CovarianceError):
        GpsFactor(index=1, sigma=[[1.0, 2.0], [2.0, 1.0]], z=[0, 0])
    with pytest.raises(CovarianceError):
        GpsFactor(index=1, sigma=[[1.0, 0.5], [0.0, 1.0]], z=[0, 0])
    with pytest.raises(CovarianceError):
        GpsFactor(index=1, sigma=np.eye(3), z=[0, 0])


def test_layout_mismatch():
    b = BetweenFactor(index=1, sigma=np.eye(2), z=[1.0, 0.0])
    with pytest.raises(LayoutError):
        residual(b, np.zeros((2, 3)), POSE)
    m = MotionFactor(index=1, dt=1.0, sigma=np.eye(2))
    with pytest.raises(LayoutError):
        m.check_layout(LINEAR)


def test_missing_keyframe():
    b = BetweenFactor(index=2, sigma=np.eye(2), z=[1.0, 0.0])
    with pytest.raises(KeyframeIndexError):
        residual(b, np.zeros((2, 2)), LINEAR)


def test_layout_codes_round_trip():
    for lay in LAYOUTS.values():
        assert StateLayout.from_code(lay.code) == lay
        assert StateLayout.named(lay.name) == lay
    assert list(FULL.columns()) == ["x", "y", "theta", "vx", "vy", "bias"]
    assert (LINEAR.state_dim, POSE.state_dim, FULL.state_dim) == (2, 3, 6)


@settings(max_examples=200)
@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -np.pi < w <= np.pi
    assert np.isclose(np.cos(w), np.cos(a), atol=1e-9) and np.isclose(np.sin(w), np.sin(a), atol=1e-9)
