import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chains import random_linear_chain, random_pose_chain
from liograph.blockla import normal_solve_oracle
from liograph.eliminate import (PARALLEL, SERIAL, ChainBayesNet, ChainConditional, abar_trace,
                                back_substitute_parallel, back_substitute_serial, build_abar,
                                eliminate_parallel, eliminate_serial, fill_in_count, solve_linearized)
from liograph.errors import ChainViolationError, InvalidArgumentError, UnderConstrainedError
from liograph.factors import FULL, LINEAR, GpsFactor, linearize
from liograph.graph import ChainFactorGraph, assemble, toy_example, toy_truth
from liograph.synth import generate


def test_toy_serial_trace():
    net = eliminate_serial(toy_example(), toy_truth())
    assert net.root_index == 4
    assert [s.index for s in net.steps] == [1, 2, 3, 4]
    assert [(s.rows, s.cols + 1) for s in net.steps] == [(4, 5), (6, 5), (8, 5), (8, 3)]
    assert [c.parent for c in net.conditionals.values()] == [2, 3, 4, None]
    assert fill_in_count(net) == 3


def test_toy_parallel_trace():
    net = eliminate_parallel(toy_example(), toy_truth())
    assert net.stages == [(1, 4), (2,), (3,)]
    assert net.root_index == 3
    parents = {i: c.parent for i, c in net.conditionals.items()}
    assert parents == {1: 2, 2: 3, 3: None, 4: 3}
    assert fill_in_count(net) == 3


def test_toy_first_abar_is_g1_b1():
    g, x = toy_example(), toy_truth()
    abar = build_abar(1, 2, [], g.unary(1) + g.binary(1), x, LINEAR)
    g1, b1 = linearize(g.gps[1], x, LINEAR), linearize(g.between[1], x, LINEAR)
    np.testing.assert_array_equal(abar[:2, :2], g1.block(1))
    np.testing.assert_array_equal(abar[:2, 2:4], 0)
    np.testing.assert_array_equal(abar[2:, :2], b1.block(1))
    np.testing.assert_array_equal(abar[2:, 2:4], b1.block(2))


def test_single_between_abar():
    g, x = toy_example(), toy_truth()
    abar = build_abar(2, 3, [], [g.between[2]], x, LINEAR)
    row = linearize(g.between[2], x, LINEAR)
    np.testing.assert_array_equal(abar, np.column_stack([row.block(2), row.block(3), row.residual]))


def test_toy_delta_zero_at_truth():
    for mode in (SERIAL, PARALLEL):
        delta, _ = solve_linearized(toy_example(), toy_truth(), mode=mode)
        assert np.abs(delta).max() < 1e-14


def test_single_keyframe():
    g = ChainFactorGraph(layout=LINEAR, n=1, gps={1: GpsFactor(index=1, sigma=np.eye(2), z=[1, 2])})
    for mode in (SERIAL, PARALLEL):
        delta, net = solve_linearized(g, np.zeros((1, 2)), mode=mode)
        np.testing.assert_allclose(delta, [[1, 2]])
        assert net.root_index == 1 and fill_in_count(net) == 0
        np.testing.assert_allclose(net.conditionals[1].r_block, np.eye(2))


def test_hand_built_two_conditionals():
    c1 = ChainConditional(1, np.eye(2), -np.eye(2), np.array([1.0, 2.0]), parent=2)
    c2 = ChainConditional(2, np.eye(2), None, np.array([3.0, 4.0]))
    net = ChainBayesNet({1: c1, 2: c2}, 2, SERIAL)
    np.testing.assert_allclose(back_substitute_serial(net), [[4, 6], [3, 4]])


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 8, 9, 16])
def test_modes_agree_and_match_oracle(n):
    rng = np.random.default_rng(n)
    g, x = random_linear_chain(rng, n)
    ds, net_s = solve_linearized(g, x, SERIAL)
    dp, net_p = solve_linearized(g, x, PARALLEL)
    a, b = assemble(g, x)
    oracle = normal_solve_oracle(a, b).reshape(n, 2)
    assert np.abs(ds - oracle).max() < 1e-8
    assert np.abs(ds - dp).max() < 1e-8
    assert len(net_p.stages) == (n + 2) // 2 <= -(-n // 2) + 1
    res_q = np.linalg.norm(a @ ds.ravel() - b)
    res_o = np.linalg.norm(a @ oracle.ravel() - b)
    assert abs(res_q - res_o) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 24), st.integers(0, 2**32 - 1))
def test_gram_identity(n, seed):
    g, x = random_linear_chain(np.random.default_rng(seed), n)
    r, _ = eliminate_serial(g, x).stacked_r()
    a, _ = assemble(g, x)
    ata = a.T @ a
    assert np.linalg.norm(r.T @ r - ata) <= 1e-9 * np.linalg.norm(ata)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_pose_mode_equivalence(n, seed):
    g, x = random_pose_chain(np.random.default_rng(seed), n)
    try:
        ds, _ = solve_linearized(g, x, SERIAL)
    except UnderConstrainedError:
        return
    dp, _ = solve_linearized(g, x, PARALLEL)
    assert np.abs(ds - dp).max() < 1e-8


def test_threaded_lanes_identical():
    g, truth = generate(17, FULL, seed=4)
    x = truth + 0.05
    d1, _ = solve_linearized(g, x, PARALLEL, workers=1)
    d2, _ = solve_linearized(g, x, PARALLEL, workers=2)
    assert d1.tobytes() == d2.tobytes()


def test_parallel_back_substitution_order_on_toy():
    net = eliminate_parallel(toy_example(), toy_truth())
    d = back_substitute_parallel(net)
    assert np.abs(d).max() < 1e-14
    with pytest.raises(InvalidArgumentError):
        back_substitute_serial(net)


@pytest.mark.parametrize("mode", [SERIAL, PARALLEL])
@pytest.mark.parametrize("n", [1, 2, 5, 8, 11])
def test_abar_trace_matches_numeric_steps(mode, n):
    g, truth = generate(n, FULL, seed=n)
    net = eliminate_serial(g, truth) if mode == SERIAL else eliminate_parallel(g, truth)
    structural = abar_trace(g, mode)
    assert [(s.stage, s.index, s.rows, s.cols) for s in structural] == \
           [(s.stage, s.index, s.rows, s.cols) for s in net.steps]


def test_under_constrained_heading():
    """Pose chain with GPS only: heading has no anchor."""
    g, truth = generate(4, FULL, seed=0)
    bad = ChainFactorGraph(layout=FULL, n=4, gps=g.gps, between=g.between, motion=g.motion)
    with pytest.raises(UnderConstrainedError):
        eliminate_serial(bad, truth)


def test_invalid_graph_rejected():
    g = ChainFactorGraph(layout=LINEAR, n=2, gps={1: GpsFactor(index=1, sigma=np.eye(2), z=[0, 0])})
    with pytest.raises(ChainViolationError):
        eliminate_serial(g, np.zeros((2, 2)))
