import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chains import random_linear_chain
from liograph.errors import FormatError, InvalidArgumentError
from liograph.factors import FULL, LINEAR, POSE, GpsFactor, linearize
from liograph.graph import ChainFactorGraph, toy_example, toy_truth
from liograph.storage import StorageTier, decode, encode, footprint, footprint_table
from liograph.synth import generate


def rows_of(graph, states):
    return [linearize(f, states, graph.layout) for f in graph.factors()]


def assert_rows_identical(got, want):
    assert len(got) == len(want)
    for g, w in zip(got, want):
        assert g.type_name == w.type_name
        assert g.residual.tobytes() == w.residual.tobytes()
        assert [k for k, _ in g.blocks] == [k for k, _ in w.blocks]
        for (_, a), (_, b) in zip(g.blocks, w.blocks):
            assert a.tobytes() == b.tobytes()


def test_single_gps_hand_count():
    g = ChainFactorGraph(layout=LINEAR, n=1, gps={1: GpsFactor(index=1, sigma=np.eye(2), z=[0, 0])})
    assert footprint(g, StorageTier.DENSE).bytes == 48
    assert footprint(g, StorageTier.SEQUENTIAL).bytes == 48


def test_toy_footprints():
    g = toy_example()
    b = [footprint(g, t).bytes for t in StorageTier]
    assert b[0] == (14 * 8 + 14) * 8 == 1008
    assert b[0] > b[1] > b[2] >= b[3]


def test_full_layout_ratios_increase():
    g, _ = generate(30, FULL, seed=0)
    ratios = [r for _, _, r in footprint_table(g)[1:]]
    assert ratios[0] < ratios[1] < ratios[2]


def test_scalar_bytes():
    g = toy_example()
    assert footprint(g, StorageTier.DENSE, 4).bytes * 2 == footprint(g, StorageTier.DENSE, 8).bytes
    with pytest.raises(InvalidArgumentError):
        footprint(g, StorageTier.DENSE, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**32 - 1))
def test_monotone_tiers(n, seed):
    g, _ = random_linear_chain(np.random.default_rng(seed), n)
    b = [footprint(g, t).bytes for t in StorageTier]
    assert b[0] > b[1] >= b[2] >= b[3]


def test_single_keyframe_typed_tier_pays_metadata():
    # one block, no zeros to drop: tags and indexes make step1 larger than dense
    g, _ = random_linear_chain(np.random.default_rng(0), 1)
    b = [footprint(g, t).bytes for t in StorageTier]
    assert b[1] == b[0] + 1 + 4 and b[2] == b[0] and b[3] <= b[2]


@pytest.mark.parametrize("tier", [StorageTier.SEQUENTIAL, StorageTier.COMPRESSED])
@pytest.mark.parametrize("layout", [LINEAR, POSE, FULL])
def test_round_trip_bit_exact(tier, layout):
    g, truth = generate(9, layout, seed=3)
    states = truth + np.random.default_rng(0).normal(scale=0.1, size=truth.shape)
    lay, n, rows = decode(encode(g, states, tier), layout=layout, n=9, tier=tier)
    assert lay == layout and n == 9
    assert_rows_identical(rows, rows_of(g, states))


def test_toy_round_trip():
    g = toy_example()
    _, _, rows = decode(encode(g, toy_truth(), StorageTier.COMPRESSED))
    assert_rows_identical(rows, rows_of(g, toy_truth()))


def test_empty_graph_stream():
    g = ChainFactorGraph(layout=LINEAR, n=0)
    data = encode(g, np.zeros((0, 2)))
    assert decode(data) == (LINEAR, 0, [])
    assert footprint_table(g) == []


def test_truncated_stream_is_format_error():
    data = encode(toy_example(), toy_truth(), StorageTier.COMPRESSED)
    for cut in (1, 9, len(data) // 2, len(data) - 1):
        with pytest.raises(FormatError):
            decode(data[:cut])
    with pytest.raises(FormatError):
        decode(data[:20] + data[21:])


def test_other_format_errors():
    data = encode(toy_example(), toy_truth())
    with pytest.raises(FormatError):
        decode(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        decode(data + b"\0")
    with pytest.raises(FormatError):
        decode(data, layout=POSE)
    with pytest.raises(FormatError):
        decode(data, n=5)
    with pytest.raises(InvalidArgumentError):
        encode(toy_example(), toy_truth(), StorageTier.DENSE)


def test_tier_labels():
    assert [t.label for t in StorageTier] == ["dense", "step1", "step2", "step3"]
    assert StorageTier.from_label("step3") is StorageTier.COMPRESSED
    with pytest.raises(InvalidArgumentError):
        StorageTier.from_label("step4")
