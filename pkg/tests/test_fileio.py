import numpy as np
import pytest

from liograph.factors import FULL, LINEAR, POSE
from liograph.fileio import (ParseError, atomic_write, format_measurements, format_trajectory,
                             parse_measurements, parse_trajectory)
from liograph.graph import assemble
from liograph.synth import generate


@pytest.mark.parametrize("layout", [LINEAR, POSE, FULL])
def test_measurement_round_trip(layout):
    g, truth = generate(7, layout, seed=1)
    g2, _ = parse_measurements(format_measurements(g))
    assert g2.layout == layout and g2.n == 7 and len(g2) == len(g)
    a1, b1 = assemble(g, truth)
    a2, b2 = assemble(g2, truth)
    assert a1.tobytes() == a2.tobytes() and b1.tobytes() == b2.tobytes()


def test_comments_and_default_layout():
    text = "# header\n\nGPS 1 1 2 | 1 0 1  # trailing\nBETWEEN 1 1 0 | 1 0 1\n"
    g, lines = parse_measurements(text)
    assert g.layout == LINEAR and g.n == 2
    assert lines[id(g.gps[1])] == 3


@pytest.mark.parametrize("text,line", [
    ("GPS 1 0 0 | 1 0\n", 1),
    ("LAYOUT linear\nFOO 1 2\n", 2),
    ("GPS 1 0 0 | 1 0 1\nGPS 1 0 0 | 1 0 1\n", 2),
    ("GPS x 0 0 | 1 0 1\n", 1),
    ("GPS 0 0 0 | 1 0 1\n", 1),
    ("GPS 1 0 0 1 0 1\n", 1),
    ("LAYOUT pose\nBETWEEN 1 1 0 | 1 0 1\n", 2),
    ("LAYOUT nope\n", 1),
    ("GPS 1 0 0 | 1 2 1\n", 1),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as exc:
        parse_measurements(text)
    assert exc.value.lineno == line
    assert str(exc.value).startswith(f"line {line}:")


def test_order_enforced_only_on_request():
    text = "GPS 2 0 0 | 1 0 1\nGPS 1 0 0 | 1 0 1\nBETWEEN 1 1 0 | 1 0 1\n"
    parse_measurements(text)
    with pytest.raises(ParseError, match="line 2"):
        parse_measurements(text, require_order=True)


def test_empty_file():
    g, _ = parse_measurements("")
    assert g.n == 0


@pytest.mark.parametrize("layout", [LINEAR, POSE, FULL])
def test_trajectory_round_trip(layout):
    _, truth = generate(5, layout)
    idx, arr = parse_trajectory(format_trajectory(truth, layout))
    np.testing.assert_array_equal(idx, [1, 2, 3, 4, 5])
    if layout == LINEAR:
        np.testing.assert_array_equal(arr[:, :2], truth)
        assert np.all(arr[:, 2] == 0)
    else:
        assert arr.tobytes() == truth.tobytes()


def test_trajectory_errors():
    with pytest.raises(ParseError):
        parse_trajectory("a,b\n1,2\n")
    with pytest.raises(ParseError, match="line 3"):
        parse_trajectory("index,x,y,theta\n1,0,0,0\n1,0,0,0\n")
    with pytest.raises(ParseError, match="line 2"):
        parse_trajectory("index,x,y,theta\n1,0,0\n")


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "out.txt"
    atomic_write(p, "one")
    atomic_write(p, "two")
    assert p.read_text() == "two"
    assert [f.name for f in tmp_path.iterdir()] == ["out.txt"]
