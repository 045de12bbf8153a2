"""Text formats: measurement records and trajectory CSV.

Measurement file, one record per line, ``#`` starts a comment::

    LAYOUT pose
    PRIOR 1 x y theta | <upper triangle of covariance, row-major>
    GPS 1 zx zy | s11 s12 s22
    BETWEEN 1 dx dy dtheta | s11 s12 s13 s22 s23 s33
    MOTION 1 dt [z...] | <upper triangle, 5x5 for the full layout>

``BETWEEN j`` and ``MOTION j`` connect keyframes ``j`` and ``j + 1``.
"""

import csv
import io
import os
import tempfile

import numpy as np

from .errors import LioGraphError
from .factors import LINEAR, BetweenFactor, GpsFactor, MotionFactor, PriorFactor, StateLayout
from .graph import SLOTS, ChainFactorGraph

RECORD_SLOT = {"PRIOR": "prior", "GPS": "gps", "BETWEEN": "between", "MOTION": "motion"}


class ParseError(LioGraphError, ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def atomic_write(path, text, mode="w"):
    """Write via a temp file in the target directory and rename over ``path``."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _upper(sigma):
    sigma = np.asarray(sigma)
    return sigma[np.triu_indices(sigma.shape[0])]


def _from_upper(values, dim, lineno):
    if len(values) != dim * (dim + 1) // 2:
        raise ParseError(lineno, f"expected {dim * (dim + 1) // 2} covariance entries for a "
                                 f"{dim}x{dim} matrix, got {len(values)}")
    m = np.zeros((dim, dim))
    m[np.triu_indices(dim)] = values
    return m + np.triu(m, 1).T


def _fmt(values):
    return " ".join("%.17g" % v for v in np.ravel(values))


def format_record(f):
    if isinstance(f, MotionFactor):
        head = f"MOTION {f.index} {f.dt:.17g}"
        if np.any(f.z != 0):
            head += " " + _fmt(f.z)
    else:
        head = f"{f.type_name} {f.index} {_fmt(f.z)}"
    return f"{head} | {_fmt(_upper(f.sigma))}"


def format_measurements(graph):
    lines = [f"LAYOUT {graph.layout.name}"]
    lines += [format_record(f) for f in graph.factors()]
    return "\n".join(lines) + "\n"


def parse_measurements(text, require_order=False):
    """Parse a measurement file into a :class:`ChainFactorGraph`.

    Returns ``(graph, record_lines)`` where ``record_lines`` maps each factor to
    its 1-based line number. With ``require_order`` keyframe indices must be
    non-decreasing.
    """
    layout = None
    slots = {s: {} for s in SLOTS}
    lines = {}
    n = 0
    last_index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, tail = line.partition("|")
        fields = head.split()
        kind = fields[0].upper()
        if kind == "LAYOUT":
            if layout is not None or len(fields) != 2:
                raise ParseError(lineno, "expected a single 'LAYOUT <linear|pose|full>' line")
            try:
                layout = StateLayout.named(fields[1])
            except LioGraphError as exc:
                raise ParseError(lineno, str(exc)) from None
            continue
        if kind not in RECORD_SLOT:
            raise ParseError(lineno, f"unknown record type {fields[0]!r}")
        if layout is None:
            layout = LINEAR
        try:
            index = int(fields[1])
            values = [float(v) for v in fields[2:]]
            sig = [float(v) for v in tail.split()]
        except (IndexError, ValueError):
            raise ParseError(lineno, "malformed numbers") from None
        if not _ or index < 1:
            raise ParseError(lineno, "expected 'TYPE index values... | sigma...' with index >= 1")
        if require_order and index < last_index:
            raise ParseError(lineno, f"record for keyframe {index} after keyframe {last_index} "
                                     "(records must be ordered by index)")
        last_index = max(last_index, index)
        slot = RECORD_SLOT[kind]
        try:
            if kind == "GPS":
                if len(values) != 2:
                    raise ParseError(lineno, f"GPS needs 2 values, got {len(values)}")
                f = GpsFactor(index=index, z=values, sigma=_from_upper(sig, 2, lineno))
            elif kind == "PRIOR":
                f = PriorFactor(index=index, z=values, sigma=_from_upper(sig, len(values), lineno))
            elif kind == "BETWEEN":
                f = BetweenFactor(index=index, z=values, sigma=_from_upper(sig, len(values), lineno))
            else:
                if not values:
                    raise ParseError(lineno, "MOTION needs dt")
                dim = 2 + layout.vel_dim + layout.bias_dim
                f = MotionFactor(index=index, dt=values[0], sigma=_from_upper(sig, dim, lineno),
                                 z=values[1:] or None)
            f.check_layout(layout)
        except ParseError:
            raise
        except (LioGraphError, ValueError) as exc:
            raise ParseError(lineno, f"{kind}: {exc}") from None
        if index in slots[slot]:
            raise ParseError(lineno, f"duplicate {kind} record for keyframe {index}")
        slots[slot][index] = f
        lines[id(f)] = lineno
        n = max(n, index + (1 if slot in ("between", "motion") else 0))
    graph = ChainFactorGraph(layout=layout or LINEAR, n=n, **slots)
    return graph, lines


def read_measurements(path, require_order=False):
    with open(path) as fh:
        return parse_measurements(fh.read(), require_order=require_order)


def format_trajectory(states, layout):
    """CSV with header ``index,x,y,theta[,vx,vy,bias]``; theta is 0 in linear mode."""
    states = np.atleast_2d(states)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["x", "y", "theta"] + [c for c in layout.columns() if c not in ("x", "y", "theta")]
    w.writerow(["index"] + cols)
    for i, row in enumerate(states, start=1):
        vals = list(row[:2]) + [row[2] if layout.has_theta else 0.0] + list(row[layout.pose_dim:])
        w.writerow([i] + ["%.17g" % v for v in vals])
    return buf.getvalue()


def parse_trajectory(text):
    """Return ``(indices, array)``; the array has the CSV's value columns."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0][:4]] != ["index", "x", "y", "theta"]:
        raise ParseError(1, "trajectory CSV must start with header 'index,x,y,theta'")
    width = len(rows[0])
    idx, vals = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise ParseError(lineno, f"expected {width} columns, got {len(row)}")
        try:
            idx.append(int(row[0]))
            vals.append([float(v) for v in row[1:]])
        except ValueError:
            raise ParseError(lineno, "malformed number") from None
        if len(idx) > 1 and idx[-1] <= idx[-2]:
            raise ParseError(lineno, "indices must be strictly increasing")
    return np.array(idx, dtype=int), np.array(vals, dtype=float).reshape(len(idx), width - 1)


def read_trajectory(path):
    with open(path) as fh:
        return parse_trajectory(fh.read())
