"""Analytic cycle model of the pipelined partial-QR block.

One Evaluate unit builds the Householder reflector of column ``j`` while
``n_u`` time-multiplexed Update units apply the reflector of column ``j - 1``
to the trailing block. Cost is linear in the active entries; rows and columns
already known to be zero are never touched.
"""

import csv
import io
from dataclasses import dataclass, field

from .eliminate import PARALLEL, SERIAL, abar_trace
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class PipelineConfig:
    n_u: int = 1
    eval_cycles_per_row: float = 1.0
    update_cycles_per_entry: float = 1.0
    dual_lane: bool = True

    def __post_init__(self):
        if int(self.n_u) != self.n_u or self.n_u < 1:
            raise InvalidArgumentError(f"n_u must be a positive integer, got {self.n_u}")
        if not (self.eval_cycles_per_row > 0 and self.update_cycles_per_entry > 0):
            raise InvalidArgumentError("unit costs must be positive")


@dataclass
class CycleReport:
    mode: str
    total_cycles: float
    per_step: list = field(default_factory=list)  # (step, indices, rows, cols, cycles)
    qr_cycles: float = 0.0
    backsub_cycles: float = 0.0
    utilization: float = 0.0

    @property
    def max_abar_rows(self):
        return max(s[2] for s in self.per_step)


def _phases(m, n, k, cfg):
    if not (isinstance(m, int) and isinstance(n, int) and isinstance(k, int)):
        raise InvalidArgumentError("m, n, k must be integers")
    if not 1 <= k <= min(m, n):
        raise InvalidArgumentError(f"k={k} outside [1, min(m={m}, n={n})]")
    ev, up = [], []
    for j in range(1, k + 1):
        rows = m - j + 1
        ev.append(cfg.eval_cycles_per_row * rows)
        up.append(cfg.update_cycles_per_entry * rows * (n - j + 1) / cfg.n_u)
    return ev, up


def qr_cycles(m, n, k, cfg):
    """Pipelined cycles to eliminate ``k`` of the ``n`` value columns of an ``m``-row matrix.

    ``E_1 + sum_{j<k} max(U_j, E_{j+1}) + U_k``: the Evaluate of the next column
    overlaps the Update of the current one.
    """
    ev, up = _phases(m, n, k, cfg)
    return ev[0] + sum(max(up[j], ev[j + 1]) for j in range(k - 1)) + up[-1]


def _update_work(m, n, k, cfg):
    return sum(_phases(m, n, k, cfg)[1])


def _conditional_entries(d, has_parent):
    return d * (d + 1) // 2 + (d * d if has_parent else 0)


def elimination_cycles(graph, mode, cfg):
    """Cycle report for eliminating and back-substituting ``graph``.

    Serial: steps add up. Parallel with ``dual_lane``: a stage costs the slower
    of its two lanes. Back substitution costs one Update-entry per stored R
    entry; in dual-lane parallel mode both sides after the root proceed together.
    """
    steps = abar_trace(graph, mode)
    d = graph.layout.state_dim
    by_stage = {}
    for s in steps:
        by_stage.setdefault(s.stage, []).append(s)
    dual = mode == PARALLEL and cfg.dual_lane

    per_step, qr_total, busy = [], 0.0, 0.0
    for stage in sorted(by_stage):
        group = by_stage[stage]
        costs = [qr_cycles(s.rows, s.cols, d, cfg) for s in group]
        busy += sum(_update_work(s.rows, s.cols, d, cfg) for s in group)
        c = max(costs) if dual else sum(costs)
        qr_total += c
        per_step.append((stage, tuple(s.index for s in group), max(s.rows for s in group),
                         max(s.cols for s in group), c))

    root = steps[-1].index
    n = graph.n
    if dual:
        lane = max(root - 1, n - root)
        bs = _conditional_entries(d, False) + lane * _conditional_entries(d, True)
    else:
        bs = _conditional_entries(d, False) + (n - 1) * _conditional_entries(d, True)
    bs *= cfg.update_cycles_per_entry
    lanes = 2 if dual else 1
    util = busy / (lanes * qr_total) if qr_total else 0.0
    return CycleReport(mode, qr_total + bs, per_step, qr_total, bs, min(util, 1.0))


BENCH_COLUMNS = ("mode", "n_u", "total_cycles", "max_abar_rows", "utilization")


def sweep(graph, n_u_values, modes=(SERIAL, PARALLEL), base=None):
    """Evaluate the model over a grid of ``n_u`` for each mode (bench table rows)."""
    n_u_values = list(n_u_values)
    if not n_u_values:
        raise InvalidArgumentError("empty n_u grid")
    base = base or PipelineConfig()
    rows = []
    for mode in modes:
        for n_u in n_u_values:
            cfg = PipelineConfig(n_u, base.eval_cycles_per_row, base.update_cycles_per_entry,
                                 base.dual_lane)
            rep = elimination_cycles(graph, mode, cfg)
            rows.append({"mode": mode, "n_u": n_u, "total_cycles": rep.total_cycles,
                         "max_abar_rows": rep.max_abar_rows, "utilization": rep.utilization})
    return rows


def table_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "total_cycles": f"{r['total_cycles']:.6g}",
                    "utilization": f"{r['utilization']:.6f}"})
    return buf.getvalue()
