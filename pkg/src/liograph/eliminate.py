"""Variable elimination on chain factor graphs.

Serial elimination sweeps ``x1 -> xn`` and yields a Bayes net rooted at ``xn``.
Parallel (two-ended) elimination removes the pair ``(i, n + 1 - i)`` per stage
until the two frontiers share a factor; the remaining middle variable(s) are
eliminated last and the Bayes net is rooted in the middle.

Each elimination step stacks the factors touching the eliminated variable into
an augmented matrix ``[A_elim | A_sep | rhs]`` and runs a partial QR over the
eliminated columns: the top rows are the conditional, the remainder is the new
factor ``tau`` on the separator.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import blockla
from .errors import ChainViolationError, InvalidArgumentError, SingularSystemError, UnderConstrainedError
from .factors import linearize
from .graph import check

SERIAL = "serial"
PARALLEL = "parallel"


@dataclass(frozen=True, eq=False)
class ChainConditional:
    """Gaussian conditional ``R x_i + T x_parent = d`` (square-root form)."""

    index: int
    r_block: np.ndarray
    t_block: np.ndarray  # None for the root
    d_block: np.ndarray
    parent: int = None

    @property
    def is_root(self):
        return self.parent is None


@dataclass(frozen=True, eq=False)
class TauFactor:
    """Separator factor left over after eliminating ``source``; lives on ``on_index``."""

    on_index: int
    a_block: np.ndarray
    rhs: np.ndarray
    source: int = None

    @property
    def rows(self):
        return self.a_block.shape[0]


@dataclass(frozen=True)
class EliminationStep:
    stage: int
    mode: str
    index: int
    separator: int
    rows: int
    cols: int  # value columns of the augmented matrix (rhs excluded)
    phase_log: tuple = field(default=(), repr=False, compare=False)

    def trace_line(self):
        return f"{self.stage} {self.mode} {self.index} {self.rows}x{self.cols + 1}"


@dataclass(frozen=True, eq=False)
class ChainBayesNet:
    conditionals: dict
    root_index: int
    mode: str
    steps: tuple = ()
    tau_cache: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.conditionals)

    @property
    def stages(self):
        out = {}
        for s in self.steps:
            out.setdefault(s.stage, []).append(s.index)
        return [tuple(out[k]) for k in sorted(out)]

    def trace(self):
        return [s.trace_line() for s in self.steps]

    def stacked_r(self):
        """The square-root information matrix with block rows in keyframe order."""
        n = self.n
        d = self.conditionals[self.root_index].r_block.shape[0]
        r = np.zeros((n * d, n * d))
        rhs = np.zeros(n * d)
        for i, c in self.conditionals.items():
            rows = slice((i - 1) * d, i * d)
            r[rows, rows] = c.r_block
            rhs[rows] = c.d_block
            if c.t_block is not None:
                r[rows, (c.parent - 1) * d:c.parent * d] = c.t_block
        return r, rhs


def build_abar(index, separator, taus, factors, states, layout):
    """Stack tau rows, unary and binary factors on ``index`` into an augmented matrix.

    Column order is (eliminated variable | separator variable | rhs); the
    separator block is omitted when ``separator`` is None.
    """
    d = layout.state_dim
    width = d if separator is None else 2 * d
    pieces = []
    for tau in taus:
        if tau.on_index != index:
            raise ChainViolationError(f"tau on {tau.on_index} used to eliminate {index}")
        pieces.append((tau.a_block, None, tau.rhs))
    for f in factors:
        allowed = {index} if separator is None else {index, separator}
        if not set(f.keys) <= allowed or index not in f.keys:
            raise ChainViolationError(f"{f.type_name} factor on {f.keys} does not touch only "
                                      f"{index} and its separator {separator}")
        row = linearize(f, states, layout)
        pieces.append((row.block(index), row.block(separator), row.residual))
    if not pieces:
        raise InvalidArgumentError(f"no factors to eliminate keyframe {index}")
    m = sum(len(p[2]) for p in pieces)
    abar = np.zeros((m, width + 1))
    r0 = 0
    for own, sep, rhs in pieces:
        r1 = r0 + len(rhs)
        abar[r0:r1, :d] = own
        if sep is not None:
            abar[r0:r1, d:width] = sep
        abar[r0:r1, -1] = rhs
        r0 = r1
    return abar


def eliminate_one(index, separator, taus, factors, states, layout, stage=0, mode=SERIAL):
    """Eliminate one keyframe; returns (conditional, tau on separator or None, step)."""
    d = layout.state_dim
    abar = build_abar(index, separator, taus, factors, states, layout)
    if abar.shape[0] < d:
        raise UnderConstrainedError(f"keyframe {index}: {abar.shape[0]} rows for {d} unknowns",
                                    index=index)
    res = blockla.partial_qr(abar, d)
    r_block = res.r_top[:, :d]
    col_norms = np.linalg.norm(abar[:, :d], axis=0)
    diag = np.abs(np.diag(r_block))
    bad = (diag == 0.0) | (diag < blockla.PIVOT_RTOL * col_norms)
    if np.any(bad):
        raise UnderConstrainedError(f"keyframe {index} is under-constrained "
                                    f"(zero pivot in component {int(np.argmax(bad))})", index=index)
    if separator is None:
        cond = ChainConditional(index, r_block, None, res.r_top[:, -1], None)
        tau = None
    else:
        cond = ChainConditional(index, r_block, res.r_top[:, d:2 * d], res.r_top[:, -1], separator)
        tau = TauFactor(separator, res.tail[:, :-1], res.tail[:, -1], source=index)
    step = EliminationStep(stage, mode, index, separator, abar.shape[0], abar.shape[1] - 1,
                           res.phase_log)
    return cond, tau, step


def serial_sweep(graph, states, first=1, tau_in=None, stage0=0):
    """Eliminate ``first..n`` in order; ``tau_in`` is the cached factor entering ``first``."""
    n, layout = graph.n, graph.layout
    conds, taus, steps = {}, {}, []
    tau = tau_in
    for i in range(first, n + 1):
        sep = i + 1 if i < n else None
        factors = graph.unary(i) + (graph.binary(i) if sep else [])
        cond, tau, step = eliminate_one(i, sep, [tau] if tau is not None else [], factors,
                                        states, layout, stage0 + i - first + 1, SERIAL)
        conds[i] = cond
        steps.append(step)
        if tau is not None:
            taus[sep] = tau
    return conds, taus, steps


def eliminate_serial(graph, states):
    """Forward elimination ``x1 -> xn``; the returned net is rooted at ``xn``."""
    check(graph)
    conds, taus, steps = serial_sweep(graph, states)
    return ChainBayesNet(conds, graph.n, SERIAL, tuple(steps), taus)


def _run_pair(jobs, pool=None):
    if pool is None:
        return [fn() for fn in jobs]
    futures = [pool.submit(fn) for fn in jobs]
    return [f.result() for f in futures]


def two_ended_sweep(graph, states, first=1, tau_in=None, workers=1):
    """Eliminate ``first..n`` from both ends towards the middle.

    Returns ``(conditionals, left_taus, steps, cache)``. ``left_taus`` maps
    separator index to the factors produced by the left lane, which coincide with
    the serial sweep's; ``cache`` holds every tau keyed ``(separator, side)``.
    """
    n, layout = graph.n, graph.layout
    conds, left_taus, steps, cache = {}, {}, [], {}
    left, right = first, n
    left_tau, right_tau = tau_in, None
    stage = 0

    def lane(idx, sep, tau, factors, st):
        return lambda: eliminate_one(idx, sep, [] if tau is None else [tau], factors,
                                     states, layout, st, PARALLEL)

    pool = ThreadPoolExecutor(max_workers=2) if workers > 1 and right - left >= 2 else None
    while right - left >= 2:
        stage += 1
        jobs = [lane(left, left + 1, left_tau, graph.unary(left) + graph.binary(left), stage),
                lane(right, right - 1, right_tau, graph.unary(right) + graph.binary(right - 1), stage)]
        (cl, left_tau, sl), (cr, right_tau, sr) = _run_pair(jobs, pool)
        conds[left], conds[right] = cl, cr
        steps += [sl, sr]
        left_taus[left + 1] = cache[(left + 1, "left")] = left_tau
        cache[(right - 1, "right")] = right_tau
        left += 1
        right -= 1
    if pool is not None:
        pool.shutdown()

    if right == left + 1:
        stage += 1
        cl, left_tau, sl = lane(left, right, left_tau, graph.unary(left) + graph.binary(left), stage)()
        conds[left] = cl
        steps.append(sl)
        left_taus[right] = cache[(right, "left")] = left_tau
        left = right
    taus = [t for t in (left_tau, right_tau) if t is not None]
    root, _, sroot = eliminate_one(left, None, taus, graph.unary(left), states, layout,
                                   stage + 1, PARALLEL)
    conds[left] = root
    steps.append(sroot)
    return dict(sorted(conds.items())), left_taus, steps, cache


def eliminate_parallel(graph, states, workers=1):
    """Two-ended elimination towards the middle.

    Stage ``s`` eliminates ``x_s`` (separator ``x_{s+1}``) and ``x_{n+1-s}``
    (separator ``x_{n-s}``) while the two are not adjacent. Then, for odd ``n``
    the middle variable is the root; for even ``n`` the left-middle is
    eliminated first and the right-middle becomes the root. With ``workers > 1``
    the two lanes of a stage run on separate threads; results are identical.
    """
    check(graph)
    conds, _, steps, cache = two_ended_sweep(graph, states, workers=workers)
    root = next(i for i, c in conds.items() if c.is_root)
    return ChainBayesNet(conds, root, PARALLEL, tuple(steps), cache)


def abar_trace(graph, mode=SERIAL):
    """Elimination steps with A-bar dimensions derived from structure alone.

    Matches the ``steps`` of :func:`eliminate_serial` / :func:`eliminate_parallel`
    without doing any arithmetic (a tau carries ``rows - state_dim`` rows).
    """
    check(graph)
    layout, n = graph.layout, graph.n
    d = layout.state_dim

    def step(idx, sep, tau_rows, binary_key, stage):
        rows = tau_rows + sum(f.dim(layout) for f in graph.unary(idx))
        if sep is not None:
            rows += sum(f.dim(layout) for f in graph.binary(binary_key))
        cols = d if sep is None else 2 * d
        return EliminationStep(stage, mode, idx, sep, rows, cols), rows - d

    steps = []
    if mode == SERIAL:
        tau = 0
        for i in range(1, n + 1):
            sep = i + 1 if i < n else None
            st, tau = step(i, sep, tau, i, i)
            steps.append(st)
        return steps
    if mode != PARALLEL:
        raise InvalidArgumentError(f"unknown elimination mode {mode!r}")
    left, right, lt, rt, stage = 1, n, 0, 0, 0
    while right - left >= 2:
        stage += 1
        sl, lt = step(left, left + 1, lt, left, stage)
        sr, rt = step(right, right - 1, rt, right - 1, stage)
        steps += [sl, sr]
        left, right = left + 1, right - 1
    if right == left + 1:
        stage += 1
        sl, lt = step(left, right, lt, left, stage)
        steps.append(sl)
        left = right
    steps.append(step(left, None, lt + rt, None, stage + 1)[0])
    return steps


def eliminate(graph, states, mode=SERIAL, workers=1):
    if mode == SERIAL:
        return eliminate_serial(graph, states)
    if mode == PARALLEL:
        return eliminate_parallel(graph, states, workers=workers)
    raise InvalidArgumentError(f"unknown elimination mode {mode!r}")


def solve_conditional(cond, parent_delta):
    rhs = cond.d_block if cond.t_block is None else cond.d_block - cond.t_block @ parent_delta
    try:
        return blockla.back_substitute(cond.r_block, rhs)
    except SingularSystemError as exc:
        raise SingularSystemError(f"singular conditional for keyframe {cond.index}: {exc}",
                                  index=cond.index) from exc


def back_substitute_serial(net):
    """Solve ``x_n`` first, then ``x_{n-1} .. x_1`` using each parent's solution."""
    if net.mode != SERIAL:
        raise InvalidArgumentError("back_substitute_serial needs a serial-mode Bayes net")
    n = net.n
    d = net.conditionals[net.root_index].r_block.shape[0]
    delta = np.zeros((n, d))
    for i in range(n, 0, -1):
        c = net.conditionals[i]
        delta[i - 1] = solve_conditional(c, None if c.is_root else delta[c.parent - 1])
    return delta


def back_substitute_parallel(net, workers=1):
    """Solve the middle root, then sweep outwards on both sides independently."""
    if net.mode != PARALLEL:
        raise InvalidArgumentError("back_substitute_parallel needs a parallel-mode Bayes net")
    n, root = net.n, net.root_index
    d = net.conditionals[root].r_block.shape[0]
    delta = np.zeros((n, d))
    delta[root - 1] = solve_conditional(net.conditionals[root], None)

    def sweep(indices):
        def run():
            for i in indices:
                c = net.conditionals[i]
                delta[i - 1] = solve_conditional(c, delta[c.parent - 1])
        return run

    # the two sweeps write disjoint rows of delta
    jobs = [sweep(range(root - 1, 0, -1)), sweep(range(root + 1, n + 1))]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            _run_pair(jobs, pool)
    else:
        _run_pair(jobs)
    return delta


def back_substitute(net, workers=1):
    if net.mode == PARALLEL:
        return back_substitute_parallel(net, workers=workers)
    return back_substitute_serial(net)


def fill_in_count(net):
    """Off-diagonal blocks of the stacked R (one per non-root conditional)."""
    return sum(1 for c in net.conditionals.values() if c.t_block is not None)


def solve_linearized(graph, states, mode=SERIAL, workers=1):
    """Gauss-Newton step at ``states``: eliminate then back-substitute."""
    net = eliminate(graph, states, mode=mode, workers=workers)
    return back_substitute(net, workers=workers), net
