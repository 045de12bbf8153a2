"""Incremental smoothing on a chain Bayes tree.

On a chain the Bayes tree is itself a chain of cliques ``p(x_i | x_{i+1})``
rooted at the newest keyframe. Adding keyframe ``j + 1`` only invalidates the
cliques of ``x_{j-1}`` and ``x_j``: the sub-graph over ``x_{j-1}, x_j, x_{j+1}``
is rebuilt from the cached factor entering ``x_{j-1}`` plus the retained
original factors, and eliminated again. Everything older is left untouched.
"""

from dataclasses import dataclass, field

import numpy as np

from .eliminate import PARALLEL, SERIAL, ChainBayesNet, serial_sweep, solve_conditional, two_ended_sweep
from .errors import ChainViolationError, InvalidArgumentError
from .graph import check
from .solver import retract


@dataclass(eq=False)
class ChainBayesTree:
    graph: object
    conditionals: dict
    tau_cache: dict
    lin_points: np.ndarray
    last_steps: list = field(default_factory=list)

    @property
    def n(self):
        return self.graph.n

    @property
    def root_index(self):
        return next(i for i, c in self.conditionals.items() if c.is_root)

    def as_net(self):
        mode = SERIAL if self.root_index == self.n else PARALLEL
        return ChainBayesNet(dict(self.conditionals), self.root_index, mode, tuple(self.last_steps),
                             dict(self.tau_cache))


def init(graph, states):
    """Bootstrap a tree by one batch serial elimination."""
    check(graph)
    states = np.array(states, dtype=float)
    conds, taus, steps = serial_sweep(graph, states)
    return ChainBayesTree(graph, conds, taus, states, steps)


def update(tree, between=None, motion=None, gps=None, prior=None, x_init=None, mode=SERIAL):
    """Append keyframe ``n + 1`` and re-eliminate the three newest keyframes.

    ``between``/``motion`` must connect ``(n, n + 1)``; ``gps``/``prior`` (optional)
    sit on ``n + 1``. Returns a new tree; conditionals with index ``<= n - 2`` are
    carried over unchanged (same objects).
    """
    j = tree.n
    if between is None and motion is None:
        raise ChainViolationError(f"update needs a binary factor connecting {j} and {j + 1}")
    for f in (between, motion):
        if f is not None and f.keys != (j, j + 1):
            raise ChainViolationError(f"{f.type_name} factor connects {f.keys}, expected {(j, j + 1)}")
    graph = tree.graph.extend(gps=gps, between=between, motion=motion, prior=prior)
    d = graph.layout.state_dim
    if x_init is None:
        x_init = tree.lin_points[-1]
    x_init = np.asarray(x_init, dtype=float).reshape(d)
    states = np.vstack([tree.lin_points, x_init])

    first = max(1, j - 1)
    tau_in = tree.tau_cache.get(first) if first > 1 else None
    if mode == SERIAL:
        conds, taus, steps = serial_sweep(graph, states, first=first, tau_in=tau_in)
    elif mode == PARALLEL:
        # left-lane taus equal the serial ones, so the next update can use them
        conds, taus, steps, _ = two_ended_sweep(graph, states, first=first, tau_in=tau_in)
    else:
        raise InvalidArgumentError(f"unknown mode {mode!r}")

    kept = {i: c for i, c in tree.conditionals.items() if i < first}
    cache = {k: t for k, t in tree.tau_cache.items() if k <= first}
    cache.update(taus)
    return ChainBayesTree(graph, {**kept, **conds}, cache, states, steps)


def solve(tree):
    """Per-keyframe increments relative to ``tree.lin_points``.

    Solves the root clique first and walks outwards along parent links, which
    covers both serial windows (root ``x_n``) and two-ended ones (root in the
    middle of the window).
    """
    conds = tree.conditionals
    root = tree.root_index
    d = tree.graph.layout.state_dim
    delta = np.zeros((tree.n, d))
    for i in [root, *range(root - 1, 0, -1), *range(root + 1, tree.n + 1)]:
        c = conds[i]
        delta[i - 1] = solve_conditional(c, None if c.is_root else delta[c.parent - 1])
    return delta


def estimate(tree):
    """Current state estimate ``lin_points + solve(tree)`` (heading wrapped)."""
    return retract(tree.lin_points, solve(tree), tree.graph.layout)


def relinearize(tree, new_states):
    """Full re-elimination of the accumulated graph at ``new_states``."""
    new_states = np.asarray(new_states, dtype=float)
    if new_states.shape != tree.lin_points.shape:
        raise InvalidArgumentError(f"states shape {new_states.shape} != {tree.lin_points.shape}")
    return init(tree.graph, new_states)
