"""Chain-structured factor graph container."""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ChainViolationError, LayoutError
from .factors import LINEAR, BetweenFactor, GpsFactor, MotionFactor, PriorFactor, linearize

# per-keyframe factor order, used everywhere a deterministic row order matters
SLOTS = ("prior", "gps", "between", "motion")
UNARY_SLOTS = ("prior", "gps")
BINARY_SLOTS = ("between", "motion")


@dataclass(frozen=True)
class ChainFactorGraph:
    """Factors of a keyframe chain ``1..n``.

    Unary factors (``prior``, ``gps``) sit on one keyframe; binary factors
    (``between``, ``motion``) stored under key ``j`` connect ``j`` and ``j + 1``.
    Every slot is optional per index.
    """

    layout: object
    n: int
    gps: dict = field(default_factory=dict)
    between: dict = field(default_factory=dict)
    motion: dict = field(default_factory=dict)
    prior: dict = field(default_factory=dict)

    def slot(self, name):
        return getattr(self, name)

    def factors_at(self, j, slots=SLOTS):
        """Factors stored under keyframe ``j`` in canonical order."""
        out = []
        for name in slots:
            f = self.slot(name).get(j)
            if f is not None:
                out.append(f)
        return out

    def unary(self, j):
        return self.factors_at(j, UNARY_SLOTS)

    def binary(self, j):
        """Binary factors connecting ``j`` and ``j + 1``."""
        return self.factors_at(j, BINARY_SLOTS)

    def factors(self):
        out = []
        for j in range(1, self.n + 1):
            out.extend(self.factors_at(j))
        return out

    def __len__(self):
        return sum(len(self.slot(s)) for s in SLOTS)

    def extend(self, gps=None, between=None, motion=None, prior=None):
        """Return a graph with keyframe ``n + 1`` appended."""
        new = replace(self, n=self.n + 1, gps=dict(self.gps), between=dict(self.between),
                      motion=dict(self.motion), prior=dict(self.prior))
        j = new.n
        for name, f, key in (("gps", gps, j), ("prior", prior, j),
                             ("between", between, j - 1), ("motion", motion, j - 1)):
            if f is None:
                continue
            if f.index != key:
                raise ChainViolationError(f"{f.type_name} factor index {f.index} does not fit "
                                          f"keyframe {j} (expected {key})")
            new.slot(name)[key] = f
        return new

    def truncated(self, n):
        """The sub-chain over keyframes ``1..n``."""
        return replace(self, n=n,
                       gps={k: f for k, f in self.gps.items() if k <= n},
                       prior={k: f for k, f in self.prior.items() if k <= n},
                       between={k: f for k, f in self.between.items() if k < n},
                       motion={k: f for k, f in self.motion.items() if k < n})

    def row_dims(self):
        return [f.dim(self.layout) for f in self.factors()]


def validate(graph):
    """Return a list of invariant violations (empty when the graph is valid)."""
    problems = []
    n, layout = graph.n, graph.layout
    if n < 1:
        return ["empty graph: no keyframes"]
    for name in SLOTS:
        binary = name in BINARY_SLOTS
        hi = n - 1 if binary else n
        for key, f in sorted(graph.slot(name).items()):
            if f.index != key:
                problems.append(f"{name}[{key}]: factor index {f.index} does not match its key")
            if not 1 <= key <= hi:
                span = f"{key}-{key + 1}" if binary else f"{key}"
                problems.append(f"{name}[{key}]: references keyframe outside 1..{n} ({span})")
            try:
                f.check_layout(layout)
            except LayoutError as exc:
                problems.append(f"{name}[{key}]: {exc}")
    for j in range(1, n):
        if not graph.binary(j):
            problems.append(f"disconnected at {j}–{j + 1}")
    if not graph.gps and not graph.prior:
        problems.append("gauge unfixed: no unary factor")
    return problems


def check(graph):
    problems = validate(graph)
    if problems:
        raise ChainViolationError("invalid chain graph: " + "; ".join(problems))


def assemble(graph, states):
    """Stack every whitened block row into the full ``(A_b, eps_b)`` system.

    Block rows follow the canonical factor order, block columns are keyframes
    ``1..n``.
    """
    d = graph.layout.state_dim
    rows = [linearize(f, states, graph.layout) for f in graph.factors()]
    m = sum(r.rows for r in rows)
    a = np.zeros((m, graph.n * d))
    b = np.zeros(m)
    r0 = 0
    for row in rows:
        r1 = r0 + row.rows
        b[r0:r1] = row.residual
        for key, blk in row.blocks:
            a[r0:r1, (key - 1) * d:key * d] = blk
        r0 = r1
    return a, b


def toy_example():
    """Four linear-mode keyframes, GPS on each, between factors on each pair.

    Measurements are exact for ground truth positions (0,0), (1,0), (2,0), (3,0)
    and all covariances are identity.
    """
    eye = np.eye(2)
    truth = toy_truth()
    gps = {j: GpsFactor(index=j, sigma=eye, z=truth[j - 1]) for j in range(1, 5)}
    between = {j: BetweenFactor(index=j, sigma=eye, z=truth[j] - truth[j - 1]) for j in range(1, 4)}
    return ChainFactorGraph(layout=LINEAR, n=4, gps=gps, between=between)


def toy_truth():
    return np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])


__all__ = ["ChainFactorGraph", "validate", "check", "assemble", "toy_example", "toy_truth",
           "GpsFactor", "BetweenFactor", "MotionFactor", "PriorFactor", "SLOTS"]
