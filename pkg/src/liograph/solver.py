"""Gauss-Newton outer loop."""

from dataclasses import dataclass, field

import numpy as np

from .blockla import normal_solve_oracle
from .eliminate import SERIAL, solve_linearized
from .errors import DivergenceError, InvalidArgumentError, SingularSystemError
from .factors import cost, wrap_angle
from .graph import assemble, check

MAX_HALVINGS = 10
ORACLE = "oracle"  # dense normal equations; for cross-checking only


@dataclass(frozen=True)
class SolveConfig:
    mode: str = SERIAL
    max_iterations: int = 50
    delta_tol: float = 1e-8
    cost_decrease_required: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if not self.delta_tol > 0:
            raise InvalidArgumentError("delta_tol must be > 0")


@dataclass
class SolveReport:
    iterations: int = 0
    final_cost: float = float("nan")
    cost_history: list = field(default_factory=list)
    delta_norm_history: list = field(default_factory=list)
    converged: bool = False

    def lines(self):
        """Text report: one ``iteration cost delta_inf`` line per linear solve."""
        out = ["# iteration cost delta_inf"]
        for i, dn in enumerate(self.delta_norm_history):
            out.append(f"{i + 1} {self.cost_history[i]:.17g} {dn:.17g}")
        out.append(f"# iterations={self.iterations} final_cost={self.final_cost:.17g} "
                   f"converged={int(self.converged)}")
        return out

    def to_text(self):
        return "\n".join(self.lines()) + "\n"


def retract(states, delta, layout):
    """``X + delta`` with heading components wrapped into (-pi, pi]."""
    states = np.asarray(states, dtype=float)
    delta = np.asarray(delta, dtype=float).reshape(states.shape)
    out = states + delta
    if layout.has_theta:
        out[:, 2] = wrap_angle(out[:, 2])
    return out


def linear_step(graph, states, mode=SERIAL, workers=1):
    """Gauss-Newton increment at ``states`` as an ``(n, d)`` array."""
    if mode == ORACLE:
        a, b = assemble(graph, states)
        return normal_solve_oracle(a, b).reshape(states.shape)
    return solve_linearized(graph, states, mode=mode, workers=workers)[0]


def _cost(graph, states):
    c = cost(graph.factors(), states, graph.layout)
    if not np.isfinite(c):
        raise DivergenceError(f"cost is not finite ({c})")
    return c


def gauss_newton(graph, x0, config=None):
    """Minimize the whitened least-squares cost of ``graph`` starting from ``x0``.

    Returns ``(x_star, report)``. With ``cost_decrease_required`` a step that
    raises the cost is halved up to ten times; if none of them helps the loop
    stops at the last accepted state.
    """
    config = config or SolveConfig()
    check(graph)
    x = np.array(x0, dtype=float)
    if x.shape != (graph.n, graph.layout.state_dim):
        raise InvalidArgumentError(f"x0 has shape {x.shape}, expected {(graph.n, graph.layout.state_dim)}")
    report = SolveReport()
    current = _cost(graph, x)

    for it in range(1, config.max_iterations + 1):
        try:
            delta = linear_step(graph, x, mode=config.mode, workers=config.workers)
        except SingularSystemError as exc:
            raise type(exc)(f"iteration {it}: {exc}", index=exc.index) from exc
        dnorm = float(np.abs(delta).max())
        report.cost_history.append(current)
        report.delta_norm_history.append(dnorm)
        if not np.isfinite(dnorm):
            raise DivergenceError(f"iteration {it}: non-finite step")
        if dnorm < config.delta_tol:
            report.converged = True
            break

        step = 1.0
        trial = retract(x, delta, graph.layout)
        trial_cost = _cost(graph, trial)
        if config.cost_decrease_required:
            halvings = 0
            while trial_cost > current and halvings < MAX_HALVINGS:
                step *= 0.5
                halvings += 1
                trial = retract(x, step * delta, graph.layout)
                trial_cost = _cost(graph, trial)
            if trial_cost > current:
                # no descent along delta: stationary up to rounding, or a genuine stall
                report.converged = trial_cost - current <= 1e-12 * (1.0 + current)
                break
        x, current = trial, trial_cost
        report.iterations += 1

    report.final_cost = current
    return x, report
