"""Measurement models, analytic Jacobians and covariance whitening.

Each keyframe is a single composite variable laid out as
``[x, y, (theta), (vx, vy), (bias)]`` according to a :class:`StateLayout`.
States for a chain of ``n`` keyframes are held in an ``(n, state_dim)`` array;
keyframe ``j`` (1-based) lives in row ``j - 1``.

Linearization follows the usual Gauss-Newton convention: for a factor with
measurement model ``h`` and covariance ``Sigma = L L^T`` the whitened block row
is ``A = L^-1 dh/dX`` and ``eps = L^-1 (z - h(X))``, so the step solves
``min ||A delta - eps||``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import CovarianceError, InvalidArgumentError, KeyframeIndexError, LayoutError


def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)


@dataclass(frozen=True)
class StateLayout:
    pose_dim: int = 3
    vel_dim: int = 0
    bias_dim: int = 0

    def __post_init__(self):
        if self.pose_dim not in (2, 3) or self.vel_dim not in (0, 2) or self.bias_dim not in (0, 1):
            raise LayoutError(f"unsupported layout {self}")

    @property
    def state_dim(self):
        return self.pose_dim + self.vel_dim + self.bias_dim

    @property
    def has_theta(self):
        return self.pose_dim == 3

    @property
    def theta_col(self):
        return 2 if self.has_theta else None

    @property
    def vel_cols(self):
        return tuple(range(self.pose_dim, self.pose_dim + self.vel_dim))

    @property
    def bias_col(self):
        return self.pose_dim + self.vel_dim if self.bias_dim else None

    @property
    def name(self):
        for key, lay in LAYOUTS.items():
            if lay == self:
                return key
        return f"custom{self.pose_dim}{self.vel_dim}{self.bias_dim}"

    @property
    def code(self):
        """One-byte layout code used by the encoded stream header."""
        return (self.pose_dim - 2) | (self.vel_dim // 2) << 1 | self.bias_dim << 2

    @classmethod
    def from_code(cls, code):
        if not 0 <= code < 8:
            raise LayoutError(f"invalid layout code {code}")
        return cls(2 + (code & 1), 2 * ((code >> 1) & 1), (code >> 2) & 1)

    @classmethod
    def named(cls, name):
        try:
            return LAYOUTS[name]
        except KeyError:
            raise LayoutError(f"unknown layout {name!r}; expected one of {sorted(LAYOUTS)}") from None

    def columns(self):
        cols = ["x", "y"]
        if self.has_theta:
            cols.append("theta")
        if self.vel_dim:
            cols += ["vx", "vy"]
        if self.bias_dim:
            cols.append("bias")
        return cols

    def pack(self, x, y, theta=0.0, vx=0.0, vy=0.0, bias=0.0):
        """Build one keyframe state vector."""
        v = [x, y]
        if self.has_theta:
            v.append(float(wrap_angle(theta)))
        if self.vel_dim:
            v += [vx, vy]
        if self.bias_dim:
            v.append(bias)
        return np.array(v, dtype=float)


LINEAR = StateLayout(2, 0, 0)
POSE = StateLayout(3, 0, 0)
FULL = StateLayout(3, 2, 1)
LAYOUTS = {"linear": LINEAR, "pose": POSE, "full": FULL}


# Column kinds describing how a whitened Jacobian column is determined by the
# factor's structure. They drive both linearize() and the compressed storage tier.
ZERO = "zero"     # structurally zero
UNIT = "unit"     # raw Jacobian column is e_k -> whitened column is W[:, k]
NEG = "neg"       # exact negation of the same column of the other block
DENSE = "dense"   # general; rows above `first_row` are structurally zero


@dataclass(frozen=True)
class ColumnSpec:
    kind: str
    arg: int = 0


def _spd_whitener(sigma, dim):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (dim, dim):
        raise CovarianceError(f"covariance must be {dim}x{dim}, got {sigma.shape}")
    if not np.all(np.isfinite(sigma)) or not np.allclose(sigma, sigma.T, rtol=1e-12, atol=0.0):
        raise CovarianceError("covariance must be finite and symmetric")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise CovarianceError("covariance is not positive definite") from None
    return solve_triangular(chol, np.eye(dim), lower=True)


@dataclass(frozen=True, eq=False)
class Factor:
    """Common base: one measurement on one keyframe or two consecutive ones."""

    index: int
    sigma: np.ndarray
    whitener: np.ndarray = field(init=False, repr=False)

    type_name = "factor"
    type_tag = 0

    def _setup(self, dim):
        object.__setattr__(self, "sigma", np.array(self.sigma, dtype=float))
        object.__setattr__(self, "whitener", _spd_whitener(self.sigma, dim))

    @property
    def keys(self):
        raise NotImplementedError

    def dim(self, layout):
        raise NotImplementedError

    def check_layout(self, layout):
        pass

    def error(self, xs, layout):
        """Raw residual ``z - h(X)`` for the attached keyframe states."""
        raise NotImplementedError

    def jacobians(self, xs, layout):
        """Derivative of the measurement model ``h`` w.r.t. each attached state."""
        raise NotImplementedError

    def structure(self, layout):
        """Per-block column specs (see ZERO/UNIT/NEG/DENSE)."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class GpsFactor(Factor):
    z: np.ndarray = None

    type_name = "GPS"
    type_tag = 1

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float).reshape(2))
        self._setup(2)

    @property
    def keys(self):
        return (self.index,)

    def dim(self, layout):
        return 2

    def error(self, xs, layout):
        return self.z - xs[0][:2]

    def jacobians(self, xs, layout):
        jac = np.zeros((2, layout.state_dim))
        jac[0, 0] = jac[1, 1] = 1.0
        return [jac]

    def structure(self, layout):
        cols = [ColumnSpec(ZERO)] * layout.state_dim
        cols[0], cols[1] = ColumnSpec(UNIT, 0), ColumnSpec(UNIT, 1)
        return [cols]


@dataclass(frozen=True, eq=False)
class PriorFactor(Factor):
    """Unary prior on a whole keyframe state; anchors components GPS cannot see."""

    z: np.ndarray = None

    type_name = "PRIOR"
    type_tag = 4

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float).ravel())
        self._setup(len(self.z))

    @property
    def keys(self):
        return (self.index,)

    def dim(self, layout):
        return layout.state_dim

    def check_layout(self, layout):
        if len(self.z) != layout.state_dim:
            raise LayoutError(f"prior at {self.index} has {len(self.z)} entries, "
                              f"layout needs {layout.state_dim}")

    def error(self, xs, layout):
        r = self.z - xs[0]
        if layout.has_theta:
            r[2] = wrap_angle(r[2])
        return r

    def jacobians(self, xs, layout):
        return [np.eye(layout.state_dim)]

    def structure(self, layout):
        return [[ColumnSpec(UNIT, c) for c in range(layout.state_dim)]]


@dataclass(frozen=True, eq=False)
class BetweenFactor(Factor):
    """Relative pose of keyframe ``index + 1`` seen from keyframe ``index``."""

    z: np.ndarray = None

    type_name = "BETWEEN"
    type_tag = 2

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).ravel().copy()
        if len(z) == 3:
            z[2] = wrap_angle(z[2])
        elif len(z) != 2:
            raise InvalidArgumentError(f"between measurement must have 2 or 3 entries, got {len(z)}")
        object.__setattr__(self, "z", z)
        self._setup(len(z))

    @property
    def keys(self):
        return (self.index, self.index + 1)

    def dim(self, layout):
        return layout.pose_dim

    def check_layout(self, layout):
        if len(self.z) != layout.pose_dim:
            raise LayoutError(f"between at {self.index} has {len(self.z)} entries, "
                              f"layout pose_dim is {layout.pose_dim}")

    def predict(self, xs, layout):
        x0, x1 = xs
        dt = x1[:2] - x0[:2]
        if not layout.has_theta:
            return dt
        c, s = np.cos(x0[2]), np.sin(x0[2])
        return np.array([c * dt[0] + s * dt[1], -s * dt[0] + c * dt[1], x1[2] - x0[2]])

    def error(self, xs, layout):
        r = self.z - self.predict(xs, layout)
        if layout.has_theta:
            r[2] = wrap_angle(r[2])
        return r

    def jacobians(self, xs, layout):
        d = layout.state_dim
        j0 = np.zeros((layout.pose_dim, d))
        j1 = np.zeros((layout.pose_dim, d))
        if not layout.has_theta:
            j0[:, :2] = -np.eye(2)
            j1[:, :2] = np.eye(2)
            return [j0, j1]
        x0, x1 = xs
        dx, dy = x1[:2] - x0[:2]
        c, s = np.cos(x0[2]), np.sin(x0[2])
        rot_t = np.array([[c, s], [-s, c]])
        j0[:2, :2] = -rot_t
        j1[:2, :2] = rot_t
        j0[0, 2] = -s * dx + c * dy
        j0[1, 2] = -c * dx - s * dy
        j0[2, 2] = -1.0
        j1[2, 2] = 1.0
        return [j0, j1]

    def structure(self, layout):
        d = layout.state_dim
        b0 = [ColumnSpec(ZERO)] * d
        b1 = [ColumnSpec(ZERO)] * d
        if layout.has_theta:
            b1[0] = b1[1] = ColumnSpec(DENSE, 0)
            b1[2] = ColumnSpec(UNIT, 2)
            b0[2] = ColumnSpec(DENSE, 0)
        else:
            b1[0], b1[1] = ColumnSpec(UNIT, 0), ColumnSpec(UNIT, 1)
        b0[0] = b0[1] = ColumnSpec(NEG)
        return [b0, b1]


@dataclass(frozen=True, eq=False)
class MotionFactor(Factor):
    """Constant-velocity kinematics with a bias random walk.

    Residual rows: position consistency (2), velocity consistency (2), bias walk
    (``bias_dim``). ``z`` holds the measured increments (zeros by default).
    """

    dt: float = 1.0
    z: np.ndarray = None

    type_name = "MOTION"
    type_tag = 3

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidArgumentError(f"motion dt must be > 0, got {self.dt}")
        dim = np.asarray(self.sigma).shape[0]
        z = np.zeros(dim) if self.z is None else np.asarray(self.z, dtype=float).ravel()
        if len(z) != dim:
            raise InvalidArgumentError(f"motion measurement has {len(z)} entries, covariance is {dim}x{dim}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "dt", float(self.dt))
        self._setup(dim)

    @property
    def keys(self):
        return (self.index, self.index + 1)

    def dim(self, layout):
        return 2 + layout.vel_dim + layout.bias_dim

    def check_layout(self, layout):
        if layout.vel_dim == 0:
            raise LayoutError(f"motion factor at {self.index} needs a layout with velocity")
        if len(self.z) != self.dim(layout):
            raise LayoutError(f"motion factor at {self.index} has dimension {len(self.z)}, "
                              f"layout needs {self.dim(layout)}")

    def predict(self, xs, layout):
        x0, x1 = xs
        v = list(layout.vel_cols)
        out = [x1[:2] - x0[:2] - x0[v] * self.dt, x1[v] - x0[v]]
        if layout.bias_dim:
            out.append([x1[layout.bias_col] - x0[layout.bias_col]])
        return np.concatenate(out)

    def error(self, xs, layout):
        return self.z - self.predict(xs, layout)

    def jacobians(self, xs, layout):
        self.check_layout(layout)
        m, d = self.dim(layout), layout.state_dim
        j0, j1 = np.zeros((m, d)), np.zeros((m, d))
        vx, vy = layout.vel_cols
        for row, col in ((0, 0), (1, 1), (2, vx), (3, vy)):
            j1[row, col] = 1.0
            j0[row, col] = -1.0
        j0[0, vx] = j0[1, vy] = -self.dt
        if layout.bias_dim:
            j1[4, layout.bias_col] = 1.0
            j0[4, layout.bias_col] = -1.0
        return [j0, j1]

    def structure(self, layout):
        d = layout.state_dim
        vx, vy = layout.vel_cols
        b0 = [ColumnSpec(ZERO)] * d
        b1 = [ColumnSpec(ZERO)] * d
        b1[0], b1[1] = ColumnSpec(UNIT, 0), ColumnSpec(UNIT, 1)
        b1[vx], b1[vy] = ColumnSpec(UNIT, 2), ColumnSpec(UNIT, 3)
        b0[0] = b0[1] = ColumnSpec(NEG)
        b0[vx], b0[vy] = ColumnSpec(DENSE, 0), ColumnSpec(DENSE, 1)
        if layout.bias_dim:
            b1[layout.bias_col] = ColumnSpec(UNIT, 4)
            b0[layout.bias_col] = ColumnSpec(NEG)
        return [b0, b1]


@dataclass(frozen=True, eq=False)
class WhitenedBlockRow:
    """Whitened residual and per-keyframe Jacobian blocks of one factor."""

    residual: np.ndarray
    blocks: tuple  # ((keyframe index, block), ...)
    type_name: str = ""

    @property
    def rows(self):
        return len(self.residual)

    def block(self, index):
        for key, blk in self.blocks:
            if key == index:
                return blk
        return None


def _states_for(factor, states):
    n = len(states)
    out = []
    for key in factor.keys:
        if not 1 <= key <= n:
            raise KeyframeIndexError(f"{factor.type_name} factor at {factor.index} references "
                                     f"keyframe {key}, have 1..{n}")
        out.append(np.asarray(states[key - 1], dtype=float))
    return out


def residual(factor, states, layout):
    """Raw residual ``z - h(X)``; angle components wrapped into (-pi, pi]."""
    factor.check_layout(layout)
    return factor.error(_states_for(factor, states), layout)


def whiten_columns(w, jacs, specs):
    """Whiten raw Jacobian blocks, writing structurally known columns exactly."""
    blocks = [w @ j for j in jacs]
    for b, cols in enumerate(specs):
        for c, spec in enumerate(cols):
            if spec.kind == ZERO:
                blocks[b][:, c] = 0.0
            elif spec.kind == UNIT:
                blocks[b][:, c] = w[:, spec.arg]
            elif spec.kind == DENSE:
                blocks[b][:spec.arg, c] = 0.0
    # NEG last so the partner column is already final
    for b, cols in enumerate(specs):
        for c, spec in enumerate(cols):
            if spec.kind == NEG:
                blocks[b][:, c] = -blocks[1 - b][:, c]
    return [blk + 0.0 for blk in blocks]  # canonical +0.0 for structural zeros


def linearize(factor, states, layout):
    xs = _states_for(factor, states)
    factor.check_layout(layout)
    w = factor.whitener
    eps = w @ factor.error(xs, layout)
    blocks = whiten_columns(w, factor.jacobians(xs, layout), factor.structure(layout))
    return WhitenedBlockRow(residual=eps + 0.0, blocks=tuple(zip(factor.keys, blocks)),
                            type_name=factor.type_name)


def mahalanobis(factor, states, layout):
    r = residual(factor, states, layout)
    return float(r @ np.linalg.solve(factor.sigma, r))


def cost(factors, states, layout):
    """Sum of squared whitened residuals."""
    total = 0.0
    for f in factors:
        e = f.whitener @ residual(f, states, layout)
        total += float(e @ e)
    return total
