"""Dense block kernels: partial Householder QR, back substitution, oracle solver.

Matrices are plain ``numpy.ndarray`` values (float64). The rhs of a least-squares
system travels as the last column of an augmented matrix so the orthogonal
factor Q never has to be formed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SingularSystemError

EVALUATE = "Evaluate"
UPDATE = "Update"

# relative cutoff for a numerically zero pivot
PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class PhaseEntry:
    phase: str
    column: int
    rows: int
    cols: int


@dataclass(frozen=True)
class PartialQrResult:
    """First ``k`` rows of the R factor plus the un-eliminated remainder.

    ``r_top`` is ``k x (n + 1)`` (rhs folded into the last column) and ``tail`` is
    ``(m - k) x (n - k + 1)``.
    """

    r_top: np.ndarray
    tail: np.ndarray
    phase_log: tuple = field(default=())

    @property
    def k(self):
        return self.r_top.shape[0]


def _check_finite(a, name):
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")


def partial_qr(a, k):
    """Eliminate the first ``k`` value columns of the augmented matrix ``a``.

    ``a`` is ``m x (n + 1)`` with the rhs as its last column. Reflections are
    built column by column (Evaluate) and applied to the trailing columns
    (Update). Work is restricted to the active trailing block; entries below the
    diagonal of an eliminated column are written as exact zeros instead of being
    computed. Diagonal entries of the result are non-negative. A column that is
    already zero below and on the diagonal gets the identity reflector.
    """
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2:
        raise InvalidArgumentError(f"augmented matrix must be 2-D, got shape {a.shape}")
    m, ncols = a.shape
    n = ncols - 1
    if n < 1:
        raise InvalidArgumentError("augmented matrix needs at least one value column plus rhs")
    if not 1 <= k <= min(m, n):
        raise InvalidArgumentError(f"k={k} outside [1, min(m={m}, n={n})]")
    _check_finite(a, "augmented matrix")

    log = []
    for j in range(k):
        rows = m - j
        log.append(PhaseEntry(EVALUATE, j, rows, 1))
        x = a[j:, j]
        alpha = x[0]
        sigma = float(x[1:] @ x[1:])
        trailing = a[j:, j + 1:]
        if sigma == 0.0:
            if alpha < 0.0:
                # reflector e1: flips the sign of the pivot row
                a[j, j:] = -a[j, j:]
        else:
            mu = np.sqrt(alpha * alpha + sigma)
            v0 = alpha - mu if alpha <= 0.0 else -sigma / (alpha + mu)
            beta = 2.0 * v0 * v0 / (sigma + v0 * v0)
            v = x / v0
            v[0] = 1.0
            trailing -= beta * np.outer(v, v @ trailing)
            a[j, j] = mu
            a[j + 1:, j] = 0.0
        log.append(PhaseEntry(UPDATE, j, rows, ncols - j - 1))

    r_top = a[:k].copy()
    tail = a[k:, k:].copy()
    return PartialQrResult(r_top=r_top, tail=tail, phase_log=tuple(log))


def back_substitute(r, d):
    """Solve the upper-triangular system ``r @ x = d``."""
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    n = r.shape[0]
    if r.shape != (n, n) or d.shape != (n,):
        raise InvalidArgumentError(f"shape mismatch: r {r.shape}, d {d.shape}")
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        piv = r[i, i]
        scale = np.abs(r[i, i:]).max() if n else 0.0
        if piv == 0.0 or abs(piv) < PIVOT_RTOL * scale:
            raise SingularSystemError(f"zero diagonal entry at index {i}", index=i)
        x[i] = (d[i] - r[i, i + 1:] @ x[i + 1:]) / piv
    return x


def normal_solve_oracle(a, b):
    """Least-squares solution from the normal equations (test oracle).

    Independent of the QR path: forms ``A^T A`` and solves it by Cholesky.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.shape != (a.shape[0],):
        raise InvalidArgumentError(f"shape mismatch: a {a.shape}, b {b.shape}")
    h = a.T @ a
    g = a.T @ b
    try:
        c = np.linalg.cholesky(h)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("normal matrix is singular") from exc
    diag = np.abs(np.diag(c))
    if np.any(diag <= np.sqrt(PIVOT_RTOL) * max(diag.max(), 1.0)):
        raise SingularSystemError("normal matrix is numerically singular",
                                  index=int(np.argmin(diag)))
    y = np.linalg.solve(c, g)
    return np.linalg.solve(c.T, y)


def format_matrix(a):
    """Row-major text dump, ``%.17g`` space separated (golden-file format)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return "\n".join(" ".join("%.17g" % v for v in row) for row in a)


def parse_matrix(text):
    rows = [line.split() for line in text.strip().splitlines() if line.strip()]
    return np.array([[float(v) for v in row] for row in rows])
