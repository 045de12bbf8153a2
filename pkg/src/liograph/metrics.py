"""Relative pose error between an estimated and a ground-truth trajectory."""

import numpy as np

from .errors import InvalidArgumentError


def rpe(estimate, truth, indices=None, truth_indices=None):
    """RMSE and maximum of the consecutive-keyframe relative translation error.

    ``estimate`` and ``truth`` are ``(n, k)`` arrays with columns ``x, y[, theta, ...]``.
    For each pair ``(i, i + 1)`` the estimated and true relative translations are
    compared in the earlier truth frame (when a heading column is present).
    """
    est = np.atleast_2d(np.asarray(estimate, dtype=float))
    tru = np.atleast_2d(np.asarray(truth, dtype=float))
    if est.shape[0] != tru.shape[0]:
        raise InvalidArgumentError(f"trajectory lengths differ: {est.shape[0]} vs {tru.shape[0]}")
    if indices is not None and truth_indices is not None:
        if not np.array_equal(np.asarray(indices), np.asarray(truth_indices)):
            raise InvalidArgumentError("trajectory keyframe indices do not match")
    if est.shape[0] < 2:
        raise InvalidArgumentError("RPE needs at least two keyframes")
    diff = np.diff(est[:, :2], axis=0) - np.diff(tru[:, :2], axis=0)
    if tru.shape[1] >= 3:
        c, s = np.cos(tru[:-1, 2]), np.sin(tru[:-1, 2])
        diff = np.column_stack([c * diff[:, 0] + s * diff[:, 1], -s * diff[:, 0] + c * diff[:, 1]])
    err = np.hypot(diff[:, 0], diff[:, 1])
    return float(np.sqrt(np.mean(err ** 2))), float(err.max())
