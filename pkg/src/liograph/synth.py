"""Synthetic keyframe chains with known ground truth."""

import numpy as np

from .factors import BetweenFactor, GpsFactor, MotionFactor, PriorFactor
from .graph import ChainFactorGraph

# covariance stddevs used when the corresponding noise is zero
NOMINAL_SIGMA = {"gps": 0.1, "lidar": 0.05, "motion": 0.05, "prior": 0.01}
DEFAULT_NOISE = {"gps": 0.1, "lidar": 0.05, "motion": 0.05, "prior": 0.0}


def ground_truth(n, layout, dt=1.0, speed=1.0, bias=0.02):
    """Smooth path with a sinusoidal heading; one row per keyframe."""
    k = np.arange(n)
    theta = 0.5 * np.sin(0.3 * k)
    pos = np.zeros((n, 2))
    for i in range(1, n):
        pos[i] = pos[i - 1] + dt * speed * np.array([np.cos(theta[i - 1]), np.sin(theta[i - 1])])
    cols = [pos]
    if layout.has_theta:
        cols.append(theta[:, None])
    if layout.vel_dim:
        vel = np.empty((n, 2))
        vel[:-1] = np.diff(pos, axis=0) / dt
        vel[-1] = vel[-2] if n > 1 else speed * np.array([1.0, 0.0])
        cols.append(vel)
    if layout.bias_dim:
        cols.append(np.full((n, 1), bias))
    return np.hstack(cols)


def _sigma(noise, key):
    s = noise.get(key, 0.0)
    return s if s > 0 else NOMINAL_SIGMA[key]


def generate(n, layout, noise=None, seed=0, dt=1.0, gps_every=1):
    """Return ``(graph, truth)`` for an ``n``-keyframe chain.

    Every measurement is the true value plus Gaussian noise of the given stddev;
    the covariance written into each factor uses that stddev (or the nominal one
    when the noise is zero). Layouts with a heading get a prior on keyframe 1;
    layouts with velocity get motion factors.
    """
    noise = {**DEFAULT_NOISE, **(noise or {})}
    rng = np.random.default_rng(seed)
    truth = ground_truth(n, layout, dt=dt)

    def noisy(value, key):
        value = np.asarray(value, dtype=float)
        s = noise.get(key, 0.0)
        return value + rng.normal(0.0, s, size=value.shape) if s > 0 else value

    gps, between, motion, prior = {}, {}, {}, {}
    s_gps, s_lidar, s_motion = _sigma(noise, "gps"), _sigma(noise, "lidar"), _sigma(noise, "motion")
    for j in range(1, n + 1):
        x = truth[j - 1]
        if layout.has_theta and j == 1:
            s_prior = _sigma(noise, "prior")
            prior[j] = PriorFactor(index=j, sigma=np.eye(layout.state_dim) * s_prior ** 2,
                                   z=noisy(x, "prior"))
        if (j - 1) % gps_every == 0 or j == n:
            gps[j] = GpsFactor(index=j, sigma=np.eye(2) * s_gps ** 2, z=noisy(x[:2], "gps"))
        if j < n:
            xs = [x, truth[j]]
            proto = BetweenFactor(index=j, sigma=np.eye(layout.pose_dim), z=np.zeros(layout.pose_dim))
            between[j] = BetweenFactor(index=j, sigma=np.eye(layout.pose_dim) * s_lidar ** 2,
                                       z=noisy(proto.predict(xs, layout), "lidar"))
            if layout.vel_dim:
                dim = 2 + layout.vel_dim + layout.bias_dim
                proto = MotionFactor(index=j, dt=dt, sigma=np.eye(dim))
                motion[j] = MotionFactor(index=j, dt=dt, sigma=np.eye(dim) * s_motion ** 2,
                                         z=noisy(proto.predict(xs, layout), "motion"))
    graph = ChainFactorGraph(layout=layout, n=n, gps=gps, between=between, motion=motion, prior=prior)
    return graph, truth


def propagate(x, between, layout):
    """Predict the next keyframe from ``x`` and a between factor (or ``None``)."""
    nxt = np.array(x, dtype=float)
    if between is None:
        return nxt
    if layout.has_theta:
        c, s = np.cos(x[2]), np.sin(x[2])
        nxt[0] += c * between.z[0] - s * between.z[1]
        nxt[1] += s * between.z[0] + c * between.z[1]
        nxt[2] = np.pi - np.mod(np.pi - (x[2] + between.z[2]), 2.0 * np.pi)
    else:
        nxt[:2] += between.z
    return nxt


def first_guess(graph):
    """Initial value for keyframe 1 from its prior or GPS (zeros otherwise)."""
    x = np.zeros(graph.layout.state_dim)
    if 1 in graph.prior:
        x[:] = graph.prior[1].z
    elif 1 in graph.gps:
        x[:2] = graph.gps[1].z
    return x


def dead_reckoning(graph):
    """Initial guess: start at the first prior/GPS and chain the between measurements."""
    layout, n = graph.layout, graph.n
    x = np.zeros((n, layout.state_dim))
    if n == 0:
        return x
    x[0] = first_guess(graph)
    for j in range(1, n):
        x[j] = propagate(x[j - 1], graph.between.get(j), layout)
    if layout.vel_dim and n > 1:
        v = list(layout.vel_cols)
        dts = np.array([graph.motion[j].dt if j in graph.motion else 1.0 for j in range(1, n)])
        x[:-1, v] = np.diff(x[:, :2], axis=0) / dts[:, None]
        x[-1, v] = x[-2, v]
    return x
