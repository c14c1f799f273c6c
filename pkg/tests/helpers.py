"""Shared builders and independent oracles for the test suite.

Oracles here deliberately avoid the package's own code paths: nearest-point
scans are plain loops, GP quantities come from explicit matrix inverses, and
error metrics are one-line numpy expressions.
"""

import numpy as np

from gpintent import (
    HumanSphere,
    InteractionPoint,
    PartitionPlane,
    SafePoint,
    SceneConfig,
    SlidingWindow,
    TimedSample,
)

RATE = 34.0
DT = 1.0 / RATE


def make_window(positions, *, velocities=None, t0=0.0, rate=RATE):
    """Push evenly spaced samples into a fresh window sized to fit them."""
    positions = np.asarray(positions, dtype=float)
    win = SlidingWindow(len(positions), rate_hz=rate)
    for i, p in enumerate(positions):
        v = None if velocities is None else np.asarray(velocities[i], dtype=float)
        win.push(TimedSample(t0 + i / rate, p, velocity=v))
    return win


def stationary_window(base, rng=None, n=68, noise=0.003, *, with_velocity=True):
    """Constant hand position plus sensor noise; velocity zero plus noise."""
    base = np.asarray(base, dtype=float)
    pos = np.tile(base, (n, 1))
    vel = np.zeros((n, 3))
    if rng is not None:
        pos = pos + rng.normal(0.0, noise, pos.shape)
        vel = vel + rng.normal(0.0, noise, vel.shape)
    return make_window(pos, velocities=vel if with_velocity else None)


def constvel_window(base, vel, rng=None, n=68, noise=0.003):
    """Straight-line motion with noisy position and velocity samples."""
    base = np.asarray(base, dtype=float)
    vel = np.asarray(vel, dtype=float)
    t = np.arange(n) / RATE
    pos = base[None, :] + t[:, None] * vel[None, :]
    vels = np.tile(vel, (n, 1))
    if rng is not None:
        pos = pos + rng.normal(0.0, noise, pos.shape)
        vels = vels + rng.normal(0.0, noise, vels.shape)
    return make_window(pos, velocities=vels)


def nn_bruteforce(pos, points):
    """Ascending-id linear scan with strict <, so exact ties keep the low id."""
    pos = np.asarray(pos, dtype=float)
    best_d, best_p = None, None
    for p in sorted(points, key=lambda q: q.id):
        d = float(np.linalg.norm(pos - p.pos))
        if best_d is None or d < best_d:
            best_d, best_p = d, p
    return best_p


def gaze_scores_bruteforce(ray, points):
    """Per-point perpendicular/along ratio; None for points behind the user."""
    out = {}
    for p in points:
        v = p.pos - ray.origin
        along = float(np.dot(v, ray.direction))
        if along <= 0.0:
            out[p.id] = None
        else:
            perp = float(np.linalg.norm(v - along * ray.direction))
            out[p.id] = perp / along
    return out


def gp_posterior_oracle(x, y, x_star, sigma_f, length_scale, sigma_n):
    """Posterior mean/var and log-likelihood via an explicit inverse."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    s3 = np.sqrt(3.0)

    def k(a, b):
        d = np.abs(a[:, None] - b[None, :]) / length_scale
        return sigma_f**2 * (1.0 + s3 * d) * np.exp(-s3 * d)

    K = k(x, x) + sigma_n**2 * np.eye(len(x))
    Ki = np.linalg.inv(K)
    ks = k(x_star, x)
    mean = ks @ Ki @ y
    var = sigma_f**2 - np.einsum("ij,jk,ik->i", ks, Ki, ks)
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    ll = -0.5 * y @ Ki @ y - 0.5 * logdet - 0.5 * len(x) * np.log(2.0 * np.pi)
    return mean, var, float(ll)


def flat_scene():
    """Minimal scene with the partition plane at y = 0 (free space is y > 0).

    Point spacings give round trip durations: 1<->3 is 0.8 m wholly in free
    space, 2<->4 is 0.5 m wholly interior, 1<->2 crosses the plane 0.25 m on
    each side.
    """
    points = (
        InteractionPoint(1, np.array([0.0, 0.25, 0.0])),
        InteractionPoint(2, np.array([0.0, -0.25, 0.0])),
        InteractionPoint(3, np.array([0.0, 1.05, 0.0])),
        InteractionPoint(4, np.array([0.0, -0.75, 0.0])),
    )
    safe = (
        SafePoint(20, np.array([-0.5, 0.0, 0.0])),
        SafePoint(21, np.array([0.5, 0.0, 0.0])),
    )
    plane = PartitionPlane(np.zeros(3), np.array([0.0, 1.0, 0.0]))
    human = HumanSphere(np.array([5.0, 5.0, 5.0]), 0.1)
    return SceneConfig(points=points, safe_points=safe, plane=plane, human=human)


def read_summary(path):
    """Parse summary.csv into {(strategy, metric): (mean, sd, n)} plus meta."""
    table, meta = {}, {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
            continue
        if line.startswith("strategy,"):
            continue
        strat, metric, mean, sd, n = line.split(",")
        table[(strat, metric)] = (
            float(mean) if mean else float("nan"),
            float(sd) if sd else float("nan"),
            int(n),
        )
    return table, meta


def read_runs(path):
    """Parse runs.csv into a list of per-run dicts keyed by header column."""
    rows, header = [], None
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append(dict(zip(header, line.split(","))))
    return rows
