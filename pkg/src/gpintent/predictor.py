"""Online sliding-window hand forecasting.

A fixed-size FIFO of timed samples feeds three per-axis two-channel
(position, velocity) GPs.  Each tick re-optimizes the shared per-axis
hyperparameters (warm-started from the previous tick), refits both channels
on one factorization, and extrapolates

    x_hat(t + h*dt) = pos_mean(t) + vel_mean(t + h*dt) * h * dt

Single-channel baselines evaluate the position GP directly at the horizon
timestamp instead; their mean decays toward the zero prior far from data,
which is the weakness the velocity channel removes.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NotReadyError, NumericalError, OutOfOrderError
from .gp_core import (Backend, DEFAULT_BOUNDS, FittedChannel, KernelParams,
                      TrainingSet, fit, fit_joint, optimize_hyperparams,
                      posterior_mean, posterior_var)

DEFAULT_RATE_HZ = 34.0
DEFAULT_WINDOW = 68  # samples; 2.0 s at 34 Hz
DEFAULT_HORIZON_FRACTION = 0.15
DEFAULT_SIGMA_N = 0.003  # m / (m/s); fixed tracker noise, not optimized
# spacing between consecutive samples may deviate from 1/rate by this factor
SPACING_TOLERANCE = 0.1


def cold_start_params(sigma_n: float = DEFAULT_SIGMA_N) -> KernelParams:
    """Initial hyperparameters for the first full window."""
    return KernelParams(sigma_f=1.0, length_scale=0.5, sigma_n=sigma_n)


class WindowStatus(enum.Enum):
    FILLING = "filling"
    FULL = "full"


def _as_vec3(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class TimedSample:
    """One tracker frame: timestamp, hand position, optional velocity/gaze."""

    t: float
    position: np.ndarray  # (3,) m
    velocity: np.ndarray | None = None  # (3,) m/s
    gaze_origin: np.ndarray | None = None  # (3,) m, head position
    gaze_dir: np.ndarray | None = None  # (3,) unit

    def __post_init__(self):
        if not np.isfinite(self.t):
            raise ValueError("timestamp must be finite")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "position",
                           _as_vec3(self.position, "position"))
        if self.velocity is not None:
            object.__setattr__(self, "velocity",
                               _as_vec3(self.velocity, "velocity"))
        if (self.gaze_origin is None) != (self.gaze_dir is None):
            raise ValueError("gaze needs both origin and direction")
        if self.gaze_dir is not None:
            origin = _as_vec3(self.gaze_origin, "gaze_origin")
            direction = _as_vec3(self.gaze_dir, "gaze_dir")
            if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
                raise ValueError("gaze direction must be unit length")
            object.__setattr__(self, "gaze_origin", origin)
            object.__setattr__(self, "gaze_dir", direction)

    @property
    def has_gaze(self) -> bool:
        return self.gaze_dir is not None


class SlidingWindow:
    """FIFO of the most recent ``capacity`` samples at a nominal rate.

    Pushes must carry strictly increasing timestamps; spacing is held to the
    nominal period within ``SPACING_TOLERANCE`` so the horizon arithmetic
    (h steps of dt) stays meaningful.
    """

    def __init__(self, capacity: int = DEFAULT_WINDOW,
                 rate_hz: float = DEFAULT_RATE_HZ):
        if capacity < 2:
            raise ValueError("window capacity must be at least 2")
        if rate_hz <= 0:
            raise ValueError("rate must be positive")
        self.capacity = int(capacity)
        self.rate_hz = float(rate_hz)
        self.dt = 1.0 / float(rate_hz)
        self._buf: list[TimedSample] = []

    def __len__(self) -> int:
        return len(self._buf)

    @property
    def full(self) -> bool:
        return len(self._buf) == self.capacity

    @property
    def samples(self) -> tuple[TimedSample, ...]:
        return tuple(self._buf)

    @property
    def t_now(self) -> float:
        if not self._buf:
            raise NotReadyError("window is empty")
        return self._buf[-1].t

    def push(self, sample: TimedSample) -> WindowStatus:
        """Append one sample, evicting the oldest when over capacity."""
        if self._buf:
            last = self._buf[-1].t
            if sample.t <= last:
                raise OutOfOrderError(
                    f"timestamp {sample.t} not after {last}")
            gap = sample.t - last
            if abs(gap - self.dt) > SPACING_TOLERANCE * self.dt:
                raise ValueError(
                    f"sample spacing {gap:.6f}s deviates from nominal "
                    f"{self.dt:.6f}s by more than {SPACING_TOLERANCE:.0%}")
        self._buf.append(sample)
        if len(self._buf) > self.capacity:
            self._buf.pop(0)
        return WindowStatus.FULL if self.full else WindowStatus.FILLING

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self._buf])

    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self._buf])

    def velocities(self) -> np.ndarray:
        """Stream velocities, or central differences when any are missing."""
        if self._buf and all(s.velocity is not None for s in self._buf):
            return np.array([s.velocity for s in self._buf])
        return finite_difference_velocity(self.times(), self.positions())


def finite_difference_velocity(t: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Central differences over timestamps, one-sided at the ends."""
    t = np.asarray(t, dtype=float)
    pos = np.asarray(pos, dtype=float)
    if len(t) < 2:
        return np.zeros_like(pos)
    vel = np.empty_like(pos)
    vel[1:-1] = (pos[2:] - pos[:-2]) / (t[2:] - t[:-2])[:, None]
    vel[0] = (pos[1] - pos[0]) / (t[1] - t[0])
    vel[-1] = (pos[-1] - pos[-2]) / (t[-1] - t[-2])
    return vel


@dataclass(frozen=True)
class Horizon:
    """Lookahead expressed as a fraction of the window, in whole steps."""

    fraction: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.fraction) and self.fraction > 0):
            raise ValueError("horizon fraction must be positive")
        if self.steps < 1:
            raise ValueError("horizon must be at least one step")

    @classmethod
    def from_fraction(cls, fraction: float, window: int) -> "Horizon":
        # h = round(fraction * w), half away from zero, never below one step
        steps = max(1, int(np.floor(fraction * window + 0.5)))
        return cls(fraction=float(fraction), steps=steps)

    @classmethod
    def from_steps(cls, steps: int, window: int) -> "Horizon":
        return cls(fraction=steps / window, steps=int(steps))


@dataclass(frozen=True)
class Prediction:
    t_pred: float
    position_hat: np.ndarray  # (3,) m
    velocity_hat: np.ndarray  # (3,) m/s
    variance: np.ndarray  # (3,) m^2, combined position+velocity term

    def __post_init__(self):
        object.__setattr__(self, "position_hat",
                           _as_vec3(self.position_hat, "position_hat"))
        object.__setattr__(self, "velocity_hat",
                           _as_vec3(self.velocity_hat, "velocity_hat"))
        var = _as_vec3(self.variance, "variance")
        if np.any(var < 0):
            raise ValueError("variance must be nonnegative")
        object.__setattr__(self, "variance", var)


@dataclass(frozen=True)
class EgpModel:
    """Per-axis (position, velocity) channel pairs over one window snapshot.

    ``channels[a]`` is the (position, velocity) pair for axis ``a``; in the
    default joint fit both share one KernelParams and one factorization.
    Timestamps are stored window-relative inside the channels; ``t0``/``t_now``
    recover absolute time.
    """

    channels: tuple[tuple[FittedChannel, FittedChannel], ...]
    t0: float
    t_now: float
    dt: float
    log_likelihood: tuple[float, ...]  # per-axis joint LL at the optimum
    converged: tuple[bool, ...]

    def __post_init__(self):
        if len(self.channels) != 3:
            raise ValueError("EGP model needs exactly three axes")

    @property
    def params(self) -> tuple[KernelParams, ...]:
        """Per-axis hyperparameters (position channel's set)."""
        return tuple(pair[0].params for pair in self.channels)


def _axis_inits(init, sigma_n: float):
    if init is None:
        cold = cold_start_params(sigma_n)
        return [cold, cold, cold]
    if isinstance(init, KernelParams):
        return [init, init, init]
    inits = list(init)
    if len(inits) != 3:
        raise ValueError("per-axis init must have three entries")
    return inits


def egp_train(window: SlidingWindow, *,
              backend: Backend = Backend.HODLR,
              init=None,
              sigma_n: float = DEFAULT_SIGMA_N,
              bounds=DEFAULT_BOUNDS,
              per_channel: bool = False,
              prev: EgpModel | None = None) -> EgpModel:
    """Optimize per-axis hyperparameters and refit both channels.

    Parameters
    ----------
    window : SlidingWindow
        Must be full.
    init : KernelParams or per-axis sequence, optional
        Warm-start point(s); defaults to the cold start (sigma_f=1, l=0.5).
    per_channel : bool
        Optimize position and velocity channels separately instead of by
        their summed likelihood.  The channels then stop sharing
        hyperparameters; off by default.
    prev : EgpModel, optional
        Returned unchanged (with a warning) when the optimizer fails to
        produce a finite likelihood; without it such a failure raises.

    Returns
    -------
    EgpModel
    """
    if not window.full:
        raise NotReadyError(
            f"window has {len(window)}/{window.capacity} samples")
    t = window.times()
    x = t - t[0]  # regression inputs are window-relative seconds
    pos = window.positions()
    vel = window.velocities()
    inits = _axis_inits(init, sigma_n)

    channels = []
    lls = []
    conv = []
    try:
        for a in range(3):
            y_pos = np.ascontiguousarray(pos[:, a])
            y_vel = np.ascontiguousarray(vel[:, a])
            ts_pos = TrainingSet(x, y_pos)
            ts_vel = TrainingSet(x, y_vel)
            if per_channel:
                rp = optimize_hyperparams(ts_pos, inits[a], bounds,
                                          backend=backend)
                rv = optimize_hyperparams(ts_vel, inits[a], bounds,
                                          backend=backend)
                if not (np.isfinite(rp.log_likelihood)
                        and np.isfinite(rv.log_likelihood)):
                    raise NumericalError("optimizer returned no finite "
                                         "likelihood")
                pair = (fit(ts_pos, rp.params, backend),
                        fit(ts_vel, rv.params, backend))
                ll = rp.log_likelihood + rv.log_likelihood
                ok = rp.converged and rv.converged
            else:
                res = optimize_hyperparams([ts_pos, ts_vel], inits[a], bounds,
                                           backend=backend)
                if not np.isfinite(res.log_likelihood):
                    raise NumericalError("optimizer returned no finite "
                                         "likelihood")
                pair = tuple(fit_joint(x, [y_pos, y_vel], res.params,
                                       backend))
                ll = res.log_likelihood
                ok = res.converged
            channels.append(pair)
            lls.append(float(ll))
            conv.append(bool(ok))
    except NumericalError as exc:
        if prev is not None:
            warnings.warn(f"hyperparameter search failed ({exc}); "
                          "keeping previous model", RuntimeWarning,
                          stacklevel=2)
            return prev
        raise
    return EgpModel(channels=tuple(channels), t0=float(t[0]),
                    t_now=float(t[-1]), dt=window.dt,
                    log_likelihood=tuple(lls), converged=tuple(conv))


def egp_predict(model: EgpModel | None, horizon: Horizon,
                window: SlidingWindow | None = None) -> Prediction:
    """Extrapolate the hand ``horizon.steps`` frames past the window.

    Per axis: position mean at the last window timestamp, velocity mean at
    the horizon timestamp, combined as pos + vel*h*dt.  Variance adds the
    velocity term scaled by (h*dt)^2.
    """
    if model is None:
        raise NotReadyError("EGP model not trained")
    if window is not None and abs(window.t_now - model.t_now) > 1e-12:
        raise ValueError("model was trained on a different window")
    h_dt = horizon.steps * model.dt
    xq_now = model.t_now - model.t0
    xq_h = xq_now + h_dt
    pos_hat = np.empty(3)
    vel_hat = np.empty(3)
    var = np.empty(3)
    for a, (ch_pos, ch_vel) in enumerate(model.channels):
        mu_p = posterior_mean(ch_pos, xq_now)
        mu_v = posterior_mean(ch_vel, xq_h)
        pos_hat[a] = mu_p + mu_v * h_dt
        vel_hat[a] = mu_v
        var[a] = (posterior_var(ch_pos, xq_now)
                  + h_dt**2 * posterior_var(ch_vel, xq_h))
    return Prediction(t_pred=model.t_now + h_dt, position_hat=pos_hat,
                      velocity_hat=vel_hat, variance=var)


def baseline_predict(window: SlidingWindow, horizon: Horizon,
                     backend: Backend = Backend.HODLR, *,
                     init=None, sigma_n: float = DEFAULT_SIGMA_N,
                     bounds=DEFAULT_BOUNDS) -> Prediction:
    """Single-channel position-only forecast at the horizon timestamp.

    No velocity augmentation: the posterior is read directly at
    t_now + h*dt, so far horizons decay toward the zero-mean prior.
    ``velocity_hat`` is zero (the baseline carries no velocity estimate).
    """
    if not window.full:
        raise NotReadyError(
            f"window has {len(window)}/{window.capacity} samples")
    t = window.times()
    x = t - t[0]
    pos = window.positions()
    inits = _axis_inits(init, sigma_n)
    h_dt = horizon.steps * window.dt
    xq = (t[-1] - t[0]) + h_dt
    pos_hat = np.empty(3)
    var = np.empty(3)
    for a in range(3):
        ts = TrainingSet(x, np.ascontiguousarray(pos[:, a]))
        res = optimize_hyperparams(ts, inits[a], bounds, backend=backend)
        if not np.isfinite(res.log_likelihood):
            raise NumericalError("optimizer returned no finite likelihood")
        ch = fit(ts, res.params, backend)
        pos_hat[a] = posterior_mean(ch, xq)
        var[a] = posterior_var(ch, xq)
    return Prediction(t_pred=float(t[-1]) + h_dt, position_hat=pos_hat,
                      velocity_hat=np.zeros(3), variance=var)


def smooth(series, k: int, causal: bool = False) -> np.ndarray:
    """Moving average of length ``k`` along axis 0, output length preserved.

    Centered (default): the window shrinks symmetrically near the edges, so
    linear trends pass through unchanged at every index.  Causal: each output
    averages the most recent ≤ k inputs.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError("smoothing window must be odd and >= 1")
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 0:
        raise ValueError("series must be a sequence")
    n = arr.shape[0]
    if n == 0 or k == 1:
        return arr.copy()
    flat = arr.reshape(n, -1)
    csum = np.vstack([np.zeros((1, flat.shape[1])), np.cumsum(flat, axis=0)])
    out = np.empty_like(flat)
    half = k // 2
    for i in range(n):
        if causal:
            lo, hi = max(0, i - k + 1), i + 1
        else:
            s = min(half, i, n - 1 - i)
            lo, hi = i - s, i + s + 1
        out[i] = (csum[hi] - csum[lo]) / (hi - lo)
    return out.reshape(arr.shape)


class OnlinePredictor:
    """Streaming wrapper: one train+predict cycle per push on a full window.

    Warm-starts each tick's hyperparameter search from the previous optimum
    and keeps the previous model (with a warning) if a search fails.
    """

    def __init__(self, capacity: int = DEFAULT_WINDOW,
                 horizon_fraction: float = DEFAULT_HORIZON_FRACTION, *,
                 rate_hz: float = DEFAULT_RATE_HZ,
                 backend: Backend = Backend.HODLR,
                 sigma_n: float = DEFAULT_SIGMA_N,
                 per_channel: bool = False,
                 bounds=DEFAULT_BOUNDS):
        self.window = SlidingWindow(capacity, rate_hz)
        self.horizon = Horizon.from_fraction(horizon_fraction, capacity)
        self.backend = backend
        self.sigma_n = float(sigma_n)
        self.per_channel = per_channel
        self.bounds = bounds
        self.model: EgpModel | None = None
        self.last_prediction: Prediction | None = None
        self.n_cycles = 0  # completed train+predict cycles

    @property
    def ready(self) -> bool:
        return self.model is not None

    def push(self, sample: TimedSample) -> Prediction | None:
        """Ingest one sample; returns a prediction once the window is full."""
        status = self.window.push(sample)
        if status is not WindowStatus.FULL:
            return None
        init = list(self.model.params) if self.model is not None else None
        self.model = egp_train(self.window, backend=self.backend, init=init,
                               sigma_n=self.sigma_n, bounds=self.bounds,
                               per_channel=self.per_channel, prev=self.model)
        self.last_prediction = egp_predict(self.model, self.horizon)
        self.n_cycles += 1
        return self.last_prediction

    def predict(self, horizon: Horizon | None = None) -> Prediction:
        """Re-query the current model, optionally at another horizon."""
        return egp_predict(self.model, horizon or self.horizon)
