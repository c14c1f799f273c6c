"""Sliding window, coupled position+velocity training, prediction geometry,
baseline backends, and the moving-average smoother."""

import numpy as np
import pytest

import gpintent.predictor as predictor_mod
from gpintent import (
    Backend,
    Horizon,
    NotReadyError,
    NumericalError,
    OnlinePredictor,
    OutOfOrderError,
    SlidingWindow,
    TimedSample,
    baseline_predict,
    egp_predict,
    egp_train,
    finite_difference_velocity,
    log_marginal_likelihood,
    posterior_mean,
    smooth,
)
from gpintent.predictor import WindowStatus, cold_start_params
from helpers import DT, RATE, constvel_window, make_window, stationary_window

H10 = Horizon.from_steps(10, 68)


def sample(i, pos=(0.0, 0.0, 0.0), vel=None):
    return TimedSample(i / RATE, np.asarray(pos, dtype=float),
                       velocity=None if vel is None else np.asarray(vel, float))


# ---------------------------------------------------------------- window

def test_window_fills_then_evicts_fifo():
    win = SlidingWindow(68, rate_hz=RATE)
    assert not win.full
    assert win.push(sample(0)) is WindowStatus.FILLING
    assert len(win) == 1
    for i in range(1, 67):
        assert win.push(sample(i)) is WindowStatus.FILLING
    assert win.push(sample(67)) is WindowStatus.FULL
    assert win.full and len(win) == 68
    t_oldest = win.samples[0].t
    win.push(sample(68))
    assert win.full and len(win) == 68
    assert win.samples[0].t > t_oldest
    assert win.t_now == pytest.approx(68 / RATE)


def test_window_spans_two_seconds():
    win = make_window(np.zeros((68, 3)))
    span = win.t_now - win.samples[0].t
    assert abs(span - 2.0) <= DT + 1e-12


def test_out_of_order_rejected():
    win = SlidingWindow(8, rate_hz=RATE)
    win.push(sample(0))
    win.push(sample(1))
    with pytest.raises(OutOfOrderError):
        win.push(sample(1))  # equal timestamp
    with pytest.raises(OutOfOrderError):
        win.push(sample(0))  # earlier timestamp


def test_spacing_tolerance_is_ten_percent():
    win = SlidingWindow(8, rate_hz=RATE)
    win.push(sample(0))
    win.push(TimedSample(DT * 1.05, np.zeros(3)))  # 5% late: fine
    with pytest.raises(ValueError):
        win.push(TimedSample(DT * 1.05 + DT * 1.2, np.zeros(3)))  # 20% late


def test_velocity_fallback_is_finite_difference():
    v = np.array([0.12, -0.3, 0.05])
    pos = np.arange(10)[:, None] / RATE * v[None, :]
    win = make_window(pos)  # no velocities supplied
    vels = win.velocities()
    np.testing.assert_allclose(vels, np.tile(v, (10, 1)), rtol=0, atol=1e-9)
    ref = finite_difference_velocity(win.times(), win.positions())
    np.testing.assert_allclose(vels, ref, rtol=0, atol=0)


def test_supplied_velocities_win_over_fallback():
    vel = np.tile([9.0, 9.0, 9.0], (10, 1))
    win = make_window(np.zeros((10, 3)), velocities=vel)
    np.testing.assert_allclose(win.velocities(), vel, rtol=0, atol=0)


# ---------------------------------------------------------------- horizon

def test_horizon_rounding_half_away_from_zero():
    assert Horizon.from_fraction(0.15, 68).steps == 10   # round(10.2)
    assert Horizon.from_fraction(0.05, 68).steps == 3    # round(3.4)
    assert Horizon.from_fraction(0.25, 34).steps == 9    # 8.5 rounds up
    assert Horizon.from_fraction(0.001, 68).steps == 1   # floor of one step
    assert Horizon.from_steps(5, 68).fraction == pytest.approx(5 / 68)
    with pytest.raises(ValueError):
        Horizon.from_steps(0, 68)


# ---------------------------------------------------------------- training

def test_train_requires_full_window():
    win = SlidingWindow(68, rate_hz=RATE)
    for i in range(67):
        win.push(sample(i))
    with pytest.raises(NotReadyError):
        egp_train(win)


def test_train_is_deterministic():
    rng = np.random.default_rng(10)
    win = stationary_window([0.2, 0.3, 0.9], rng)
    m1 = egp_train(win)
    m2 = egp_train(win)
    assert m1.params == m2.params
    assert m1.log_likelihood == m2.log_likelihood


def test_position_and_velocity_channels_share_hyperparameters():
    rng = np.random.default_rng(11)
    win = constvel_window([0.1, 0.2, 0.8], [0.1, 0.0, 0.0], rng)
    model = egp_train(win)
    for axis in range(3):
        pos_ch, vel_ch = model.channels[axis]
        assert pos_ch.params == vel_ch.params


def test_stationary_velocity_channel_tracks_iid_noise_model():
    rng = np.random.default_rng(12)
    base = np.array([0.04, 0.08, 0.74])
    pos = np.tile(base, (68, 1)) + rng.normal(0.0, 0.003, (68, 3))
    vel = rng.normal(0.0, 0.003, (68, 3))
    win = make_window(pos, velocities=vel)
    model = egp_train(win)
    s2 = 0.003**2
    for axis in range(3):
        per_point = log_marginal_likelihood(model.channels[axis][1]) / 68
        oracle = float(np.mean(-0.5 * np.log(2 * np.pi * s2)
                               - vel[:, axis]**2 / (2 * s2)))
        assert abs(per_point - oracle) <= 0.10 * abs(oracle)


def test_constant_velocity_position_residuals_within_noise():
    rng = np.random.default_rng(31)
    base = np.array([0.1, 0.2, 0.8])
    v = np.array([0.12, -0.05, 0.08])
    t = np.arange(68) / RATE
    truth = base[None, :] + t[:, None] * v[None, :]
    pos = truth + rng.normal(0.0, 0.003, (68, 3))
    vel = np.tile(v, (68, 1)) + rng.normal(0.0, 0.003, (68, 3))
    model = egp_train(make_window(pos, velocities=vel))
    for axis in range(3):
        fitted = posterior_mean(model.channels[axis][0], t)
        assert np.max(np.abs(fitted - truth[:, axis])) < 3 * 0.003


def test_failed_optimization_falls_back_to_previous_model(monkeypatch):
    rng = np.random.default_rng(13)
    win = stationary_window([0.1, 0.1, 0.8], rng)
    prev = egp_train(win)

    def boom(*args, **kwargs):
        raise NumericalError("synthetic failure", jitter=1e-4)

    monkeypatch.setattr(predictor_mod, "optimize_hyperparams", boom)
    with pytest.warns(RuntimeWarning):
        model = egp_train(win, prev=prev)
    assert model is prev
    with pytest.raises(NumericalError):
        egp_train(win)  # no previous model to fall back on


# ---------------------------------------------------------------- predict

def test_stationary_prediction_stays_put():
    rng = np.random.default_rng(12)
    base = np.array([0.04, 0.08, 0.74])
    win = stationary_window(base, rng)
    model = egp_train(win)
    pred = egp_predict(model, H10, win)
    assert np.all(np.abs(pred.position_hat - base) < 3 * 0.003)
    assert pred.t_pred == pytest.approx(win.t_now + 10 * DT)


def test_constant_velocity_displacement_closed_form():
    # 0.1 m/s along x, h=10 steps at 34 Hz: displacement 10 * 0.1 / 34
    v = np.array([0.1, 0.0, 0.0])
    expected = 10 * 0.1 / RATE
    for seed in (1, 2, 3, 4, 5):
        rng = np.random.default_rng(seed)
        base = rng.uniform(-0.3, 0.3, 3)
        win = constvel_window(base, v, rng)
        model = egp_train(win)
        pred = egp_predict(model, H10, win)
        x_now = np.array([posterior_mean(model.channels[a][0], win.t_now)
                          for a in range(3)])
        disp = float(np.linalg.norm(pred.position_hat - x_now))
        assert 0.8 * expected <= disp <= 1.2 * expected


def test_variance_grows_with_horizon():
    rng = np.random.default_rng(12)
    win = stationary_window([0.04, 0.08, 0.74], rng)
    model = egp_train(win)
    variances = np.array([egp_predict(model, Horizon.from_steps(h, 68), win).variance
                          for h in range(1, 18)])
    assert np.all(np.diff(variances, axis=0) >= -1e-12)
    v7 = egp_predict(model, Horizon.from_steps(7, 68), win).variance
    v14 = egp_predict(model, Horizon.from_steps(14, 68), win).variance
    assert np.all(v14 >= v7)


def test_zero_motion_sweep_never_drifts():
    """100 random stationary windows: prediction stays within 3 sigma."""
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(1000 + i)
        base = rng.uniform(-0.5, 0.5, 3)
        win = stationary_window(base, rng)
        model = egp_train(win)
        pred = egp_predict(model, H10, win)
        worst = max(worst, float(np.max(np.abs(pred.position_hat - base))))
    assert worst < 3 * 0.003


def test_predict_rejects_foreign_window():
    rng = np.random.default_rng(14)
    win = stationary_window([0.0, 0.0, 0.5], rng)
    model = egp_train(win)
    # same content but shifted in time: the model no longer matches t_now
    other = make_window(win.positions(), velocities=win.velocities(),
                        t0=win.samples[0].t + DT)
    with pytest.raises(ValueError):
        egp_predict(model, H10, other)


# ---------------------------------------------------------------- baseline

def test_baseline_stationary_and_velocity_free():
    rng = np.random.default_rng(16)
    base = np.array([0.3, -0.1, 0.9])
    win = stationary_window(base, rng, with_velocity=False)
    pred = baseline_predict(win, H10)
    assert np.all(np.abs(pred.position_hat - base) < 3 * 0.003)
    np.testing.assert_array_equal(pred.velocity_hat, np.zeros(3))


def test_baseline_far_horizon_reverts_to_zero_prior():
    t = np.arange(68) / RATE
    rng = np.random.default_rng(8)
    pos = np.stack([0.3 * np.sin(2.1 * t),
                    0.2 * np.sin(1.7 * t + 0.3),
                    0.25 * np.cos(2.3 * t)], axis=1)
    pos = pos + rng.normal(0.0, 0.003, pos.shape)
    win = make_window(pos)
    near = baseline_predict(win, H10)
    far = baseline_predict(win, Horizon.from_steps(2040, 68))  # 60 s out
    assert np.max(np.abs(far.position_hat)) < 1e-6
    assert np.all(far.variance > near.variance)


def test_baseline_backends_agree():
    t = np.arange(68) / RATE
    rng = np.random.default_rng(8)
    pos = np.stack([0.1 * t, 0.2 + 0.05 * np.sin(t), np.full(68, 0.9)], axis=1)
    pos = pos + rng.normal(0.0, 0.003, pos.shape)
    win = make_window(pos)
    dense = baseline_predict(win, H10, Backend.DENSE)
    hodlr = baseline_predict(win, H10, Backend.HODLR)
    assert np.max(np.abs(dense.position_hat - hodlr.position_hat)) < 1e-6
    assert np.max(np.abs(dense.variance - hodlr.variance)) < 1e-6


# ---------------------------------------------------------------- smooth

def test_smooth_identity_and_constant():
    x = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]])
    np.testing.assert_array_equal(smooth(x, 1), x)
    const = np.tile([2.0, -1.0, 0.5], (9, 1))
    np.testing.assert_allclose(smooth(const, 5), const, rtol=0, atol=1e-12)


def test_smooth_linear_ramp_passthrough():
    # symmetric shrinking windows leave a linear ramp untouched
    ramp = np.arange(21.0)[:, None] * np.array([1.0, -2.0, 0.5])[None, :]
    np.testing.assert_allclose(smooth(ramp, 11), ramp, rtol=0, atol=1e-9)


def test_smooth_causal_ramp():
    ramp = np.arange(8.0)[:, None]
    out = smooth(ramp, 3, causal=True)
    # trailing mean of {i-2, i-1, i} is i-1 once the window is full
    np.testing.assert_allclose(out[2:, 0], np.arange(1.0, 7.0), rtol=0, atol=1e-12)
    assert out[0, 0] == 0.0
    assert out[1, 0] == pytest.approx(0.5)


def test_smooth_rejects_bad_k():
    x = np.zeros((5, 3))
    with pytest.raises(ValueError):
        smooth(x, 4)
    with pytest.raises(ValueError):
        smooth(x, 0)


# ---------------------------------------------------------------- online

def test_online_predictor_lifecycle():
    rng = np.random.default_rng(17)
    base = np.array([0.1, 0.4, 1.0])
    pred = OnlinePredictor()
    out = None
    for i in range(67):
        out = pred.push(TimedSample(i / RATE, base + rng.normal(0, 0.003, 3),
                                    velocity=rng.normal(0, 0.003, 3)))
        assert out is None and not pred.ready
    out = pred.push(TimedSample(67 / RATE, base + rng.normal(0, 0.003, 3),
                                velocity=rng.normal(0, 0.003, 3)))
    assert out is not None and pred.ready and pred.n_cycles == 1
    again = pred.push(TimedSample(68 / RATE, base + rng.normal(0, 0.003, 3),
                                  velocity=rng.normal(0, 0.003, 3)))
    assert pred.n_cycles == 2
    assert np.all(np.abs(again.position_hat - base) < 5 * 0.003)
    assert pred.predict().t_pred == pytest.approx(again.t_pred)


def test_timed_sample_gaze_validation():
    with pytest.raises(ValueError):
        TimedSample(0.0, np.zeros(3), gaze_origin=np.zeros(3),
                    gaze_dir=np.array([0.0, 0.0, 2.0]))  # not unit length
    with pytest.raises(ValueError):
        TimedSample(0.0, np.zeros(3), gaze_origin=np.zeros(3))  # half a ray
    s = TimedSample(0.0, np.zeros(3), gaze_origin=np.zeros(3),
                    gaze_dir=np.array([0.0, 0.0, 1.0]))
    assert s.gaze_dir is not None


def test_cold_start_values():
    p = cold_start_params()
    assert p.sigma_f == 1.0
    assert p.length_scale == 0.5
    assert p.sigma_n == 0.003
