"""Benchmark harnesses: training time / log likelihood by window size, and
prediction error by horizon.

The window study times one per-axis train+predict cycle (hyperparameter
search from the cold start, refit, one posterior query) for each algorithm
and reports the mean wall time and the corpus-mean log likelihood.  Windows
are the last w samples of each record, so every record contributes to every
window size.  The horizon study slides a full window across the motion
phase, trains once per position (warm-started), queries every horizon from
the same model, and reports MAPE on per-axis displacement from the window
start plus RMSE on raw coordinates.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import TrajectoryFormatError
from .gp_core import (Backend, KernelParams, TrainingSet, fit, fit_joint,
                      optimize_hyperparams, posterior_mean)
from .predictor import (DEFAULT_RATE_HZ, DEFAULT_SIGMA_N, Horizon,
                        cold_start_params, finite_difference_velocity)

WINDOWS_S = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
HORIZONS_PCT = (5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0)
# Per-axis MAPE terms need a displacement that dwarfs the 3 mm sensor noise;
# anything smaller is a noise/noise ratio and is excluded from the mean.
MAPE_DISP_FLOOR_M = 0.02
ALGO_BASIC = "basic"  # dense backend, explicit-inversion likelihood path
ALGO_HOLRD = "holrd"  # hierarchical low-rank backend
ALGO_EGP = "egp"  # two-channel (position+velocity) on the holrd backend
WINDOW_ALGOS = (ALGO_BASIC, ALGO_HOLRD, ALGO_EGP)
HORIZON_ALGOS = (ALGO_HOLRD, ALGO_EGP)


@dataclass(frozen=True)
class BenchCell:
    key: float  # window seconds or horizon percent
    algo: str
    time_ms: float = float("nan")
    log_likelihood: float = float("nan")
    mape_pct: float = float("nan")
    rmse_m: float = float("nan")
    reps: int = 0


@dataclass
class BenchReport:
    """Cells keyed by (window or horizon, algorithm)."""

    kind: str  # "window" | "horizon"
    cells: list[BenchCell] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    KEY_LABEL = {"window": "window_s", "horizon": "horizon_pct"}

    def cell(self, key: float, algo: str) -> BenchCell:
        for c in self.cells:
            if c.algo == algo and abs(c.key - key) < 1e-9:
                return c
        raise KeyError((key, algo))

    def column(self, algo: str, attr: str) -> list[float]:
        """One metric for one algorithm, ordered by key."""
        cells = sorted((c for c in self.cells if c.algo == algo),
                       key=lambda c: c.key)
        return [getattr(c, attr) for c in cells]

    def to_csv(self) -> str:
        lines = [f"# {k}={v}" for k, v in sorted(self.meta.items())]
        label = self.KEY_LABEL[self.kind]
        lines.append(f"{label},algo,time_ms,log_likelihood,mape_pct,"
                     "rmse_m,reps")
        for c in sorted(self.cells, key=lambda c: (c.key, c.algo)):
            vals = [f"{c.key:.9g}", c.algo]
            for v in (c.time_ms, c.log_likelihood, c.mape_pct, c.rmse_m):
                vals.append("" if np.isnan(v) else f"{v:.9g}")
            vals.append(str(c.reps))
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "BenchReport":
        meta: dict = {}
        kind = None
        cells = []
        header_seen = False
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
                continue
            if not header_seen:
                first = line.split(",")[0]
                for k, label in cls.KEY_LABEL.items():
                    if first == label:
                        kind = k
                if kind is None:
                    raise TrajectoryFormatError("unknown report header",
                                                line=line_no)
                header_seen = True
                continue
            cellstr = line.split(",")
            if len(cellstr) != 7:
                raise TrajectoryFormatError("expected 7 columns",
                                            line=line_no)
            nums = [float(c) if c else float("nan") for c in cellstr[2:6]]
            cells.append(BenchCell(key=float(cellstr[0]), algo=cellstr[1],
                                   time_ms=nums[0], log_likelihood=nums[1],
                                   mape_pct=nums[2], rmse_m=nums[3],
                                   reps=int(cellstr[6])))
        if kind is None:
            raise TrajectoryFormatError("empty report", line=0)
        return cls(kind=kind, cells=cells, meta=meta)


def _window_tail(record, m: int):
    """Last m samples as (relative times, positions, velocities)."""
    t = record.times()
    pos = record.positions()
    vel = record.velocities()
    if vel is None:
        vel = finite_difference_velocity(t, pos)
    if len(t) < m:
        raise ValueError(f"record too short ({len(t)} < {m})")
    t, pos, vel = t[-m:], pos[-m:], vel[-m:]
    return t - t[0], pos, vel


def _cycle(algo: str, x, pos, vel, axis: int, init: KernelParams,
           horizon_steps: int, dt: float):
    """One per-axis train+predict cycle; returns (joint LL, params,
    predicted value)."""
    y_pos = np.ascontiguousarray(pos[:, axis])
    ts_pos = TrainingSet(x, y_pos)
    xq = x[-1] + horizon_steps * dt
    if algo == ALGO_EGP:
        y_vel = np.ascontiguousarray(vel[:, axis])
        res = optimize_hyperparams([ts_pos, TrainingSet(x, y_vel)], init,
                                   backend=Backend.HODLR)
        chans = fit_joint(x, [y_pos, y_vel], res.params, Backend.HODLR)
        mu = (posterior_mean(chans[0], x[-1])
              + posterior_mean(chans[1], xq) * horizon_steps * dt)
    else:
        backend = Backend.DENSE if algo == ALGO_BASIC else Backend.HODLR
        res = optimize_hyperparams(ts_pos, init, backend=backend)
        ch = fit(ts_pos, res.params, backend)
        mu = posterior_mean(ch, xq)
    return res.log_likelihood, res.params, mu


def bench_window(records, windows_s=WINDOWS_S, algos=WINDOW_ALGOS,
                 reps: int = 5, rate_hz: float = DEFAULT_RATE_HZ,
                 sigma_n: float = DEFAULT_SIGMA_N,
                 horizon_fraction: float = 0.15) -> BenchReport:
    """Time/LL table: mean cold-start cycle time and corpus-mean LL.

    LL for an algorithm is the per-axis joint likelihood summed over the
    three axes, averaged over records; basic and holrd share the same model
    so their LL columns agree to factorization tolerance.
    """
    for algo in algos:
        if algo not in WINDOW_ALGOS:
            raise ValueError(f"unknown algorithm '{algo}'")
    report = BenchReport(kind="window")
    cold = cold_start_params(sigma_n)
    dt = 1.0 / rate_hz
    for w_s in windows_s:
        m = round(w_s * rate_hz)
        h = Horizon.from_fraction(horizon_fraction, m).steps
        problems = []
        for rec in records:
            x, pos, vel = _window_tail(rec, m)
            problems.append((x, pos, vel))
        for algo in algos:
            x0, p0, v0 = problems[0]
            _cycle(algo, x0, p0, v0, 0, cold, h, dt)  # JIT/cache warm-up
            times = []
            lls = []
            for rep in range(reps):
                for x, pos, vel in problems:
                    ll_rec = 0.0
                    t0 = time.perf_counter()
                    for axis in range(3):
                        ll, _, _ = _cycle(algo, x, pos, vel, axis, cold,
                                          h, dt)
                        ll_rec += ll
                    times.append((time.perf_counter() - t0) / 3.0)
                    if rep == 0:
                        lls.append(ll_rec)
            report.cells.append(BenchCell(
                key=w_s, algo=algo, time_ms=1e3 * float(np.mean(times)),
                log_likelihood=float(np.mean(lls)), reps=reps))
    return report


def median_cycle_ms(records, algo: str, window_s: float = 2.0,
                    reps: int = 5, rate_hz: float = DEFAULT_RATE_HZ,
                    sigma_n: float = DEFAULT_SIGMA_N) -> float:
    """Median per-axis cold train+predict cycle time at one window size."""
    m = round(window_s * rate_hz)
    h = Horizon.from_fraction(0.15, m).steps
    cold = cold_start_params(sigma_n)
    dt = 1.0 / rate_hz
    x0, p0, v0 = _window_tail(records[0], m)
    _cycle(algo, x0, p0, v0, 0, cold, h, dt)  # JIT/cache warm-up
    samples = []
    for _ in range(reps):
        for rec in records:
            x, pos, vel = _window_tail(rec, m)
            for axis in range(3):
                t0 = time.perf_counter()
                _cycle(algo, x, pos, vel, axis, cold, h, dt)
                samples.append(time.perf_counter() - t0)
    return 1e3 * float(np.median(samples))


def _motion_bounds(rec) -> tuple[int, int]:
    t = rec.times()
    if rec.motion_start_s is None:
        return 0, len(t)
    start = int(np.searchsorted(t, rec.motion_start_s - 1e-12))
    return start, len(t)


def bench_horizon(records, horizons_pct=HORIZONS_PCT, window_s: float = 2.0,
                  algos=HORIZON_ALGOS, stride: int = 1,
                  rate_hz: float = DEFAULT_RATE_HZ,
                  sigma_n: float = DEFAULT_SIGMA_N) -> BenchReport:
    """Error-by-horizon table over sliding windows ending in the motion
    phase.

    One model per window position per algorithm (warm-started along the
    slide), queried at every horizon; the same window set serves all
    horizons so their errors are comparable.  Windows ending in the first
    half second of motion are skipped: the MAPE denominator (displacement
    from window start) is still noise-dominated there and a handful of
    near-zero denominators would swamp the corpus mean.
    """
    for algo in algos:
        if algo not in (ALGO_HOLRD, ALGO_EGP):
            raise ValueError(f"unknown algorithm '{algo}'")
    for pct in horizons_pct:
        if not (0 < pct <= 50):
            raise ValueError(f"horizon {pct}% outside (0, 50]")
    m = round(window_s * rate_hz)
    dt = 1.0 / rate_hz
    steps = {pct: Horizon.from_fraction(pct / 100.0, m).steps
             for pct in horizons_pct}
    h_max = max(steps.values())
    cold = cold_start_params(sigma_n)

    # errs[(pct, algo)] = (pred_disp, act_disp, pred_pos, act_pos) lists
    errs: dict = {(pct, algo): ([], [], [], [])
                  for pct in horizons_pct for algo in algos}
    n_windows = 0
    for rec in records:
        t = rec.times()
        pos = rec.positions()
        vel = rec.velocities()
        if vel is None:
            vel = finite_difference_velocity(t, pos)
        mstart, _ = _motion_bounds(rec)
        settle = round(0.5 * rate_hz)  # denominator must be motion-dominated
        first_i = max(0, mstart + settle - m + 1)
        last_i = len(t) - m - h_max  # room for the farthest horizon
        warm = {algo: [cold] * 3 for algo in algos}
        for i in range(first_i, last_i + 1, stride):
            n_windows += 1
            sl = slice(i, i + m)
            x = t[sl] - t[i]
            p_win = pos[sl]
            v_win = vel[sl]
            j = i + m - 1  # window end index
            for algo in algos:
                for axis in range(3):
                    y_pos = np.ascontiguousarray(p_win[:, axis])
                    ts_pos = TrainingSet(x, y_pos)
                    if algo == ALGO_EGP:
                        y_vel = np.ascontiguousarray(v_win[:, axis])
                        res = optimize_hyperparams(
                            [ts_pos, TrainingSet(x, y_vel)],
                            warm[algo][axis], backend=Backend.HODLR)
                        chans = fit_joint(x, [y_pos, y_vel], res.params,
                                          Backend.HODLR)
                    else:
                        res = optimize_hyperparams(ts_pos, warm[algo][axis],
                                                   backend=Backend.HODLR)
                        ch = fit(ts_pos, res.params, Backend.HODLR)
                    warm[algo][axis] = res.params
                    for pct in horizons_pct:
                        h = steps[pct]
                        xq = x[-1] + h * dt
                        if algo == ALGO_EGP:
                            mu = (posterior_mean(chans[0], x[-1])
                                  + posterior_mean(chans[1], xq) * h * dt)
                        else:
                            mu = posterior_mean(ch, xq)
                        actual = pos[j + h, axis]
                        pd, ad, pp, ap = errs[(pct, algo)]
                        pd.append(mu - p_win[0, axis])
                        ad.append(actual - p_win[0, axis])
                        pp.append(mu)
                        ap.append(actual)

    report = BenchReport(kind="horizon")
    for pct in horizons_pct:
        for algo in algos:
            pd, ad, pp, ap = errs[(pct, algo)]
            pd = np.array(pd)
            ad = np.array(ad)
            valid = np.abs(ad) >= MAPE_DISP_FLOOR_M
            mape = float(100.0 * np.mean(np.abs(pd[valid] - ad[valid])
                                         / np.abs(ad[valid])))
            rmse = float(np.sqrt(np.mean((np.array(pp)
                                          - np.array(ap)) ** 2)))
            report.cells.append(BenchCell(key=pct, algo=algo, mape_pct=mape,
                                          rmse_m=rmse, reps=n_windows))
    return report
