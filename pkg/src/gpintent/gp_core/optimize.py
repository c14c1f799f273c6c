"""Hyperparameter selection by bounded limited-memory quasi-Newton search.

Only (sigma_f, length_scale) are optimized, in log space inside a box;
sigma_n stays fixed.  The search never raises on non-convergence: it returns
the best parameters seen together with a converged flag, so an online caller
can keep its real-time cadence and simply warn.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import engine
from .channel import TrainingSet
from .factor import DEFAULT_BLOCK_TOL, DEFAULT_LEAF_SIZE, Backend
from .kernel import KernelParams

DEFAULT_BOUNDS = ((1e-3, 1e3), (1e-3, 1e3))  # (sigma_f, length_scale)
DEFAULT_MAX_ITER = 50
DEFAULT_HISTORY = 10
DEFAULT_GTOL = 1e-6
FD_STEP = 1e-5  # central-difference step in log-parameter space


@dataclass(frozen=True)
class OptimizeResult:
    params: KernelParams
    converged: bool  # False means the iteration budget or search stalled
    log_likelihood: float  # joint LL at the returned parameters
    n_iter: int
    n_eval: int
    trace: np.ndarray  # LL at each accepted iterate, non-decreasing


def optimize_hyperparams(
    data: TrainingSet | Sequence[TrainingSet],
    init: KernelParams,
    bounds: tuple[tuple[float, float], tuple[float, float]] = DEFAULT_BOUNDS,
    backend: Backend = Backend.HODLR,
    max_iter: int = DEFAULT_MAX_ITER,
    history: int = DEFAULT_HISTORY,
    gtol: float = DEFAULT_GTOL,
    leaf_size: int = DEFAULT_LEAF_SIZE,
    tol: float = DEFAULT_BLOCK_TOL,
) -> OptimizeResult:
    """Maximize the (joint) log marginal likelihood over sigma_f and l.

    Parameters
    ----------
    data : TrainingSet or sequence of TrainingSet
        One channel, or several channels sharing identical inputs whose log
        likelihoods are summed (the coupled position/velocity case).
    init : KernelParams
        Starting point; must lie inside bounds.  Pass the previous tick's
        optimum here to warm-start.
    bounds : ((sf_lo, sf_hi), (l_lo, l_hi))
        Finite positive box constraints applied in log space.

    Returns
    -------
    OptimizeResult with the best parameters seen.  The reported LL is never
    below the LL at init.
    """
    if isinstance(data, TrainingSet):
        channels = [data]
    else:
        channels = list(data)
        if not channels:
            raise ValueError("at least one channel is required")
        for ch in channels[1:]:
            if ch.x.shape != channels[0].x.shape or not np.array_equal(
                ch.x, channels[0].x
            ):
                raise ValueError("joint channels must share identical inputs")

    (sf_lo, sf_hi), (l_lo, l_hi) = bounds
    for lo_v, hi_v, name in ((sf_lo, sf_hi, "sigma_f"), (l_lo, l_hi, "length_scale")):
        if not (np.isfinite(lo_v) and np.isfinite(hi_v)) or lo_v <= 0.0 or hi_v <= lo_v:
            raise ValueError(f"bounds for {name} must be finite with 0 < lo < hi")
    if not (sf_lo <= init.sigma_f <= sf_hi and l_lo <= init.length_scale <= l_hi):
        raise ValueError("init must lie inside bounds")
    if max_iter < 1 or history < 1:
        raise ValueError("max_iter and history must be >= 1")

    x = channels[0].x
    ys = np.ascontiguousarray(np.stack([ch.y for ch in channels]))
    m = x.shape[0]
    plan = engine.build_plan(m, leaf_size)
    bufs = engine.alloc_buffers(plan)
    z0 = np.array([np.log(init.sigma_f), np.log(init.length_scale)])
    lb = np.array([np.log(sf_lo), np.log(l_lo)])
    ub = np.array([np.log(sf_hi), np.log(l_hi)])
    be = engine.BACKEND_DENSE if backend == Backend.DENSE else engine.BACKEND_HODLR

    z_best, f_best, n_iter, n_eval, converged, trace, n_trace = (
        engine.optimize_engine(
            be, x, ys, init.sigma_n**2, z0, lb, ub, tol,
            max_iter, history, gtol, FD_STEP,
            plan.lo, plan.hi, plan.mid, plan.leaf, plan.size, plan.bu,
            plan.chol_off, plan.uo, plan.vo, plan.co, plan.po, plan.cap,
            *bufs,
        )
    )
    params = KernelParams(
        sigma_f=float(np.exp(z_best[0])),
        length_scale=float(np.exp(z_best[1])),
        sigma_n=init.sigma_n,
    )
    return OptimizeResult(
        params=params,
        converged=bool(converged),
        log_likelihood=float(-f_best),
        n_iter=int(n_iter),
        n_eval=int(n_eval),
        trace=-trace[:n_trace],
    )
