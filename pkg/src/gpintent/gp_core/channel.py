"""Single-output GP regression channel: fitting and posterior evaluation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .factor import (DEFAULT_BLOCK_TOL, DEFAULT_LEAF_SIZE, Backend,
                     DenseFactor, HodlrFactor)
from .kernel import KernelParams, gram, kernel_vector


@dataclass(frozen=True)
class TrainingSet:
    """Strictly time-ordered scalar observations.

    x holds input times (relative to the window start), y the observed
    values.  Duplicate or decreasing timestamps are rejected: the kernel is
    stationary in time and a duplicate input would make the noiseless Gram
    singular by construction.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(self.x, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float)
        if x.ndim != 1 or y.ndim != 1:
            raise ValueError("x and y must be one-dimensional")
        if x.shape != y.shape:
            raise ValueError(
                f"x and y lengths differ: {x.shape[0]} vs {y.shape[0]}"
            )
        if x.shape[0] < 1:
            raise ValueError("at least one sample is required")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("x and y must be finite")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return int(self.x.shape[0])


@dataclass
class FittedChannel:
    """A trained channel: inputs, hyperparameters, factorization and weights.

    alpha solves (K + sigma_n^2 I) alpha = y; posterior evaluation only needs
    dot products against it plus one extra solve for variances.
    """

    data: TrainingSet
    params: KernelParams
    backend: Backend
    factorization: object  # DenseFactor | HodlrFactor
    alpha: np.ndarray


def fit(data: TrainingSet, params: KernelParams,
        backend: Backend = Backend.DENSE,
        leaf_size: int = DEFAULT_LEAF_SIZE,
        tol: float = DEFAULT_BLOCK_TOL) -> FittedChannel:
    """Factor the training covariance and solve for the weight vector."""
    return fit_joint(data.x, [data.y], params, backend, leaf_size, tol,
                     _datas=[data])[0]


def fit_joint(x: np.ndarray, ys: list[np.ndarray], params: KernelParams,
              backend: Backend = Backend.DENSE,
              leaf_size: int = DEFAULT_LEAF_SIZE,
              tol: float = DEFAULT_BLOCK_TOL,
              _datas: list[TrainingSet] | None = None) -> list[FittedChannel]:
    """Fit several channels that share inputs and hyperparameters.

    The factorization is computed once and reused for every channel, which
    is what makes the coupled position/velocity model no more expensive to
    train than two independent solves.
    """
    if _datas is None:
        _datas = [TrainingSet(x, y) for y in ys]
    x = _datas[0].x
    if backend == Backend.HODLR:
        fact = HodlrFactor.from_inputs(x, params, leaf_size=leaf_size,
                                       tol=tol)
    else:
        fact = DenseFactor(gram(x, params), params.sigma_n)
    stacked = np.column_stack([d.y for d in _datas])
    alphas = np.asarray(fact.solve(stacked))
    if alphas.ndim == 1:
        alphas = alphas[:, None]
    return [
        FittedChannel(d, params, backend, fact, np.ascontiguousarray(alphas[:, i]))
        for i, d in enumerate(_datas)
    ]


def posterior_mean(channel: FittedChannel, x_star) -> float | np.ndarray:
    """Posterior mean k_*^T alpha at one or many query times."""
    x_star_arr = np.atleast_1d(np.asarray(x_star, dtype=float))
    kq = np.empty((x_star_arr.shape[0], len(channel.data)))
    for i, q in enumerate(x_star_arr):
        kq[i] = kernel_vector(q, channel.data.x, channel.params)
    mean = kq @ channel.alpha
    return float(mean[0]) if np.isscalar(x_star) or np.ndim(x_star) == 0 else mean


def posterior_var(channel: FittedChannel, x_star) -> float | np.ndarray:
    """Posterior variance at query times, clamped into [0, sigma_f^2].

    The clamp removes the small negative values floating-point cancellation
    can produce when a query sits on top of a training input.
    """
    x_star_arr = np.atleast_1d(np.asarray(x_star, dtype=float))
    kq = np.empty((x_star_arr.shape[0], len(channel.data)))
    for i, q in enumerate(x_star_arr):
        kq[i] = kernel_vector(q, channel.data.x, channel.params)
    solved = np.asarray(channel.factorization.solve(kq.T))
    if solved.ndim == 1:
        solved = solved[:, None]
    prior = channel.params.sigma_f**2
    var = prior - np.einsum("qm,mq->q", kq, solved)
    var = np.clip(var, 0.0, prior)
    return float(var[0]) if np.isscalar(x_star) or np.ndim(x_star) == 0 else var


def log_marginal_likelihood(channel: FittedChannel) -> float:
    """Log marginal likelihood of the channel's training data."""
    m = len(channel.data)
    return float(
        -0.5 * channel.data.y @ channel.alpha
        - 0.5 * channel.factorization.logdet()
        - 0.5 * m * engine.LOG2PI
    )
