"""Matern-3/2 covariance kernel on scalar (time) inputs.

The kernel is k(d) = sigma_f^2 * (1 + sqrt(3) d / l) * exp(-sqrt(3) d / l)
with d the absolute input distance.  An independent Gaussian noise term
sigma_n^2 is added on the Gram diagonal by the factorization layer, never
here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT3 = float(np.sqrt(3.0))


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of the Matern-3/2 kernel plus the noise level.

    sigma_f and length_scale are the values the optimizer tunes; sigma_n is
    held fixed during optimization.
    """

    sigma_f: float  # signal amplitude [same unit as the observations]
    length_scale: float  # input length scale [s]
    sigma_n: float  # observation noise standard deviation

    def __post_init__(self) -> None:
        if not np.isfinite(self.sigma_f) or self.sigma_f <= 0.0:
            raise ValueError(f"sigma_f must be finite and > 0, got {self.sigma_f}")
        if not np.isfinite(self.length_scale) or self.length_scale <= 0.0:
            raise ValueError(
                f"length_scale must be finite and > 0, got {self.length_scale}"
            )
        if not np.isfinite(self.sigma_n) or self.sigma_n < 0.0:
            raise ValueError(f"sigma_n must be finite and >= 0, got {self.sigma_n}")


def matern32(xi: float, xj: float, params: KernelParams) -> float:
    """Kernel value between two scalar inputs."""
    s = SQRT3 * abs(xi - xj) / params.length_scale
    return params.sigma_f**2 * (1.0 + s) * np.exp(-s)


def kernel_vector(x_query: float, x: np.ndarray, params: KernelParams) -> np.ndarray:
    """Covariances k(x_query, x_i) for every training input, shape (m,)."""
    s = SQRT3 * np.abs(x_query - np.asarray(x, dtype=float)) / params.length_scale
    return params.sigma_f**2 * (1.0 + s) * np.exp(-s)


def gram(x: np.ndarray, params: KernelParams) -> np.ndarray:
    """Gram matrix K with K[i, j] = k(x_i, x_j), noise-free.

    Parameters
    ----------
    x : array of shape (m,)
        Training inputs.  Must be finite.
    params : KernelParams

    Returns
    -------
    K : array of shape (m, m), symmetric with sigma_f^2 on the diagonal.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"inputs must be one-dimensional, got shape {x.shape}")
    if x.size and not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")
    d = np.abs(x[:, None] - x[None, :])
    s = SQRT3 * d / params.length_scale
    return params.sigma_f**2 * (1.0 + s) * np.exp(-s)
