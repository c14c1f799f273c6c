"""Matern-3/2 Gaussian-process regression core.

Kernel evaluation, dense and hierarchical low-rank factorizations of the
training covariance, posterior evaluation, and bounded quasi-Newton
hyperparameter search.
"""
from .channel import (FittedChannel, TrainingSet, fit, fit_joint,
                      log_marginal_likelihood, posterior_mean, posterior_var)
from .factor import (DEFAULT_BLOCK_TOL, DEFAULT_LEAF_SIZE, Backend,
                     DenseFactor, HodlrFactor, factor)
from .kernel import SQRT3, KernelParams, gram, kernel_vector, matern32
from .optimize import (DEFAULT_BOUNDS, OptimizeResult, optimize_hyperparams)

__all__ = [
    "Backend",
    "DenseFactor",
    "DEFAULT_BLOCK_TOL",
    "DEFAULT_BOUNDS",
    "DEFAULT_LEAF_SIZE",
    "FittedChannel",
    "HodlrFactor",
    "KernelParams",
    "OptimizeResult",
    "SQRT3",
    "TrainingSet",
    "factor",
    "fit",
    "fit_joint",
    "gram",
    "kernel_vector",
    "log_marginal_likelihood",
    "matern32",
    "optimize_hyperparams",
    "posterior_mean",
    "posterior_var",
]
