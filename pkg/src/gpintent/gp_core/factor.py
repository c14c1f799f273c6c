"""Factorization backends for the noisy kernel matrix K + sigma_n^2 I.

Dense wraps a symmetric (Cholesky) factorization from scipy; Hodlr wraps the
hierarchical low-rank engine.  Both expose solve() and logdet(), and both
apply the same escalating-jitter policy when the matrix is numerically
indefinite: jitter starts at 1e-10 and grows tenfold up to 1e-4 before
NumericalError is raised.
"""
from __future__ import annotations

import enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import NumericalError
from . import engine
from .kernel import KernelParams

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

DEFAULT_LEAF_SIZE = 32
DEFAULT_BLOCK_TOL = 1e-8


class Backend(enum.Enum):
    DENSE = "dense"
    HODLR = "hodlr"


class DenseFactor:
    """Cholesky factorization of K + sigma_n^2 I."""

    def __init__(self, K: np.ndarray, sigma_n: float):
        K = np.asarray(K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError(f"K must be square, got shape {K.shape}")
        if not np.all(np.isfinite(K)):
            raise ValueError("K must be finite")
        m = K.shape[0]
        noisy = K + sigma_n**2 * np.eye(m)
        last_err: Exception | None = None
        for jitter in JITTER_LADDER:
            try:
                self._cho = cho_factor(
                    noisy + jitter * np.eye(m) if jitter else noisy, lower=True
                )
            except np.linalg.LinAlgError as err:
                last_err = err
                continue
            self.jitter = jitter
            self.m = m
            return
        raise NumericalError(
            f"Cholesky failed up to jitter {JITTER_LADDER[-1]:g}: {last_err}",
            jitter=JITTER_LADDER[-1],
        )

    def solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve(self._cho, np.asarray(b, dtype=float))

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._cho[0]))))


class HodlrFactor:
    """Hierarchical off-diagonal low-rank factorization of K + sigma_n^2 I.

    Diagonal leaf blocks (at most leaf_size wide) are Cholesky-factored
    densely; each off-diagonal block is compressed to the rank that meets the
    relative block tolerance, and the levels are tied together through small
    coupling systems, giving solve and logdet in near-linear time.
    """

    def __init__(self, m: int, sigma_n: float, leaf_size: int, tol: float):
        if leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        if tol <= 0.0:
            raise ValueError("block tolerance must be > 0")
        self.m = m
        self.leaf_size = leaf_size
        self.tol = tol
        self._plan = engine.build_plan(m, leaf_size)
        self._bufs = engine.alloc_buffers(self._plan)
        self._logdet = 0.0
        self.jitter = 0.0
        self._sigma_n = sigma_n

    @classmethod
    def from_matrix(
        cls,
        K: np.ndarray,
        sigma_n: float,
        leaf_size: int = DEFAULT_LEAF_SIZE,
        tol: float = DEFAULT_BLOCK_TOL,
    ) -> "HodlrFactor":
        K = np.ascontiguousarray(K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError(f"K must be square, got shape {K.shape}")
        if not np.all(np.isfinite(K)):
            raise ValueError("K must be finite")
        self = cls(K.shape[0], sigma_n, leaf_size, tol)
        dummy_x = np.zeros(1)
        self._factor(True, K, dummy_x, 1.0, 1.0)
        return self

    @classmethod
    def from_inputs(
        cls,
        x: np.ndarray,
        params: KernelParams,
        leaf_size: int = DEFAULT_LEAF_SIZE,
        tol: float = DEFAULT_BLOCK_TOL,
    ) -> "HodlrFactor":
        """Factor the Matern-3/2 Gram of inputs x without materializing it."""
        x = np.ascontiguousarray(x, dtype=float)
        self = cls(x.shape[0], params.sigma_n, leaf_size, tol)
        self._factor(False, engine._DUMMY_K, x, params.sigma_f,
                     params.length_scale)
        return self

    def _factor(self, use_matrix: bool, K: np.ndarray, x: np.ndarray,
                sigma_f: float, length_scale: float) -> None:
        p = self._plan
        sn2 = self._sigma_n**2
        for jitter in JITTER_LADDER:
            status, logdet = engine.hodlr_factor(
                use_matrix, K, x, sigma_f, length_scale, sn2 + jitter,
                self.tol, p.lo, p.hi, p.mid, p.leaf, p.size, p.bu, p.chol_off,
                p.uo, p.vo, p.co, p.po, p.cap, *self._bufs)
            if status == engine.OK:
                self._logdet = float(logdet)
                self.jitter = jitter
                return
        raise NumericalError(
            f"hierarchical factorization failed up to jitter "
            f"{JITTER_LADDER[-1]:g}",
            jitter=JITTER_LADDER[-1],
        )

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.m:
            raise ValueError(f"rhs has {b.shape[0]} rows, expected {self.m}")
        squeeze = b.ndim == 1
        out = np.ascontiguousarray(b.reshape(self.m, -1).copy())
        p = self._plan
        engine.hodlr_apply_solve(
            0, out, out.shape[1], p.lo, p.hi, p.mid, p.leaf, p.size, p.bu,
            p.chol_off, p.uo, p.vo, p.co, p.po, p.cap, *self._bufs)
        return out[:, 0] if squeeze else out

    def logdet(self) -> float:
        return self._logdet

    @property
    def ranks(self) -> np.ndarray:
        """Adaptive rank chosen for each off-diagonal block (0 for leaves)."""
        return self._bufs[7].copy()


def factor(K: np.ndarray, sigma_n: float, backend: Backend = Backend.DENSE,
           leaf_size: int = DEFAULT_LEAF_SIZE, tol: float = DEFAULT_BLOCK_TOL):
    """Factor K + sigma_n^2 I with the chosen backend.

    Returns an object supporting solve(rhs) and logdet().  Raises
    NumericalError when the matrix stays indefinite through the whole jitter
    ladder.
    """
    if sigma_n < 0.0 or not np.isfinite(sigma_n):
        raise ValueError(f"sigma_n must be finite and >= 0, got {sigma_n}")
    if backend == Backend.DENSE:
        return DenseFactor(K, sigma_n)
    return HodlrFactor.from_matrix(K, sigma_n, leaf_size=leaf_size, tol=tol)
