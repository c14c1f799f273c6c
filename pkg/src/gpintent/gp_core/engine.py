"""Jit-compiled numerical core for Matern-3/2 GP training.

Two linear-algebra backends share this module:

* a "basic" dense path that recomputes an explicit matrix inverse by
  Gauss-Jordan elimination wherever K^-1 appears (the textbook O(m^3)
  implementation, kept deliberately free of factorization shortcuts so it is
  an honest baseline), and
* a hierarchical off-diagonal low-rank (HODLR) path that factors the kernel
  matrix as dense diagonal leaf blocks plus per-level low-rank couplings,
  giving solve and logdet without ever forming the full inverse.

Both are hand-written loops compiled with numba so the backend comparison is
a same-toolchain comparison of the two algorithms.  The bounded limited-memory
quasi-Newton optimizer that tunes (sigma_f, length_scale) in log space also
lives here so a full training cycle stays inside compiled code.

Everything in this module is an internal engine: thin wrappers in factor.py,
channel.py and optimize.py expose the public API and perform validation.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

SQRT3 = np.sqrt(3.0)
LOG2PI = np.log(2.0 * np.pi)

# status codes shared by the factorization routines
OK = 0
FAIL_CHOL = 1  # a diagonal (leaf) block was not positive definite
FAIL_DET = 2  # a coupling determinant came out non-positive
FAIL_PIVOT = 3  # dense elimination hit a vanishing pivot


# ---------------------------------------------------------------------------
# kernel evaluation
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def gram_full(x, sf, ell, sn2, out):
    """Fill out with the Matern-3/2 Gram matrix plus sn2 on the diagonal."""
    m = x.shape[0]
    a = SQRT3 / ell
    s2 = sf * sf
    for i in range(m):
        for j in range(i + 1):
            s = a * abs(x[i] - x[j])
            v = s2 * (1.0 + s) * np.exp(-s)
            out[i, j] = v
            out[j, i] = v
        out[i, i] += sn2


@njit(cache=True, nogil=True)
def kernel_vec(xq, x, sf, ell, out):
    m = x.shape[0]
    a = SQRT3 / ell
    s2 = sf * sf
    for i in range(m):
        s = a * abs(xq - x[i])
        out[i] = s2 * (1.0 + s) * np.exp(-s)


@njit(cache=True, nogil=True)
def _entry(i, j, use_matrix, K0, x, sf2, a):
    """One noise-free kernel matrix entry, from K0 or from inputs."""
    if use_matrix:
        return K0[i, j]
    s = a * abs(x[i] - x[j])
    return sf2 * (1.0 + s) * np.exp(-s)


# ---------------------------------------------------------------------------
# basic dense path: explicit inversion
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def invert_logdet(A, aug, out):
    """Explicit inverse of A by Gauss-Jordan elimination with partial pivoting.

    Writes the inverse into out and returns (status, logdet).  aug is an
    (m, 2m) workspace.  This is the direct inversion the basic backend is
    defined by; it makes no use of symmetry.
    """
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            aug[i, j] = A[i, j]
            aug[i, n + j] = 0.0
        aug[i, n + i] = 1.0
    logdet = 0.0
    sign = 1.0
    for col in range(n):
        piv = col
        best = abs(aug[col, col])
        for r in range(col + 1, n):
            v = abs(aug[r, col])
            if v > best:
                best = v
                piv = r
        if best < 1e-300:
            return FAIL_PIVOT, 0.0
        if piv != col:
            sign = -sign
            for j in range(2 * n):
                tmp = aug[col, j]
                aug[col, j] = aug[piv, j]
                aug[piv, j] = tmp
        p = aug[col, col]
        if p < 0.0:
            sign = -sign
        logdet += np.log(abs(p))
        inv_p = 1.0 / p
        for j in range(2 * n):
            aug[col, j] *= inv_p
        for r in range(n):
            if r != col:
                f = aug[r, col]
                if f != 0.0:
                    for j in range(col, 2 * n):
                        aug[r, j] -= f * aug[col, j]
    if sign <= 0.0:
        return FAIL_DET, 0.0
    for i in range(n):
        for j in range(n):
            out[i, j] = aug[i, n + j]
    return OK, logdet


@njit(cache=True, nogil=True)
def nll_dense(x, ys, sf, ell, sn2, K, aug, Kinv, alpha):
    """Joint negative log marginal likelihood via explicit inversion.

    ys has one row per output channel; all channels share the factor.
    Returns +inf when the elimination fails, so an optimizer line search
    simply backs away from the offending parameters.
    """
    m = x.shape[0]
    nch = ys.shape[0]
    gram_full(x, sf, ell, sn2, K)
    status, logdet = invert_logdet(K, aug, Kinv)
    if status != OK:
        return np.inf
    total = 0.5 * nch * (logdet + m * LOG2PI)
    for c in range(nch):
        for i in range(m):
            s = 0.0
            for j in range(m):
                s += Kinv[i, j] * ys[c, j]
            alpha[i] = s
        quad = 0.0
        for i in range(m):
            quad += ys[c, i] * alpha[i]
        total += 0.5 * quad
    return total


# ---------------------------------------------------------------------------
# small dense helpers (hand-rolled: the blocks are tiny)
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def chol_inplace(A, n):
    """Lower Cholesky of the leading (n, n) block in place; 0 on success."""
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= 0.0 or not np.isfinite(s):
            return FAIL_CHOL
        d = np.sqrt(s)
        A[j, j] = d
        for i in range(j + 1, n):
            t = A[i, j]
            for k in range(j):
                t -= A[i, k] * A[j, k]
            A[i, j] = t / d
    return OK


@njit(cache=True, nogil=True)
def chol_solve_cols(L, n, B, ncol):
    """Solve (L L^T) X = B in place for the leading (n, ncol) block of B."""
    for c in range(ncol):
        for i in range(n):
            t = B[i, c]
            for k in range(i):
                t -= L[i, k] * B[k, c]
            B[i, c] = t / L[i, i]
        for i in range(n - 1, -1, -1):
            t = B[i, c]
            for k in range(i + 1, n):
                t -= L[k, i] * B[k, c]
            B[i, c] = t / L[i, i]


@njit(cache=True, nogil=True)
def lu_inplace(A, n, piv):
    """LU with partial pivoting in place; returns (status, logdet, sign)."""
    sign = 1.0
    logdet = 0.0
    for col in range(n):
        p = col
        best = abs(A[col, col])
        for r in range(col + 1, n):
            v = abs(A[r, col])
            if v > best:
                best = v
                p = r
        if best < 1e-300:
            return FAIL_PIVOT, 0.0, 0.0
        piv[col] = p
        if p != col:
            sign = -sign
            for j in range(n):
                tmp = A[col, j]
                A[col, j] = A[p, j]
                A[p, j] = tmp
        d = A[col, col]
        if d < 0.0:
            sign = -sign
        logdet += np.log(abs(d))
        for r in range(col + 1, n):
            f = A[r, col] / d
            A[r, col] = f
            for j in range(col + 1, n):
                A[r, j] -= f * A[col, j]
    return OK, logdet, sign


@njit(cache=True, nogil=True)
def lu_solve_cols(A, n, piv, B, ncol):
    """Solve LU X = B in place using factors from lu_inplace."""
    for c in range(ncol):
        for i in range(n):
            p = piv[i]
            if p != i:
                tmp = B[i, c]
                B[i, c] = B[p, c]
                B[p, c] = tmp
            t = B[i, c]
            for k in range(i):
                t -= A[i, k] * B[k, c]
            B[i, c] = t
        for i in range(n - 1, -1, -1):
            t = B[i, c]
            for k in range(i + 1, n):
                t -= A[i, k] * B[k, c]
            B[i, c] = t / A[i, i]


# ---------------------------------------------------------------------------
# HODLR plan
# ---------------------------------------------------------------------------


class HodlrPlan(NamedTuple):
    """Static decomposition of index range [0, m) into a balanced block tree.

    Nodes are stored in preorder, so the subtree of node k occupies the
    contiguous index range [k, k + size[k]).  bu lists all node indices by
    strictly decreasing depth: iterating bu visits every descendant of a node
    before the node itself, which is the order both the factorization and the
    solves rely on.
    """

    m: int
    leaf_size: int
    lo: np.ndarray
    hi: np.ndarray
    mid: np.ndarray
    leaf: np.ndarray  # 1 for leaf nodes
    size: np.ndarray  # subtree node count
    bu: np.ndarray  # bottom-up traversal order
    chol_off: np.ndarray  # offset of the leaf Cholesky block, -1 for internal
    uo: np.ndarray  # offset of U/P1 storage, -1 for leaves
    vo: np.ndarray  # offset of V/P2 storage
    co: np.ndarray  # offset of coupling LU storage
    po: np.ndarray  # offset of coupling pivot storage
    cap: np.ndarray  # per-node rank capacity min(n1, n2)
    chol_len: int
    u_len: int
    v_len: int
    c_len: int
    p_len: int


_PLAN_CACHE: dict[tuple[int, int], HodlrPlan] = {}


def build_plan(m: int, leaf_size: int) -> HodlrPlan:
    """Build (or fetch) the block tree for m points with the given leaf size."""
    key = (m, leaf_size)
    cached = _PLAN_CACHE.get(key)
    if cached is not None:
        return cached
    if m < 1:
        raise ValueError("plan needs at least one point")
    if leaf_size < 1:
        raise ValueError("leaf size must be >= 1")

    nodes: list[list[int]] = []  # lo, hi, mid, leaf, depth, size

    def rec(lo: int, hi: int, depth: int) -> int:
        idx = len(nodes)
        nodes.append([lo, hi, -1, 1, depth, 1])
        if hi - lo > leaf_size:
            mid = lo + (hi - lo) // 2
            ls = rec(lo, mid, depth + 1)
            rs = rec(mid, hi, depth + 1)
            nodes[idx][2] = mid
            nodes[idx][3] = 0
            nodes[idx][5] = 1 + ls + rs
        return nodes[idx][5]

    rec(0, m, 0)
    ni = len(nodes)
    arr = np.array(nodes, dtype=np.int64)
    lo, hi, mid, leaf, depth, size = (arr[:, k].copy() for k in range(6))
    bu = np.array(sorted(range(ni), key=lambda k: (-depth[k], k)), dtype=np.int64)

    chol_off = np.full(ni, -1, dtype=np.int64)
    uo = np.full(ni, -1, dtype=np.int64)
    vo = np.full(ni, -1, dtype=np.int64)
    co = np.full(ni, -1, dtype=np.int64)
    po = np.full(ni, -1, dtype=np.int64)
    cap = np.zeros(ni, dtype=np.int64)
    cl = ul = vl = csz = pl = 0
    for k in range(ni):
        n = hi[k] - lo[k]
        if leaf[k]:
            chol_off[k] = cl
            cl += n * n
        else:
            n1 = mid[k] - lo[k]
            n2 = hi[k] - mid[k]
            r = min(n1, n2)
            cap[k] = r
            uo[k] = ul
            ul += n1 * r
            vo[k] = vl
            vl += n2 * r
            co[k] = csz
            csz += (2 * r) * (2 * r)
            po[k] = pl
            pl += 2 * r
    plan = HodlrPlan(
        m, leaf_size, lo, hi, mid, leaf, size, bu, chol_off,
        uo, vo, co, po, cap, cl, ul, vl, csz, pl,
    )
    _PLAN_CACHE[key] = plan
    return plan


def alloc_buffers(plan: HodlrPlan):
    """Fresh factor storage for one HODLR factorization."""
    return (
        np.empty(plan.chol_len),  # BL: leaf Cholesky factors
        np.empty(plan.u_len),  # BU: left ACA factors
        np.empty(plan.v_len),  # BV: right ACA factors
        np.empty(plan.u_len),  # BP1: A1^-1 U
        np.empty(plan.v_len),  # BP2: A2^-1 V
        np.empty(plan.c_len),  # BC: coupling LU factors
        np.empty(plan.p_len, dtype=np.int64),  # BPIV: coupling pivots
        np.zeros(len(plan.lo), dtype=np.int64),  # rank per node
    )


# ---------------------------------------------------------------------------
# HODLR factorization
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _aca_block(rlo, rhi, clo, chi, use_matrix, K0, x, sf2, a, tol, capk, U, V):
    """Adaptive cross approximation of block K[rlo:rhi, clo:chi].

    Writes factors into the leading columns of U (n1, capk) and V (n2, capk)
    so that the block is approximated by U[:, :r] @ V[:, :r].T.  Stops when
    the new term's norm falls below tol times the running Frobenius estimate.
    Returns the rank r.
    """
    n1 = rhi - rlo
    n2 = chi - clo
    row = np.empty(n2)
    used_r = np.zeros(n1, dtype=np.int64)
    used_c = np.zeros(n2, dtype=np.int64)
    fro2 = 0.0
    r = 0
    i_star = 0
    attempts = 0
    while r < capk:
        # residual row i_star
        for j in range(n2):
            row[j] = _entry(rlo + i_star, clo + j, use_matrix, K0, x, sf2, a)
        for k in range(r):
            uik = U[i_star, k]
            for j in range(n2):
                row[j] -= uik * V[j, k]
        j_star = -1
        best = 0.0
        for j in range(n2):
            if used_c[j] == 0:
                v = abs(row[j])
                if v > best:
                    best = v
                    j_star = j
        if j_star < 0 or best < 1e-300:
            # row is (numerically) fully captured; try a few other rows
            attempts += 1
            if attempts > 3:
                break
            found = -1
            for i in range(n1):
                if used_r[i] == 0 and i != i_star:
                    found = i
                    break
            if found < 0:
                break
            i_star = found
            continue
        attempts = 0
        piv = row[j_star]
        # residual column j_star goes into U[:, r], scaled row into V[:, r]
        for i in range(n1):
            U[i, r] = _entry(rlo + i, clo + j_star, use_matrix, K0, x, sf2, a)
        for k in range(r):
            vjk = V[j_star, k]
            for i in range(n1):
                U[i, r] -= vjk * U[i, k]
        inv_p = 1.0 / piv
        for j in range(n2):
            V[j, r] = row[j] * inv_p
        used_r[i_star] = 1
        used_c[j_star] = 1
        un2 = 0.0
        for i in range(n1):
            un2 += U[i, r] * U[i, r]
        vn2 = 0.0
        for j in range(n2):
            vn2 += V[j, r] * V[j, r]
        cross = 0.0
        for k in range(r):
            du = 0.0
            for i in range(n1):
                du += U[i, r] * U[i, k]
            dv = 0.0
            for j in range(n2):
                dv += V[j, r] * V[j, k]
            cross += du * dv
        fro2 += un2 * vn2 + 2.0 * cross
        r += 1
        if un2 * vn2 <= tol * tol * fro2:
            break
        # next pivot row: largest entry of the new column among unused rows
        i_star = -1
        best = -1.0
        for i in range(n1):
            if used_r[i] == 0:
                v = abs(U[i, r - 1])
                if v > best:
                    best = v
                    i_star = i
        if i_star < 0:
            break
    return r


@njit(cache=True, nogil=True)
def hodlr_apply_solve(node, B, ncol, lo, hi, mid, leaf, size, bu,
                      chol_off, uo, vo, co, po, cap,
                      BL, BU, BV, BP1, BP2, BC, BPIV, rank):
    """In-place solve of the factored subtree at node against B.

    B holds rows for the global index range [lo[node], hi[node]); ncol of its
    columns are active.  Visits every leaf (diagonal solve) then every
    internal descendant bottom-up (low-rank coupling correction).
    """
    base = lo[node]
    last = node + size[node]
    for t in range(len(bu)):
        k = bu[t]
        if k < node or k >= last:
            continue
        if leaf[k]:
            n = hi[k] - lo[k]
            L = BL[chol_off[k]:chol_off[k] + n * n].reshape(n, n)
            chol_solve_cols(L, n, B[lo[k] - base:, :], ncol)
        else:
            r = rank[k]
            if r == 0:
                continue
            n1 = mid[k] - lo[k]
            n2 = hi[k] - mid[k]
            capk = cap[k]
            U = BU[uo[k]:uo[k] + n1 * capk].reshape(n1, capk)
            V = BV[vo[k]:vo[k] + n2 * capk].reshape(n2, capk)
            P1 = BP1[uo[k]:uo[k] + n1 * capk].reshape(n1, capk)
            P2 = BP2[vo[k]:vo[k] + n2 * capk].reshape(n2, capk)
            C = BC[co[k]:co[k] + 4 * capk * capk].reshape(2 * capk, 2 * capk)
            piv = BPIV[po[k]:po[k] + 2 * capk]
            o1 = lo[k] - base
            o2 = mid[k] - base
            g = np.empty((2 * r, ncol))
            # g = [V^T t2; U^T t1]
            for q in range(r):
                for c in range(ncol):
                    s = 0.0
                    for j in range(n2):
                        s += V[j, q] * B[o2 + j, c]
                    g[q, c] = s
            for q in range(r):
                for c in range(ncol):
                    s = 0.0
                    for i in range(n1):
                        s += U[i, q] * B[o1 + i, c]
                    g[r + q, c] = s
            lu_solve_cols(C, 2 * r, piv, g, ncol)
            for i in range(n1):
                for c in range(ncol):
                    s = 0.0
                    for q in range(r):
                        s += P1[i, q] * g[q, c]
                    B[o1 + i, c] -= s
            for j in range(n2):
                for c in range(ncol):
                    s = 0.0
                    for q in range(r):
                        s += P2[j, q] * g[r + q, c]
                    B[o2 + j, c] -= s


@njit(cache=True, nogil=True)
def hodlr_factor(use_matrix, K0, x, sf, ell, sn2, tol,
                 lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co, po, cap,
                 BL, BU, BV, BP1, BP2, BC, BPIV, rank):
    """Factor K + sn2 I hierarchically; returns (status, logdet).

    K entries come either from the explicit matrix K0 or from the Matern-3/2
    kernel on inputs x.  Factors land in the provided buffers; the plan
    arrays describe the tree.
    """
    sf2 = sf * sf
    a = SQRT3 / ell if ell > 0.0 else 0.0
    logdet = 0.0
    for t in range(len(bu)):
        k = bu[t]
        if leaf[k]:
            n = hi[k] - lo[k]
            L = BL[chol_off[k]:chol_off[k] + n * n].reshape(n, n)
            for i in range(n):
                gi = lo[k] + i
                for j in range(i + 1):
                    L[i, j] = _entry(gi, lo[k] + j, use_matrix, K0, x, sf2, a)
                L[i, i] += sn2
            if chol_inplace(L, n) != OK:
                return FAIL_CHOL, 0.0
            for i in range(n):
                logdet += 2.0 * np.log(L[i, i])
        else:
            n1 = mid[k] - lo[k]
            n2 = hi[k] - mid[k]
            capk = cap[k]
            U = BU[uo[k]:uo[k] + n1 * capk].reshape(n1, capk)
            V = BV[vo[k]:vo[k] + n2 * capk].reshape(n2, capk)
            r = _aca_block(lo[k], mid[k], mid[k], hi[k], use_matrix, K0, x,
                           sf2, a, tol, capk, U, V)
            rank[k] = r
            if r == 0:
                continue
            P1 = BP1[uo[k]:uo[k] + n1 * capk].reshape(n1, capk)
            P2 = BP2[vo[k]:vo[k] + n2 * capk].reshape(n2, capk)
            for i in range(n1):
                for q in range(r):
                    P1[i, q] = U[i, q]
            for j in range(n2):
                for q in range(r):
                    P2[j, q] = V[j, q]
            # children are already factored (bottom-up order)
            left = k + 1
            right = left + size[left]
            hodlr_apply_solve(left, P1, r, lo, hi, mid, leaf, size, bu,
                              chol_off, uo, vo, co, po, cap,
                              BL, BU, BV, BP1, BP2, BC, BPIV, rank)
            hodlr_apply_solve(right, P2, r, lo, hi, mid, leaf, size, bu,
                              chol_off, uo, vo, co, po, cap,
                              BL, BU, BV, BP1, BP2, BC, BPIV, rank)
            # coupling matrix C = [[I, V^T P2], [U^T P1, I]]
            C = BC[co[k]:co[k] + 4 * capk * capk].reshape(2 * capk, 2 * capk)
            piv = BPIV[po[k]:po[k] + 2 * capk]
            for p in range(2 * r):
                for q in range(2 * r):
                    C[p, q] = 1.0 if p == q else 0.0
            for p in range(r):
                for q in range(r):
                    s = 0.0
                    for j in range(n2):
                        s += V[j, p] * P2[j, q]
                    C[p, r + q] = s
            for p in range(r):
                for q in range(r):
                    s = 0.0
                    for i in range(n1):
                        s += U[i, p] * P1[i, q]
                    C[r + p, q] = s
            status, ld, sign = lu_inplace(C, 2 * r, piv)
            if status != OK or sign <= 0.0:
                return FAIL_DET, 0.0
            logdet += ld
    return OK, logdet


# ---------------------------------------------------------------------------
# HODLR likelihood evaluation
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def nll_hodlr(x, ys, sf, ell, sn2, tol,
              lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co, po, cap,
              BL, BU, BV, BP1, BP2, BC, BPIV, rank, work):
    """Joint negative log marginal likelihood via the HODLR factorization.

    work is an (m, nch) scratch array reused across calls.  Returns +inf on
    factorization failure.
    """
    m = x.shape[0]
    nch = ys.shape[0]
    status, logdet = hodlr_factor(
        False, _DUMMY_K, x, sf, ell, sn2, tol,
        lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co, po, cap,
        BL, BU, BV, BP1, BP2, BC, BPIV, rank)
    if status != OK:
        return np.inf
    for c in range(nch):
        for i in range(m):
            work[i, c] = ys[c, i]
    hodlr_apply_solve(0, work, nch, lo, hi, mid, leaf, size, bu,
                      chol_off, uo, vo, co, po, cap,
                      BL, BU, BV, BP1, BP2, BC, BPIV, rank)
    total = 0.5 * nch * (logdet + m * LOG2PI)
    for c in range(nch):
        quad = 0.0
        for i in range(m):
            quad += ys[c, i] * work[i, c]
        total += 0.5 * quad
    return total


_DUMMY_K = np.zeros((1, 1))


# ---------------------------------------------------------------------------
# bounded limited-memory quasi-Newton optimizer
# ---------------------------------------------------------------------------

BACKEND_DENSE = 0
BACKEND_HODLR = 1


@njit(cache=True, nogil=True)
def _nll_at(z, backend, x, ys, sn2, tol,
            K, aug, Kinv, alpha,
            lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co, po, cap,
            BL, BU, BV, BP1, BP2, BC, BPIV, rank, work):
    sf = np.exp(z[0])
    ell = np.exp(z[1])
    if backend == BACKEND_DENSE:
        return nll_dense(x, ys, sf, ell, sn2, K, aug, Kinv, alpha)
    return nll_hodlr(x, ys, sf, ell, sn2, tol,
                     lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co, po,
                     cap, BL, BU, BV, BP1, BP2, BC, BPIV, rank, work)


@njit(cache=True, nogil=True)
def optimize_engine(backend, x, ys, sn2, z0, lb, ub, tol,
                    max_iter, hist, gtol, fd_step,
                    lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co, po, cap,
                    BL, BU, BV, BP1, BP2, BC, BPIV, rank):
    """Minimize the joint NLL over z = (log sigma_f, log length_scale).

    Projected limited-memory BFGS with Armijo backtracking inside the box
    [lb, ub].  Gradients are central finite differences with step fd_step, so
    every backend runs the identical optimizer contract.  Always returns the
    best point seen (never raises); converged is 1 when either the projected
    gradient norm fell below gtol or successive accepted values differ by a
    negligible relative amount.

    Returns (z_best, f_best, n_iter, n_eval, converged, trace, n_trace)
    where trace holds the NLL at each accepted iterate.
    """
    m = x.shape[0]
    nch = ys.shape[0]
    K = np.empty((m, m))
    aug = np.empty((m, 2 * m))
    Kinv = np.empty((m, m))
    alpha = np.empty(m)
    work = np.empty((m, nch))

    n = 2
    z = np.empty(n)
    for i in range(n):
        v = z0[i]
        if v < lb[i]:
            v = lb[i]
        if v > ub[i]:
            v = ub[i]
        z[i] = v

    n_eval = 0
    f = _nll_at(z, backend, x, ys, sn2, tol, K, aug, Kinv, alpha,
                lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co, po, cap,
                BL, BU, BV, BP1, BP2, BC, BPIV, rank, work)
    n_eval += 1
    trace = np.empty(max_iter + 1)
    trace[0] = f
    n_trace = 1
    z_best = z.copy()
    f_best = f
    if not np.isfinite(f):
        return z_best, f_best, 0, n_eval, 0, trace, n_trace

    g = np.empty(n)
    zt = np.empty(n)
    S = np.empty((hist, n))
    Y = np.empty((hist, n))
    rho = np.empty(hist)
    al = np.empty(hist)
    n_hist = 0
    gamma = 1.0

    # central finite-difference gradient at z
    for i in range(n):
        zt[0] = z[0]
        zt[1] = z[1]
        zt[i] = z[i] + fd_step
        fp = _nll_at(zt, backend, x, ys, sn2, tol, K, aug, Kinv, alpha,
                     lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co, po,
                     cap, BL, BU, BV, BP1, BP2, BC, BPIV, rank, work)
        zt[i] = z[i] - fd_step
        fm = _nll_at(zt, backend, x, ys, sn2, tol, K, aug, Kinv, alpha,
                     lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co, po,
                     cap, BL, BU, BV, BP1, BP2, BC, BPIV, rank, work)
        n_eval += 2
        if np.isfinite(fp) and np.isfinite(fm):
            g[i] = (fp - fm) / (2.0 * fd_step)
        elif np.isfinite(fp):
            g[i] = (fp - f) / fd_step
        elif np.isfinite(fm):
            g[i] = (f - fm) / fd_step
        else:
            g[i] = 0.0

    converged = 0
    n_iter = 0
    d = np.empty(n)
    znew = np.empty(n)
    gnew = np.empty(n)
    for _ in range(max_iter):
        # projected-gradient stationarity test
        pg = 0.0
        for i in range(n):
            v = z[i] - g[i]
            if v < lb[i]:
                v = lb[i]
            if v > ub[i]:
                v = ub[i]
            w = abs(z[i] - v)
            if w > pg:
                pg = w
        if pg <= gtol:
            converged = 1
            break
        n_iter += 1

        # two-loop recursion for d = -H g
        for i in range(n):
            d[i] = g[i]
        for kk in range(n_hist - 1, -1, -1):
            s_dot_d = 0.0
            for i in range(n):
                s_dot_d += S[kk, i] * d[i]
            al[kk] = rho[kk] * s_dot_d
            for i in range(n):
                d[i] -= al[kk] * Y[kk, i]
        for i in range(n):
            d[i] *= gamma
        for kk in range(n_hist):
            y_dot_d = 0.0
            for i in range(n):
                y_dot_d += Y[kk, i] * d[i]
            beta = rho[kk] * y_dot_d
            for i in range(n):
                d[i] += (al[kk] - beta) * S[kk, i]
        for i in range(n):
            d[i] = -d[i]
        descent = 0.0
        for i in range(n):
            descent += d[i] * g[i]
        if descent >= 0.0:
            for i in range(n):
                d[i] = -g[i]
            n_hist = 0
            gamma = 1.0

        # backtracking line search on the projected step
        step = 1.0
        accepted = False
        fnew = f
        for _bt in range(30):
            moved = 0.0
            for i in range(n):
                v = z[i] + step * d[i]
                if v < lb[i]:
                    v = lb[i]
                if v > ub[i]:
                    v = ub[i]
                znew[i] = v
                moved += abs(znew[i] - z[i])
            if moved == 0.0:
                break
            fnew = _nll_at(znew, backend, x, ys, sn2, tol, K, aug, Kinv,
                           alpha, lo, hi, mid, leaf, size, bu, chol_off, uo,
                           vo, co, po, cap, BL, BU, BV, BP1, BP2, BC, BPIV,
                           rank, work)
            n_eval += 1
            gtd = 0.0
            for i in range(n):
                gtd += g[i] * (znew[i] - z[i])
            if np.isfinite(fnew) and fnew <= f + 1e-4 * gtd:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break

        for i in range(n):
            zt[0] = znew[0]
            zt[1] = znew[1]
            zt[i] = znew[i] + fd_step
            fp = _nll_at(zt, backend, x, ys, sn2, tol, K, aug, Kinv, alpha,
                         lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co,
                         po, cap, BL, BU, BV, BP1, BP2, BC, BPIV, rank, work)
            zt[i] = znew[i] - fd_step
            fm = _nll_at(zt, backend, x, ys, sn2, tol, K, aug, Kinv, alpha,
                         lo, hi, mid, leaf, size, bu, chol_off, uo, vo, co,
                         po, cap, BL, BU, BV, BP1, BP2, BC, BPIV, rank, work)
            n_eval += 2
            if np.isfinite(fp) and np.isfinite(fm):
                gnew[i] = (fp - fm) / (2.0 * fd_step)
            elif np.isfinite(fp):
                gnew[i] = (fp - fnew) / fd_step
            elif np.isfinite(fm):
                gnew[i] = (fnew - fm) / fd_step
            else:
                gnew[i] = 0.0

        # curvature update
        sy = 0.0
        ss = 0.0
        yy = 0.0
        for i in range(n):
            si = znew[i] - z[i]
            yi = gnew[i] - g[i]
            sy += si * yi
            ss += si * si
            yy += yi * yi
        if sy > 1e-10 * np.sqrt(ss * yy) and yy > 0.0:
            if n_hist < hist:
                kk = n_hist
                n_hist += 1
            else:
                for sh in range(hist - 1):
                    for i in range(n):
                        S[sh, i] = S[sh + 1, i]
                        Y[sh, i] = Y[sh + 1, i]
                    rho[sh] = rho[sh + 1]
                kk = hist - 1
            for i in range(n):
                S[kk, i] = znew[i] - z[i]
                Y[kk, i] = gnew[i] - g[i]
            rho[kk] = 1.0 / sy
            gamma = sy / yy

        f_prev = f
        for i in range(n):
            z[i] = znew[i]
            g[i] = gnew[i]
        f = fnew
        trace[n_trace] = f
        n_trace += 1
        if f < f_best:
            f_best = f
            for i in range(n):
                z_best[i] = z[i]
        # relative-decrease stopping test (the ftol of L-BFGS-B)
        scale = abs(f_prev)
        if abs(f) > scale:
            scale = abs(f)
        if scale < 1.0:
            scale = 1.0
        if f_prev - f <= 1e-9 * scale:
            converged = 1
            break

    if f < f_best:
        f_best = f
        for i in range(n):
            z_best[i] = z[i]
    return z_best, f_best, n_iter, n_eval, converged, trace, n_trace
