"""Hot numeric kernels: batched shapelet eigensolves and per-row quantiles.

Each kernel has a scalar-loop body compiled by numba and a vectorised numpy
twin that performs the same floating-point operations in the same order, so
both backends agree to the last bit on IEEE hardware without FMA contraction.
The dispatching functions at the bottom pick one according to
:data:`altsc._accel.USE_NUMBA`.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit

#: Off-diagonal Frobenius norm, relative to ||S||_F, at which Jacobi stops.
JACOBI_REL_TOL = 1e-12
#: Sweep budget before a NumericalError is raised.
JACOBI_MAX_SWEEPS = 100
#: Relative tolerance under which two |eigenvalues| are considered tied.
EIG_TIE_REL_TOL = 1e-12
#: Absolute tolerance under which two unit-vector components tie in magnitude.
SIGN_TIE_TOL = 1e-12


# --------------------------------------------------------------------------
# scalar bodies (numba)
# --------------------------------------------------------------------------


@njit
def _jacobi_inplace(a, v, tol, max_sweeps):
    # once the off-diagonal test passes, one more sweep squares the residual error
    n = a.shape[0]
    polish = False
    for sweep in range(max_sweeps + 2):
        if polish:
            return sweep
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if math.sqrt(2.0 * off) <= tol:
            polish = True
        elif sweep >= max_sweeps:
            return -1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    if i != p and i != q:
                        aip = a[i, p]
                        aiq = a[i, q]
                        nip = c * aip - s * aiq
                        niq = s * aip + c * aiq
                        a[i, p] = nip
                        a[p, i] = nip
                        a[i, q] = niq
                        a[q, i] = niq
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = s * vip + c * viq
    return -1


@njit
def _select_min(w, tie_tol, taken):
    # smallest |w|; near-ties -> smaller signed value; still tied -> lowest index
    n = w.shape[0]
    amin = np.inf
    for i in range(n):
        if not taken[i] and abs(w[i]) < amin:
            amin = abs(w[i])
    smin = np.inf
    for i in range(n):
        if not taken[i] and abs(w[i]) <= amin + tie_tol and w[i] < smin:
            smin = w[i]
    for i in range(n):
        if not taken[i] and abs(w[i]) <= amin + tie_tol and w[i] <= smin + tie_tol:
            return i
    return -1


@njit
def _eig_order(w, tie_tol):
    n = w.shape[0]
    taken = np.zeros(n, dtype=np.bool_)
    order = np.empty(n, dtype=np.int64)
    for k in range(n):
        i = _select_min(w, tie_tol, taken)
        order[k] = i
        taken[i] = True
    return order


@njit
def _sign_normalize(v):
    n = v.shape[0]
    m = 0.0
    for i in range(n):
        if abs(v[i]) > m:
            m = abs(v[i])
    for i in range(n):
        if abs(v[i]) >= m - SIGN_TIE_TOL:
            if v[i] < 0.0:
                for j in range(n):
                    v[j] = -v[j]
            return


@njit
def _shapelets_loop(Z, l, max_sweeps):
    n = Z.shape[0]
    V = np.empty((n, l))
    lam = np.empty(n)
    resid = np.empty(n)
    sweeps = np.empty(n, dtype=np.int64)
    S = np.empty((l, l))
    a = np.empty((l, l))
    vec = np.empty((l, l))
    taken = np.zeros(l, dtype=np.bool_)
    for r in range(n):
        fro = 0.0
        for i in range(l):
            for j in range(l):
                S[i, j] = Z[r, i + j]
                fro += S[i, j] * S[i, j]
        fro = math.sqrt(fro)
        for i in range(l):
            for j in range(l):
                a[i, j] = S[i, j]
                vec[i, j] = 1.0 if i == j else 0.0
        sw = _jacobi_inplace(a, vec, JACOBI_REL_TOL * fro, max_sweeps)
        sweeps[r] = sw
        if sw < 0:
            V[r, :] = np.nan
            lam[r] = np.nan
            resid[r] = np.nan
            continue
        w = np.empty(l)
        for i in range(l):
            w[i] = a[i, i]
        idx = _select_min(w, EIG_TIE_REL_TOL * max(1.0, fro), taken)
        v = vec[:, idx].copy()
        _sign_normalize(v)
        res = 0.0
        for i in range(l):
            acc = 0.0
            for j in range(l):
                acc += S[i, j] * v[j]
            res += acc * acc
        V[r, :] = v
        lam[r] = w[idx]
        resid[r] = math.sqrt(res)
    return V, lam, resid, sweeps


@njit
def _row_quantiles_loop(O, p):
    o, n = O.shape
    out = np.empty(o)
    pos = p * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    for r in range(o):
        x = np.partition(O[r, :], lo)
        a = x[lo]
        # everything right of lo is >= x[lo], so the next order statistic is their minimum
        b = a if hi == lo else np.min(x[lo + 1 :])
        out[r] = a + frac * (b - a)
    return out


def _py(func):
    """The uncompiled Python body behind a numba dispatcher."""
    return getattr(func, "py_func", func)


# --------------------------------------------------------------------------
# vectorised numpy twins
# --------------------------------------------------------------------------


def jacobi_batch_numpy(S, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi on a stack of symmetric matrices, vectorised over the stack.

    Returns ``(diag, V, sweeps)`` where ``sweeps[i] == -1`` flags a matrix that
    did not converge within the budget.
    """
    a = np.array(S, dtype=np.float64, copy=True)
    n, l, _ = a.shape
    v = np.broadcast_to(np.eye(l), (n, l, l)).copy()
    fro = np.sqrt(np.sum(a * a, axis=(1, 2)))
    tol = JACOBI_REL_TOL * fro
    sweeps = np.full(n, -1, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    polish = np.zeros(n, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for sweep in range(max_sweeps + 2):
            done = active & polish
            sweeps[done] = sweep
            active &= ~done
            off = np.zeros(n)
            for p in range(l):
                for q in range(p + 1, l):
                    off += a[:, p, q] * a[:, p, q]
            polish |= active & (np.sqrt(2.0 * off) <= tol)
            active &= polish | (sweep < max_sweeps)
            if not active.any():
                break
            for p in range(l - 1):
                for q in range(p + 1, l):
                    apq = a[:, p, q].copy()
                    mask = active & (apq != 0.0)
                    if not mask.any():
                        continue
                    app = a[:, p, p].copy()
                    aqq = a[:, q, q].copy()
                    theta = (aqq - app) / (2.0 * np.where(mask, apq, 1.0))
                    t = 1.0 / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                    t = np.where(theta < 0.0, -t, t)
                    t = np.where(mask, t, 0.0)
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    cc = c[:, None]
                    ss = s[:, None]
                    colp = a[:, :, p].copy()
                    colq = a[:, :, q].copy()
                    newp = cc * colp - ss * colq
                    newq = ss * colp + cc * colq
                    a[:, :, p] = newp
                    a[:, p, :] = newp
                    a[:, :, q] = newq
                    a[:, q, :] = newq
                    a[:, p, p] = app - t * apq
                    a[:, q, q] = aqq + t * apq
                    zero = np.where(mask, 0.0, apq)
                    a[:, p, q] = zero
                    a[:, q, p] = zero
                    vp = v[:, :, p].copy()
                    vq = v[:, :, q].copy()
                    v[:, :, p] = cc * vp - ss * vq
                    v[:, :, q] = ss * vp + cc * vq
    return np.diagonal(a, axis1=1, axis2=2).copy(), v, sweeps


def hankel_stack(Z, l):
    """Stack of l x l Hankel matrices, one per row of ``Z`` (rows of length 2l-1)."""
    idx = np.arange(l)[:, None] + np.arange(l)[None, :]
    return np.asarray(Z, dtype=np.float64)[:, idx]


def _shapelets_numpy(Z, l, max_sweeps):
    S = hankel_stack(Z, l)
    n = S.shape[0]
    w, vec, sweeps = jacobi_batch_numpy(S, max_sweeps)
    fro = np.sqrt(np.sum(S * S, axis=(1, 2)))
    V = np.full((n, l), np.nan)
    lam = np.full(n, np.nan)
    resid = np.full(n, np.nan)
    taken = np.zeros(l, dtype=bool)
    for r in range(n):
        if sweeps[r] < 0:
            continue
        idx = _py(_select_min)(w[r], EIG_TIE_REL_TOL * max(1.0, fro[r]), taken)
        vv = vec[r, :, idx].copy()
        _py(_sign_normalize)(vv)
        V[r] = vv
        lam[r] = w[r, idx]
    ok = sweeps >= 0
    # same summation order as the scalar loop: row-wise dot, then squares
    Sv = np.zeros((n, l))
    for j in range(l):
        Sv += S[:, :, j] * V[:, j][:, None]
    res = np.zeros(n)
    for i in range(l):
        res += Sv[:, i] * Sv[:, i]
    resid[ok] = np.sqrt(res[ok])
    return V, lam, resid, sweeps


def _row_quantiles_numpy(O, p):
    O = np.asarray(O, dtype=np.float64)
    n = O.shape[1]
    pos = p * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    part = np.partition(O, sorted({lo, hi}), axis=1)
    return part[:, lo] + frac * (part[:, hi] - part[:, lo])


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def batch_shapelets(Z, l, max_sweeps=JACOBI_MAX_SWEEPS, use_numba=None):
    """Null-space shapelets for every row of ``Z`` (shape ``n x (2l-1)``).

    Returns ``(V, eigenvalues, residuals, sweeps)``; a negative sweep count
    marks a row whose eigensolve did not converge.
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != 2 * l - 1:
        raise ValueError(f"expected rows of length {2 * l - 1}, got shape {Z.shape}")
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    if use_numba:
        return _shapelets_loop(Z, l, max_sweeps)
    return _shapelets_numpy(Z, l, max_sweeps)


def row_quantiles(O, p, use_numba=None):
    """Linear-interpolated p-quantile of each row (zero-based position p*(N-1))."""
    O = np.ascontiguousarray(O, dtype=np.float64)
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    if O.shape[0] == 0:
        return np.empty(0)
    if use_numba:
        return _row_quantiles_loop(O, float(p))
    return _row_quantiles_numpy(O, float(p))


def eig_order(w, tie_tol, use_numba=None):
    """Permutation sorting eigenvalues by |value|, near-ties by signed value, then index."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    if use_numba:
        return _eig_order(w, float(tie_tol))
    return _py(_eig_order)(w, float(tie_tol))


def jacobi(S, max_sweeps=JACOBI_MAX_SWEEPS, use_numba=None):
    """Single-matrix Jacobi: ``(diag, V, sweeps)``."""
    S = np.ascontiguousarray(S, dtype=np.float64)
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    if use_numba:
        a = S.copy()
        v = np.eye(S.shape[0])
        tol = JACOBI_REL_TOL * math.sqrt(float(np.sum(S * S)))
        sw = _jacobi_inplace(a, v, tol, max_sweeps)
        return np.diag(a).copy(), v, sw
    w, v, sw = jacobi_batch_numpy(S[None], max_sweeps)
    return w[0], v[0], int(sw[0])
