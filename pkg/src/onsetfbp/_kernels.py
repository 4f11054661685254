"""Hot numeric loops, compiled with numba when available.

Every kernel has a pure-numpy twin. The numpy path is selected when numba is
missing or when ``ONSETFBP_NUMPY=1`` is set in the environment; both paths are
exercised by the test suite and compared in ``benchmarks/bench_kernels.py``.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("ONSETFBP_NUMPY", "0") not in ("1", "true", "yes")


# ---------------------------------------------------------------------------
# batched tridiagonal solve
# ---------------------------------------------------------------------------

def _thomas_numpy(lower, diag, upper, rhs):
    # lower/upper: (m-1,), diag: (batch, m), rhs: (batch, m); all rows share
    # the off-diagonals, only the diagonal varies across the batch
    batch, m = rhs.shape
    cp = np.empty((batch, m))
    dp = np.empty(rhs.shape, dtype=rhs.dtype)
    cp[:, 0] = upper[0] / diag[:, 0] if m > 1 else 0.0
    dp[:, 0] = rhs[:, 0] / diag[:, 0]
    for i in range(1, m):
        denom = diag[:, i] - lower[i - 1] * cp[:, i - 1]
        if i < m - 1:
            cp[:, i] = upper[i] / denom
        dp[:, i] = (rhs[:, i] - lower[i - 1] * dp[:, i - 1]) / denom
    out = np.empty_like(dp)
    out[:, -1] = dp[:, -1]
    for i in range(m - 2, -1, -1):
        out[:, i] = dp[:, i] - cp[:, i] * out[:, i + 1]
    return out


def _thomas_loop(lower, diag, upper, rhs, out):
    batch, m = rhs.shape
    cp = np.empty(m)
    dp = np.empty(m, dtype=rhs.dtype)
    for b in range(batch):
        cp[0] = upper[0] / diag[b, 0] if m > 1 else 0.0
        dp[0] = rhs[b, 0] / diag[b, 0]
        for i in range(1, m):
            denom = diag[b, i] - lower[i - 1] * cp[i - 1]
            if i < m - 1:
                cp[i] = upper[i] / denom
            dp[i] = (rhs[b, i] - lower[i - 1] * dp[i - 1]) / denom
        out[b, m - 1] = dp[m - 1]
        for i in range(m - 2, -1, -1):
            out[b, i] = dp[i] - cp[i] * out[b, i + 1]


# ---------------------------------------------------------------------------
# pairwise Hölder quotient
# ---------------------------------------------------------------------------

def _holder_numpy(values, times, beta):
    # values: (N, K) flattened samples; max over pairs of sup|u_i-u_j| / |t_i-t_j|^beta
    best = 0.0
    n = values.shape[0]
    for i in range(n - 1):
        diff = np.max(np.abs(values[i + 1:] - values[i]), axis=1)
        q = diff / np.abs(times[i + 1:] - times[i]) ** beta
        best = max(best, float(q.max()))
    return best


def _holder_loop(values, times, beta):
    n, k = values.shape
    best = 0.0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dt = abs(times[j] - times[i]) ** beta
            worst = 0.0
            for c in range(k):
                d = abs(values[j, c] - values[i, c])
                if d > worst:
                    worst = d
            q = worst / dt
            if q > best:
                best = q
    return best


# ---------------------------------------------------------------------------
# trigonometric interpolation at scattered points
# ---------------------------------------------------------------------------

def _fourier_eval_numpy(coef, k, pts):
    # coef: (M,) complex Fourier coefficients (already divided by N), k: (M, d)
    # wavenumbers, pts: (P, d) evaluation points
    phase = pts @ k.T
    return (np.exp(1j * phase) @ coef).real


def _fourier_eval_loop(coef, k, pts, out):
    npts, d = pts.shape
    nm = coef.shape[0]
    for p in range(npts):
        acc = 0.0
        for j in range(nm):
            ph = 0.0
            for a in range(d):
                ph += k[j, a] * pts[p, a]
            acc += coef[j].real * np.cos(ph) - coef[j].imag * np.sin(ph)
        out[p] = acc


if USE_NUMBA:
    _thomas_jit = numba.njit(cache=True, nogil=True)(_thomas_loop)
    _holder_jit = numba.njit(cache=True, nogil=True)(_holder_loop)
    _fourier_eval_jit = numba.njit(cache=True, nogil=True)(_fourier_eval_loop)


def thomas_batched(lower, diag, upper, rhs, backend=None):
    """Solve a batch of tridiagonal systems sharing their off-diagonals.

    ``diag`` has shape ``(batch, m)``; ``rhs`` may be real or complex with the
    same shape. The systems are assumed diagonally dominant (no pivoting).
    """
    lower = np.ascontiguousarray(lower, dtype=float)
    upper = np.ascontiguousarray(upper, dtype=float)
    diag = np.ascontiguousarray(diag, dtype=float)
    rhs = np.ascontiguousarray(rhs)
    if rhs.dtype.kind not in "fc":
        rhs = rhs.astype(float)
    if _pick(backend) == "numba":
        out = np.empty_like(rhs)
        _thomas_jit(lower, diag, upper, rhs, out)
        return out
    return _thomas_numpy(lower, diag, upper, rhs)


def holder_pairs(values, times, beta, backend=None):
    """max_{i<j} max|values[i]-values[j]| / |t_i - t_j|**beta over all level pairs."""
    values = np.ascontiguousarray(np.reshape(values, (len(times), -1)), dtype=float)
    times = np.ascontiguousarray(times, dtype=float)
    if _pick(backend) == "numba":
        return float(_holder_jit(values, times, float(beta)))
    return _holder_numpy(values, times, float(beta))


def fourier_eval(coef, k, pts, backend=None):
    """Evaluate the real trigonometric sum sum_j coef_j exp(i k_j . x) at points."""
    coef = np.ascontiguousarray(coef, dtype=complex)
    k = np.ascontiguousarray(k, dtype=float)
    pts = np.ascontiguousarray(pts, dtype=float)
    if _pick(backend) == "numba":
        out = np.empty(pts.shape[0])
        _fourier_eval_jit(coef, k, pts, out)
        return out
    return _fourier_eval_numpy(coef, k, pts)


def _pick(backend):
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend == "numba" and not USE_NUMBA:
        raise RuntimeError("numba backend requested but disabled")
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend
