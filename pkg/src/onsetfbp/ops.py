"""Discrete operators on the strip: spectral in x, second-order stencils in y.

Unknowns live on the interior y nodes 1..m. The Dirichlet node y=0 carries the
datum g and the top node y=1 is eliminated with the one-sided second-order
Neumann row (3 u_{m+1} - 4 u_m + u_{m-1}) / (2h) = q, q being the y-derivative.
"""
import itertools

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres

from . import _kernels


# ---------------------------------------------------------------------------
# spectral x calculus
# ---------------------------------------------------------------------------

def _kshape(k, ndim_extra):
    return k.reshape(k.shape + (1,) * ndim_extra)


def xfft(u, xg):
    return np.fft.fftn(u, axes=xg.axes)


def ixfft(u_hat, xg):
    return np.fft.ifftn(u_hat, axes=xg.axes).real


def _odd_k(xg):
    # first-derivative multipliers with the Nyquist mode zeroed
    nyq = np.pi * xg.points_per_dim / xg.period
    out = []
    for k in xg.kvec:
        k = k.copy()
        k[np.isclose(np.abs(k), nyq)] = 0.0
        out.append(k)
    return out


def grad_x(u, xg):
    """Spectral gradient over the x axes; returns a list, one array per dimension."""
    extra = u.ndim - xg.n_dim
    uh = xfft(u, xg)
    return [ixfft(1j * _kshape(k, extra) * uh, xg) for k in _odd_k(xg)]


def lap_x(u, xg):
    extra = u.ndim - xg.n_dim
    k2 = _kshape(xg.knorm ** 2, extra)
    return ixfft(-k2 * xfft(u, xg), xg)


def hess_x(u, xg):
    """All second x-derivatives as a nested list [[u_11, u_12], [u_21, u_22]]."""
    extra = u.ndim - xg.n_dim
    uh = xfft(u, xg)
    ks = [_kshape(k, extra) for k in _odd_k(xg)]
    full = [_kshape(k, extra) for k in xg.kvec]
    out = []
    for a in range(xg.n_dim):
        row = []
        for b in range(xg.n_dim):
            mult = -full[a] ** 2 if a == b else -ks[a] * ks[b]
            row.append(ixfft(mult * uh, xg))
        out.append(row)
    return out


def xderiv(u, xg, order):
    """All mixed x-derivatives of a given total order, one array per multi-index."""
    if order == 0:
        return [u]
    extra = u.ndim - xg.n_dim
    uh = xfft(u, xg)
    ks = [_kshape(k, extra) for k in _odd_k(xg)]
    ke = [_kshape(k, extra) for k in xg.kvec]
    out = []
    for combo in itertools.combinations_with_replacement(range(xg.n_dim), order):
        mult = 1.0
        counts = [combo.count(a) for a in range(xg.n_dim)]
        for a, c in enumerate(counts):
            if c == 0:
                continue
            kk = ke[a] if c % 2 == 0 else ks[a]
            mult = mult * (1j * kk) ** c
        out.append(ixfft(mult * uh, xg))
    return out


# ---------------------------------------------------------------------------
# y stencils on nodal profiles
# ---------------------------------------------------------------------------

def complete(interior, g, q, yg):
    """Attach boundary nodes: u(0)=g, one-sided Neumann row with y-derivative q at y=1."""
    interior = np.asarray(interior)
    shape = interior.shape[:-1] + (yg.size,)
    u = np.empty(shape, dtype=interior.dtype)
    u[..., 1:-1] = interior
    u[..., 0] = g
    u[..., -1] = (4 * interior[..., -1] - interior[..., -2] + 2 * yg.h * np.asarray(q)) / 3
    return u


def dy(u, yg):
    """Second-order first y-derivative at every node."""
    h = yg.h
    d = np.empty_like(u)
    d[..., 1:-1] = (u[..., 2:] - u[..., :-2]) / (2 * h)
    d[..., 0] = (-3 * u[..., 0] + 4 * u[..., 1] - u[..., 2]) / (2 * h)
    d[..., -1] = (3 * u[..., -1] - 4 * u[..., -2] + u[..., -3]) / (2 * h)
    return d


def dyy(u, yg):
    """Second-order second y-derivative at every node."""
    h2 = yg.h ** 2
    d = np.empty_like(u)
    d[..., 1:-1] = (u[..., 2:] - 2 * u[..., 1:-1] + u[..., :-2]) / h2
    d[..., 0] = (2 * u[..., 0] - 5 * u[..., 1] + 4 * u[..., 2] - u[..., 3]) / h2
    d[..., -1] = (2 * u[..., -1] - 5 * u[..., -2] + 4 * u[..., -3] - u[..., -4]) / h2
    return d


def dy_top(u, yg, order=2):
    """One-sided y-derivative at y=1 (order 2 is the boundary row; order 3 for residuals)."""
    h = yg.h
    if order == 2:
        return (3 * u[..., -1] - 4 * u[..., -2] + u[..., -3]) / (2 * h)
    if order == 3:
        return (11 * u[..., -1] - 18 * u[..., -2] + 9 * u[..., -3] - 2 * u[..., -4]) / (6 * h)
    raise ValueError("order must be 2 or 3")


def c_bands(yg):
    """Tridiagonal bands of the discrete C = -d^2/dy^2 on interior unknowns."""
    m, h2 = yg.m, yg.h ** 2
    diag = np.full(m, 2.0 / h2)
    lower = np.full(m - 1, -1.0 / h2)
    upper = np.full(m - 1, -1.0 / h2)
    diag[-1] = 2.0 / (3 * h2)
    lower[-1] = -2.0 / (3 * h2)
    return lower, diag, upper


def ydy_bands(yg):
    """Tridiagonal bands of y * d/dy (central) on interior unknowns."""
    m, h = yg.m, yg.h
    y = yg.nodes[1:-1]
    diag = np.zeros(m)
    lower = -y[1:] / (2 * h)
    upper = y[:-1] / (2 * h)
    diag[-1] = 2 * y[-1] / (3 * h)
    lower[-1] = -2 * y[-1] / (3 * h)
    return lower, diag, upper


def c_matrix(yg):
    lo, di, up = c_bands(yg)
    return np.diag(di) + np.diag(lo, -1) + np.diag(up, 1)


def ydy_matrix(yg):
    lo, di, up = ydy_bands(yg)
    return np.diag(di) + np.diag(lo, -1) + np.diag(up, 1)


# ---------------------------------------------------------------------------
# strip operator  M = a0 + a1 (-lap_x) + a2 C + a3 y d/dy
# ---------------------------------------------------------------------------

# variable-coefficient systems up to this many unknowns are factored densely
# and cached; larger ones go through preconditioned GMRES
DENSE_LIMIT = 1536
_LU_CACHE_SIZE = 512
_LU_CACHE = {}


def _lap_x_matrix(xg):
    P = int(np.prod(xg.shape))
    return lap_x(np.eye(P).reshape(xg.shape + (P,)), xg).reshape(P, P)


class StripOperator:
    """Linear operator a0 u - a1 lap_x u - a2 u_yy + a3 y u_y on interior nodes.

    ``a1`` and ``a3`` are scalars; ``a0`` and ``a2`` may vary in x. When both
    are constant in x the operator is diagonal in Fourier modes and ``solve``
    is a batch of tridiagonal solves; otherwise small systems are factored
    densely (cached by coefficients) and large ones go through GMRES on the
    rows scaled by 1/a2, preconditioned with the frozen-mean mode solver.
    """

    def __init__(self, xg, yg, a0=0.0, a1=1.0, a2=1.0, a3=0.0):
        self.xg, self.yg = xg, yg
        self.a0 = np.asarray(a0, dtype=float)
        self.a1 = float(a1)
        self.a2 = np.asarray(a2, dtype=float)
        self.a3 = float(a3)
        if np.any(self.a2 <= 0):
            raise ValueError("a2 must be positive")
        self.constant = self.a0.ndim == 0 and self.a2.ndim == 0
        if not self.constant:
            self.a0 = np.broadcast_to(self.a0, xg.shape)
            self.a2 = np.broadcast_to(self.a2, xg.shape)
        self._cb = c_bands(yg)
        self._kb = ydy_bands(yg)
        self._k2 = xg.knorm.ravel() ** 2

    # -- application ---------------------------------------------------------
    def apply(self, u):
        """Apply to nodal profiles (boundary nodes included); returns interior rows."""
        yg = self.yg
        ui = u[..., 1:-1]
        out = -self.a1 * lap_x(ui, self.xg)
        a0 = self.a0 if self.constant else self.a0[..., None]
        a2 = self.a2 if self.constant else self.a2[..., None]
        out += a0 * ui
        out -= a2 * (u[..., 2:] - 2 * ui + u[..., :-2]) / yg.h ** 2
        if self.a3:
            y = yg.nodes[1:-1]
            out += self.a3 * y * (u[..., 2:] - u[..., :-2]) / (2 * yg.h)
        return out

    def apply_interior(self, ui):
        return self.apply(complete(ui, 0.0, 0.0, self.yg))

    def lift(self, g, q):
        """Contribution of boundary data to the interior rows."""
        zero = np.zeros(self.xg.shape + (self.yg.m,))
        return self.apply(complete(zero, g, q, self.yg))

    # -- inversion -----------------------------------------------------------
    def _mode_solve(self, rhs, a0, a1, a2, a3):
        xg, m = self.xg, self.yg.m
        lo = a2 * self._cb[0] + a3 * self._kb[0]
        up = a2 * self._cb[2] + a3 * self._kb[2]
        dbase = a2 * self._cb[1] + a3 * self._kb[1]
        diag = (a0 + a1 * self._k2)[:, None] + dbase[None, :]
        rh = xfft(rhs, xg).reshape(-1, m)
        sol = _kernels.thomas_batched(lo, diag, up, rh)
        return ixfft(sol.reshape(xg.shape + (m,)), xg)

    def solve_homogeneous(self, rhs, tol=1e-12):
        """Interior solution of M u = rhs with g = 0, q = 0."""
        if self.constant:
            return self._mode_solve(rhs, float(self.a0), self.a1, float(self.a2), self.a3)
        shape = self.xg.shape + (self.yg.m,)
        if int(np.prod(shape)) <= DENSE_LIMIT:
            return lu_solve(self._factor(), rhs.reshape(-1)).reshape(shape)
        w = 1.0 / self.a2
        a0m = float(np.mean(self.a0 * w))
        a1m = self.a1 * float(np.mean(w))
        a3m = self.a3 * float(np.mean(w))
        wcol = w[..., None]

        def matvec(x):
            return (wcol * self.apply_interior(x.reshape(shape))).ravel()

        def prec(x):
            return self._mode_solve(x.reshape(shape), a0m, a1m, 1.0, a3m).ravel()

        n = int(np.prod(shape))
        A = LinearOperator((n, n), matvec=matvec, dtype=float)
        Mp = LinearOperator((n, n), matvec=prec, dtype=float)
        b = (wcol * rhs).ravel()
        x0 = prec(b)
        sol, info = gmres(A, b, x0=x0, M=Mp, rtol=tol, atol=0.0, restart=60, maxiter=50)
        if info != 0:
            raise RuntimeError(f"GMRES did not converge (info={info})")
        return sol.reshape(shape)

    def _factor(self):
        key = (self.xg, self.yg, self.a0.tobytes(), self.a1, self.a2.tobytes(), self.a3)
        lu = _LU_CACHE.get(key)
        if lu is None:
            P, m = int(np.prod(self.xg.shape)), self.yg.m
            mat = -self.a1 * np.kron(_lap_x_matrix(self.xg), np.eye(m))
            mat += np.kron(np.diag(self.a0.ravel()), np.eye(m))
            mat += np.kron(np.diag(self.a2.ravel()), c_matrix(self.yg))
            mat += self.a3 * np.kron(np.eye(P), ydy_matrix(self.yg))
            lu = lu_factor(mat)
            if len(_LU_CACHE) >= _LU_CACHE_SIZE:
                _LU_CACHE.pop(next(iter(_LU_CACHE)))
            _LU_CACHE[key] = lu
        return lu

    def solve(self, rhs, g=0.0, q=0.0, tol=1e-12):
        """Nodal solution of M u = rhs (interior rows) with u(0)=g, u_y(1)=q."""
        g = np.broadcast_to(np.asarray(g, dtype=float), self.xg.shape)
        q = np.broadcast_to(np.asarray(q, dtype=float), self.xg.shape)
        if rhs is None:
            rhs = np.zeros(self.xg.shape + (self.yg.m,))
        eff = rhs - self.lift(g, q)
        return complete(self.solve_homogeneous(eff, tol=tol), g, q, self.yg)
