"""Operator-valued boundary symbols of the strip, their discrete twins, and dilation.

Closed forms::

    a(xi, y) = cosh(|xi| (1 - y)) / cosh(|xi|)
    b(xi, y) = sinh(|xi| y) / (|xi| cosh(|xi|))
    c(xi)    = (|xi|^2 + C)^-1,   C = -d^2/dy^2,  u(0) = 0, u_y(1) = 0

The solvers use the discrete versions built from the same tridiagonal C as
every other operator in the package, so constant-coefficient solves agree with
the direct oracle to round-off.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .ops import c_bands, c_matrix, complete, dy, dyy, ixfft, xfft


def _check_y(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError("y must lie in [0, 1]")
    return y


def eval_symbol_a(xi_norm, y):
    """cosh(|xi|(1-y)) / cosh|xi| in overflow-safe exponential form."""
    y = _check_y(y)
    s = np.abs(np.asarray(xi_norm, dtype=float))
    return np.exp(-s * y) * (1 + np.exp(-2 * s * (1 - y))) / (1 + np.exp(-2 * s))


def eval_symbol_b(xi_norm, y):
    """sinh(|xi| y) / (|xi| cosh|xi|); the xi -> 0 limit is y."""
    y = _check_y(y)
    s = np.abs(np.asarray(xi_norm, dtype=float))
    s, y = np.broadcast_arrays(s, y)
    out = np.empty(s.shape)
    small = s < 1e-4
    ss, ys = s[small], y[small]
    # series: y (1 + s^2 y^2 / 6) / (1 + s^2 / 2)
    out[small] = ys * (1 + ss ** 2 * ys ** 2 / 6) / (1 + ss ** 2 / 2)
    sl, yl = s[~small], y[~small]
    out[~small] = (np.exp(-sl * (1 - yl)) * -np.expm1(-2 * sl * yl)
                   / (sl * (1 + np.exp(-2 * sl))))
    return out if out.ndim else float(out)


def dxi_symbol_a(xi_norm, y):
    """Closed-form radial derivative: a * [(1-y) tanh(|xi|(1-y)) - tanh|xi|]."""
    y = _check_y(y)
    s = np.abs(np.asarray(xi_norm, dtype=float))
    return eval_symbol_a(s, y) * ((1 - y) * np.tanh(s * (1 - y)) - np.tanh(s))


def tanh_tail(s):
    """|tanh(s) - 1| evaluated without cancellation."""
    s = np.asarray(s, dtype=float)
    return 2 * np.exp(-2 * s) / (1 + np.exp(-2 * s))


# ---------------------------------------------------------------------------
# discrete C and its resolvent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorC:
    """Tridiagonal -d^2/dy^2 on the interior nodes with u(0)=0 and a one-sided Neumann row."""
    ygrid: object

    @property
    def m(self):
        return self.ygrid.m

    @property
    def matrix(self):
        return c_matrix(self.ygrid)

    @property
    def bands(self):
        return c_bands(self.ygrid)

    def eigenvalues(self):
        return np.sort(np.linalg.eigvals(self.matrix).real)


def _resolvent_solve(zeta2, rhs, yg):
    """Solve (zeta2 + C) U = rhs for a batch; zeta2 has shape (batch,)."""
    lo, di, up = c_bands(yg)
    diag = np.asarray(zeta2, dtype=float)[:, None] + di[None, :]
    return _kernels.thomas_batched(lo, diag, up, rhs)


def resolvent_c_apply(xi_norm, f, ygrid):
    """Apply (|xi|^2 + C)^-1 to a nodal y-profile; returns the nodal solution."""
    f = np.asarray(f)
    if not np.all(np.isfinite(f)):
        raise ValueError("profile must be finite")
    xi = np.atleast_1d(np.asarray(xi_norm, dtype=float))
    rhs = np.broadcast_to(f[..., 1:-1], xi.shape + (ygrid.m,))
    sol = _resolvent_solve(xi ** 2, np.ascontiguousarray(rhs), ygrid)
    out = complete(sol, 0.0, 0.0, ygrid)
    return out[0] if np.ndim(xi_norm) == 0 else out


def discrete_a(zeta, ygrid):
    """Discrete Dirichlet symbol: unit datum at y=0, homogeneous Neumann row at y=1."""
    z = np.atleast_1d(np.asarray(zeta, dtype=float))
    rhs = np.zeros((z.size, ygrid.m))
    rhs[:, 0] = 1.0 / ygrid.h ** 2
    return complete(_resolvent_solve(z ** 2, rhs, ygrid), 1.0, 0.0, ygrid)


def discrete_b(zeta, ygrid):
    """Discrete Neumann symbol: zero at y=0, unit y-derivative in the top row."""
    z = np.atleast_1d(np.asarray(zeta, dtype=float))
    rhs = np.zeros((z.size, ygrid.m))
    rhs[:, -1] = 2.0 / (3 * ygrid.h)
    return complete(_resolvent_solve(z ** 2, rhs, ygrid), 0.0, 1.0, ygrid)


def resolvent_norm(xi_norm, ygrid):
    """Sup-norm operator norm of (|xi|^2 + C)^-1; the inverse is entrywise nonnegative."""
    xi = np.atleast_1d(np.asarray(xi_norm, dtype=float))
    ones = np.ones((xi.size, ygrid.m))
    return np.abs(_resolvent_solve(xi ** 2, ones, ygrid)).max(axis=1)


@dataclass(frozen=True)
class SymbolEvaluation:
    xi_norm: float
    a_values: np.ndarray
    b_values: np.ndarray
    resolvent_bands: tuple

    def solve(self, f):
        lo, di, up = self.resolvent_bands
        return _kernels.thomas_batched(lo, di[None, :], up, np.atleast_2d(f))[0]


def evaluate_symbols(xi_norm, ygrid):
    lo, di, up = c_bands(ygrid)
    di = di + float(xi_norm) ** 2
    if np.min(np.abs(di) - np.abs(np.r_[0.0, lo]) - np.abs(np.r_[up, 0.0])) < -1e-9:
        raise ArithmeticError("resolvent factorization lost diagonal dominance")
    return SymbolEvaluation(float(xi_norm), discrete_a(xi_norm, ygrid)[0],
                            discrete_b(xi_norm, ygrid)[0], (lo, di, up))


# ---------------------------------------------------------------------------
# dilation
# ---------------------------------------------------------------------------

def dilated_apply(symbol, t, data, xgrid, ygrid, c=1.0, exact=False):
    """Apply t^m sigma_t of a symbol, mode by mode, with argument t*c*|xi|.

    ``symbol`` is ``"a"`` (prefactor 1, boundary datum), ``"b"`` (prefactor t,
    boundary datum) or ``"c"`` (prefactor t^2 c^2, nodal strip data). Boundary
    data are x-arrays; the result is a nodal strip slice. ``exact`` switches
    a and b to their closed forms sampled at the nodes.
    """
    if t <= 0:
        raise ValueError("dilation needs t > 0")
    zeta = t * c * xgrid.knorm.ravel()
    y = ygrid.nodes
    if symbol == "c":
        data = np.asarray(data, dtype=float)
        fh = xfft(data[..., 1:-1], xgrid).reshape(-1, ygrid.m)
        sol = _resolvent_solve(zeta ** 2, fh, ygrid)
        sol = complete(sol, 0.0, 0.0, ygrid)
        return (t * c) ** 2 * ixfft(sol.reshape(xgrid.shape + (ygrid.size,)), xgrid)
    if symbol not in ("a", "b"):
        raise ValueError(f"unknown symbol {symbol!r}")
    dh = xfft(np.asarray(data, dtype=float), xgrid).ravel()
    if symbol == "a":
        prof = eval_symbol_a(zeta[:, None], y[None, :]) if exact else discrete_a(zeta, ygrid)
        pref = 1.0
    else:
        prof = eval_symbol_b(zeta[:, None], y[None, :]) if exact else discrete_b(zeta, ygrid)
        pref = t
    out = prof * dh[:, None]
    return pref * ixfft(out.reshape(xgrid.shape + (ygrid.size,)), xgrid)


# ---------------------------------------------------------------------------
# symbol-class estimates
# ---------------------------------------------------------------------------

def _fd_xi(fun, xi, order):
    step = 1e-3 * (1 + xi)
    if order == 0:
        return fun(xi)
    if order == 1:
        return (fun(xi + step) - fun(xi - step)) / (2 * step)
    if order == 2:
        return (fun(xi + step) - 2 * fun(xi) + fun(xi - step)) / step ** 2
    raise ValueError("derivative order must be <= 2")


def symbol_class_estimate(symbol, alpha, xi_grid, ygrid=None, order=0, y_samples=4001):
    """Weighted sup of xi-derivatives of a symbol over a grid of |xi|.

    For ``a`` (class m=0 into C) and ``b`` (class m=order into C^{1-order})
    the y-norm is taken on ``y_samples`` uniform points of the closed form.
    For ``c`` (class m=order into C^{2-order}) the operator norm from C into
    C^k of the discrete resolvent derivative is bounded by the sum of the
    sup-norm operator norms of its y-derivatives up to k.

    Returns ``(weighted_sup, rows)`` where each row is
    ``(|xi|, alpha, weighted value, peak y)``.
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    if alpha >= 1 and np.any(xi_grid == 0):
        raise ValueError("xi grid must exclude 0 for derivatives")
    rows = []
    if symbol in ("a", "b"):
        y = np.linspace(0, 1, y_samples)
        if symbol == "a":
            m = 0
            parts = [lambda s: eval_symbol_a(s, y)]
        else:
            m = order
            parts = [lambda s: eval_symbol_b(s, y)]
            if order == 0:
                parts.append(lambda s: eval_symbol_a(s, 1 - y))  # d/dy b(xi, y) = a(xi, 1-y)
        for xi in xi_grid:
            vals = [np.abs(_fd_xi(p, xi, alpha)) for p in parts]
            peak = float(y[np.argmax(vals[0])])
            w = (1 + xi ** 2) ** ((m + alpha) / 2)
            rows.append((float(xi), alpha, float(w * sum(v.max() for v in vals)), peak))
    elif symbol == "c":
        if ygrid is None:
            raise ValueError("the c symbol needs a y grid")
        m = order
        k = 2 - order
        C = c_matrix(ygrid)
        eye = np.eye(ygrid.m)
        # nodal completion and differentiation as matrices acting on interior values
        comp = complete(eye, 0.0, 0.0, ygrid)  # (m, m+2): row j = completed unit vector
        D1 = dy(comp, ygrid).T
        D2 = dyy(comp, ygrid).T
        mats = [comp.T, D1, D2][: k + 1]

        def res(s):
            return np.linalg.inv(s ** 2 * eye + C)

        for xi in xi_grid:
            R = _fd_xi(res, xi, alpha)
            norms = [np.abs(Mx @ R).sum(axis=1).max() for Mx in mats]
            peak = float(ygrid.nodes[np.argmax(np.abs(comp.T @ R).sum(axis=1))])
            w = (1 + xi ** 2) ** ((m + alpha) / 2)
            rows.append((float(xi), alpha, float(w * sum(norms)), peak))
    else:
        raise ValueError(f"unknown symbol {symbol!r}")
    return max(r[2] for r in rows), rows


def symbol_relation_errors(xi_norm, ygrid):
    """Sup errors of the four y-relations between a and b, using nodal differences."""
    y = ygrid.nodes
    a = eval_symbol_a(xi_norm, y)
    b = eval_symbol_b(xi_norm, y)
    s2 = xi_norm ** 2
    return {
        "dy_b": float(np.abs(dy(b, ygrid) - eval_symbol_a(xi_norm, 1 - y)).max()),
        "dyy_b": float(np.abs(dyy(b, ygrid) - s2 * b).max()),
        "dy_a": float(np.abs(dy(a, ygrid) + s2 * eval_symbol_b(xi_norm, 1 - y)).max()),
        "dyy_a": float(np.abs(dyy(a, ygrid) - s2 * a).max()),
    }


def fit_slope(x, y):
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def decay_exponents(ygrid, xi_fit=(10.0, 20.0, 40.0, 80.0), xi_peak=(20.0, 40.0, 80.0), y_samples=20001):
    """Fitted decay of the resolvent norm and of sup_y |d_xi a|, and the peak location of d_xi a.

    Returns a dict with ``resolvent_slope`` (expected -2), ``dxi_a_slope``
    (expected -1) and ``peaks`` as (|xi|, argmax y, argmax y * |xi|).
    """
    xi_fit = np.asarray(xi_fit, dtype=float)
    y = np.linspace(0.0, 1.0, y_samples)
    res = resolvent_norm(xi_fit, ygrid)
    da = np.array([np.abs(dxi_symbol_a(x, y)).max() for x in xi_fit])
    peaks = []
    for x in xi_peak:
        yp = float(y[np.argmax(np.abs(dxi_symbol_a(x, y)))])
        peaks.append((float(x), yp, yp * float(x)))
    return {
        "xi": xi_fit.tolist(),
        "resolvent_norms": res.tolist(),
        "resolvent_slope": fit_slope(xi_fit, res),
        "dxi_a_sup": da.tolist(),
        "dxi_a_slope": fit_slope(xi_fit, da),
        "peaks": peaks,
    }
