"""Independent oracles: assembled sparse operators, direct solves, stiff ODE integration.

The oracles rebuild the discretization from scratch as one sparse matrix over
all nodal unknowns (boundary rows explicit) and never touch the mode-by-mode
or Krylov paths used by the solvers. They are slow and size-guarded.
"""
import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import spsolve

from .ops import lap_x

MAX_X_POINTS = 128
MAX_Y_POINTS = 64


def _guard(xg, yg):
    if int(np.prod(xg.shape)) > MAX_X_POINTS or yg.m > MAX_Y_POINTS:
        raise ValueError("grid too large for the dense oracle")


def _lap_matrix(xg):
    """Spectral x-Laplacian as an explicit matrix on flattened x points."""
    P = int(np.prod(xg.shape))
    eye = np.eye(P).reshape(xg.shape + (P,))
    return lap_x(eye, xg).reshape(P, P)


class NodalAssembly:
    """Sparse pieces of the strip operator on all nodal unknowns, x-major ordering.

    Interior rows carry  -lap_x (``K_lap``), -u_yy weighted per x-point
    (``K_yy(w)``) and y u_y (``K_ydy``); boundary rows are assembled separately.
    """

    def __init__(self, xg, yg):
        _guard(xg, yg)
        self.xg, self.yg = xg, yg
        P, n, h = int(np.prod(xg.shape)), yg.size, yg.h
        self.P, self.n = P, n
        interior = np.zeros(n)
        interior[1:-1] = 1.0
        Sint = sp.diags(interior)
        self.K_lap = sp.kron(sp.csr_matrix(-_lap_matrix(xg)), Sint, format="csr")
        D2 = sp.lil_matrix((n, n))
        D1y = sp.lil_matrix((n, n))
        y = yg.nodes
        for j in range(1, n - 1):
            D2[j, j - 1], D2[j, j], D2[j, j + 1] = 1 / h ** 2, -2 / h ** 2, 1 / h ** 2
            D1y[j, j - 1], D1y[j, j + 1] = -y[j] / (2 * h), y[j] / (2 * h)
        self.D2 = D2.tocsr()
        self.K_ydy = sp.kron(sp.identity(P), D1y.tocsr(), format="csr")
        bot = sp.lil_matrix((n, n))
        bot[0, 0] = 1.0
        top = sp.lil_matrix((n, n))
        top[n - 1, n - 1], top[n - 1, n - 2], top[n - 1, n - 3] = 3 / (2 * h), -4 / (2 * h), 1 / (2 * h)
        self.B = sp.kron(sp.identity(P), (bot + top).tocsr(), format="csr")

    def K_yy(self, w):
        """-w(x) u_yy on interior rows."""
        w = np.broadcast_to(np.asarray(w, dtype=float), self.xg.shape).ravel()
        return sp.kron(sp.diags(w), -self.D2, format="csr")

    def interior_operator(self, a0, a1, a2, a3):
        mat = a1 * self.K_lap + self.K_yy(a2) + a3 * self.K_ydy
        if np.any(np.asarray(a0) != 0):
            a0 = np.broadcast_to(np.asarray(a0, dtype=float), self.xg.shape).ravel()
            interior = np.zeros(self.n)
            interior[1:-1] = 1.0
            mat = mat + sp.kron(sp.diags(a0), sp.diags(interior))
        return mat

    def rhs(self, f, g, q):
        b = np.array(f, dtype=float, copy=True).reshape(self.P, self.n)
        b[:, 0] = np.broadcast_to(g, self.xg.shape).ravel()
        b[:, -1] = np.broadcast_to(q, self.xg.shape).ravel()
        return b.ravel()


def dense_oracle_elliptic(problem):
    """Direct sparse LU solve of the fully assembled elliptic problem."""
    xg, yg, t = problem.xgrid, problem.ygrid, problem.t
    asm = NodalAssembly(xg, yg)
    M = asm.interior_operator(0.0, 1.0, 1.0 / (t * problem.c) ** 2, -problem.kappa / t) + asm.B
    b = asm.rhs(problem.f, problem.g, t * problem.h)
    u = spsolve(M.tocsc(), b)
    return u.reshape(xg.shape + (yg.size,))


class _Elimination:
    """Interior-only form: nodal u = E u_int + boundary part from (g, q)."""

    def __init__(self, asm):
        P, n, h = asm.P, asm.n, asm.yg.h
        m = n - 2
        E1 = sp.lil_matrix((n, m))
        for j in range(1, n - 1):
            E1[j, j - 1] = 1.0
        E1[n - 1, m - 1] = 4.0 / 3.0
        E1[n - 1, m - 2] = -1.0 / 3.0
        self.E = sp.kron(sp.identity(P), E1.tocsr(), format="csr")
        idx = np.arange(P) * n
        self.rows_int = np.concatenate([idx[:, None] + np.arange(1, n - 1)[None, :]]).ravel()
        self.P, self.n, self.h = P, n, h

    def boundary_nodal(self, g, q):
        u = np.zeros((self.P, self.n))
        u[:, 0] = g
        u[:, -1] = 2 * self.h * np.asarray(q) / 3
        return u.ravel()


def dense_oracle_parabolic(xg, yg, times, u0, c, f=None, g=None, q=None, kappa=0.0,
                           rtol=1e-10, atol=1e-12, freeze_t=None):
    """Method of lines for u_t = lap_x u + u_yy/(t^2 c^2) + kappa (y/t) u_y + f.

    Boundary data are callables of t: ``g(t)`` the Dirichlet value at y=0 and
    ``q(t)`` the y-derivative at y=1 (both x-arrays); ``f(t)`` returns a nodal
    strip slice. Integration uses an implicit Radau method with tight
    tolerances, independent of the package's fixed-level stepping. With
    ``freeze_t`` the coefficients are held at that time. Returns nodal
    samples at ``times`` (``times[0]`` is the initial level).
    """
    asm = NodalAssembly(xg, yg)
    el = _Elimination(asm)
    P, n = asm.P, asm.n
    zero = np.zeros(xg.shape)
    g = g or (lambda t: zero)
    q = q or (lambda t: zero)
    w = 1.0 / np.broadcast_to(np.asarray(c, dtype=float), xg.shape) ** 2
    Klap = asm.K_lap[el.rows_int]
    Kyy = asm.K_yy(w)[el.rows_int]
    Kdy = asm.K_ydy[el.rows_int]
    E = el.E

    def K(t):
        t = t if freeze_t is None else freeze_t
        return Klap + Kyy / t ** 2 - (kappa / t) * Kdy

    def rhs(t, ui):
        Kt = K(t)
        out = -(Kt @ (E @ ui)) - Kt @ el.boundary_nodal(g(t).ravel(), q(t).ravel())
        if f is not None:
            out += f(t).reshape(P, n)[:, 1:-1].ravel()
        return out

    def jac(t, ui):
        return -(K(t) @ E)

    u0 = np.asarray(u0, dtype=float).reshape(P, n)[:, 1:-1].ravel()
    sol = solve_ivp(rhs, (times[0], times[-1]), u0, method="Radau", t_eval=times,
                    jac=jac, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"oracle integration failed: {sol.message}")
    out = np.empty((len(times), P, n))
    for k, t in enumerate(sol.t):
        out[k] = (E @ sol.y[:, k] + el.boundary_nodal(g(t).ravel(), q(t).ravel())).reshape(P, n)
    return out.reshape((len(times),) + xg.shape + (yg.size,))


def operator_inf_norm(mat):
    """Induced sup-norm (max absolute row sum) of a dense or sparse matrix."""
    mat = abs(mat)
    return float(np.max(np.asarray(mat.sum(axis=1)).ravel()))


def residual_transformed_system(state, levels=None):
    """Sup residuals of the fixed-domain system on interior time levels.

    Keys: ``interior`` (bulk equation), ``dirichlet`` (u = g on y=0),
    ``stefan`` (flux balance on y=1) and ``kinematic`` (front speed). Time
    derivatives are second-order differences over the levels and the
    y-derivative on y=1 uses the third-order one-sided stencil, so every
    residual is independent of how the solver imposed the condition.
    """
    from .ops import dy, dy_top, grad_x

    u = np.asarray(state.u.values)
    s = np.asarray(state.s.values)
    t = np.asarray(state.u.times)
    xg, yg, eps = state.u.xgrid, state.u.ygrid, state.eps
    st = np.gradient(s, t, axis=0, edge_order=2)
    ut = np.gradient(u, t, axis=0, edge_order=2)
    y = yg.nodes[1:-1]
    h2 = yg.h ** 2
    levels = range(1, len(t) - 1) if levels is None else levels
    out = dict.fromkeys(("interior", "dirichlet", "stefan", "kinematic"), 0.0)
    for k in levels:
        sk, uk = s[k], u[k]
        gs = grad_x(sk, xg)
        G2 = sum(a ** 2 for a in gs)
        trace = uk[..., -1]
        gtr = grad_x(trace, xg)
        w = np.sqrt(1 + G2)
        kin = st[k] - w * trace
        ste = -(1 + G2) / sk * dy_top(uk, yg, order=3) - ((1 + eps * trace) * st[k] - sum(a * b for a, b in zip(gs, gtr)))
        uy = dy(uk, yg)
        uyy = (uk[..., 2:] - 2 * uk[..., 1:-1] + uk[..., :-2]) / h2
        sc, G2c = sk[..., None], G2[..., None]
        lap_s = lap_x(sk, xg)[..., None]
        rhs = lap_x(uk, xg)[..., 1:-1] + (1 + y ** 2 * G2c) / sc ** 2 * uyy
        rhs += eps * y * st[k][..., None] / sc * uy[..., 1:-1]
        rhs -= y * (sc * lap_s - 2 * G2c) / sc ** 2 * uy[..., 1:-1]
        for a, b in zip(gs, grad_x(uy, xg)):
            rhs -= 2 * y * a[..., None] / sc * b[..., 1:-1]
        bulk = eps * ut[k][..., 1:-1] - rhs
        out["interior"] = max(out["interior"], float(np.max(np.abs(bulk))))
        out["dirichlet"] = max(out["dirichlet"], float(np.max(np.abs(uk[..., 0] - state.g))))
        out["stefan"] = max(out["stefan"], float(np.max(np.abs(ste))))
        out["kinematic"] = max(out["kinematic"], float(np.max(np.abs(kin))))
    return out
