"""Front equation s_t = sqrt(1 + |grad s|^2) v, s(0) = 0, by characteristics.

Along a characteristic the reduced system

    x' = -p v / sqrt(1 + |p|^2),   p' = sqrt(1 + |p|^2) grad v,   x(0) = rho, p(0) = 0

is integrated with classic RK4. Integrating r' = sqrt(1 + |p|^2) v_t by
parts along the path gives r = sqrt(1 + |p|^2) v, hence
z' = r - |p|^2 v / sqrt(1 + |p|^2) = v / sqrt(1 + |p|^2), which is carried
in the same RK4 state; no time derivative of v is ever sampled. The front is
s(t, x) = z(t, X_t^-1(x)) and grad s(t, x) = p(t, X_t^-1(x)).
"""
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels
from .grids import SurfaceField
from .ops import xfft


class FlowMapError(RuntimeError):
    """The characteristic flow left the diffeomorphism regime; shorten the interval."""


@dataclass(frozen=True)
class CharacteristicState:
    x: np.ndarray
    p: np.ndarray
    z: np.ndarray
    r: np.ndarray


# ---------------------------------------------------------------------------
# velocity fields
# ---------------------------------------------------------------------------

def _odd_wavenumbers(xg):
    nyq = np.pi * xg.points_per_dim / xg.period
    ks = []
    for k in xg.kvec:
        k = k.ravel().copy()
        k[np.isclose(np.abs(k), nyq)] = 0.0
        ks.append(k)
    return np.stack(ks, axis=1)


class ClosedFormVelocity:
    """v given by callables ``value(t, pts)`` and ``grad(t, pts)``; pts has shape (P, n)."""

    def __init__(self, value, grad):
        self._value, self._grad = value, grad

    def value(self, t, pts):
        return np.broadcast_to(self._value(t, pts), (pts.shape[0],)).astype(float)

    def grad(self, t, pts):
        return np.broadcast_to(self._grad(t, pts), pts.shape).astype(float)

    @classmethod
    def constant(cls, v0, n_dim=1):
        return cls(lambda t, x: np.full(x.shape[0], float(v0)), lambda t, x: np.zeros_like(x))

    @classmethod
    def stationary_sine(cls, amp=0.1, base=1.0):
        """v = base + amp sin(x_1), time independent."""
        def val(t, x):
            return base + amp * np.sin(x[:, 0])

        def grad(t, x):
            gr = np.zeros_like(x)
            gr[:, 0] = amp * np.cos(x[:, 0])
            return gr
        return cls(val, grad)


class SampledVelocity:
    """v sampled on the x-grid at time levels, with v(0) = g prepended.

    Spatial evaluation is trigonometric interpolation; in time the Fourier
    coefficients are interpolated by a cubic spline through the levels.
    """

    def __init__(self, xgrid, times, values, g=None):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if g is not None and times[0] > 0:
            times = np.concatenate([[0.0], times])
            values = np.concatenate([np.asarray(g, dtype=float)[None], values])
        self.xgrid = xgrid
        n = int(np.prod(xgrid.shape))
        coef = np.stack([xfft(v, xgrid).ravel() / n for v in values])
        self._spline = CubicSpline(times, coef, axis=0) if len(times) > 2 else None
        self._times, self._coef = times, coef
        self.k = np.stack([k.ravel() for k in xgrid.kvec], axis=1)
        self.k_odd = _odd_wavenumbers(xgrid)

    def _coef_at(self, t):
        if self._spline is None:
            return np.array([np.interp(t, self._times, c) for c in self._coef.T])
        return self._spline(t)

    def value(self, t, pts):
        return _kernels.fourier_eval(self._coef_at(t), self.k, pts)

    def grad(self, t, pts):
        c = self._coef_at(t)
        return np.stack([_kernels.fourier_eval(1j * self.k_odd[:, a] * c, self.k, pts)
                         for a in range(self.k.shape[1])], axis=1)


# ---------------------------------------------------------------------------
# characteristics
# ---------------------------------------------------------------------------

def _rhs(v, t, x, p):
    vv = v.value(t, x)
    gv = v.grad(t, x)
    w = np.sqrt(1.0 + np.sum(p * p, axis=1))
    return -p * (vv / w)[:, None], w[:, None] * gv, vv / w


@dataclass
class FlowMap:
    xgrid: object
    times: np.ndarray
    X: np.ndarray          # (levels, P, n)
    P: np.ndarray          # (levels, P, n)
    Z: np.ndarray          # (levels, P)
    jacobian_defect: np.ndarray  # (levels,) max over seeds of ||id - D X||

    @property
    def seeds(self):
        return self.xgrid.points

    def state(self, k, v):
        p = self.P[k]
        r = np.sqrt(1 + np.sum(p * p, axis=1)) * v.value(self.times[k], self.X[k])
        return CharacteristicState(self.X[k], p, self.Z[k], r)


def _periodic_coef(vals, xg):
    """Fourier coefficients (divided by N) of per-seed values on the x-grid."""
    n = int(np.prod(xg.shape))
    return xfft(vals.reshape(xg.shape), xg).ravel() / n


def _jacobian(X, xg):
    """D_rho X on the seed grid from the periodic displacement X - rho."""
    seeds = xg.points
    disp = X - seeds
    k = np.stack([kk.ravel() for kk in xg.kvec], axis=1)
    kod = _odd_wavenumbers(xg)
    n = xg.n_dim
    J = np.zeros((X.shape[0], n, n))
    for a in range(n):
        c = _periodic_coef(disp[:, a], xg)
        for b in range(n):
            J[:, a, b] = _kernels.fourier_eval(1j * kod[:, b] * c, k, seeds)
        J[:, a, a] += 1.0
    return J


def integrate_characteristics(v, xgrid, times, substeps=1, p_max=10.0, check_jacobian=True):
    """RK4 for (x, p, z) from t=0 through ``times``, one seed per x-grid point."""
    times = np.asarray(times, dtype=float)
    knots = times if times[0] == 0 else np.concatenate([[0.0], times])
    seeds = xgrid.points
    x, p, z = seeds.copy(), np.zeros_like(seeds), np.zeros(seeds.shape[0])
    Xs, Ps, Zs = [x.copy()], [p.copy()], [z.copy()]
    for a, b in zip(knots[:-1], knots[1:]):
        dt = (b - a) / substeps
        t = a
        for _ in range(substeps):
            k1 = _rhs(v, t, x, p)
            k2 = _rhs(v, t + dt / 2, x + dt / 2 * k1[0], p + dt / 2 * k1[1])
            k3 = _rhs(v, t + dt / 2, x + dt / 2 * k2[0], p + dt / 2 * k2[1])
            k4 = _rhs(v, t + dt, x + dt * k3[0], p + dt * k3[1])
            x = x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            p = p + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            z = z + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            t += dt
        if not np.all(np.isfinite(p)) or np.max(np.abs(p)) > p_max:
            raise FlowMapError(f"|p| exceeded {p_max} by t={b:.4g}")
        Xs.append(x.copy())
        Ps.append(p.copy())
        Zs.append(z.copy())
    X, Pm, Z = np.array(Xs), np.array(Ps), np.array(Zs)
    if times[0] != 0:
        X, Pm, Z = X[1:], Pm[1:], Z[1:]
    defect = np.array([np.max(np.linalg.norm(np.eye(xgrid.n_dim) - _jacobian(Xk, xgrid), ord=2, axis=(1, 2)))
                       for Xk in X])
    if check_jacobian and np.any(defect > 0.5):
        raise FlowMapError(f"||id - D X_t|| reached {defect.max():.3f} > 1/2")
    return FlowMap(xgrid, times, X, Pm, Z, defect)


def _wrap(d, period):
    return (d + period / 2) % period - period / 2


def invert_flow_map(flow, k, x_query, tol=1e-10, max_iter=50):
    """rho with X_t(rho) = x_query (mod period), by damped Newton from the nearest seed."""
    xg = flow.xgrid
    L = xg.period
    x_query = np.atleast_2d(np.asarray(x_query, dtype=float))
    seeds = xg.points
    kvec = np.stack([kk.ravel() for kk in xg.kvec], axis=1)
    kod = _odd_wavenumbers(xg)
    disp = flow.X[k] - seeds
    coefs = [_periodic_coef(disp[:, a], xg) for a in range(xg.n_dim)]
    dcoefs = [[1j * kod[:, b] * c for b in range(xg.n_dim)] for c in coefs]

    def F(rho):
        d = np.stack([_kernels.fourier_eval(c, kvec, rho) for c in coefs], axis=1)
        return _wrap(rho + d - x_query, L)

    def J(rho):
        out = np.empty((rho.shape[0], xg.n_dim, xg.n_dim))
        for a in range(xg.n_dim):
            for b in range(xg.n_dim):
                out[:, a, b] = _kernels.fourier_eval(dcoefs[a][b], kvec, rho) + (a == b)
        return out

    # nearest seed by image position (periodic distance)
    dist = np.linalg.norm(_wrap(flow.X[k][None, :, :] - x_query[:, None, :], L), axis=2)
    rho = seeds[np.argmin(dist, axis=1)].copy()
    res = F(rho)
    for _ in range(max_iter):
        err = np.linalg.norm(res, axis=1)
        if np.all(err <= tol):
            return rho
        step = np.linalg.solve(J(rho), res[..., None])[..., 0]
        lam = np.ones(rho.shape[0])
        for _ in range(20):
            trial = rho - lam[:, None] * step
            new = F(trial)
            worse = np.linalg.norm(new, axis=1) > err
            if not np.any(worse & (err > tol)):
                break
            lam[worse] *= 0.5
        rho, res = trial, new
    if np.all(np.linalg.norm(res, axis=1) <= tol):
        return rho
    raise FlowMapError("flow-map inversion did not converge")


@dataclass
class HJResult:
    surface: SurfaceField
    grad_s: np.ndarray   # (levels, n, *xshape)
    flow: FlowMap


def reconstruct_s(flow, v):
    """s, s_dot and grad s on the x-grid at every level of the flow."""
    xg = flow.xgrid
    pts = xg.points
    kvec = np.stack([kk.ravel() for kk in xg.kvec], axis=1)
    S, Sd, G = [], [], []
    for k, t in enumerate(flow.times):
        rho = invert_flow_map(flow, k, pts)
        z = _kernels.fourier_eval(_periodic_coef(flow.Z[k], xg), kvec, rho)
        p = np.stack([_kernels.fourier_eval(_periodic_coef(flow.P[k][:, a], xg), kvec, rho)
                      for a in range(xg.n_dim)], axis=1)
        r = np.sqrt(1 + np.sum(p * p, axis=1)) * v.value(t, pts)
        S.append(z.reshape(xg.shape))
        Sd.append(r.reshape(xg.shape))
        G.append(np.stack([p[:, a].reshape(xg.shape) for a in range(xg.n_dim)]))
    surf = SurfaceField(np.array(S), np.array(Sd), xg, flow.times)
    return surf, np.array(G)


def hj_solve(v, xgrid, times, substeps=1, check_jacobian=True):
    """Characteristics, inversion and reconstruction in one call."""
    flow = integrate_characteristics(v, xgrid, times, substeps=substeps, check_jacobian=check_jacobian)
    surf, grad = reconstruct_s(flow, v)
    return HJResult(surf, grad, flow)


def hj_residual(result, v):
    """Sup of s_t (second-order differences over levels) - sqrt(1+|grad s|^2) v on interior levels."""
    from .ops import grad_x
    surf = result.surface
    t = surf.times
    s = surf.values
    st = np.gradient(s, t, axis=0, edge_order=2)
    xg = surf.xgrid
    out = 0.0
    for k in range(1, len(t) - 1):
        gs = grad_x(s[k], xg)
        w = np.sqrt(1 + sum(gg ** 2 for gg in gs))
        vv = v.value(t[k], xg.points).reshape(xg.shape)
        out = max(out, float(np.max(np.abs(st[k] - w * vv))))
    return out
