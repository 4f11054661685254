"""Coupled free-boundary solver: inner fixed point for u, outer fixed point for s.

For a front s near t g the bulk problem is written as

    u_t - A~(t) u = Abar(s) u,   u = g on y=0,   u_y / t = H(s, u) on y=1,

with A~(t) = lap_x + d_yy/(t^2 g^2) + (y/t) d_y. The inner map
Phi_1(u) = v + R_D g + R_N H(s, u) is iterated to a fixed point (Picard);
the outer map feeds the trace of u to the front equation, s <- Phi_2(gamma_1 u).
With eps = 0 the bulk equation is quasi-stationary and every level is an
elliptic solve.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from . import parallel
from .elliptic import EllipticProblem, solve as elliptic_solve
from .grids import StripField, SurfaceField, TimeGrid
from .hamilton_jacobi import FlowMapError, SampledVelocity, hj_solve
from .ops import complete, dy, grad_x, lap_x
from .parabolic import GeneratorFamily, solve_inhomogeneous


class ContractionError(RuntimeError):
    """A fixed-point map failed to contract on the current interval."""


# ---------------------------------------------------------------------------
# the perturbation operator and the boundary nonlinearity
# ---------------------------------------------------------------------------

@dataclass
class FrontData:
    """s and its derivatives at one level, on the x-grid."""
    t: float
    s: np.ndarray
    sdot: np.ndarray
    grad: list
    lap: np.ndarray

    @classmethod
    def from_values(cls, t, s, sdot, xgrid):
        if np.any(s <= 0):
            raise ValueError("front height must be positive")
        return cls(t, s, sdot, grad_x(s, xgrid), lap_x(s, xgrid))

    @property
    def grad2(self):
        return sum(gs ** 2 for gs in self.grad)


def build_Abar(front, g, xgrid, ygrid, eps=1):
    """Return a function u (nodal slice) -> Abar(s) u on interior rows.

    Abar(s) u = [(1 + y^2 |grad s|^2)/s^2 - 1/(t^2 g^2)] u_yy + eps y [s_dot/s - 1/t] u_y
                - (2y/s) (grad s | d_y grad u) - y (s lap s - 2 |grad s|^2)/s^2 u_y
    """
    t, s = front.t, front.s
    y = ygrid.nodes[1:-1]
    G2 = front.grad2[..., None]
    sc = s[..., None]
    coef_yy = (1 + y ** 2 * G2) / sc ** 2 - 1.0 / (t * g[..., None]) ** 2
    coef_y = -y * (sc * front.lap[..., None] - 2 * G2) / sc ** 2
    if eps:
        coef_y = coef_y + eps * y * (front.sdot[..., None] / sc - 1.0 / t)
    coef_mix = [-2 * y * gs[..., None] / sc for gs in front.grad]
    h2 = ygrid.h ** 2

    def apply(u):
        uyy = (u[..., 2:] - 2 * u[..., 1:-1] + u[..., :-2]) / h2
        uy = dy(u, ygrid)
        out = coef_yy * uyy + coef_y * uy[..., 1:-1]
        if any(np.any(cm) for cm in coef_mix):
            for cm, guy in zip(coef_mix, grad_x(uy, xgrid)):
                out = out + cm * guy[..., 1:-1]
        return out

    return apply


def build_H(front, trace, trace_grad, eps=1):
    """Neumann datum H(s, u) on y=1 from the trace of u and its x-gradient."""
    ratio = front.s / front.t
    G2 = front.grad2
    dot = sum(a * b for a, b in zip(front.grad, trace_grad))
    return ratio * dot / (1 + G2) - ratio * trace * (1 + eps * trace) / np.sqrt(1 + G2)


def _fronts(surface, xgrid):
    return [FrontData.from_values(t, s, sd, xgrid)
            for t, s, sd in zip(surface.times, surface.values, surface.dot_values)]


def _diff_norm(a, b, times, ygrid):
    """E_1-type surrogate: sup of the difference and of its y-derivative over t."""
    d = a - b
    return float(max(np.max(np.abs(d)),
                     np.max(np.abs(dy(d, ygrid)) / times.reshape((-1,) + (1,) * (d.ndim - 1)))))


# ---------------------------------------------------------------------------
# inner fixed point
# ---------------------------------------------------------------------------

@dataclass
class InnerResult:
    u: np.ndarray
    wD: np.ndarray
    wN: np.ndarray
    v: np.ndarray
    ratios: list
    diffs: list
    iterations: int


def phi1(surface, g, xgrid, ygrid, eps=1, tol=1e-8, max_iter=40, scheme="euler",
         u_init=None, elliptic_method="localized", log=None):
    """Picard iteration u <- Phi_1(u) for a given front; returns InnerResult.

    With eps = 0 every level is an elliptic solve by ``elliptic_method``
    (the localization iteration by default); with eps = 1 the parabolic
    path uses direct level solves.
    """
    times = np.asarray(surface.times)
    fronts = _fronts(surface, xgrid)
    n = len(times)
    xs = xgrid.shape
    g = np.broadcast_to(np.asarray(g, dtype=float), xs)
    # boundary datum at the origin: H(t g, g) with grad s = 0 gives -g^2 (1 + eps g);
    # it is split off so that the differenced remainder vanishes at t = 0
    H0 = -g ** 2 * (1 + eps * g)
    abars = [build_Abar(fr, g, xgrid, ygrid, eps) for fr in fronts]
    u = np.broadcast_to(g[..., None], (n,) + xs + (ygrid.size,)).copy() if u_init is None else u_init.copy()
    family = GeneratorFamily(xgrid, ygrid, c=g, kappa=1.0 if eps else 0.0)
    ratios, diffs = [], []
    result = None
    for it in range(1, max_iter + 1):
        F = np.stack([complete(abars[k](u[k]), 0.0, 0.0, ygrid) for k in range(n)])
        trace = u[..., -1]
        H = np.stack([build_H(fronts[k], trace[k], grad_x(trace[k], xgrid), eps) for k in range(n)])
        if eps:
            rem = H - H0
            hdot = np.gradient(rem, times, axis=0, edge_order=2)
            sol = solve_inhomogeneous(family, times, f=F, g=g, h=H, hdot=hdot, scheme=scheme,
                                      method="direct")
            new, wD, wN, v = sol.u, sol.wD, sol.wN, sol.v
        else:
            def level(k):
                pr = EllipticProblem(xgrid, ygrid, times[k], g, f=F[k], g=g, h=H[k])
                return elliptic_solve(pr, elliptic_method)
            new = np.stack(parallel.pmap(level, range(n)))
            wD = wN = v = None
        d = _diff_norm(new, u, times, ygrid)
        diffs.append(d)
        if len(diffs) > 1 and diffs[-2] > 0:
            ratios.append(d / diffs[-2])
        if log is not None:
            log.append({"loop": "inner", "iter": it, "diff": d,
                        "ratio": ratios[-1] if len(diffs) > 1 else None})
        u = new
        result = (wD, wN, v)
        if d <= tol * max(1.0, float(np.max(np.abs(u)))):
            break
        if len(ratios) >= 2 and ratios[-1] >= 1 and ratios[-2] >= 1:
            raise ContractionError("inner iteration does not contract")
    wD, wN, v = result
    if not eps:
        wD, wN, v = decompose_quasistationary(u, fronts, g, xgrid, ygrid, elliptic_method)
    return InnerResult(u, wD, wN, v, ratios, diffs, it)


def decompose_quasistationary(u, fronts, g, xgrid, ygrid, method="localized"):
    """R_D g, R_N H(s, u) and the remainder for the eps = 0 solution."""
    wD, wN = [], []
    for k, fr in enumerate(fronts):
        trace = u[k][..., -1]
        H = build_H(fr, trace, grad_x(trace, xgrid), eps=0)
        wD.append(elliptic_solve(EllipticProblem(xgrid, ygrid, fr.t, g, g=g), method))
        wN.append(elliptic_solve(EllipticProblem(xgrid, ygrid, fr.t, g, h=H), method))
    wD, wN = np.array(wD), np.array(wN)
    return wD, wN, u - wD - wN


# ---------------------------------------------------------------------------
# outer fixed point
# ---------------------------------------------------------------------------

@dataclass
class CoupledState:
    u: StripField
    s: SurfaceField
    grad_s: np.ndarray
    wD: np.ndarray
    wN: np.ndarray
    v: np.ndarray
    g: np.ndarray
    eps: int
    T: float
    converged: bool
    outer_ratios: list
    inner_ratios: list
    outer_diffs: list
    log: list = field(default_factory=list)
    retries: int = 0
    wall_time: float = 0.0


def initial_front(g, times, xgrid):
    g = np.broadcast_to(np.asarray(g, dtype=float), xgrid.shape)
    t = np.asarray(times)[:, None] if xgrid.n_dim == 1 else np.asarray(times)[:, None, None]
    return SurfaceField(t * g, np.broadcast_to(g, (len(times),) + xgrid.shape).copy(), xgrid, times)


def _surface_norm(a, b, xgrid):
    """S-norm surrogate: sup of s_dot differences plus x-derivatives up to order 2 of s differences."""
    ds = np.moveaxis(a.values - b.values, 0, -1)
    out = float(np.max(np.abs(a.dot_values - b.dot_values))) + float(np.max(np.abs(ds)))
    out += max(float(np.max(np.abs(gg))) for gg in grad_x(ds, xgrid))
    out += float(np.max(np.abs(lap_x(ds, xgrid))))
    return out


def _run(g, xgrid, ygrid, times, eps, tol, max_outer, scheme, elliptic_method, guard_radius, log):
    g = np.broadcast_to(np.asarray(g, dtype=float), xgrid.shape)
    g0 = float(g.min())
    s = initial_front(g, times, xgrid)
    u_prev = None
    outer_ratios, outer_diffs, inner_ratios = [], [], []
    inner_tol = 0.1 * tol
    converged = False
    inner = grad = None
    for it in range(1, max_outer + 1):
        inner = phi1(s, g, xgrid, ygrid, eps=eps, tol=inner_tol, scheme=scheme, u_init=u_prev,
                     elliptic_method=elliptic_method, log=log)
        inner_ratios.append(inner.ratios)
        u_prev = inner.u
        vel = SampledVelocity(xgrid, times, inner.u[..., -1], g=g)
        hj = hj_solve(vel, xgrid, times)
        s_new, grad = hj.surface, hj.grad_s
        if np.max(np.abs(s_new.dot_values - g)) > guard_radius * g0:
            raise ContractionError("front left the neighbourhood of t g")
        d = _surface_norm(s_new, s, xgrid)
        outer_diffs.append(d)
        ratio = d / outer_diffs[-2] if len(outer_diffs) > 1 and outer_diffs[-2] > 0 else None
        if ratio is not None:
            outer_ratios.append(ratio)
        log.append({"loop": "outer", "iter": it, "diff": d, "ratio": ratio,
                    "inner_iterations": inner.iterations})
        s = s_new
        if d <= tol * float(np.max(np.abs(s.dot_values))):
            converged = True
            break
        if len(outer_ratios) >= 2 and outer_ratios[-1] >= 1 and outer_ratios[-2] >= 1:
            raise ContractionError("outer iteration does not contract")
    # final inner solve on the converged front so that (u, s) are consistent
    inner = phi1(s, g, xgrid, ygrid, eps=eps, tol=inner_tol, scheme=scheme, u_init=u_prev,
                 elliptic_method=elliptic_method, log=log)
    return s, grad, inner, converged, outer_ratios, inner_ratios, outer_diffs


def solve_fbp(g, xgrid, ygrid, timegrid, eps=1, tol=1e-6, max_outer=30, scheme="euler",
              elliptic_method="localized", guard_radius=0.5, max_retries=3):
    """Outer Picard iteration on s, restarting on a halved interval when contraction fails."""
    start = time.perf_counter()
    log = []
    tg = timegrid
    for attempt in range(max_retries + 1):
        times = np.asarray(tg.levels)
        try:
            s, grad, inner, conv, orat, irat, odiff = _run(
                g, xgrid, ygrid, times, eps, tol, max_outer, scheme, elliptic_method, guard_radius, log)
        except (ContractionError, FlowMapError, RuntimeError) as exc:
            log.append({"loop": "restart", "reason": str(exc), "T": float(tg.T)})
            if attempt == max_retries:
                raise
            tg = halve_interval(tg)
            continue
        u = StripField(inner.u, xgrid, ygrid, times)
        return CoupledState(u, s, grad, inner.wD, inner.wN, inner.v,
                            np.broadcast_to(g, xgrid.shape).copy(), eps, float(tg.T), conv,
                            orat, irat, odiff, log, attempt, time.perf_counter() - start)


def halve_interval(tg):
    T = tg.T / 2
    t0 = min(tg.t0, T / 10)
    new = TimeGrid(t0, T, tg.N, tg.q)
    ratio = tg.max_step_ratio() if len(tg.levels) > 1 else None
    return new.with_step_ratio(ratio) if ratio else new


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

def decomposition_report(state, t_max=None, t_min=None):
    """Log-log slopes of sup|R_D g|, sup|R_N H| and sup|v| against t."""
    t = np.asarray(state.u.times)
    t_max = t[-1] / 4 if t_max is None else t_max
    t_min = 10 * t[0] if t_min is None else t_min
    sel = (t >= t_min) & (t <= t_max)
    if sel.sum() < 3:
        raise ValueError("not enough levels in the fitting window")
    axes = tuple(range(1, state.wD.ndim))
    out = {}
    for name, arr in (("R_D g", state.wD), ("R_N H", state.wN), ("v", state.v)):
        norms = np.max(np.abs(arr), axis=axes)[sel]
        out[name] = float(np.polyfit(np.log(t[sel]), np.log(norms), 1)[0])
    return out


def trace_lipschitz(front1, front2, g, xgrid, ygrid, eps=1, tol=1e-9, **kw):
    """Measured constant C in |gamma_1 u_1 - gamma_1 u_2| <= C |s_1 - s_2| (S-norm surrogate)."""
    u1 = phi1(front1, g, xgrid, ygrid, eps=eps, tol=tol, **kw).u
    u2 = phi1(front2, g, xgrid, ygrid, eps=eps, tol=tol, **kw).u
    ds = _surface_norm(front1, front2, xgrid)
    if ds == 0:
        raise ValueError("fronts coincide")
    return float(np.max(np.abs(u1[..., -1] - u2[..., -1]))) / ds


def contraction_summary(state):
    inner = [r for rs in state.inner_ratios for r in rs]
    return {
        "outer_max": max(state.outer_ratios) if state.outer_ratios else 0.0,
        "outer_mean": float(np.mean(state.outer_ratios)) if state.outer_ratios else 0.0,
        "inner_max": max(inner) if inner else 0.0,
        "inner_mean": float(np.mean(inner)) if inner else 0.0,
    }
