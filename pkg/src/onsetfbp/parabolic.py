"""Singular parabolic problem u_t = A(t) u + f with inhomogeneous boundary data.

Sign convention: the generator is

    A(t) = lap_x + d_yy / (t^2 c^2) + kappa (y/t) d_y,

so that A(t) = -K(t) with K(t) the positive elliptic operator of
``elliptic``. ``kappa = 1`` gives the modified family used by the coupled
solver. Boundary data enter through u = v + R_D(t) g + R_N(t) h, where v has
homogeneous boundary data and the time derivatives of the boundary terms
are built from

    K (d/dt w) = (2/t) lap_x w + (kappa/t^2) y w_y      (w = R_D g or R_N h)

plus R_D g_dot, and (1/t) R_N h + R_N h_dot for the Neumann part.
"""
from dataclasses import dataclass

import numpy as np

from . import parallel
from .elliptic import EllipticProblem, solve as elliptic_solve
from .ops import StripOperator, complete, dy, lap_x
from .verify import NodalAssembly, _Elimination, operator_inf_norm


@dataclass
class GeneratorFamily:
    xgrid: object
    ygrid: object
    c: object = 1.0
    kappa: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if np.any(c <= 0):
            raise ValueError("coefficient c must be positive")
        if c.ndim and np.ptp(c) == 0:
            c = np.asarray(float(c.flat[0]))
        self.c = c

    def elliptic(self, t, shift=0.0):
        """StripOperator of shift - A(t) on interior rows."""
        return StripOperator(self.xgrid, self.ygrid, a0=shift, a1=1.0,
                             a2=1.0 / (t * self.c) ** 2, a3=-self.kappa / t)

    def apply(self, t, u):
        """A(t) u on interior rows of a nodal slice."""
        return -self.elliptic(t).apply(u)

    def problem(self, t, **kw):
        return EllipticProblem(self.xgrid, self.ygrid, t, self.c, kappa=self.kappa, **kw)

    def matrix(self, t):
        """Dense A(t) on interior unknowns with homogeneous boundary rows eliminated."""
        asm = _assembly(self.xgrid, self.ygrid)
        el = _Elimination(asm)
        w = 1.0 / np.broadcast_to(self.c, self.xgrid.shape) ** 2
        K = (asm.K_lap + asm.K_yy(w) / t ** 2 - (self.kappa / t) * asm.K_ydy)[el.rows_int] @ el.E
        return -K.toarray()


_ASM_CACHE = {}


def _assembly(xg, yg):
    key = (xg, yg)
    if key not in _ASM_CACHE:
        _ASM_CACHE[key] = NodalAssembly(xg, yg)
    return _ASM_CACHE[key]


def step_homogeneous(u, t_k, t_next, family, f_next=None, f_k=None, scheme="euler"):
    """One step of v_t = A(t) v + f with homogeneous boundary data.

    Implicit Euler solves (I - dt A(t_next)) v' = v + dt f(t_next); the
    trapezoidal rule averages A and f between the two levels.
    """
    dt = t_next - t_k
    if dt <= 0:
        raise ValueError("time levels must increase")
    xs, m = family.xgrid.shape, family.ygrid.m
    f_next = np.zeros(xs + (m,)) if f_next is None else f_next
    ui = u[..., 1:-1]
    if scheme == "euler":
        op = family.elliptic(t_next, shift=1.0 / dt)
        rhs = ui / dt + f_next
    elif scheme == "trapezoid":
        f_k = np.zeros(xs + (m,)) if f_k is None else f_k
        op = family.elliptic(t_next, shift=2.0 / dt)
        rhs = 2 * ui / dt + family.apply(t_k, u) + f_next + f_k
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return complete(op.solve_homogeneous(rhs), 0.0, 0.0, family.ygrid)


def evolve(family, times, v0, forcing=None, scheme="euler"):
    """March v_t = A(t) v + forcing(k) over all levels; forcing returns interior rows."""
    out = np.empty((len(times),) + v0.shape)
    out[0] = v0
    for k in range(len(times) - 1):
        fn = forcing(k + 1) if forcing is not None else None
        fk = forcing(k) if (forcing is not None and scheme == "trapezoid") else None
        out[k + 1] = step_homogeneous(out[k], times[k], times[k + 1], family, fn, fk, scheme)
    return out


def boundary_terms(family, t, g, h, method="direct"):
    """(R_D(t) g, R_N(t) h) for the family's operator."""
    pd = family.problem(t, g=g)
    pn = family.problem(t, h=h)
    return elliptic_solve(pd, method), elliptic_solve(pn, method)


def boundary_derivatives(family, t, wD, wN, h, gdot=None, hdot=None, method="direct"):
    """d/dt [R_D(t) g] and d/dt [R_N(t) h] from the operator identities (no time differencing)."""
    xg, yg = family.xgrid, family.ygrid

    def core(w):
        rhs = (2.0 / t) * lap_x(w[..., 1:-1], xg)
        if family.kappa:
            rhs = rhs + (family.kappa / t ** 2) * yg.nodes[1:-1] * dy(w, yg)[..., 1:-1]
        return elliptic_solve(family.problem(t, f=complete(rhs, 0.0, 0.0, yg)), method)

    dD = core(wD)
    dN = core(wN) + wN / t
    if gdot is not None and np.any(gdot):
        dD = dD + elliptic_solve(family.problem(t, g=gdot), method)
    if hdot is not None and np.any(hdot):
        dN = dN + elliptic_solve(family.problem(t, h=hdot), method)
    return dD, dN


def derivative_formula_check(family, t, g, h, gdot=None, hdot=None, rel_step=1e-4, method="direct"):
    """Relative sup errors of the boundary-derivative formulas against centred differences.

    The data move linearly in time, g(t + d) = g + d g_dot (same for h), so
    the centred difference of R_D(t) g(t) and R_N(t) h(t) is second order in d.
    """
    xs = family.xgrid.shape
    g, h = np.broadcast_to(g, xs), np.broadcast_to(h, xs)
    gd = np.zeros(xs) if gdot is None else np.broadcast_to(gdot, xs)
    hd = np.zeros(xs) if hdot is None else np.broadcast_to(hdot, xs)
    d = rel_step * t
    wp = boundary_terms(family, t + d, g + d * gd, h + d * hd, method)
    wm = boundary_terms(family, t - d, g - d * gd, h - d * hd, method)
    wD, wN = boundary_terms(family, t, g, h, method)
    dD, dN = boundary_derivatives(family, t, wD, wN, h, gd, hd, method)
    out = {}
    for name, exact, a, b in (("dirichlet", dD, wp[0], wm[0]), ("neumann", dN, wp[1], wm[1])):
        fd = (a - b) / (2 * d)
        scale = max(float(np.max(np.abs(fd))), np.finfo(float).tiny)
        out[name] = float(np.max(np.abs(exact - fd))) / scale
    return out


def _level(data, k, shape):
    if data is None:
        return np.zeros(shape)
    data = np.asarray(data, dtype=float)
    return data[k] if data.ndim > len(shape) else np.broadcast_to(data, shape)


@dataclass
class InhomogeneousSolution:
    u: np.ndarray
    v: np.ndarray
    wD: np.ndarray
    wN: np.ndarray
    forcing: np.ndarray


def solve_inhomogeneous(family, times, f=None, g=None, h=None, gdot=None, hdot=None,
                        v0=None, scheme="euler", method="direct", min_ratio_guard=0.5):
    """u = v + R_D(t) g + R_N(t) h with v stepped under the forcing f - d/dt[R_D g + R_N h].

    ``f`` is a sequence of nodal slices per level (or None); ``g``, ``h`` and
    their time derivatives are x-arrays, constant or given per level.
    ``v0`` defaults to 0, the vanishing initial state of the homogeneous part.
    """
    times = np.asarray(times, dtype=float)
    steps = np.diff(times)
    if np.any(steps > min_ratio_guard * times[:-1]):
        raise ValueError("time steps too large relative to t to resolve the 1/t terms")
    xg, yg = family.xgrid, family.ygrid
    xs = xg.shape
    n = len(times)

    def level(k):
        t = times[k]
        gk, hk = _level(g, k, xs), _level(h, k, xs)
        wD, wN = boundary_terms(family, t, gk, hk, method)
        dD, dN = boundary_derivatives(family, t, wD, wN, hk,
                                      None if gdot is None else _level(gdot, k, xs),
                                      None if hdot is None else _level(hdot, k, xs), method)
        return wD, wN, dD + dN

    parts = parallel.pmap(level, range(n))
    wD = np.stack([p[0] for p in parts])
    wN = np.stack([p[1] for p in parts])
    forcing = np.stack([-p[2][..., 1:-1] for p in parts])
    if f is not None:
        forcing = forcing + np.asarray(f)[..., 1:-1]
    v0 = np.zeros(xs + (yg.size,)) if v0 is None else v0
    v = evolve(family, times, v0, lambda k: forcing[k], scheme)
    return InhomogeneousSolution(v + wD + wN, v, wD, wN, forcing)


# ---------------------------------------------------------------------------
# hypotheses of the maximal-regularity theorem
# ---------------------------------------------------------------------------

def verify_maxreg_hypotheses(family, t_samples, n_triples=100, seed=0):
    """Measured sup-norm quantities behind hypotheses (i)-(iii).

    Returns a dict with ``inverse_norms`` (||A(t)^-1||), their log-log
    ``inverse_slope``, the worst spectral abscissa, and the max over random
    triples tau <= s < t of ||[A(t)-A(s)] A(tau)^-1|| * t / (t - s).
    """
    t_samples = np.sort(np.asarray(t_samples, dtype=float))
    mats = {}

    def A(t):
        if t not in mats:
            mats[t] = family.matrix(t)
        return mats[t]

    inv_norms = [operator_inf_norm(np.linalg.inv(A(t))) for t in t_samples]
    slope = float(np.polyfit(np.log(t_samples), np.log(inv_norms), 1)[0])
    abscissa = max(float(np.max(np.linalg.eigvals(A(t)).real)) for t in t_samples)
    rng = np.random.default_rng(seed)
    lo, hi = t_samples[0], t_samples[-1]
    ratios = []
    inv_cache = {}
    for _ in range(n_triples):
        tau, s, t = np.sort(rng.uniform(lo, hi, 3))
        tau, s, t = (float(np.round(v, 12)) for v in (tau, s, t))
        if t == s:
            continue
        if tau not in inv_cache:
            inv_cache[tau] = np.linalg.inv(family.matrix(tau))
        diff = family.matrix(t) - family.matrix(s)
        ratios.append(operator_inf_norm(diff @ inv_cache[tau]) * t / (t - s))
    return {
        "t": t_samples.tolist(),
        "inverse_norms": inv_norms,
        "inverse_slope": slope,
        "spectral_abscissa": abscissa,
        "triple_ratio_max": float(np.max(ratios)),
        "triple_ratio_mean": float(np.mean(ratios)),
        "n_triples": len(ratios),
    }
