"""Singular elliptic model problem on the strip.

    -lap_x u - u_yy / (t^2 c(x)^2) - kappa (y/t) u_y = f,   u(0) = g,   u_y(1) / t = h

``kappa = 0`` is the model operator; ``kappa = 1`` adds the drift of the
modified generator used by the coupled solver. Three solution paths ship:
the explicit symbols (constant c), a direct preconditioned Krylov solve of the
full discretization (any c), and the localization iteration with a partition
of unity and commutator correction (any c).
"""
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import parallel
from .ops import StripOperator, grad_x, lap_x
from .symbols import dilated_apply


@dataclass
class EllipticProblem:
    xgrid: object
    ygrid: object
    t: float
    c: object = 1.0
    f: object = None
    g: object = 0.0
    h: object = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("t must be positive")
        c = np.asarray(self.c, dtype=float)
        if np.any(c <= 0) or not np.all(np.isfinite(c)):
            raise ValueError("coefficient c must be positive and finite")
        if c.ndim and np.ptp(c) == 0:
            c = np.asarray(float(c.flat[0]))
        self.c = c
        xs = self.xgrid.shape
        self.g = np.broadcast_to(np.asarray(self.g, dtype=float), xs)
        self.h = np.broadcast_to(np.asarray(self.h, dtype=float), xs)
        if self.f is None:
            self.f = np.zeros(xs + (self.ygrid.size,))
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != xs + (self.ygrid.size,):
            raise ValueError("f must be a nodal strip slice")

    @property
    def constant(self):
        return self.c.ndim == 0

    def operator(self, c=None):
        c = self.c if c is None else c
        return StripOperator(self.xgrid, self.ygrid, a0=0.0, a1=1.0,
                             a2=1.0 / (self.t * c) ** 2, a3=-self.kappa / self.t)

    def residual(self, u):
        """Interior residual of the equation; boundary rows hold by construction."""
        return self.operator().apply(u) - self.f[..., 1:-1]


def solve_constant(problem):
    """Mode-by-mode symbol solution t^2 sigma_t c f + t sigma_t b h + sigma_t a g."""
    if not problem.constant:
        raise ValueError("solve_constant needs a constant coefficient")
    if problem.kappa:
        raise ValueError("the explicit symbols cover the model operator only")
    c, t, xg, yg = float(problem.c), problem.t, problem.xgrid, problem.ygrid
    u = dilated_apply("a", t, problem.g, xg, yg, c=c)
    u += dilated_apply("b", t, problem.h, xg, yg, c=c)
    u += dilated_apply("c", t, problem.f, xg, yg, c=c)
    return u


def solve_direct(problem, tol=1e-12):
    """Solve the full discretization with the preconditioned Krylov path."""
    return problem.operator().solve(problem.f[..., 1:-1], problem.g, problem.t * problem.h, tol=tol)


# ---------------------------------------------------------------------------
# localization
# ---------------------------------------------------------------------------

def _bump(d):
    out = np.zeros_like(d)
    inside = np.abs(d) < 1
    out[inside] = np.exp(-1.0 / (1.0 - d[inside] ** 2))
    return out


def _plateau(d, width, ramp):
    """1 for |d| <= width, smooth decay to 0 over the next ``ramp``."""
    s = np.clip((np.abs(d) - width) / ramp, 0.0, 1.0)
    a, b = _bump_edge(s), _bump_edge(1 - s)
    return b / (a + b)


def _bump_edge(s):
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _periodic_dist(x, center, period):
    return (x - center + period / 2) % period - period / 2


@dataclass
class PartitionOfUnity:
    """Smooth periodic functions phi_k with sum_k phi_k^2 = 1 on the x-grid.

    Cubes of side r = L / patches_per_dim are centred at x_k = k r; every
    phi_k is supported in the cube enlarged by ``overlap`` r on each side, so
    it meets only adjacent cubes.
    """
    xgrid: object
    patches_per_dim: int
    overlap: float = 0.25
    phis: list = field(init=False, repr=False)
    centers: list = field(init=False, repr=False)
    supports: list = field(init=False, repr=False)

    def __post_init__(self):
        n, xg = self.patches_per_dim, self.xgrid
        if n < 1:
            raise ValueError("need at least one patch per dimension")
        if not 0 < self.overlap <= 0.5:
            raise ValueError("overlap must lie in (0, 0.5]")
        L = xg.period
        x = xg.nodes
        if n == 1:
            one = [np.ones_like(x)]
            sup1 = [np.ones(x.shape, bool)]
            cen1 = [0.0]
        else:
            r = L / n
            half = r * (0.5 + self.overlap)
            cen1 = [k * r for k in range(n)]
            psi = [_bump(_periodic_dist(x, c0, L) / half) for c0 in cen1]
            total = np.sum(psi, axis=0)
            one = [np.sqrt(p / total) for p in psi]
            sup1 = [p > 0 for p in psi]
        self.phis, self.centers, self.supports = [], [], []
        for idx in itertools.product(range(n), repeat=xg.n_dim):
            phi, sup = one[idx[0]], sup1[idx[0]]
            if xg.n_dim == 2:
                phi = np.multiply.outer(phi, one[idx[1]])
                sup = np.logical_and.outer(sup, sup1[idx[1]])
            self.phis.append(phi)
            self.supports.append(sup)
            self.centers.append(tuple(cen1[k] for k in idx))

    def __len__(self):
        return len(self.phis)

    def sum_of_squares(self):
        return np.sum([p ** 2 for p in self.phis], axis=0)

    def localize(self, u):
        """delta: u -> (phi_k u)_k; x axes lead, any trailing axes are carried."""
        extra = u.ndim - self.xgrid.n_dim
        return [p.reshape(p.shape + (1,) * extra) * u for p in self.phis]

    def synthesize(self, parts):
        """epsilon: (u_k)_k -> sum_k phi_k u_k."""
        extra = parts[0].ndim - self.xgrid.n_dim
        return sum(p.reshape(p.shape + (1,) * extra) * q for p, q in zip(self.phis, parts))

    def center_index(self, k):
        xg = self.xgrid
        return tuple(int(round(c0 / xg.dx)) % xg.points_per_dim for c0 in self.centers[k])

    def patch_coefficient(self, c, k):
        """c on supp phi_k, blended smoothly to the frozen value c(x_k) outside."""
        c = np.broadcast_to(np.asarray(c, dtype=float), self.xgrid.shape)
        if len(self) == 1:
            return c
        ck = c[self.center_index(k)]
        xg, n = self.xgrid, self.patches_per_dim
        r = xg.period / n
        width = r * (0.5 + self.overlap)
        chi = np.ones(xg.shape)
        for d, (cen, x) in enumerate(zip(self.centers[k], xg.coords)):
            chi = chi * _plateau(_periodic_dist(x, cen, xg.period), width, 0.5 * r)
        return ck + chi * (c - ck)


def choose_patches(c, xgrid, max_osc=0.1, overlap=0.25, max_patches=64):
    """Smallest patch count (power of two) with relative oscillation of c <= max_osc on each patch."""
    c = np.broadcast_to(np.asarray(c, dtype=float), xgrid.shape)
    if np.ptp(c) <= max_osc * c.min():
        return PartitionOfUnity(xgrid, 1, overlap)
    n = 4
    while n <= max_patches:
        pou = PartitionOfUnity(xgrid, n, overlap)
        worst = max(np.ptp(c[s]) / c[s].min() for s in pou.supports)
        if worst <= max_osc:
            return pou
        n *= 2
    raise ValueError("coefficient oscillates too much for the patch budget")


def commutator(problem, phi, U):
    """[A, phi] U = A(phi U) - phi A U on interior rows, computed from the discrete operator."""
    op = problem.operator()
    extra = U.ndim - problem.xgrid.n_dim
    p = phi.reshape(phi.shape + (1,) * extra)
    return op.apply(p * U) - p * op.apply(U)


def commutator_formula(xgrid, phi, U):
    """-(2 grad phi . grad U + lap phi U) on interior rows, the closed form of the commutator."""
    gp = grad_x(phi, xgrid)
    Ui = U[..., 1:-1]
    gu = grad_x(Ui, xgrid)
    lp = lap_x(phi, xgrid)
    out = lp[..., None] * Ui
    for a, b in zip(gp, gu):
        out += 2 * a[..., None] * b
    return -out


@dataclass
class LocalizationReport:
    sweeps: int
    residuals: list
    contraction: float
    patches: int
    converged: bool


def solve_variable(problem, pou=None, max_sweeps=50, tol=1e-8, patch_tol=1e-12, w0=None):
    """Localization iteration: patchwise solves synthesized, commutator corrected.

    With R'(w) = (A_k, B_k)^{-1}(phi_k w, phi_k g, phi_k h) and
    u(w) = sum_k phi_k R'_k(w), one has A u(w) = w + [A, eps] A'^{-1} delta w + (boundary
    commutators). The sweep w <- w - (A u(w) - f) is the Neumann series for
    (id + [A, eps] A'^{-1} delta)^{-1}; its contraction factor is the norm
    of the commutator term, small like t. ``w0`` overrides the starting
    iterate w = f. Returns ``(u, LocalizationReport)``.
    """
    if pou is None:
        pou = choose_patches(problem.c, problem.xgrid)
    xg, yg, t = problem.xgrid, problem.ygrid, problem.t
    ops = [problem.operator(pou.patch_coefficient(problem.c, k)) for k in range(len(pou))]
    g_parts = pou.localize(problem.g)
    q_parts = pou.localize(t * problem.h)
    full = problem.operator()
    f = problem.f[..., 1:-1]
    fscale = float(np.max(np.abs(f)))
    # rounding floor of a residual evaluation: |operator| * |u| * machine epsilon
    opnorm = float(np.max(xg.knorm) ** 2 + 4 * np.max(full.a2) / yg.h ** 2 + abs(full.a3) / yg.h)

    def synth(w):
        w_parts = pou.localize(w)

        def one(k):
            return ops[k].solve(w_parts[k], g_parts[k], q_parts[k], tol=patch_tol)
        return pou.synthesize(parallel.pmap(one, range(len(pou))))

    w = f.copy() if w0 is None else np.array(w0, dtype=float)
    residuals = []
    u = None
    converged = False
    for sweep in range(1, max_sweeps + 1):
        u = synth(w)
        r = full.apply(u) - f
        res = float(np.max(np.abs(r)))
        residuals.append(res)
        scale = max(fscale, residuals[0])
        floor = 64 * np.finfo(float).eps * opnorm * float(np.max(np.abs(u)))
        if res <= max(tol * scale, floor) or scale == 0:
            converged = True
            break
        if len(residuals) >= 3 and residuals[-1] > residuals[-2] > residuals[-3]:
            raise RuntimeError("localization iteration does not contract; reduce t or the patch size")
        w = w - r
    rates = [b / a for a, b in zip(residuals[:-1], residuals[1:]) if a > 0]
    contraction = float(np.exp(np.mean(np.log(rates[-3:])))) if rates else 0.0
    return u, LocalizationReport(sweep, residuals, contraction, len(pou), converged)


def solve(problem, method="direct", **kw):
    """Dispatch to ``constant``, ``direct``, ``localized`` or ``oracle``."""
    if method == "constant":
        return solve_constant(problem)
    if method == "direct":
        return solve_direct(problem, **kw)
    if method == "localized":
        return solve_variable(problem, **kw)[0]
    if method == "oracle":
        from .verify import dense_oracle_elliptic
        return dense_oracle_elliptic(problem)
    raise ValueError(f"unknown elliptic method {method!r}")


def apply_boundary_ops(t, g, h, c, xgrid, ygrid, method="direct", kappa=0.0):
    """(R_D(t) g, R_N(t) h), each solving the homogeneous equation with one datum."""
    pd = EllipticProblem(xgrid, ygrid, t, c, g=g, kappa=kappa)
    pn = EllipticProblem(xgrid, ygrid, t, c, h=h, kappa=kappa)
    if method == "constant" and (pd.constant and not kappa):
        return solve_constant(pd), solve_constant(pn)
    m = "direct" if method == "constant" else method
    return solve(pd, m), solve(pn, m)


def inverse_apply(t, f, c, xgrid, ygrid, kappa=0.0):
    """Elliptic inverse with homogeneous boundary data (positive operator)."""
    return solve_direct(EllipticProblem(xgrid, ygrid, t, c, f=f, kappa=kappa))
