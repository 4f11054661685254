"""Discretization backbone: periodic x-grid, y-grid on [0, 1], graded time grid.

Fields carry full nodal y-profiles, including the boundary nodes y=0 and y=1,
in the last array axis. The x axes come first; time-indexed fields prepend a
time axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class XGrid:
    n_dim: int
    points_per_dim: int
    period: float = 2 * np.pi

    def __post_init__(self):
        n = self.points_per_dim
        if self.n_dim not in (1, 2):
            raise ValueError("n_dim must be 1 or 2")
        if n < 2 or n & (n - 1):
            raise ValueError(f"points_per_dim must be a power of two, got {n}")
        if self.period <= 0:
            raise ValueError("period must be positive")

    @property
    def shape(self):
        return (self.points_per_dim,) * self.n_dim

    @property
    def dx(self):
        return self.period / self.points_per_dim

    @property
    def axes(self):
        return tuple(range(self.n_dim))

    @property
    def nodes(self):
        """1D node coordinates, shared by every dimension."""
        return np.arange(self.points_per_dim) * self.dx

    @property
    def coords(self):
        """Tuple of coordinate arrays broadcast to ``shape``."""
        return np.meshgrid(*([self.nodes] * self.n_dim), indexing="ij")

    @property
    def wavenumbers(self):
        """1D wavenumbers in FFT order: integer multiples of 2*pi/L."""
        n = self.points_per_dim
        return np.fft.fftfreq(n, d=self.period / n) * 2 * np.pi

    @property
    def kvec(self):
        """Tuple of wavenumber arrays broadcast to ``shape`` (FFT order)."""
        return np.meshgrid(*([self.wavenumbers] * self.n_dim), indexing="ij")

    @property
    def knorm(self):
        return np.sqrt(sum(k ** 2 for k in self.kvec))

    @property
    def points(self):
        """All grid points as a ``(P, n_dim)`` array, C order."""
        return np.stack([c.ravel() for c in self.coords], axis=1)


@dataclass(frozen=True)
class YGrid:
    m: int

    def __post_init__(self):
        if self.m < 3:
            raise ValueError("need at least 3 interior y points")

    @property
    def h(self):
        return 1.0 / (self.m + 1)

    @property
    def nodes(self):
        y = np.linspace(0.0, 1.0, self.m + 2)
        return y

    @property
    def size(self):
        return self.m + 2


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    N: int
    q: float = 2.0
    levels: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (0 < self.t0 < self.T):
            raise ValueError(f"need 0 < t0 < T, got t0={self.t0}, T={self.T}")
        if self.N < 1 or self.q < 1:
            raise ValueError("need N >= 1 and grading exponent q >= 1")
        if self.levels is None:
            k = np.arange(self.N + 1) / self.N
            t = np.maximum(self.T * k ** self.q, self.t0)
            t = np.unique(t)
            # drop levels that coincide with t0 up to rounding
            t = t[np.concatenate([[True], np.diff(t) > 1e-9 * t[1:]])]
            object.__setattr__(self, "levels", _frozen(t))
        else:
            t = np.asarray(self.levels, dtype=float)
            if t[0] != self.t0 or t[-1] != self.T or np.any(np.diff(t) <= 1e-12 * t[1:]):
                raise ValueError("levels must increase strictly from t0 to T")
            object.__setattr__(self, "levels", _frozen(t))

    def __len__(self):
        return len(self.levels)

    @property
    def steps(self):
        return np.diff(self.levels)

    def with_step_ratio(self, ratio=0.1):
        """Insert levels so that every step satisfies dt <= ratio * t."""
        t = [self.levels[0]]
        for b in self.levels[1:]:
            a = t[-1]
            # geometric sub-steps keep dt/t constant
            n = max(1, int(np.ceil(np.log(b / a) / np.log1p(ratio) - 1e-9)))
            t.extend(a * (b / a) ** (np.arange(1, n) / n))
            t.append(b)
        return TimeGrid(self.t0, self.T, self.N, self.q, levels=np.array(t))

    def max_step_ratio(self):
        return float(np.max(self.steps / self.levels[:-1]))


def make_grids(config):
    """Build the (XGrid, YGrid, TimeGrid) triple from a config object.

    ``config`` needs ``n_dim, nx, period, m, t0, T, N, q`` attributes; the
    time grid is refined to honour ``step_ratio`` when that attribute is set.
    """
    if config.nx <= 0 or config.m <= 0 or config.N <= 0:
        raise ValueError("grid counts must be positive")
    xg = XGrid(config.n_dim, config.nx, config.period)
    yg = YGrid(config.m)
    tg = TimeGrid(config.t0, config.T, config.N, config.q)
    ratio = getattr(config, "step_ratio", None)
    if ratio:
        tg = tg.with_step_ratio(ratio)
    return xg, yg, tg


@dataclass(frozen=True)
class StripField:
    """Samples of u(t, x, y); shape ``(len(times), *xgrid.shape, ygrid.size)``."""
    values: np.ndarray
    xgrid: XGrid
    ygrid: YGrid
    times: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        expect = (len(self.times),) + self.xgrid.shape + (self.ygrid.size,)
        if v.shape != expect:
            raise ValueError(f"StripField shape {v.shape} != {expect}")
        if not np.all(np.isfinite(v)):
            raise ValueError("StripField has non-finite entries")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "times", _frozen(self.times))

    def trace(self, side=1):
        return self.values[..., -1 if side == 1 else 0]


@dataclass(frozen=True)
class SurfaceField:
    """Samples of the front s(t, x) and its time derivative."""
    values: np.ndarray
    dot_values: np.ndarray
    xgrid: XGrid
    times: np.ndarray

    def __post_init__(self):
        v, d = _frozen(self.values), _frozen(self.dot_values)
        expect = (len(self.times),) + self.xgrid.shape
        if v.shape != expect or d.shape != expect:
            raise ValueError(f"SurfaceField shape {v.shape}/{d.shape} != {expect}")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(d))):
            raise ValueError("SurfaceField has non-finite entries")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dot_values", d)
        object.__setattr__(self, "times", _frozen(self.times))


def to_physical(u, s, ygrid, y_query=None):
    """Map fixed-strip samples back to the physical domain 0 < Y < s(t, x).

    ``u`` has y as last axis; ``s`` matches the leading axes of ``u``. Without
    ``y_query`` the physical heights Y = eta * s of every node are returned
    together with the (unchanged) values. With ``y_query`` (broadcastable to
    ``u.shape[:-1] + (k,)``), u is cubic-interpolated at eta = Y / s.
    """
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("front height must be positive")
    eta = ygrid.nodes
    if y_query is None:
        return s[..., None] * eta, u
    yq = np.broadcast_to(np.asarray(y_query, dtype=float), u.shape[:-1] + (np.shape(y_query)[-1],))
    etaq = yq / s[..., None]
    if np.any(etaq < -1e-12) or np.any(etaq > 1 + 1e-12):
        raise ValueError("query heights outside the physical domain")
    flat_u = u.reshape(-1, u.shape[-1])
    flat_q = np.clip(etaq.reshape(-1, etaq.shape[-1]), 0.0, 1.0)
    out = np.empty_like(flat_q)
    for i in range(flat_u.shape[0]):
        out[i] = CubicSpline(eta, flat_u[i])(flat_q[i])
    return yq, out.reshape(yq.shape)


def to_fixed(u_phys, y_phys, s, ygrid):
    """Forward map: sample physical profiles u(Y) on the nodes Y = eta * s."""
    u_phys = np.asarray(u_phys, dtype=float)
    y_phys = np.broadcast_to(np.asarray(y_phys, dtype=float), u_phys.shape)
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("front height must be positive")
    flat_u = u_phys.reshape(-1, u_phys.shape[-1])
    flat_y = y_phys.reshape(-1, u_phys.shape[-1])
    flat_s = s.reshape(-1)
    out = np.empty((flat_u.shape[0], ygrid.size))
    for i in range(flat_u.shape[0]):
        out[i] = CubicSpline(flat_y[i], flat_u[i])(ygrid.nodes * flat_s[i])
    return out.reshape(u_phys.shape[:-1] + (ygrid.size,))
