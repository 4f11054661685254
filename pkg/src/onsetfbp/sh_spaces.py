"""Plain and singular Hölder norms of time-indexed data.

Samples are arrays whose first axis runs over time levels; the space norm at
each level is the grid sup-norm. All quantities are brute-force maxima over
level pairs and are therefore lower bounds of the continuum norms.
"""
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class HolderParams:
    beta: float
    gamma: float = 0.0
    lipschitz_flag: bool = False

    def __post_init__(self):
        if self.lipschitz_flag:
            if self.beta != 1.0:
                raise ValueError("the Lipschitz convention uses beta = 1")
        elif not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.gamma not in (0.0, self.beta):
            raise ValueError("gamma must be 0 or beta")

    @classmethod
    def lipschitz(cls):
        return cls(beta=1.0, gamma=0.0, lipschitz_flag=True)


@dataclass(frozen=True)
class HolderNormReport:
    beta: float
    gamma: float
    sup_norm: float
    seminorm: float
    weighted_seminorm: float
    total: float
    bounded: bool = True

    def to_json(self, quantity="u"):
        d = asdict(self)
        d["quantity"] = quantity
        return d


def _prep(samples, times):
    samples = np.asarray(samples, dtype=float)
    times = np.asarray(times, dtype=float)
    if samples.shape[0] != times.shape[0]:
        raise ValueError("one sample per time level required")
    if times.size < 2:
        raise ValueError("need at least two time levels")
    return samples.reshape(times.size, -1), times


def holder_seminorm(samples, times, params, backend=None):
    """max over level pairs of |u(t)-u(s)|_inf / |t-s|^beta."""
    vals, times = _prep(samples, times)
    return _kernels.holder_pairs(vals, times, params.beta, backend=backend)


def singular_holder_norm(samples, times, params, backend=None, blowup_ratio=1e6):
    """Report for ||u||_{beta,gamma} = sup|u| + [t^gamma u]_beta.

    The interval of definition must exclude the origin. When the sampled sup
    grows by more than ``blowup_ratio`` relative to the sup over the levels in
    [T/2, T] while the level sups grow over the three earliest levels, or the
    data are not finite, they are flagged as unbounded and the sup entry is
    set to infinity.
    """
    vals, times = _prep(samples, times)
    if np.any(times <= 0):
        raise ValueError("singular norms need time levels away from 0")
    sup = float(np.max(np.abs(vals))) if np.all(np.isfinite(vals)) else np.inf
    late = float(np.max(np.abs(vals[times >= times[-1] / 2]))) if np.isfinite(sup) else np.inf
    level_sup = np.max(np.abs(vals), axis=1) if np.isfinite(sup) else None
    growing = level_sup is not None and times.size >= 3 and level_sup[0] > level_sup[1] > level_sup[2]
    bounded = np.isfinite(sup) and (late == 0 or sup <= blowup_ratio * late or not growing)
    if not bounded:
        return HolderNormReport(params.beta, params.gamma, np.inf, np.inf, np.inf, np.inf, False)
    semi = _kernels.holder_pairs(vals, times, params.beta, backend=backend)
    weighted = _kernels.holder_pairs(vals * times[:, None] ** params.beta, times,
                                     params.beta, backend=backend)
    total = sup + (weighted if params.gamma else semi)
    return HolderNormReport(params.beta, params.gamma, sup, semi, weighted, total)


def weighted_norm(samples, times, beta, weight_exp):
    """sup|t^(w-beta) u| + [t^w u]_beta; the convention for the spaces C^beta_{w}.

    ``weight_exp`` is the lower index of the space: beta gives C^beta_beta,
    a negative value gives the spaces with negative lower index.
    """
    vals, times = _prep(samples, times)
    shift = weight_exp - beta
    w = times[:, None] ** shift
    sup = float(np.max(np.abs(w * vals)))
    semi = _kernels.holder_pairs(vals * times[:, None] ** weight_exp, times, beta)
    return sup + semi


def plain_norm(samples, times, beta):
    vals, times = _prep(samples, times)
    return float(np.max(np.abs(vals))) + _kernels.holder_pairs(vals, times, beta)


def _vanishing_norm(samples, times, beta, tol):
    """C^beta_0 norm: plain Hölder norm, with the vanishing condition enforced as a check."""
    vals, _ = _prep(samples, times)
    n = plain_norm(vals, times, beta)
    if np.max(np.abs(vals[0])) > tol * max(n, 1e-300):
        raise ValueError("sample does not vanish at the first level")
    return n


# the four multiplication maps, as (source1, source2, target) norm builders
def _map_norms(kind, f, g, times, alpha, beta, tol):
    ss = lambda u, a: weighted_norm(u, times, a, a)  # noqa: E731  C^a_a
    if kind == 1:
        return ss(f, alpha), ss(g, beta), ss(f * g, beta)
    if kind == 2:
        return ss(f, alpha), _vanishing_norm(g, times, beta, tol), _vanishing_norm(f * g, times, beta, 10 * tol)
    if kind == 3:
        return (_vanishing_norm(f, times, alpha, tol), _vanishing_norm(g, times, beta, tol),
                weighted_norm(f * g, times, beta, -alpha))
    if kind == 4:
        return (_vanishing_norm(f, times, alpha, tol), ss(g, beta),
                weighted_norm(f * g, times, beta, beta - alpha))
    raise ValueError("map index must be 1..4")


def product_inequality_check(f_samples, g_samples, times, alpha, beta, maps=(1, 2, 3, 4), tol=1e-8):
    """Max ratio ||fg|| / (||f|| ||g||) over trials for each multiplication map.

    ``f_samples`` and ``g_samples`` have shape ``(trials, levels, ...)``. Trials
    where either factor has zero norm are skipped. Returns ``{map: max_ratio}``.
    """
    if beta > alpha:
        raise ValueError("the multiplication maps need beta <= alpha")
    f_samples = np.asarray(f_samples, dtype=float)
    g_samples = np.asarray(g_samples, dtype=float)
    out = {}
    for kind in maps:
        best = 0.0
        for f, g in zip(f_samples, g_samples):
            n1, n2, n12 = _map_norms(kind, f, g, times, alpha, beta, tol)
            if n1 == 0 or n2 == 0:
                continue
            best = max(best, n12 / (n1 * n2))
        out[kind] = best
    return out
