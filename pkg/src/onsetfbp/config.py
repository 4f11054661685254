"""key = value run configuration with line-precise validation.

One key per line; ``#`` starts a comment; blank lines are ignored. Numbers
may use ``pi`` and the operators + - * / (``period = 2*pi``). Lists are
comma separated. Unknown keys and out-of-range values are errors that name
the file and line.
"""
import ast
import hashlib
import math
import operator
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

G_PRESETS = ("flat", "sine")


class ConfigError(ValueError):
    """Invalid configuration; the message carries ``path:line:``."""


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def _eval_number(text):
    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(f"not a number: {text!r}")
    try:
        return ev(ast.parse(text.strip(), mode="eval").body)
    except SyntaxError:
        raise ValueError(f"not a number: {text!r}") from None


def _as_int(text):
    v = _eval_number(text)
    if float(v) != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _as_float(text):
    return float(_eval_number(text))


def _as_floats(text):
    return tuple(_as_float(p) for p in text.split(",") if p.strip())


def _as_str(text):
    return text.strip()


@dataclass
class SolverConfig:
    # grids
    n_dim: int = 1
    nx: int = 16
    period: float = 2 * math.pi
    m: int = 16
    t0: float = 1e-3
    T: float = 0.1
    N: int = 20
    q: float = 2.0
    step_ratio: float = 0.1
    # Hölder exponents used in reports
    beta: float = 0.5
    alpha: float = 0.5
    # model
    eps: int = 1
    g: str = "flat"
    g0: float = 1.0
    g_amp: float = 0.1
    # tolerances and iteration limits
    tol: float = 1e-6
    max_outer: int = 30
    max_retries: int = 3
    guard_radius: float = 0.5
    # method switches
    scheme: str = "euler"
    elliptic: str = "localized"
    # solve-elliptic data: c = c0 + c_amp sin x1, g = dirichlet (1 + cos x1) / 2, h = neumann cos x1
    t: float = 0.1
    c0: float = 1.0
    c_amp: float = 0.2
    dirichlet: float = 1.0
    neumann: float = 0.0
    source: float = 0.0
    # hj-solve velocity: constant or sine preset (v = 1 + v_amp sin x1), or a field file
    velocity: str = "sine"
    v_amp: float = 0.1
    substeps: int = 1
    # verify-symbols / verify-operators
    xi: tuple = (0.0, 1.0, 2.0, 10.0, 50.0)
    t_samples: tuple = (0.025, 0.05, 0.1, 0.2, 0.4)
    n_triples: int = 100
    # reproducibility and output
    seed: int = 0
    format: str = "binary"
    source_path: str = field(default="", repr=False)
    lines: dict = field(default_factory=dict, repr=False)

    def items(self):
        """Canonical (key, value) pairs, excluding bookkeeping fields."""
        return [(f.name, getattr(self, f.name)) for f in fields(self) if f.name not in ("source_path", "lines")]

    def config_hash(self):
        text = "\n".join(f"{k}={v!r}" for k, v in self.items())
        return hashlib.sha256(text.encode()).hexdigest()

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.items()}

    # -- derived objects --------------------------------------------------------
    def grids(self):
        from .grids import make_grids
        return make_grids(self)

    def g_field(self, xgrid):
        if self.g == "flat":
            return np.full(xgrid.shape, self.g0)
        if self.g == "sine":
            return self.g0 + self.g_amp * np.sin(xgrid.coords[0])
        from .io import read_field
        values, _ = read_field(self._resolve(self.g))
        return np.asarray(values, dtype=float).reshape(xgrid.shape)

    def _resolve(self, name):
        p = Path(name)
        if not p.is_absolute() and self.source_path:
            p = Path(self.source_path).parent / p
        return p

    def where(self, key):
        line = self.lines.get(key)
        return f"{self.source_path or '<config>'}:{line}:" if line else f"{self.source_path or '<config>'}:"


_PARSERS = {int: _as_int, float: _as_float, str: _as_str, tuple: _as_floats}
_CHOICES = {"scheme": ("euler", "trapezoid"), "elliptic": ("constant", "direct", "localized", "oracle"),
            "format": ("binary", "csv"), "eps": (0, 1), "n_dim": (1, 2)}


def _field_types():
    return {f.name: type(f.default) for f in fields(SolverConfig) if f.name not in ("source_path", "lines")}


def parse_config(text, source="<config>"):
    """Parse key = value text into a validated SolverConfig."""
    types = _field_types()
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        if not val:
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        try:
            values[key] = _PARSERS[types[key]](val)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
        lines[key] = lineno
    cfg = SolverConfig(**values, source_path=source, lines=lines)
    validate(cfg)
    return cfg


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def validate(cfg):
    def bad(key, msg):
        raise ConfigError(f"{cfg.where(key)} {key}: {msg}")

    for key, allowed in _CHOICES.items():
        if getattr(cfg, key) not in allowed:
            bad(key, f"must be one of {allowed}, got {getattr(cfg, key)!r}")
    for key in ("nx", "m", "N", "max_outer", "substeps", "n_triples"):
        if getattr(cfg, key) < 1:
            bad(key, "must be at least 1")
    if cfg.nx < 2 or cfg.nx & (cfg.nx - 1):
        bad("nx", f"must be a power of two, got {cfg.nx}")
    if cfg.m < 4:
        bad("m", "must be at least 4")
    for key in ("period", "t0", "T", "q", "tol", "t", "c0", "g0", "guard_radius"):
        if not getattr(cfg, key) > 0:
            bad(key, "must be positive")
    if cfg.t0 >= cfg.T:
        bad("t0" if "t0" in cfg.lines else "T", f"need t0 < T, got t0={cfg.t0}, T={cfg.T}")
    if cfg.q < 1:
        bad("q", "grading exponent must be >= 1")
    if not 0 <= cfg.step_ratio < 1:
        bad("step_ratio", "must lie in [0, 1)")
    for key in ("beta", "alpha"):
        if not 0 < getattr(cfg, key) < 1:
            bad(key, "must lie in (0, 1)")
    if cfg.beta > cfg.alpha:
        bad("beta", "need beta <= alpha")
    if cfg.max_retries < 0:
        bad("max_retries", "must be non-negative")
    if cfg.g in G_PRESETS:
        if cfg.g == "sine" and abs(cfg.g_amp) >= cfg.g0:
            bad("g_amp", "g = g0 + g_amp sin x must stay positive")
    elif not cfg._resolve(cfg.g).exists():
        bad("g", f"not a preset {G_PRESETS} and no such file")
    if abs(cfg.c_amp) >= cfg.c0:
        bad("c_amp", "c = c0 + c_amp sin x must stay positive")
    if cfg.velocity not in ("constant", "sine") and not cfg._resolve(cfg.velocity).exists():
        bad("velocity", "not a preset ('constant', 'sine') and no such file")
    if any(x < 0 for x in cfg.xi):
        bad("xi", "frequencies must be non-negative")
    if len(cfg.t_samples) < 2 or any(x <= 0 for x in cfg.t_samples):
        bad("t_samples", "need at least two positive times")
    return cfg
