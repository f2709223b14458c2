"""Composite Gauss-Legendre quadrature, numerical derivatives and a brute-force oracle."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError, InvalidArgumentError

DEFAULT_POINTS_PER_PANEL = 11
DEFAULT_PANELS = 91


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (np.isfinite(a) and np.isfinite(b)):
            raise InvalidArgumentError(f"interval limits must be finite, got [{a}, {b}]")
        if not a < b:
            raise InvalidArgumentError(f"interval requires a < b, got [{a}, {b}]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return self.b - self.a

    def contains(self, x, closed=True) -> bool:
        return (self.a <= x <= self.b) if closed else (self.a < x < self.b)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre nodes/weights on [-1, 1] repeated over `panels` equal panels."""

    points_per_panel: int
    panels: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.size != self.points_per_panel:
            raise InvalidArgumentError("nodes and weights must both have points_per_panel entries")
        if self.panels < 1:
            raise InvalidArgumentError("panels must be positive")
        if np.any(np.diff(nodes) <= 0) or nodes[0] <= -1.0 or nodes[-1] >= 1.0:
            raise InvalidArgumentError("nodes must be strictly increasing inside (-1, 1)")
        if np.any(weights <= 0) or abs(weights.sum() - 2.0) > 1e-14:
            raise InvalidArgumentError("weights must be positive and sum to 2")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __eq__(self, other):
        return (isinstance(other, QuadratureRule) and self.points_per_panel == other.points_per_panel
                and self.panels == other.panels)

    def __hash__(self):
        return hash((self.points_per_panel, self.panels))

    @property
    def size(self) -> int:
        return self.points_per_panel * self.panels

    def with_panels(self, panels: int) -> "QuadratureRule":
        return gauss_legendre_rule(self.points_per_panel, panels)

    def abscissae(self, iv: Interval):
        """Mapped nodes and weights on iv, ordered left to right."""
        return _mapped(self.points_per_panel, self.panels, iv.a, iv.b)


@lru_cache(maxsize=64)
def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=256)
def _mapped(n, panels, a, b):
    x, w = _legendre(n)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    xs = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    xs.setflags(write=False)
    ws.setflags(write=False)
    return xs, ws


def gauss_legendre_rule(n: int, panels: int = 1) -> QuadratureRule:
    """n-point Gauss-Legendre rule, optionally composite over equal panels."""
    if int(n) != n or not 1 <= n <= 64:
        raise InvalidArgumentError(f"points per panel must be in [1, 64], got {n}")
    if int(panels) != panels or panels < 1:
        raise InvalidArgumentError(f"panels must be a positive integer, got {panels}")
    x, w = _legendre(int(n))
    return QuadratureRule(int(n), int(panels), x, w)


DEFAULT_RULE = gauss_legendre_rule(DEFAULT_POINTS_PER_PANEL, DEFAULT_PANELS)


def _evaluate(f, x):
    with np.errstate(all="ignore"):
        y = f(x)
    y = np.asarray(y)
    if y.shape != np.shape(x):
        y = np.broadcast_to(y, np.shape(x))
    return y


def _check_finite(y, x, what="integrand"):
    bad = ~np.isfinite(y)
    if np.any(bad):
        xb = np.asarray(x)[bad][0] if np.ndim(x) else float(x)
        raise EvaluationError(f"{what} is not finite at x = {xb!r}", abscissa=float(xb))


def integrate(f: Callable, iv: Interval, rule: Optional[QuadratureRule] = None) -> float:
    """Composite Gauss approximation of the integral of a vectorised f over iv."""
    rule = DEFAULT_RULE if rule is None else rule
    x, w = rule.abscissae(iv)
    y = _evaluate(f, x)
    _check_finite(y, x)
    return float(np.dot(w, y)) if not np.iscomplexobj(y) else complex(np.dot(w, y))


@dataclass(frozen=True)
class DerivativeSpec:
    """How to obtain f'. `derivative` is the analytic callable used in analytic mode."""

    mode: str = "central"
    step: Optional[float] = None
    derivative: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in ("analytic", "central"):
            raise InvalidArgumentError(f"unknown derivative mode {self.mode!r}")
        if self.mode == "analytic" and self.derivative is None:
            raise InvalidArgumentError("analytic mode needs a derivative callable")
        if self.step is not None and not self.step > 0:
            raise InvalidArgumentError("step must be positive")

    @classmethod
    def analytic(cls, derivative):
        return cls("analytic", None, derivative)

    @classmethod
    def central(cls, step=None):
        return cls("central", step)

    def validate_for(self, iv: Interval) -> None:
        if self.step is not None and self.step > iv.length / 10:
            raise InvalidArgumentError(f"step {self.step} exceeds (b-a)/10 for {iv}")


def default_step(x):
    return np.maximum(1e-6, 1e-7 * np.abs(x))


def differentiate(f: Callable, x, spec: DerivativeSpec = DerivativeSpec()):
    """f'(x) by the supplied derivative or by a central difference."""
    if spec.mode == "analytic":
        return _evaluate(spec.derivative, np.asarray(x, dtype=float))[()]
    x = np.asarray(x, dtype=float)
    h = default_step(x) if spec.step is None else np.full_like(x, spec.step)
    return _central(f, x, h)


def _central(f, x, h):
    fp = _evaluate(f, x + h)
    fm = _evaluate(f, x - h)
    _check_finite(fp, x + h, "central-difference stencil")
    _check_finite(fm, x - h, "central-difference stencil")
    return ((fp - fm) / (2 * h))[()]


def oracle_integrate(f: Callable, iv: Interval, n_points: int = 1_000_000,
                     endpoint_inset: Optional[float] = None, points_per_panel: int = 10) -> float:
    """Brute-force composite Gauss sum over about n_points samples (test reference only).

    Panel edges are cosine-spaced, so panels shrink quadratically towards both ends
    where endpoint singularities live.
    """
    if n_points < 1:
        raise InvalidArgumentError("n_points must be positive")
    inset = 0.0 if endpoint_inset is None else float(endpoint_inset)
    if inset < 0 or 2 * inset >= iv.length:
        raise InvalidArgumentError("endpoint inset must be nonnegative and smaller than half the interval")
    inner = Interval(iv.a + inset, iv.b - inset)
    m = min(points_per_panel, n_points)
    panels = max(1, n_points // m)
    x, w = _legendre(m)
    u = np.linspace(0.0, 1.0, panels + 1)
    edges = inner.a + inner.length * 0.5 * (1.0 - np.cos(np.pi * u))
    edges[0], edges[-1] = inner.a, inner.b
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    total = 0.0
    chunk = max(1, 200_000 // m)
    for s in range(0, panels, chunk):
        xs = (mid[s:s + chunk, None] + half[s:s + chunk, None] * x[None, :]).ravel()
        ws = (half[s:s + chunk, None] * w[None, :]).ravel()
        y = _evaluate(f, xs)
        _check_finite(y, xs)
        total = total + np.dot(ws, y)
    return complex(total) if np.iscomplexobj(total) else float(total)
