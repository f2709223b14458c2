"""Integration-by-parts transforms: boundary terms plus non-singular residual integrals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (DivergenceError, DomainError, EvaluationError, InvalidArgumentError,
                     LogDomainError, RegimeError, SingularityLeakError, UnresolvableSingularityError,
                     UnsolvableRelationError, UnsupportedWeightError)
from .quadrature import DEFAULT_RULE, Interval, QuadratureRule, _central, default_step, integrate
from .weights import WeightFamily, boundary_limit, boundary_term, estimate_gamma

RESIDUAL_BOUND = 1e6
NEAR_NODES = 5


def _ev(g, x):
    with np.errstate(all="ignore"):
        return np.asarray(g(np.asarray(x, dtype=float)))[()]


@dataclass(frozen=True, eq=False)
class SingularIntegrand:
    """f = p/q (rational form) or an opaque callable f (blackbox form).

    Callables must accept numpy arrays. Missing derivatives fall back to central differences.
    """

    f: Callable
    df: Optional[Callable] = None
    p: Optional[Callable] = None
    dp: Optional[Callable] = None
    q: Optional[Callable] = None
    dq: Optional[Callable] = None
    h: Optional[Callable] = None
    singular_points: tuple = ()
    gamma_hint: Optional[float] = None
    beta_hint: Optional[int] = None
    step: Optional[float] = None

    def __post_init__(self):
        pts = tuple(sorted(set(float(s) for s in self.singular_points)))
        object.__setattr__(self, "singular_points", pts)

    @classmethod
    def rational(cls, p, q=None, dp=None, dq=None, h=None, f=None, **kw):
        if f is None:
            f = p if q is None else (lambda x: _ev(p, x) / _ev(q, x))
        return cls(f=f, p=p, dp=dp, q=q, dq=dq, h=h, **kw)

    @classmethod
    def blackbox(cls, f, df=None, **kw):
        return cls(f=f, df=df, **kw)

    @property
    def form(self) -> str:
        return "rational" if self.p is not None else "blackbox"

    def __call__(self, x):
        return _ev(self.f, x)

    def _diff(self, g, x, iv=None):
        x = np.asarray(x, dtype=float)
        h = default_step(x) if self.step is None else np.full_like(x, self.step)
        if iv is not None:
            dist = np.minimum(x - iv.a, iv.b - x)
            h = np.where(dist > 0, np.minimum(h, 1e-4 * dist), h)
        return _central(g, x, h)

    def derivative(self, x, iv=None):
        if self.df is not None:
            return _ev(self.df, x)
        if self.p is not None and self.dp is not None:
            if self.q is None:
                return _ev(self.dp, x)
            if self.dq is not None:
                qx = _ev(self.q, x)
                return (_ev(self.dp, x) * qx - _ev(self.p, x) * _ev(self.dq, x)) / qx ** 2
        return self._diff(self.f, x, iv)

    def p_derivative(self, x, iv=None):
        if self.p is None:
            raise UnsupportedWeightError("blackbox integrand has no numerator p")
        if self.dp is not None:
            return _ev(self.dp, x)
        return self._diff(self.p, x, iv)

    def q_derivative(self, x, iv=None):
        if self.q is None:
            return np.zeros_like(np.asarray(x, dtype=float))[()]
        if self.dq is not None:
            return _ev(self.dq, x)
        return self._diff(self.q, x, iv)

    def check_consistency(self, iv: Interval, n: int = 20, seed: int = 0, tol: float = 1e-12) -> None:
        if self.p is None or self.q is None:
            return
        x = iv.a + iv.length * np.random.default_rng(seed).uniform(0.01, 0.99, n)
        lhs, rhs = self(x), _ev(self.p, x) / _ev(self.q, x)
        if not np.allclose(lhs, rhs, rtol=tol, atol=0):
            raise InvalidArgumentError("f differs from p/q on the interval")


Correction = tuple  # (coefficient, TransformResult | float)


@dataclass(frozen=True, eq=False)
class TransformResult:
    """I0 (1 + self_coefficient) = boundary_value - int residual - sum(c_i * value_i)."""

    boundary_value: float
    residual: Callable
    interval: Interval
    self_coefficient: float = 0.0
    correction_terms: tuple = ()
    variant: str = ""
    singular_endpoints: tuple = ()

    def __post_init__(self):
        if not np.isfinite(self.boundary_value):
            raise DivergenceError(f"{self.variant}: boundary term is not finite")
        if abs(1.0 + self.self_coefficient) < 1e-14:
            raise UnsolvableRelationError(f"{self.variant}: self coefficient -1 makes the relation unsolvable")

    def residual_values(self, rule: Optional[QuadratureRule] = None):
        x, _ = (rule or DEFAULT_RULE).abscissae(self.interval)
        return x, np.broadcast_to(_ev(self.residual, x), x.shape)

    def evaluate(self, rule: Optional[QuadratureRule] = None) -> float:
        total = self.boundary_value - integrate(self.residual, self.interval, rule)
        for c, t in self.correction_terms:
            total -= c * (t.evaluate(rule) if isinstance(t, TransformResult) else t)
        return total / (1.0 + self.self_coefficient)

    value = evaluate

    def check_residual(self, rule: Optional[QuadratureRule] = None, bound: float = RESIDUAL_BOUND) -> None:
        """All nodes finite; the nodes nearest each singular endpoint stay bounded."""
        x, y = self.residual_values(rule)
        bad = ~np.isfinite(y)
        if np.any(bad):
            raise SingularityLeakError(f"{self.variant}: residual not finite at x = {x[bad][0]!r}",
                                       abscissa=float(x[bad][0]))
        for e in self.singular_endpoints:
            idx = np.argsort(np.abs(x - e))[:NEAR_NODES]
            if abs(y[idx[0]]) >= bound:
                raise SingularityLeakError(
                    f"{self.variant}: residual grows to {abs(y[idx[0]]):.3g} next to x = {e}",
                    abscissa=float(x[idx[0]]))
        for _, t in self.correction_terms:
            if isinstance(t, TransformResult):
                t.check_residual(rule, bound)


@dataclass(frozen=True)
class ErrorEstimate:
    delta_gamma: float
    epsilon_bound: float


def _endpoint_singulars(f: SingularIntegrand, iv: Interval):
    return tuple(e for e in (iv.a, iv.b) if e in f.singular_points)


def _require_rational(f, what):
    if f.form != "rational":
        raise UnsupportedWeightError(f"{what} needs the rational form p/q")


def _pair_value(g, e, anchored_zero):
    if anchored_zero:
        return 0.0
    with np.errstate(all="ignore"):
        v = float(np.asarray(g(e)))
    if not np.isfinite(v):
        raise DivergenceError(f"boundary term is not finite at x = {e}")
    return v


def ibp_conventional(f: SingularIntegrand, iv: Interval, weight: Optional[WeightFamily] = None) -> TransformResult:
    """I0 = p h|_a^b - int h p' with h = int dx/q supplied analytically."""
    _require_rational(f, "conventional integration by parts")
    h = weight.h if weight is not None else f.h
    if h is None:
        raise UnsupportedWeightError("no analytic h = int dx/q available")
    p = f.p

    def ph(x):
        return _ev(h, x) * _ev(p, x)

    bnd = _pair_value(ph, iv.b, False) - _pair_value(ph, iv.a, False)

    def residual(x):
        return _ev(h, x) * f.p_derivative(x, iv)

    return TransformResult(bnd, residual, iv, 0.0, (), "conventional", _endpoint_singulars(f, iv))


def ibp_general_unknown_q(f: SingularIntegrand, iv: Interval, w: WeightFamily,
                          solve_self_term: bool = False) -> TransformResult:
    """I0 = h~ q~ f|_a^b - int h~ (q~ f)' for any weight; q itself is never needed.

    With solve_self_term the constant part h~ q~' f of the residual is moved to the
    left-hand side (only for weights where h~ q~' is constant).
    """
    bnd = boundary_term(w, f, iv)
    if solve_self_term:
        s = w.constant_hdq
        if s is None:
            raise UnsupportedWeightError(f"weight {w.name} has no constant self term")

        def residual(x):
            return w.hq(x) * f.derivative(x, iv)
    else:
        s = 0.0

        def residual(x):
            return w.hdq(x) * f(x) + w.hq(x) * f.derivative(x, iv)

    return TransformResult(bnd, residual, iv, s, (), f"general:{w.name}", _endpoint_singulars(f, iv))


def ibp_simple_power(f: SingularIntegrand, iv: Interval, gamma: float) -> TransformResult:
    """Conventional IBP for q = (x - a)^gamma."""
    return ibp_conventional(f, iv, WeightFamily.power(gamma, center=iv.a))


def ibp_approximate(f: SingularIntegrand, iv: Interval, gamma_tilde: float) -> TransformResult:
    """General IBP with the surrogate weight (x - a)^gamma_tilde."""
    return ibp_general_unknown_q(f, iv, WeightFamily.power(gamma_tilde, center=iv.a))


def weight_mismatch(w: WeightFamily, f: SingularIntegrand, x):
    """o(x) = -ln(q~/q), the perturbation the surrogate weight introduces."""
    _require_rational(f, "weight mismatch")
    return -np.log(_ev(w.q, x) / _ev(f.q, x))


def ibp_known_q_correction(f: SingularIntegrand, iv: Interval, w: WeightFamily) -> TransformResult:
    """Known q with a surrogate q~; the log-ratio ln(q~/q) carries the correction."""
    _require_rational(f, "log-ratio correction")
    if f.q is None:
        raise UnsupportedWeightError("log-ratio correction needs q")

    def ratio(x):
        return _ev(w.q, x) / _ev(f.q, x)

    def log_ratio(x):
        r = ratio(x)
        if np.any(np.asarray(r) <= 0):
            raise LogDomainError("q~/q is not positive on the interval")
        return np.log(r)

    xs, _ = DEFAULT_RULE.abscissae(iv)
    log_ratio(xs)

    vals = []
    for e in (iv.a, iv.b):
        anchored = w.hq_vanishes_at(e)
        if anchored:
            boundary_limit(w, f, e, iv)  # raises when the limit does not exist

        def main(x):
            return _ev(w.h, x) * ratio(x) * _ev(f.p, x)

        def corr(x):
            return np.log(ratio(x)) * _ev(w.hq, x) * f(x)

        vals.append((_pair_value(main, e, anchored), _pair_value(corr, e, anchored)))
    bnd = (vals[1][0] - vals[0][0]) - (vals[1][1] - vals[0][1])

    def residual(x):
        d_hqf = (1.0 + _ev(w.hdq, x)) * f(x) + _ev(w.hq, x) * f.derivative(x, iv)
        return _ev(w.h, x) * ratio(x) * f.p_derivative(x, iv) - log_ratio(x) * d_hqf

    return TransformResult(bnd, residual, iv, 0.0, (), f"known_q_correction:{w.name}", _endpoint_singulars(f, iv))


def _anchor(f, iv):
    s = _endpoint_singulars(f, iv)
    return s[0] if s else 0.0


def direct_method_hx_equals_x(f: SingularIntegrand, iv: Interval) -> TransformResult:
    """h q~ = x: I0 - int x q' p / q^2 = x p/q| - int x p'/q, solved for I0."""
    _require_rational(f, "direct method h q~ = x")
    c = _anchor(f, iv)
    unit = WeightFamily.unit(center=c)
    bnd = boundary_term(unit, f, iv)

    def kappa(x):
        q = _ev(f.q, x) if f.q is not None else 1.0
        return (np.asarray(x) - c) * f.q_derivative(x, iv) / q

    xs, _ = DEFAULT_RULE.abscissae(iv)
    kv = np.broadcast_to(kappa(xs), xs.shape)
    if np.all(np.isfinite(kv)) and np.ptp(kv) <= 1e-12 * max(1.0, abs(kv[0])):
        k0 = float(kv[0])
        if abs(1.0 - k0) < 1e-14:
            raise UnsolvableRelationError("x q'/q = 1: the moved correction cancels I0")

        def residual(x):
            q = _ev(f.q, x) if f.q is not None else 1.0
            return (np.asarray(x) - c) * f.p_derivative(x, iv) / q

        return TransformResult(bnd, residual, iv, -k0, (), "direct:hx=x", _endpoint_singulars(f, iv))

    def residual(x):
        return (np.asarray(x) - c) * f.p_derivative(x, iv) / _ev(f.q, x)

    def moved(x):
        return -kappa(x) * f(x)

    corr = TransformResult(0.0, moved, iv, 0.0, (), "direct:hx=x:moved", _endpoint_singulars(f, iv))
    return TransformResult(bnd, residual, iv, 0.0, ((-1.0, corr),), "direct:hx=x", _endpoint_singulars(f, iv))


def beta_relation_constants(family: WeightFamily):
    """(beta, c) with q' = c q^(-beta)."""
    if family.kind == "power":
        g = family.gamma_tilde
        if g == 0:
            raise InvalidArgumentError("power family needs gamma != 0")
        return (1.0 - g) / g, g
    if family.kind == "exponential":
        return -1.0, family.lam
    raise UnsupportedWeightError(f"no beta relation for weight {family.name}")


def direct_method_beta_relation(f: SingularIntegrand, iv: Interval, family: WeightFamily) -> TransformResult:
    """h q~ q'/q = -1 with q' = c q^-beta gives -beta I0 = -p/q'| + int p'/q'."""
    _require_rational(f, "beta relation")
    beta, c = beta_relation_constants(family)
    if f.q is not None:
        xs, _ = DEFAULT_RULE.abscissae(iv)
        if not np.allclose(_ev(f.q, xs), _ev(family.q, xs), rtol=1e-10, atol=0):
            raise InvalidArgumentError(f"integrand q does not match the declared family {family.name}")
    if beta == 0:
        raise UnsolvableRelationError("beta = 0 leaves I0 undetermined")

    def inv_dq(x):
        t = np.asarray(x, dtype=float) - family.center
        if family.kind == "power":
            return t ** (1.0 - family.gamma_tilde) / family.gamma_tilde
        return np.exp(-family.lam * t) / family.lam

    def b_fun(x):
        return inv_dq(x) * _ev(f.p, x)

    bnd = _pair_value(b_fun, iv.b, False) - _pair_value(b_fun, iv.a, False)

    def residual(x):
        return inv_dq(x) * f.p_derivative(x, iv)

    return TransformResult(bnd, residual, iv, beta - 1.0, (), f"direct:beta({beta:g})", _endpoint_singulars(f, iv))


def direct_method_ode(f: SingularIntegrand, iv: Interval, weight: Optional[WeightFamily] = None) -> TransformResult:
    """u' - u q'/q = 1 solved by u = h q; then I0 = (u/q) p| - int (u/q) p'."""
    _require_rational(f, "ODE method")
    h = weight.h if weight is not None else f.h
    if h is None:
        raise UnsupportedWeightError("no analytic h = int dx/q available")
    q = f.q if f.q is not None else (lambda x: np.ones_like(np.asarray(x, dtype=float)))

    def u_over_q(x):
        return _ev(h, x) * _ev(q, x) / _ev(q, x)

    def u_over_q_safe(x):
        v = u_over_q(x)
        return np.where(np.isfinite(v), v, _ev(h, x))

    def b_fun(x):
        return u_over_q_safe(x) * _ev(f.p, x)

    bnd = _pair_value(b_fun, iv.b, False) - _pair_value(b_fun, iv.a, False)

    def residual(x):
        return u_over_q(x) * f.p_derivative(x, iv)

    return TransformResult(bnd, residual, iv, 0.0, (), "direct:ode", _endpoint_singulars(f, iv))


def ode_condition_residual(f: SingularIntegrand, x, weight: Optional[WeightFamily] = None, iv=None):
    """u' - u q'/q - 1 for u = h q (should vanish)."""
    h = weight.h if weight is not None else f.h

    def u(t):
        return _ev(h, t) * _ev(f.q, t)

    du = f._diff(u, x, iv)
    return du - u(x) * f.q_derivative(x, iv) / _ev(f.q, x) - 1.0


def integrating_factor(f: SingularIntegrand, x: float, x0: float, rule=None) -> float:
    """v(x)/v(x0) = exp(-int_{x0}^{x} q'/q); equals q(x0)/q(x)."""
    if x == x0:
        return 1.0
    lo, hi = min(x, x0), max(x, x0)
    iv = Interval(lo, hi)
    val = integrate(lambda t: f.q_derivative(t, iv) / _ev(f.q, t), iv, rule)
    return math.exp(-val if x > x0 else val)


def estimate_relative_error(gamma: float, gamma_tilde: float, iv: Interval) -> ErrorEstimate:
    """Upper bound |dgamma|/(1 - gamma~) / (b^(1-gamma) - a^(1-gamma))."""
    if not (gamma < 1 and gamma_tilde < 1 and iv.b <= 1 and iv.a >= 0):
        raise RegimeError("bound valid only for gamma < 1, gamma~ < 1 and 0 <= a < b <= 1")
    dg = gamma_tilde - gamma
    span = iv.b ** (1 - gamma) - iv.a ** (1 - gamma)
    return ErrorEstimate(dg, abs(dg) / (1 - gamma_tilde) / span)


@dataclass(frozen=True)
class RecipeOptions:
    """Weight catalog and limits for recipe_solve."""

    weights: tuple = ()
    r_hint: Optional[float] = None
    offset_hint: Optional[float] = None
    gamma_tilde: Optional[float] = None
    conventional_weight: Optional[WeightFamily] = None
    max_repeats: int = 3
    rule: Optional[QuadratureRule] = None
    residual_bound: float = RESIDUAL_BOUND


_RECOVERABLE = (DivergenceError, DomainError, EvaluationError, UnsupportedWeightError,
                UnsolvableRelationError, InvalidArgumentError)


def _reflect(f: SingularIntegrand, iv: Interval) -> SingularIntegrand:
    s = iv.a + iv.b
    ends = {iv.a: iv.b, iv.b: iv.a}  # exact, a + b - b need not round to a

    def m(g, sign=1.0):
        return None if g is None else (lambda t: sign * _ev(g, s - np.asarray(t, dtype=float)))

    return SingularIntegrand(f=m(f.f), df=m(f.df, -1.0), p=m(f.p), dp=m(f.dp, -1.0), q=m(f.q), dq=m(f.dq, -1.0),
                             h=m(f.h, -1.0), singular_points=tuple(ends.get(x, s - x) for x in f.singular_points),
                             gamma_hint=f.gamma_hint, beta_hint=f.beta_hint, step=f.step)


def _unit_repeat(prev: TransformResult, f: SingularIntegrand, iv: Interval, c: float, n: int) -> TransformResult:
    g = SingularIntegrand.blackbox(prev.residual, singular_points=f.singular_points, step=f.step)
    bg = boundary_term(WeightFamily.unit(center=c), g, iv)

    def residual(x):
        return -(np.asarray(x) - c) * g.derivative(x, iv)

    return TransformResult(prev.boundary_value - bg, residual, iv, prev.self_coefficient, prev.correction_terms,
                           f"unit_repeat_{n}", prev.singular_endpoints)


def recipe_solve(f: SingularIntegrand, iv: Interval, opts: Optional[RecipeOptions] = None):
    """Try the transforms in order and return (value, trace) from the first acceptable one."""
    opts = opts or RecipeOptions()
    inner = [s for s in f.singular_points if iv.a < s < iv.b]
    if inner:
        raise InvalidArgumentError(f"interior singular points {inner}; split the interval first")
    ends = _endpoint_singulars(f, iv)
    if len(ends) == 2:
        mid = 0.5 * (iv.a + iv.b)
        if not iv.a < mid < iv.b:
            raise InvalidArgumentError(f"{iv} is too short to separate its singular endpoints")
        v1, t1 = recipe_solve(replace(f, singular_points=(iv.a,)), Interval(iv.a, mid), opts)
        v2, t2 = recipe_solve(replace(f, singular_points=(iv.b,)), Interval(mid, iv.b), opts)
        return v1 + v2, t1 + t2
    if ends == (iv.b,):
        return recipe_solve(_reflect(f, iv), iv, opts)

    rule, bound = opts.rule, opts.residual_bound
    c = iv.a
    trace = []

    def attempt(name, build):
        trace.append(name)
        try:
            tr = build()
            tr.check_residual(rule, bound)
            return tr, tr.evaluate(rule)
        except _RECOVERABLE:
            return None

    # 1. conventional
    if f.form == "rational" and (f.h is not None or opts.conventional_weight is not None):
        r = attempt("conventional", lambda: ibp_conventional(f, iv, opts.conventional_weight))
        if r:
            return r[1], trace
    # 2. surrogate weights with known h~
    cands = []
    if opts.r_hint is not None:
        cands.append(WeightFamily.sqrt_shifted_plus(opts.r_hint, center=c))
    if opts.offset_hint is not None and opts.gamma_tilde is not None:
        cands.append(WeightFamily.shifted_power(opts.gamma_tilde, opts.offset_hint))
    cands.extend(opts.weights)
    for w in cands:
        r = attempt(f"approximate:{w.name}", lambda w=w: ibp_general_unknown_q(f, iv, w))
        if r:
            return r[1], trace
    # 3. power-law suppression at the singular endpoint
    if ends:
        g = opts.gamma_tilde if opts.gamma_tilde is not None else f.gamma_hint
        if g is None:
            g = estimate_gamma(f, iv, "a")
        if 0 < g < 1:
            w = WeightFamily.power(g, center=c)
            r = attempt(f"power_suppression(gamma={g:.6g})", lambda: ibp_general_unknown_q(f, iv, w))
            if r:
                return r[1], trace
    # 4. plain x f integration by parts
    last = None

    def build_unit():
        nonlocal last
        last = ibp_general_unknown_q(f, iv, WeightFamily.unit(center=c))
        return last

    r = attempt("unit", build_unit)
    if r:
        return r[1], trace
    # 5. repeat step 4 on the residual
    for n in range(1, opts.max_repeats + 1):
        if last is None:
            break
        prev = last

        def build_repeat(prev=prev, n=n):
            nonlocal last
            last = _unit_repeat(prev, f, iv, c, n)
            return last

        r = attempt(f"unit_repeat_{n}", build_repeat)
        if r:
            return r[1], trace
    raise UnresolvableSingularityError("no transform produced a bounded residual", trace)


def split_at_singularities(f: SingularIntegrand, iv: Interval):
    """Pieces of iv whose interiors contain no singular point."""
    inner = sorted(set(s for s in f.singular_points if iv.a < s < iv.b))
    edges = [iv.a] + inner + [iv.b]
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        pts = tuple(s for s in f.singular_points if s in (lo, hi))
        out.append((replace(f, singular_points=pts), Interval(lo, hi)))
    return out


def recipe_solve_split(f: SingularIntegrand, iv: Interval, opts: Optional[RecipeOptions] = None):
    """recipe_solve summed over split_at_singularities pieces."""
    total, trace = 0.0, []
    for g, sub in split_at_singularities(f, iv):
        v, t = recipe_solve(g, sub, opts)
        total += v
        trace.extend(t)
    return total, trace
