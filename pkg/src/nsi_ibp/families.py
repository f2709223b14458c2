"""Specialisations of the engine for power, log, hybrid and near-singular integrands."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import mpmath as mp
import numpy as np

from .engine import SingularIntegrand, TransformResult, ibp_general_unknown_q
from .errors import DivergenceError, DomainError, InvalidArgumentError, UnsolvableRelationError
from .quadrature import DerivativeSpec, Interval, QuadratureRule, differentiate
from .weights import WeightFamily, boundary_term, h_beta_recursive

FAMILIES = ("power_law", "log_power", "hybrid", "near_singular_plus", "near_singular_minus")
MAX_BETA = 16
REFERENCE_DPS = 40


@dataclass(frozen=True, eq=False)
class FamilyCase:
    """One integrand p0(x) K(x + o) of a family on an interval.

    offset_known: the solver may use o (shifted variable u = x + o); otherwise the
    weight is anchored at the interval start and o stays hidden.
    """

    family: str
    interval: Interval
    gamma: float = 0.0
    beta: int = 0
    offset: float = 0.0
    R: float = 0.0
    p0: Optional[Callable] = None
    dp0: Optional[Callable] = None
    d: Optional[float] = None
    offset_known: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown family {self.family!r}")
        if self.family == "power_law" and not 0 <= self.gamma < 1:
            raise InvalidArgumentError("power_law needs gamma in [0, 1)")
        if self.family in ("log_power", "hybrid"):
            if int(self.beta) != self.beta or not 0 <= self.beta <= MAX_BETA:
                raise InvalidArgumentError(f"beta must be an integer in [0, {MAX_BETA}]")
            object.__setattr__(self, "beta", int(self.beta))
        if self.family.startswith("near_singular") and self.R < 0:
            raise InvalidArgumentError("R must be nonnegative")
        if self.family == "near_singular_minus":
            ua, ub = self.interval.a + self.offset, self.interval.b + self.offset
            for s in (self.R, -self.R):
                if ua < s < ub:
                    raise DomainError(f"interval straddles the singular point u = {s}; split it first")

    @property
    def default_p0(self) -> bool:
        return self.p0 is None

    def p(self, x):
        x = np.asarray(x, dtype=float)
        return (np.ones_like(x) if self.p0 is None else np.asarray(self.p0(x), dtype=float) * np.ones_like(x))[()]

    def dp(self, x):
        x = np.asarray(x, dtype=float)
        if self.p0 is None:
            return np.zeros_like(x)[()]
        if self.dp0 is not None:
            return (np.asarray(self.dp0(x), dtype=float) * np.ones_like(x))[()]
        return differentiate(self.p0, x, DerivativeSpec())

    @property
    def ua(self):
        return self.interval.a + self.offset


def _check(case, family):
    if case.family != family:
        raise InvalidArgumentError(f"expected a {family} case, got {case.family}")


def power_log_diff(ua: float, L: float, e: float, k: int) -> float:
    """u^e ln^k u from ua to ua + L without cancellation for small L/ua."""
    ub = ua + L
    if ua < 0:
        raise DomainError("power-log difference needs u >= 0")
    if ua == 0:
        if e < 0 or (e == 0 and k > 0):
            raise DivergenceError("u^e ln^k u diverges at u = 0")
        if e == 0:
            return 1.0 if k == 0 else math.nan
        return ub ** e * math.log(ub) ** k
    r = L / ua
    if r > 1:
        return ub ** e * math.log(ub) ** k - ua ** e * math.log(ua) ** k
    t = math.log1p(r)
    lo = math.log(ua)
    s = math.expm1(e * t) * (lo + t) ** k
    s += sum(math.comb(k, j) * lo ** (k - j) * t ** j for j in range(1, k + 1))
    return ua ** e * s


def _scaled_boundary(case, diff, value_at_a):
    """[p0 X] from a to b given [X] and X(a) (constant p0 needs only the difference)."""
    iv = case.interval
    if case.default_p0:
        return diff
    pa, pb = float(case.p(iv.a)), float(case.p(iv.b))
    tail = 0.0 if pb == pa else (pb - pa) * value_at_a()
    return pb * diff + tail


def _power_kernel(case, x):
    return (np.asarray(x, dtype=float) + case.offset) ** (-case.gamma)


def power_law_integrand(case: FamilyCase) -> SingularIntegrand:
    """Black-box p0(x) (x + o)^-gamma with analytic derivative; o is not exposed."""
    g, o = case.gamma, case.offset

    def f(x):
        return case.p(x) * _power_kernel(case, x)

    def df(x):
        u = np.asarray(x, dtype=float) + o
        return case.dp(x) * u ** (-g) - g * case.p(x) * u ** (-g - 1.0)

    sing = (case.interval.a,) if case.interval.a + o == 0 else ()
    return SingularIntegrand.blackbox(f, df, singular_points=sing)


def _power_law_transform(case: FamilyCase, method: str, gamma_tilde: Optional[float],
                         implicit: bool) -> TransformResult:
    iv, g, o = case.interval, case.gamma, case.offset
    if method == "approximate":
        if gamma_tilde is None:
            raise InvalidArgumentError("approximate method needs gamma_tilde")
        gt = float(gamma_tilde)
        if not (case.offset_known or implicit):
            w = WeightFamily.power(gt, center=iv.a)
            return ibp_general_unknown_q(power_law_integrand(case), iv, w)
        if abs(1.0 - gt) < 1e-8:
            raise UnsolvableRelationError("gamma_tilde = 1 has no power-law self term; use the log branch")
    elif method == "conventional":
        gt = g
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")

    ua, L = case.ua, iv.length
    if abs(1.0 - g) < 1e-8:
        if method == "approximate":
            raise UnsolvableRelationError("gamma = 1 makes the self coefficient -1")
        bnd = _scaled_boundary(case, power_log_diff(ua, L, 0.0, 1), lambda: math.log(ua))

        def residual(x):
            return np.log(np.asarray(x, dtype=float) + o) * case.dp(x)

        return TransformResult(bnd, residual, iv, 0.0, (), "power_law:conventional(log)", ())
    e = 1.0 - g
    bnd = _scaled_boundary(case, power_log_diff(ua, L, e, 0), lambda: ua ** e) / (1.0 - gt)
    s = (gt - g) / (1.0 - gt)
    if implicit or method == "conventional":
        def residual(x):
            return (np.asarray(x, dtype=float) + o) ** e * case.dp(x) / (1.0 - gt)

        return TransformResult(bnd, residual, iv, s, (), f"power_law:{method}", ())

    def residual(x):
        u = np.asarray(x, dtype=float) + o
        return ((gt - g) * u ** (-g) * case.p(x) + u ** e * case.dp(x)) / (1.0 - gt)

    return TransformResult(bnd, residual, iv, 0.0, (), "power_law:approximate(shifted)", ())


def eval_power_law(case: FamilyCase, method: str = "approximate", gamma_tilde: Optional[float] = None,
                   implicit: bool = False, rule: Optional[QuadratureRule] = None) -> float:
    """int p0 (x + o)^-gamma.

    approximate: surrogate weight x^gamma_tilde (log branch at gamma_tilde = 1), the
    gamma-dependent residual integrated numerically; with implicit=True the
    (gamma_tilde - gamma) I term is solved analytically (needs known gamma and o).
    conventional: exact weight (x + o)^gamma.
    """
    _check(case, "power_law")
    return _power_law_transform(case, method, gamma_tilde, implicit).evaluate(rule)


def power_law_transform(case: FamilyCase, method="approximate", gamma_tilde=None, implicit=False):
    _check(case, "power_law")
    return _power_law_transform(case, method, gamma_tilde, implicit)


def _log_power_transform(case: FamilyCase, method: str, beta: int) -> TransformResult:
    iv, o = case.interval, case.offset
    if case.ua < 0:
        raise DomainError("log_power needs x + o >= 0 on the interval")

    def u(x):
        return np.asarray(x, dtype=float) + o

    if method == "conventional":
        ha = float(h_beta_recursive(beta, case.ua))
        hb = float(h_beta_recursive(beta, case.ua + iv.length))
        bnd = float(case.p(iv.b)) * hb - float(case.p(iv.a)) * ha

        def residual(x):
            return case.dp(x) * h_beta_recursive(beta, u(x))

        return TransformResult(bnd, residual, iv, 0.0, (), f"log_power:conventional({beta})", ())
    if method != "direct_iterative":
        raise InvalidArgumentError(f"unknown method {method!r}")
    if beta == 0:
        return TransformResult(0.0, lambda x: -case.p(x), iv, 0.0, (), "log_power:direct(0)", ())
    ua = case.ua
    bnd = _scaled_boundary(case, power_log_diff(ua, iv.length, 1.0, beta),
                           lambda: 0.0 if ua == 0 else ua * math.log(ua) ** beta)

    def residual(x):
        uu = u(x)
        return uu * np.log(uu) ** beta * case.dp(x)

    lower = _log_power_transform(case, method, beta - 1)
    return TransformResult(bnd, residual, iv, 0.0, ((float(beta), lower),), f"log_power:direct({beta})", ())


def eval_log_power(case: FamilyCase, method: str = "conventional", rule: Optional[QuadratureRule] = None) -> float:
    """int p0 ln^beta(x + o) by the h_beta antiderivative or the downward recursion."""
    _check(case, "log_power")
    return _log_power_transform(case, method, case.beta).evaluate(rule)


def _hybrid_transform(case: FamilyCase, method: str, gamma_tilde: Optional[float], beta: int) -> TransformResult:
    if beta == 0:
        return _power_law_transform(case, method, gamma_tilde, implicit=True)
    iv, g, o = case.interval, case.gamma, case.offset
    ua, L = case.ua, iv.length
    if method == "approximate":
        if gamma_tilde is None:
            raise InvalidArgumentError("approximate method needs gamma_tilde")
        gt = float(gamma_tilde)
        if abs(1.0 - gt) < 1e-8:
            raise UnsolvableRelationError("gamma_tilde = 1 is outside the power-weight recursion")
        if abs(1.0 - g) < 1e-8:
            raise UnsolvableRelationError("gamma = 1 makes the self coefficient -1")
    elif method == "conventional":
        gt = g
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")

    if method == "conventional" and abs(1.0 - g) < 1e-8:
        # log branch: (1 + beta) I = [p0 ln^(beta+1) u] - int p0' ln^(beta+1) u
        k = beta + 1
        bnd = _scaled_boundary(case, power_log_diff(ua, L, 0.0, k), lambda: math.log(ua) ** k)

        def residual(x):
            return np.log(np.asarray(x, dtype=float) + o) ** k * case.dp(x)

        return TransformResult(bnd, residual, iv, float(beta), (), f"hybrid:conventional(log,{beta})", ())

    e = 1.0 - g
    c = 1.0 - gt
    bnd = _scaled_boundary(case, power_log_diff(ua, L, e, beta),
                           lambda: 0.0 if ua == 0 else ua ** e * math.log(ua) ** beta) / c

    def residual(x):
        u = np.asarray(x, dtype=float) + o
        return u ** e * np.log(u) ** beta * case.dp(x) / c

    lower = _hybrid_transform(case, method, gamma_tilde, beta - 1)
    return TransformResult(bnd, residual, iv, (gt - g) / c, ((beta / c, lower),),
                           f"hybrid:{method}({beta})", ())


def eval_hybrid(case: FamilyCase, method: str = "approximate", gamma_tilde: Optional[float] = 0.0,
                rule: Optional[QuadratureRule] = None) -> float:
    """int p0 ln^beta(x + o) / (x + o)^gamma by the beta recursion with the self term solved."""
    _check(case, "hybrid")
    if case.ua < 0:
        raise DomainError("hybrid needs x + o >= 0 on the interval")
    return _hybrid_transform(case, method, gamma_tilde, case.beta).evaluate(rule)


def hybrid_transform(case: FamilyCase, method="approximate", gamma_tilde=0.0) -> TransformResult:
    _check(case, "hybrid")
    return _hybrid_transform(case, method, gamma_tilde, case.beta)


def _sqrt_parts(case: FamilyCase, sign: int):
    """Kernel pieces for (u^2 + sign R^2)^-gamma with u = x + o."""
    g, R, o = case.gamma, case.R, case.offset
    R2 = sign * R * R

    def u(x):
        return np.asarray(x, dtype=float) + o

    def f(x):
        uu = u(x)
        return case.p(x) * (uu * uu + R2) ** (-g)

    def df(x):
        uu = u(x)
        s = uu * uu + R2
        return case.dp(x) * s ** (-g) - 2.0 * g * uu * case.p(x) * s ** (-g - 1.0)

    return u, f, df


def near_singular_integrand(case: FamilyCase) -> SingularIntegrand:
    sign = 1 if case.family == "near_singular_plus" else -1
    _, f, df = _sqrt_parts(case, sign)
    sing = ()
    if sign < 0:
        sing = tuple(x for x in (case.interval.a, case.interval.b) if abs(x + case.offset) == case.R)
    elif case.R == 0 and case.ua == 0:
        sing = (case.interval.a,)
    return SingularIntegrand.blackbox(f, df, singular_points=sing)


def _sqrt_h(case, sign, u):
    R = case.R
    if sign > 0:
        return np.arcsinh(u / R) + math.log(R)
    return WeightFamily.sqrt_shifted_minus(R).h(u)


def _near_singular_transform(case: FamilyCase, method: str, gamma_tilde: Optional[float]) -> TransformResult:
    sign = 1 if case.family == "near_singular_plus" else -1
    iv, g, R, o = case.interval, case.gamma, case.R, case.offset
    u, f, df = _sqrt_parts(case, sign)
    if method == "approximate":
        if gamma_tilde is None:
            raise InvalidArgumentError("approximate method needs gamma_tilde")
        if sign > 0:
            center = -o if case.offset_known else iv.a
        else:
            center = (R if case.d is None else case.d) - o
        w = WeightFamily.power(gamma_tilde, center=center)
        return ibp_general_unknown_q(near_singular_integrand(case), iv, w)
    if method != "conventional":
        raise InvalidArgumentError(f"unknown method {method!r}")
    if R == 0:
        raise DomainError("conventional near-singular form needs R > 0")
    R2 = sign * R * R

    def h(x):
        return _sqrt_h(case, sign, u(x))

    if g == 0.5:
        ha, hb = float(h(iv.a)), float(h(iv.b))
        if sign > 0:
            diff = float(np.arcsinh(u(iv.b) / R) - np.arcsinh(u(iv.a) / R))
        else:
            diff = hb - ha
        bnd = _scaled_boundary(case, diff, lambda: ha)

        def residual(x):
            return case.dp(x) * h(x)

        return TransformResult(bnd, residual, iv, 0.0, (), f"{case.family}:conventional", ())

    # p = p0 (u^2 + sR^2)^(1/2 - gamma) against q = sqrt(u^2 + sR^2); then one more pass with q~ = 1
    def p(x):
        uu = u(x)
        return case.p(x) * (uu * uu + R2) ** (0.5 - g)

    def dp(x):
        uu = u(x)
        s = uu * uu + R2
        return case.dp(x) * s ** (0.5 - g) + (1.0 - 2.0 * g) * uu * case.p(x) * s ** (-0.5 - g)

    with np.errstate(all="ignore"):
        pa, pb = float(p(iv.a)), float(p(iv.b))
        bnd1 = pb * float(h(iv.b)) - pa * float(h(iv.a))
    if not np.isfinite(bnd1):
        raise DivergenceError(f"{case.family}: boundary term diverges")

    def g1(x):
        return dp(x) * h(x)

    if sign > 0:
        center = -o
    else:
        center = (R if abs(case.ua - R) <= abs(case.ua + iv.length + R) else -R) - o
    unit = WeightFamily.unit(center=center)
    inner = SingularIntegrand.blackbox(g1, singular_points=near_singular_integrand(case).singular_points)
    bnd2 = boundary_term(unit, inner, iv)

    def residual(x):
        return -(np.asarray(x, dtype=float) - center) * inner.derivative(x, iv)

    return TransformResult(bnd1 - bnd2, residual, iv, 0.0, (), f"{case.family}:conventional+unit", inner.singular_points)


def _near(case, family, method, gamma_tilde, rule):
    _check(case, family)
    tr = _near_singular_transform(case, method, gamma_tilde)
    if method == "conventional" and case.gamma != 0.5:
        tr.check_residual(rule)
    return tr.evaluate(rule)


def eval_near_singular_plus(case: FamilyCase, method: str = "conventional", gamma_tilde: Optional[float] = None,
                            rule: Optional[QuadratureRule] = None) -> float:
    """int p0 / ((x + o)^2 + R^2)^gamma."""
    return _near(case, "near_singular_plus", method, gamma_tilde, rule)


def eval_near_singular_minus(case: FamilyCase, method: str = "conventional", gamma_tilde: Optional[float] = None,
                             rule: Optional[QuadratureRule] = None) -> float:
    """int p0 / ((x + o)^2 - R^2)^gamma on an interval clear of u = +-R."""
    return _near(case, "near_singular_minus", method, gamma_tilde, rule)


def near_singular_transform(case: FamilyCase, method="conventional", gamma_tilde=None) -> TransformResult:
    return _near_singular_transform(case, method, gamma_tilde)


def family_integrand(case: FamilyCase) -> SingularIntegrand:
    """Rational form p/q (with h where the catalog has one) for use with recipe_solve."""
    o, g, iv = case.offset, case.gamma, case.interval

    def u(x):
        return np.asarray(x, dtype=float) + o

    sing = tuple(e for e in (iv.a, iv.b) if e + o == 0)
    if case.family == "power_law":
        w = WeightFamily.power(g, center=-o)
        return SingularIntegrand.rational(case.p, q=lambda x: u(x) ** g, dp=case.dp,
                                          dq=lambda x: g * u(x) ** (g - 1), h=w.h, singular_points=sing,
                                          gamma_hint=g)
    if case.family == "log_power":
        b = case.beta
        return SingularIntegrand.rational(lambda x: case.p(x) * np.log(u(x)) ** b, singular_points=sing, beta_hint=b)
    if case.family == "hybrid":
        b = case.beta
        return SingularIntegrand.rational(lambda x: case.p(x) * np.log(u(x)) ** b, q=lambda x: u(x) ** g,
                                          singular_points=sing, gamma_hint=g, beta_hint=b)
    sign = 1 if case.family == "near_singular_plus" else -1
    _, f, df = _sqrt_parts(case, sign)
    R2 = sign * case.R ** 2
    if g == 0.5 and case.R > 0:
        return SingularIntegrand.rational(case.p, q=lambda x: np.sqrt(u(x) ** 2 + R2), dp=case.dp,
                                          h=lambda x: _sqrt_h(case, sign, u(x)),
                                          singular_points=near_singular_integrand(case).singular_points)
    return SingularIntegrand.blackbox(f, df, singular_points=near_singular_integrand(case).singular_points)


# analytic references, evaluated in extended precision


def _mp_hbeta(beta, u):
    if u == 0:
        return mp.mpf(0)
    h = u
    lu = mp.log(u)
    for b in range(1, beta + 1):
        h = u * lu ** b - b * h
    return h


def _mp_hybrid(g, beta, ua, ub):
    if g == 1:
        if ua == 0:
            return None
        return (mp.log(ub) ** (beta + 1) - mp.log(ua) ** (beta + 1)) / (beta + 1)
    e = 1 - g
    if ua == 0 and e <= 0:
        return None

    def X(u, k):
        return mp.mpf(0) if u == 0 else u ** e * mp.log(u) ** k

    J = (X(ub, 0) - X(ua, 0)) / e
    for k in range(1, beta + 1):
        J = (X(ub, k) - X(ua, k) - k * J) / e
    return J


def analytic_reference(case: FamilyCase) -> Optional[float]:
    """Closed-form value when the catalog has one (constant p0 only), else None."""
    if not case.default_p0:
        return None
    with mp.workdps(REFERENCE_DPS):
        o = mp.mpf(case.offset)
        ua, ub = mp.mpf(case.interval.a) + o, mp.mpf(case.interval.b) + o
        g = mp.mpf(case.gamma)
        fam = case.family
        if fam == "power_law":
            return float((ub ** (1 - g) - ua ** (1 - g)) / (1 - g))
        if fam == "log_power":
            if ua < 0:
                return None
            return float(_mp_hbeta(case.beta, ub) - _mp_hbeta(case.beta, ua))
        if fam == "hybrid":
            if ua < 0:
                return None
            v = _mp_hybrid(g, case.beta, ua, ub)
            return None if v is None else float(v)
        R = mp.mpf(case.R)
        if fam == "near_singular_plus":
            if R == 0:
                return None
            if case.gamma == 0.5:
                return float(mp.asinh(ub / R) - mp.asinh(ua / R))
            if case.gamma == 1:
                return float((mp.atan(ub / R) - mp.atan(ua / R)) / R)
            if case.gamma == 1.5:
                return float((ub / mp.sqrt(ub ** 2 + R ** 2) - ua / mp.sqrt(ua ** 2 + R ** 2)) / R ** 2)
            return None
        if case.gamma == 0.5:
            def H(u):
                return mp.log(abs(mp.sqrt(u * u - R * R) + u))
            return float(H(ub) - H(ua))
        return None
