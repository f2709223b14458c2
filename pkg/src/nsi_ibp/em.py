"""Electrostatic kernel integral and the RWG / scalar Green's function convolution.

The RWG pair lives on the unit square split along the diagonal from (1, 0) to (0, 1):
T+ = {x, y >= 0, x + y <= 1} with free vertex (0, 0) and T- = {x, y <= 1, x + y >= 1}
with free vertex (1, 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import DivergenceError, DomainError, InvalidArgumentError
from .families import FamilyCase, eval_near_singular_plus
from .quadrature import (DEFAULT_RULE, Interval, QuadratureRule,
                         gauss_legendre_rule, oracle_integrate)

FOUR_PI = 4.0 * math.pi
OUTER_PANELS = 8
TOUCH_TOL = 1e-12


@dataclass(frozen=True)
class ObservationPoint:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite((self.x, self.y, self.z))):
            raise InvalidArgumentError("observation point must be finite")


@dataclass(frozen=True)
class RwgPair:
    v_plus: tuple = (0.0, 0.0)
    v_minus: tuple = (1.0, 1.0)
    edge_length: float = math.sqrt(2.0)
    area_plus: float = 0.5
    area_minus: float = 0.5
    k: float = 1.0

    def __post_init__(self):
        if not (self.edge_length > 0 and self.area_plus > 0 and self.area_minus > 0 and self.k >= 0):
            raise InvalidArgumentError("RWG pair needs positive length and areas and k >= 0")

    @classmethod
    def unit_square(cls, k: float = 1.0) -> "RwgPair":
        pair = cls(k=float(k))
        assert pair.area_plus == pair.area_minus == 0.5
        assert abs(pair.edge_length - math.sqrt(2.0)) < 1e-15
        return pair


@dataclass(frozen=True)
class KernelCase:
    """Inner integral data at one outer abscissa y."""

    R0: float
    y: float
    inner_interval: Optional[Interval]


# each triangle: y range and row limits x_lo(y) = c0 + c1 y, x_hi(y) = d0 + d1 y
_ROWS = {"plus": ((0.0, 1.0), (0.0, 0.0), (1.0, -1.0)),
         "minus": ((0.0, 1.0), (1.0, -1.0), (1.0, 0.0))}
_VERTS = {"plus": ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)),
          "minus": ((1.0, 0.0), (1.0, 1.0), (0.0, 1.0))}


def _row(triangle, y):
    try:
        _, lo, hi = _ROWS[triangle]
    except KeyError:
        raise InvalidArgumentError(f"triangle must be 'plus' or 'minus', got {triangle!r}") from None
    return lo[0] + lo[1] * y, hi[0] + hi[1] * y


def in_triangle(x, y, triangle="plus", tol=1e-12):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if triangle == "plus":
        return (x >= -tol) & (y >= -tol) & (x + y <= 1 + tol)
    if triangle == "minus":
        return (x <= 1 + tol) & (y <= 1 + tol) & (x + y >= 1 - tol)
    raise InvalidArgumentError(f"triangle must be 'plus' or 'minus', got {triangle!r}")


def _current_coeffs(pair, triangle):
    """J = sgn * scale * (r - v): returns (sgn * scale, v)."""
    if triangle == "plus":
        return pair.edge_length / (2 * pair.area_plus), np.asarray(pair.v_plus, dtype=float)
    return -pair.edge_length / (2 * pair.area_minus), np.asarray(pair.v_minus, dtype=float)


def rwg_current(pair: RwgPair, x: float, y: float, triangle: str = "plus") -> np.ndarray:
    """RWG vector at (x, y) inside the named triangle."""
    if not bool(in_triangle(x, y, triangle)):
        raise DomainError(f"point ({x}, {y}) is outside the {triangle} triangle")
    c, v = _current_coeffs(pair, triangle)
    return c * (np.array([x, y], dtype=float) - v)


def rwg_current_masked(pair: RwgPair, x, y, triangle: str = "plus", component: str = "x"):
    """Vectorised current component that is exactly 0 outside the triangle."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    val = _component_linear(pair, triangle, component, x, y)
    return np.where(in_triangle(x, y, triangle), val, 0.0)


def _component_linear(pair, triangle, component, x, y):
    c, v = _current_coeffs(pair, triangle)
    if component == "x":
        return c * (x - v[0])
    if component == "y":
        return c * (y - v[1]) + 0.0 * x
    if component == "unit":
        return np.ones_like(x + y)
    raise InvalidArgumentError(f"component must be 'x', 'y' or 'unit', got {component!r}")


def electrostatic_integral(d: float, iv=None, gamma_tilde: float = 1.0, offset: float = 0.0,
                           method: str = "approximate", rule: Optional[QuadratureRule] = None) -> float:
    """int_a^b dx / sqrt((x + o)^2 + d^2); default interval [0, d]."""
    if not d > 0:
        raise InvalidArgumentError("d must be positive")
    if iv is None:
        iv = (0.0, d)
    a, b = (iv.a, iv.b) if isinstance(iv, Interval) else (float(iv[0]), float(iv[1]))
    if a == b:
        return 0.0
    case = FamilyCase("near_singular_plus", Interval(a, b), gamma=0.5, R=d, offset=offset)
    if method == "approximate":
        return eval_near_singular_plus(case, "approximate", gamma_tilde, rule)
    return eval_near_singular_plus(case, method, rule=rule)


SPLIT, ROW_LO, ROW_HI = 0, 1, 2


def _pieces(triangle, component, pair, xo, y, y_ref=None):
    """Inner pieces for rows at ordinates y (array).

    Each piece is s in [s_lo, s_hi] measured from x' with numerator alpha + beta s;
    e_lo/e_hi tell whether a limit is the split point x' or a row end. With y_ref the
    piece layout is taken from the row at y_ref, so values at the ends of an outer
    segment are the limits from inside it.
    """
    y = np.asarray(y, dtype=float)
    lo, hi = _row(triangle, y)
    c, v = _current_coeffs(pair, triangle)
    if component == "x":
        slope, base = c, np.full_like(y, c * (xo - v[0]))
    elif component == "y":
        slope, base = 0.0, c * (y - v[1])
    elif component == "unit":
        slope, base = 0.0, np.ones_like(y)
    else:
        raise InvalidArgumentError(f"component must be 'x', 'y' or 'unit', got {component!r}")
    out = {k: [] for k in ("own", "s_lo", "s_hi", "alpha", "beta", "e_lo", "e_hi")}
    idx = np.arange(y.size)

    def add(mask, s_lo, s_hi, sigma, e_lo, e_hi):
        if not np.any(mask):
            return
        n = int(mask.sum())
        out["own"].append(idx[mask])
        out["s_lo"].append(np.asarray(s_lo)[mask])
        out["s_hi"].append(np.asarray(s_hi)[mask])
        out["alpha"].append(base[mask])
        out["beta"].append(np.full(n, sigma * slope))
        out["e_lo"].append(np.full(n, e_lo))
        out["e_hi"].append(np.full(n, e_hi))

    if y_ref is None:
        rlo, rhi = lo, hi
    else:
        rlo, rhi = (np.full_like(y, v) for v in _row(triangle, float(y_ref)))
    nonempty = rhi > rlo
    inside = nonempty & (rlo < xo) & (xo < rhi)
    right = nonempty & (xo <= rlo)
    left = nonempty & (xo >= rhi)
    zero = np.zeros_like(y)
    add(inside, zero, hi - xo, 1.0, SPLIT, ROW_HI)
    add(inside, zero, xo - lo, -1.0, SPLIT, ROW_LO)
    add(right, lo - xo, hi - xo, 1.0, ROW_LO, ROW_HI)
    add(left, xo - hi, xo - lo, -1.0, ROW_HI, ROW_LO)
    if not out["own"]:
        return None
    return {k: np.concatenate(vv) for k, vv in out.items()}


def _touch_flags(codes, touch):
    return (codes == SPLIT) | ((codes == ROW_LO) & touch[0]) | ((codes == ROW_HI) & touch[1])


def _touching_ends(triangle, xo, yo, seg_adjacent):
    """Row ends whose distance to x' vanishes at y = y' (only matters next to y')."""
    if not seg_adjacent:
        return False, False
    lo, hi = _row(triangle, yo)
    return abs(lo - xo) < TOUCH_TOL, abs(hi - xo) < TOUCH_TOL


def _inner_split(obs, pair, y, component, triangle, rule, touch=(False, False), y_ref=None, R=None):
    """(A, G) arrays over ordinates y with inner integral = A ln R + G.

    R may be passed when |y - y'| is known more precisely than y itself.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    R = np.hypot(obs.y - y, obs.z) if R is None else np.atleast_1d(np.asarray(R, dtype=float))
    pcs = _pieces(triangle, component, pair, obs.x, y, y_ref)
    A = np.zeros(y.size)
    G = np.zeros(y.size, dtype=complex)
    if pcs is None:
        return A, G
    own = pcs["own"]
    tl, th = _touch_flags(pcs["e_lo"], touch), _touch_flags(pcs["e_hi"], touch)
    Ap, Gr, Gi = kernels.inner_pieces(R[own], pcs["s_lo"], pcs["s_hi"], pcs["alpha"], pcs["beta"], pair.k,
                                      tl, th, rule.nodes, rule.weights, rule.panels)
    np.add.at(A, own, Ap)
    np.add.at(G, own, Gr + 1j * Gi)
    return A, G


def kernel_case(obs: ObservationPoint, y: float, triangle: str = "plus") -> KernelCase:
    lo, hi = _row(triangle, y)
    iv = Interval(lo, hi) if hi > lo else None
    return KernelCase(float(np.hypot(obs.y - y, obs.z)), float(y), iv)


def green_kernel_inner(obs: ObservationPoint, pair: RwgPair, y: float, component: str = "x",
                       triangle: str = "plus", rule: Optional[QuadratureRule] = None) -> complex:
    """int over the row at ordinate y of exp(-jk r)/(4 pi r) J_component(x, y) dx."""
    rule = rule or DEFAULT_RULE
    kc = kernel_case(obs, y, triangle)
    if kc.inner_interval is None:
        return 0j
    iv = kc.inner_interval
    if kc.R0 == 0 and iv.a - TOUCH_TOL <= obs.x <= iv.b + TOUCH_TOL:
        raise DivergenceError("inner integral diverges on the row through the observation point")
    touch = _touching_ends(triangle, obs.x, obs.y, True)
    A, G = _inner_split(obs, pair, [y], component, triangle, rule, touch)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = A[0] * math.log(kc.R0) if A[0] != 0 else 0.0
    return complex(val + G[0])


GRADING_RATIO = 0.25
GRADING_LEVELS = 30
_GRADED_RULE = gauss_legendre_rule(16)


def _graded_log_nodes(T, rule=_GRADED_RULE):
    """Gauss nodes on [0, T] over panels shrinking geometrically towards t = 0.

    Smooth A(t) times ln t is then integrated to near machine precision; the
    innermost panel [0, T sigma^n] is small enough to ignore.
    """
    edges = T * GRADING_RATIO ** np.arange(GRADING_LEVELS + 1)
    x, w = rule.nodes, rule.weights
    half = 0.5 * (edges[:-1] - edges[1:])
    mid = 0.5 * (edges[:-1] + edges[1:])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _graded_nodes(T, d, rule):
    """Nodes on [0, T] for a function smooth on the scale d around t = 0.

    Panels shrink geometrically until they reach d; the last one [0, ~d] uses `rule`.
    """
    levels = 0
    if 0 < d < T:
        levels = min(GRADING_LEVELS, int(math.ceil(math.log(T / d) / math.log(1 / GRADING_RATIO))))
    if levels == 0:
        return rule.abscissae(Interval(0.0, T))
    edges = T * GRADING_RATIO ** np.arange(levels + 1)
    x, w = _GRADED_RULE.nodes, _GRADED_RULE.weights
    half = 0.5 * (edges[:-1] - edges[1:])
    mid = 0.5 * (edges[:-1] + edges[1:])
    t0, w0 = rule.abscissae(Interval(0.0, edges[-1]))
    ts = np.concatenate([(mid[:, None] + half[:, None] * x).ravel(), t0])
    ws = np.concatenate([(half[:, None] * w).ravel(), w0])
    return ts, ws


def _anchor(triangle, obs):
    """Ordinate closest to the observation point and its out-of-plane distance."""
    (y0, y1), _, _ = _ROWS[triangle]
    ya = min(max(obs.y, y0), y1)
    return ya, math.hypot(obs.y - ya, obs.z)


def _end_gap(triangle, xo, y):
    """Distance from x' to the nearest row end at y that does not touch it."""
    lo, hi = _row(triangle, y)
    gaps = [g for g in (abs(lo - xo), abs(hi - xo)) if g >= TOUCH_TOL]
    return min(gaps) if gaps and hi > lo else math.inf


def _outer_breaks(triangle, obs):
    (y0, y1), lo, hi = _ROWS[triangle]
    anchor, perp = _anchor(triangle, obs)
    pts = {y0, y1, anchor}
    for c0, c1 in (lo, hi):
        if c1 != 0:
            ys = (obs.x - c0) / c1
            if y0 < ys < y1:
                # a crossing that coincides with y' up to rounding is y' itself
                pts.add(anchor if perp == 0 and abs(ys - anchor) < TOUCH_TOL else ys)
    return sorted(pts)


def rwg_convolution(obs: ObservationPoint, pair: RwgPair, component: str = "x",
                    outer_rule: Optional[QuadratureRule] = None, triangle: str = "plus",
                    inner_rule: Optional[QuadratureRule] = None) -> complex:
    """Double integral of exp(-jk r)/(4 pi r) J over one triangle, as nested 1-D integrals.

    The outer y-axis is split at y' (clamped to the triangle), at rows whose ends pass
    through x', and at the triangle limits. The outer integrand is A ln R + G. Next to
    y' with R -> 0 the log part uses panels graded towards y'; G, or the whole
    integrand when R stays positive, is graded down to the scale on which it varies.
    """
    outer_rule = outer_rule or gauss_legendre_rule(DEFAULT_RULE.points_per_panel, OUTER_PANELS)
    inner_rule = inner_rule or DEFAULT_RULE
    anchor, perp = _anchor(triangle, obs)
    brk = _outer_breaks(triangle, obs)
    total = 0j
    for ya, yb in zip(brk[:-1], brk[1:]):
        if yb - ya <= 0:
            continue
        mid = 0.5 * (ya + yb)
        if anchor not in (ya, yb):
            ys, ws = outer_rule.abscissae(Interval(ya, yb))
            A, G = _inner_split(obs, pair, ys, component, triangle, inner_rule, (False, False), mid)
            total += np.dot(ws, G + A * np.log(np.hypot(obs.y - ys, obs.z)))
            continue
        side = 1.0 if ya == anchor else -1.0
        T = yb - ya
        touch = _touching_ends(triangle, obs.x, anchor, True)
        d = perp if perp > 0 else _end_gap(triangle, obs.x, anchor)
        ts, wt = _graded_nodes(T, d, outer_rule)
        ys = anchor + side * ts
        A, G = _inner_split(obs, pair, ys, component, triangle, inner_rule, touch, mid)
        if perp > 0:
            total += np.dot(wt, G + A * np.log(np.hypot(obs.y - ys, obs.z)))
            continue
        total += np.dot(wt, G)
        ts, wt = _graded_log_nodes(T)
        a = _inner_A(obs, pair, anchor + side * ts, component, triangle, touch, mid, R=ts)
        total += np.dot(wt, a * np.log(ts))
    return complex(total)


_A_RULE = gauss_legendre_rule(1, 1)


def _inner_A(obs, pair, y, component, triangle, touch, y_ref=None, R=None):
    """Coefficient of ln R alone; it comes from end terms, so a 1-point rule is enough."""
    return _inner_split(obs, pair, y, component, triangle, _A_RULE, touch, y_ref, R)[0]


def rwg_oracle(obs: ObservationPoint, pair: RwgPair, component: str = "x", triangle: str = "plus",
               n_points: int = 100_000, n_radial: int = 16) -> complex:
    """Brute-force reference: polar sampling about the observation point over each edge's fan.

    The 1/r factor cancels against the polar Jacobian, so plain Gauss sums converge
    (off the plane the radial variable is r = z sinh(u)). Observation points just
    outside an edge make the fan nearly flat and the sum converges slowly there.
    Points outside the triangle contribute with the sign of their fan orientation,
    using the linear current formula, which reproduces the triangle integral exactly.
    """
    P = np.array([obs.x, obs.y], dtype=float)
    V = [np.asarray(v, dtype=float) for v in _VERTS[triangle]]
    rx, rw = np.polynomial.legendre.leggauss(n_radial)
    n_phi = max(10, n_points // (3 * n_radial))
    total = 0j
    for A_, B_ in ((V[0], V[1]), (V[1], V[2]), (V[2], V[0])):
        cross = (A_[0] - P[0]) * (B_[1] - P[1]) - (A_[1] - P[1]) * (B_[0] - P[0])
        edge = B_ - A_
        L = np.hypot(*edge)
        if abs(cross) < 1e-14 * L:
            continue
        sgn = math.copysign(1.0, cross)
        t_hat = edge / L
        n_hat = np.array([t_hat[1], -t_hat[0]])
        h = float(np.dot(A_ - P, n_hat))
        if h < 0:
            n_hat, h = -n_hat, -h
            t_hat = np.array([-n_hat[1], n_hat[0]])
        else:
            t_hat = np.array([-n_hat[1], n_hat[0]])
        phis = [math.atan2(np.dot(Q - P, t_hat), np.dot(Q - P, n_hat)) for Q in (A_, B_)]
        lo, hi = min(phis), max(phis)

        def fan(phi):
            phi = np.asarray(phi, dtype=float)
            rmax = h / np.cos(phi)
            if obs.z > 0:
                # r = z sinh(u) smooths r / dist on the scale z
                umax = np.arcsinh(rmax / obs.z)
                u = 0.5 * umax[:, None] * (rx[None, :] + 1.0)
                r = obs.z * np.sinh(u)
                wr = 0.5 * umax[:, None] * rw[None, :] * obs.z * np.cosh(u)
            else:
                r = 0.5 * rmax[:, None] * (rx[None, :] + 1.0)
                wr = 0.5 * rmax[:, None] * rw[None, :]
            dirx = np.cos(phi)[:, None] * n_hat[0] + np.sin(phi)[:, None] * t_hat[0]
            diry = np.cos(phi)[:, None] * n_hat[1] + np.sin(phi)[:, None] * t_hat[1]
            px, py = P[0] + r * dirx, P[1] + r * diry
            dist = np.hypot(r, obs.z)
            J = _component_linear(pair, triangle, component, px, py)
            g = r * np.exp(-1j * pair.k * dist) / (FOUR_PI * dist)
            return np.sum(wr * g * J, axis=1)

        total += sgn * oracle_integrate(fan, Interval(lo, hi), n_phi, endpoint_inset=0.0)
    return complex(total)


def relative_error(value: complex, reference: complex) -> float:
    return abs(value - reference) / abs(reference)
