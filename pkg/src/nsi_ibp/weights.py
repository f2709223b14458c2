"""Weight functions q~(x) with analytic h~(x) = int dx / q~(x).

Every family works in the local variable t = x - center so that a weight can be
anchored at the (near-)singular point of an integrand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DivergenceError, DomainError, InvalidArgumentError

LOG_BRANCH_TOL = 1e-8

KINDS = ("power", "log_power", "sqrt_shifted_plus", "sqrt_shifted_minus", "exponential", "unit")


def _arr(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class WeightFamily:
    kind: str
    gamma_tilde: float = 0.0
    beta_tilde: int = 0
    R: float = 0.0
    lam: float = 1.0
    center: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown weight family {self.kind!r}")
        if self.kind.startswith("sqrt") and self.R < 0:
            raise InvalidArgumentError("R must be nonnegative")
        if self.kind == "exponential" and not self.lam > 0:
            raise InvalidArgumentError("lambda must be positive")
        if self.kind == "log_power" and (int(self.beta_tilde) != self.beta_tilde or self.beta_tilde < 0):
            raise InvalidArgumentError("log_power needs an integer beta >= 0")

    # constructors
    @classmethod
    def power(cls, gamma_tilde, center=0.0):
        return cls("power", gamma_tilde=float(gamma_tilde), center=float(center))

    @classmethod
    def shifted_power(cls, gamma_tilde, o):
        """(x - o)^gamma_tilde."""
        return cls.power(gamma_tilde, center=o)

    @classmethod
    def log_power(cls, beta_tilde):
        return cls("log_power", beta_tilde=int(beta_tilde))

    @classmethod
    def sqrt_shifted_plus(cls, R, center=0.0):
        return cls("sqrt_shifted_plus", R=float(R), center=float(center))

    @classmethod
    def sqrt_shifted_minus(cls, R, center=0.0):
        return cls("sqrt_shifted_minus", R=float(R), center=float(center))

    @classmethod
    def exponential(cls, lam, center=0.0):
        return cls("exponential", lam=float(lam), center=float(center))

    @classmethod
    def unit(cls, center=0.0):
        return cls("unit", center=float(center))

    @property
    def log_branch(self) -> bool:
        return self.kind == "power" and abs(1.0 - self.gamma_tilde) < LOG_BRANCH_TOL

    @property
    def name(self) -> str:
        if self.kind == "power":
            return f"power({self.gamma_tilde:g})"
        if self.kind == "log_power":
            return f"log_power({self.beta_tilde})"
        if self.kind.startswith("sqrt"):
            return f"{self.kind}({self.R:g})"
        if self.kind == "exponential":
            return f"exponential({self.lam:g})"
        return "unit"

    def _t(self, x, strict=True):
        t = _arr(x) - self.center
        k = self.kind
        if k in ("power", "log_power"):
            bad = (t <= 0) if strict else (t < 0)
        elif k == "sqrt_shifted_minus":
            bad = (np.abs(t) <= self.R) if strict else (np.abs(t) < self.R)
        elif k == "sqrt_shifted_plus" and self.R == 0:
            bad = (t <= 0) if strict else (t < 0)
        else:
            bad = ~np.isfinite(t)
        if np.any(bad):
            xb = _arr(x)[bad] if np.ndim(x) else float(x)
            raise DomainError(f"x = {np.ravel(xb)[0]!r} outside the domain of weight {self.name}")
        return t

    # q~ and derivatives
    def q(self, x):
        k = self.kind
        if k == "unit":
            return np.ones_like(_arr(x))[()]
        t = self._t(x, strict=False)
        with np.errstate(divide="ignore"):
            if k == "power":
                return (t ** self.gamma_tilde)[()]
            if k == "log_power":
                return (np.log(t) ** (-float(self.beta_tilde)))[()]
            if k == "sqrt_shifted_plus":
                return np.hypot(t, self.R)[()]
            if k == "sqrt_shifted_minus":
                return np.sqrt((t - self.R) * (t + self.R))[()]
            return np.exp(self.lam * t)[()]

    def dq(self, x):
        k = self.kind
        if k == "unit":
            return np.zeros_like(_arr(x))[()]
        t = self._t(x)
        if k == "power":
            return (self.gamma_tilde * t ** (self.gamma_tilde - 1.0))[()]
        if k == "log_power":
            b = float(self.beta_tilde)
            return (-b * np.log(t) ** (-b - 1.0) / t)[()]
        if k == "sqrt_shifted_plus":
            return (t / np.hypot(t, self.R))[()]
        if k == "sqrt_shifted_minus":
            return (t / np.sqrt((t - self.R) * (t + self.R)))[()]
        return (self.lam * np.exp(self.lam * t))[()]

    def h(self, x):
        k = self.kind
        if k == "unit":
            return (_arr(x) - self.center)[()]
        if k == "power":
            t = self._t(x, strict=self.log_branch)
            if self.log_branch:
                return np.log(t)[()]
            with np.errstate(divide="ignore"):
                return (t ** (1.0 - self.gamma_tilde) / (1.0 - self.gamma_tilde))[()]
        if k == "log_power":
            return h_beta_recursive(self.beta_tilde, self._t(x))
        if k == "sqrt_shifted_plus":
            t = self._t(x)
            if self.R == 0:
                return np.log(2 * t)[()]
            return (np.arcsinh(t / self.R) + math.log(self.R))[()]
        if k == "sqrt_shifted_minus":
            t = self._t(x)
            s = np.sqrt((t - self.R) * (t + self.R))
            # for t < -R the sum s + t cancels, so use s + t = -R^2 / (|t| + s)
            with np.errstate(divide="ignore"):
                pos = np.log(s + np.abs(t))
                return np.where(t > 0, pos, 2 * np.log(self.R) - pos)[()]
        t = _arr(x) - self.center
        return (-np.exp(-self.lam * t) / self.lam)[()]

    def hq(self, x):
        """h~ q~ in closed form, with the limit value at the center where it exists."""
        k = self.kind
        if k == "power":
            t = self._t(x, strict=False)
            if self.log_branch:
                with np.errstate(divide="ignore", invalid="ignore"):
                    v = t * np.log(t)
                return np.where(t == 0, 0.0, v)[()]
            return (t / (1.0 - self.gamma_tilde))[()]
        if k == "unit":
            return (_arr(x) - self.center)[()]
        if k == "exponential":
            return np.full_like(_arr(x), -1.0 / self.lam)[()]
        if k == "log_power":
            t = self._t(x)
            return (h_beta_recursive(self.beta_tilde, t) * self.q(x))[()]
        return (self.h(x) * self.q(x))[()]

    def hdq(self, x):
        """h~ q~' in closed form."""
        k = self.kind
        if k == "power":
            t = self._t(x)
            if self.log_branch:
                return np.log(t)[()]
            return np.full_like(t, self.gamma_tilde / (1.0 - self.gamma_tilde))[()]
        if k == "unit":
            return np.zeros_like(_arr(x))[()]
        if k == "exponential":
            return np.full_like(_arr(x), -1.0)[()]
        return (self.h(x) * self.dq(x))[()]

    @property
    def constant_hdq(self) -> Optional[float]:
        """Value of h~ q~' when it is constant, else None."""
        if self.kind == "power" and not self.log_branch:
            return self.gamma_tilde / (1.0 - self.gamma_tilde)
        if self.kind == "unit":
            return 0.0
        if self.kind == "exponential":
            return -1.0
        return None

    def hq_vanishes_at(self, e) -> bool:
        """True where h~ q~ has a zero limit, i.e. the weight is anchored at e."""
        if self.kind in ("power", "unit"):
            return float(e) == self.center
        return False


def h_tilde(w: WeightFamily, x):
    return w.h(x)


def h_beta_recursive(beta: int, x, x0: Optional[float] = None):
    """Antiderivative of ln^beta via h_b = x ln^b x - b h_{b-1}, h_0 = x.

    With x0 given the result is the definite integral from x0 to x.
    """
    if int(beta) != beta:
        raise InvalidArgumentError("beta must be an integer")
    if beta < 0:
        raise InvalidArgumentError("negative beta has no closed-form antiderivative")
    x = _arr(x)
    if np.any(x < 0):
        raise DomainError("h_beta needs x >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(x)
        h = x.copy()
        for b in range(1, int(beta) + 1):
            h = np.where(x == 0, 0.0, x * lx ** b) - b * h
    if x0 is not None:
        if not x0 > 0:
            raise DomainError("x0 must be positive")
        h = h - h_beta_recursive(beta, float(x0))
    return h[()]


@dataclass(frozen=True)
class BoundaryLimit:
    endpoint: float
    value: float
    is_singular_endpoint: bool


def estimate_gamma(f, iv, endpoint="a") -> float:
    """Singularity strength from two samples next to an endpoint."""
    s = 1e-6 * (iv.b - iv.a)
    if endpoint == "a":
        f1, f2 = f(iv.a + s), f(iv.a + 2 * s)
    else:
        f1, f2 = f(iv.b - s), f(iv.b - 2 * s)
    f1, f2 = abs(float(f1)), abs(float(f2))
    if f1 == 0 or f2 == 0 or not (np.isfinite(f1) and np.isfinite(f2)):
        return 0.0
    return -math.log(f2 / f1) / math.log(2.0)


def boundary_limit(w: WeightFamily, f, e: float, iv, gamma: Optional[float] = None) -> BoundaryLimit:
    """h~ q~ f at one endpoint, taking the limit where the weight is anchored."""
    singular = float(e) in tuple(float(s) for s in getattr(f, "singular_points", ()))
    with np.errstate(all="ignore"):
        fe = np.asarray(f(e))[()]
    if w.hq_vanishes_at(e):
        if np.isfinite(fe):
            return BoundaryLimit(float(e), 0.0, singular)
        g = gamma
        if g is None:
            g = getattr(f, "gamma_hint", None)
        if g is None:
            g = estimate_gamma(f, iv, "a" if e == iv.a else "b")
        if g < 1:
            return BoundaryLimit(float(e), 0.0, True)
        raise DivergenceError(f"boundary term diverges at x = {e} (estimated gamma {g:.6g} >= 1)")
    with np.errstate(all="ignore"):
        val = w.hq(e) * fe
    if not np.isfinite(val):
        raise DivergenceError(f"boundary term of weight {w.name} is not finite at x = {e}")
    return BoundaryLimit(float(e), float(val), singular)


def boundary_term(w: WeightFamily, f, iv, gamma: Optional[float] = None):
    """[h~ q~ f] evaluated from a to b with limit forms at anchored endpoints."""
    hi = boundary_limit(w, f, iv.b, iv, gamma)
    lo = boundary_limit(w, f, iv.a, iv, gamma)
    return hi.value - lo.value
