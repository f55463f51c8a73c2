"""Explicit constants and sufficient conditions for global boundedness.

Everything here is closed-form arithmetic on scalars. The one genuinely
non-explicit ingredient is the absolute constant in the maximal-regularity
bound ``C_{γ,n} = C^γ (γ-2)^{1-γ} 2^{9n(γ-2)}``; it is exposed as
``abs_const`` and every verdict that goes through ``C*_n`` is conditional
on it. Because ``C*_n`` is a supremum over γ and we only ever evaluate it on
a finite grid, ``cstar_lower`` is a lower bound and verdicts built on it are
sound but not complete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .model import ModelSpec, Variant

DEFAULT_GAMMA_MAX = 64.0
DEFAULT_GAMMA_POINTS = 256
DEFAULT_EPS2 = 1e-6


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


@dataclass(frozen=True)
class DStarInputs:
    tau: float
    n: int
    chi: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.n >= 1:
            raise ValueError(f"n must be >= 1, got {self.n}")

    @property
    def n_star(self) -> float:
        return max(1.0, self.n / 2.0)

    @property
    def tau_star(self) -> float:
        return 1.0 / self.tau - 1.0

    @property
    def j(self) -> int:
        return _sign(self.chi * self.tau_star)

    @property
    def alpha(self) -> float:
        return _alpha(self.tau, self.n_star)


def _alpha(tau: float, m: float) -> float:
    ts = 1.0 / tau - 1.0
    return math.sqrt(ts * ts / 4.0 + 1.0 / (tau * m))


def _dstar_formula(tau: float, m: float, chi: float) -> float:
    # m is n* for D*_{τ,n} and p for the exponent-dependent version
    ts = 1.0 / tau - 1.0
    j = _sign(chi * ts)
    alpha = _alpha(tau, m)
    pre = 2.0 / (tau * m)
    if alpha > -j * abs(ts):
        return pre / (2.0 * alpha + j * abs(ts))
    return pre / alpha


def dstar(tau: float, n: int, chi: float) -> float:
    """D*_{τ,n}, the explicit threshold on |χ|·‖v0‖∞ for the consumption model."""
    inp = DStarInputs(tau, n, chi)
    return _dstar_formula(inp.tau, inp.n_star, chi)


def dstar_at_exponent(tau: float, p: float, chi: float) -> float:
    """Threshold on |χ|·‖v0‖∞ once a concrete exponent p is fixed.

    Same formula as ``dstar`` with n* replaced by p; since p > n* this is
    strictly smaller, and a valid p exists iff the D* condition holds.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not p > 1:
        raise ValueError("p must exceed 1")
    return _dstar_formula(tau, p, chi)


def log_cgamma_bound(gamma: float, n: int, abs_const: float = 1.0) -> float:
    if not gamma > 2:
        raise ValueError(f"gamma must exceed 2, got {gamma}")
    if not abs_const > 0:
        raise ValueError("abs_const must be positive")
    return (
        gamma * math.log(abs_const)
        + (1.0 - gamma) * math.log(gamma - 2.0)
        + 9.0 * n * (gamma - 2.0) * math.log(2.0)
    )


def cgamma_bound(gamma: float, n: int, abs_const: float = 1.0) -> float:
    """Upper bound C^γ (γ-2)^{1-γ} 2^{9n(γ-2)}; +inf if it overflows a double."""
    lv = log_cgamma_bound(gamma, n, abs_const)
    return math.exp(lv) if lv < 709.0 else math.inf


@dataclass(frozen=True)
class CgammaBound:
    gamma: float
    n: int
    abs_const: float = 1.0

    @property
    def log_value(self) -> float:
        return log_cgamma_bound(self.gamma, self.n, self.abs_const)

    @property
    def value(self) -> float:
        return cgamma_bound(self.gamma, self.n, self.abs_const)


def default_gamma_grid(n: int, points: int = DEFAULT_GAMMA_POINTS,
                       gamma_max: float = DEFAULT_GAMMA_MAX) -> np.ndarray:
    """Log-spaced γ values in the open-closed interval (max(1, n/2), gamma_max]."""
    lo = max(1.0, n / 2.0)
    if gamma_max <= lo:
        raise ValueError("gamma_max must exceed max(1, n/2)")
    return np.geomspace(lo, gamma_max, points + 1)[1:]


def cstar_lower(n: int, abs_const: float = 1.0,
                gamma_grid: Optional[Iterable[float]] = None) -> float:
    """max over the grid of γ/(γ-1) · C_{γ+1,n}^{-1/(γ+1)}.

    For n <= 2 the supremand grows without bound as γ -> 1+, so the value
    depends strongly on how close the grid gets to the lower endpoint.
    """
    grid = default_gamma_grid(n) if gamma_grid is None else np.asarray(list(gamma_grid), float)
    if grid.size == 0:
        raise ValueError("gamma grid is empty")
    lo = max(1.0, n / 2.0)
    if np.any(grid <= lo):
        raise ValueError(f"every gamma must exceed max(1, n/2) = {lo}")
    best = -math.inf
    for g in grid:
        g = float(g)
        term = math.log(g / (g - 1.0)) - log_cgamma_bound(g + 1.0, n, abs_const) / (g + 1.0)
        best = max(best, term)
    return math.exp(best)


@dataclass(frozen=True)
class SigmaCoefficients:
    """Coefficients of A σ² v² + B < C σ + D σ v and the chosen σ."""

    p: float
    A: float
    B: float
    C: float
    D: float
    eps2: float
    sigma: float
    branch: int  # 1: D < sqrt(AB), 2: D >= sqrt(AB)
    sup_v0: float
    holds: bool

    def margin(self, v) -> np.ndarray:
        """C σ + D σ v - A σ² v² - B; positive where the inequality holds."""
        v = np.asarray(v, dtype=float)
        s = self.sigma
        return self.C * s + self.D * s * v - self.A * s * s * v * v - self.B


def _quad_holds(A, B, C, D, s, V) -> bool:
    # convex in v, so the two endpoints decide it
    return all(C * s + D * s * v - A * s * s * v * v - B > 0 for v in (0.0, V))


def sigma_coefficients(tau: float, chi: float, p: float, sup_v0: float,
                       eps2: float = DEFAULT_EPS2, d_sign: int = -1) -> SigmaCoefficients:
    """Coefficients and σ for A σ² v² + B < C σ + D σ v on [0, sup_v0].

    ``d_sign=-1`` gives the reference form D = -χτ*. Expanding the energy
    derivative directly yields D = +χτ* (``d_sign=+1``); the two agree for
    τ = 1. See :func:`dissipation_bracket`.
    """
    if d_sign not in (-1, 1):
        raise ValueError("d_sign must be -1 or +1")
    if chi == 0:
        raise ValueError("sigma is undefined for chi = 0 (B vanishes)")
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not tau > 0:
        raise ValueError("tau must be positive")
    if sup_v0 < 0:
        raise ValueError("sup_v0 must be >= 0")
    ts = 1.0 / tau - 1.0
    A = ts * ts / (p - 1.0) + 4.0 / (tau * p * (p - 1.0))
    B = chi * chi * (p - 1.0) / 4.0
    C = 2.0 / (tau * p)
    D = d_sign * chi * ts
    rAB = math.sqrt(A * B)
    if D < rAB:
        s = math.sqrt(B) * (2.0 * rAB - D) / (C * math.sqrt(A))
        return SigmaCoefficients(p, A, B, C, D, eps2, s, 1, sup_v0,
                                 _quad_holds(A, B, C, D, s, sup_v0))
    # second branch: ε'' must be small enough; shrink the requested one if needed
    e = eps2
    for _ in range(80):
        s = B / C + e
        if _quad_holds(A, B, C, D, s, sup_v0):
            return SigmaCoefficients(p, A, B, C, D, e, s, 2, sup_v0, True)
        e *= 0.5
    s = B / C + eps2
    return SigmaCoefficients(p, A, B, C, D, eps2, s, 2, sup_v0, False)


def default_exponent(n: int) -> float:
    return max(1.0, n / 2.0) + 0.5


def sigma(model: ModelSpec, p: Optional[float], sup_v0: float, n: Optional[int] = None,
          eps2: float = DEFAULT_EPS2) -> SigmaCoefficients:
    """σ for the weight φ(v) = exp(σ v²) of the consumption-model energy."""
    if model.variant is not Variant.CONSUMPTION:
        raise ValueError("sigma is only defined for the consumption model")
    if p is None:
        if n is None:
            raise ValueError("need either p or n")
        p = default_exponent(n)
    if n is not None and not p > max(1.0, n / 2.0):
        raise ValueError(f"p must exceed max(1, n/2) = {max(1.0, n / 2.0)}")
    return sigma_coefficients(model.tau, model.chi, p, sup_v0, eps2)


def dissipation_bracket(v, sigma_value: float, chi: float, tau: float, p: float,
                        eps: float = 0.0, eps_prime: float = 0.0) -> np.ndarray:
    """Coefficient of ∫u^p φ(v)|∇v|²ψ after absorbing the ∇u cross term.

    The energy argument needs this to be negative on [0, ‖v0‖∞]. With
    ε = ε' = 0 it equals A σ²v² + B - Cσ - χτ*σv, i.e. the quadratic form
    with ``d_sign=+1``.
    """
    v = np.asarray(v, dtype=float)
    s = sigma_value
    cross = 2.0 * s * v + 2.0 * s * v / tau - chi * (p - 1.0)
    return (cross**2 / (4.0 * (p - 1.0) * (1.0 - eps)) + eps_prime + 2.0 * s * chi * v
            - (2.0 * s + 4.0 * s * s * v * v) / (tau * p))


def elliptic_threshold(n: int) -> float:
    """n / (n-2)_+, infinite for n <= 2."""
    return math.inf if n <= 2 else n / (n - 2.0)


def elliptic_exponent(chi: float, mu: float, b: float, n: int) -> Optional[float]:
    """Some p > max(1, n/2) with b > μχ(p-1)/p, or None if no such p exists."""
    lo = max(1.0, n / 2.0)
    prod = chi * mu
    p_default = lo + 0.5
    if prod <= b:
        return p_default
    p_max = 1.0 / (1.0 - b / prod)
    if p_max <= lo:
        return None
    return p_default if p_default < p_max else 0.5 * (lo + p_max)


@dataclass(frozen=True)
class ThresholdReport:
    variant: Variant
    n: int
    dstar: float
    cstar_lower: float
    abs_const: float
    thm12_ok: Optional[bool]
    thm13_ok: Optional[bool]
    thm14_ok: Optional[bool]
    rmk15_ok: Optional[bool]
    binding: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        # strict JSON has no NaN; undefined quantities become null
        def num(x):
            return x if math.isfinite(x) else None

        return {
            "variant": self.variant.value,
            "n": self.n,
            "dstar": num(self.dstar),
            "cstar_lower": num(self.cstar_lower),
            "abs_const": self.abs_const,
            "thm12_ok": self.thm12_ok,
            "thm13_ok": self.thm13_ok,
            "thm14_ok": self.thm14_ok,
            "rmk15_ok": self.rmk15_ok,
            "binding": dict(self.binding),
        }

    def format(self) -> str:
        lines = [f"variant      {self.variant.value}", f"n            {self.n}"]
        lines.append(f"dstar        {self.dstar!r}")
        lines.append(f"cstar_lower  {self.cstar_lower!r}  (abs_const={self.abs_const!r})")
        for key in ("thm12_ok", "thm13_ok", "thm14_ok", "rmk15_ok"):
            val = getattr(self, key)
            label = "n/a" if val is None else str(val).lower()
            extra = self.binding.get(key[:-3], "")
            lines.append(f"{key:<12} {label}" + (f"  [{extra}]" if extra else ""))
        return "\n".join(lines)


def check_conditions(model: ModelSpec, n: int, sup_v0: float = 0.0, abs_const: float = 1.0,
                     gamma_grid: Optional[Iterable[float]] = None) -> ThresholdReport:
    """Evaluate every applicable sufficient condition for ``model`` in dimension n.

    When both constants of the consumption condition succeed, the explicit
    D* is reported as binding because it does not depend on ``abs_const``.
    """
    if sup_v0 < 0:
        raise ValueError("sup_v0 must be >= 0")
    cs = cstar_lower(n, abs_const, gamma_grid)
    b, chi = model.b, model.chi
    binding = {}
    ds = math.nan
    thm12 = thm13 = thm14 = rmk15 = None
    v = model.variant
    if v is Variant.CONSUMPTION:
        ds = dstar(model.tau, n, chi)
        lhs = abs(chi) * sup_v0
        if lhs < ds:
            thm12, binding["thm12"] = True, "Dstar"
        elif lhs < b * cs:
            thm12, binding["thm12"] = True, "Cstar"
        else:
            thm12, binding["thm12"] = False, "none"
    elif v is Variant.PARABOLIC:
        ds = dstar(model.tau, n, chi)
        thm13 = abs(chi) * model.mu < b * cs
        binding["thm13"] = "Cstar" if thm13 else "none"
        if model.tau == 1.0:
            rmk15 = chi * model.mu < 4.0 * b / n
            binding["rmk15"] = "4b/n"
        else:
            binding["rmk15"] = "requires tau=1"
    else:
        thr = elliptic_threshold(n)
        thm14 = chi * model.mu < b * thr
        binding["thm14"] = "n<=2: any chi" if math.isinf(thr) else "b*n/(n-2)"
    return ThresholdReport(v, n, ds, cs, abs_const, thm12, thm13, thm14, rmk15, binding)
