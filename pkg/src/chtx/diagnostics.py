"""Boundedness diagnostics recorded along a run.

* sup norms of u, v and |∇v|
* local L^p suprema  sup_{x0} ∫_{B(x0,1)} u^p
* the weighted energy ∫ u^p ψ
* for the consumption model, the energy ∫ u^p exp(σ v²) ψ and its a-priori
  bound max[initial value, (M / (b K_p))^p]

The plateau test on local L^p suprema is a heuristic of this package; no
quantitative rate near blow-up is known.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .model import DEFAULT_TOL_POS, Field, Grid, ModelSpec, State, Variant
from .operators import SpectralPlan
from .thresholds import (SigmaCoefficients, default_exponent, dissipation_bracket,
                         sigma as sigma_for, sigma_coefficients)
from .weights import IntegrityError, WeightSpec, check_nonnegative, make_psi

UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}


class ConfigurationError(ValueError):
    pass


# ---------------------------------------------------------------- local L^p


def ball_indicator(grid: Grid, radius: float = 1.0) -> np.ndarray:
    """Sampled indicator of B(0, radius) on periodic grid offsets.

    1 strictly inside |y| < r - h/2, 1/2 on the shell within h/2 of the
    sphere, 0 outside.
    """
    h = grid.spacing
    N = grid.points_per_dim
    m = np.fft.fftfreq(N, d=1.0 / N) * h  # minimum-image offsets
    r2 = 0.0
    for c in np.meshgrid(*([m] * grid.dim), indexing="ij"):
        r2 = r2 + c * c
    r = np.sqrt(r2)
    w = np.where(r < radius - h / 2, 1.0, 0.0)
    w[np.abs(r - radius) <= h / 2] = 0.5
    return w


@functools.lru_cache(maxsize=16)
def _ball_spectrum(grid: Grid) -> np.ndarray:
    spec = np.fft.rfftn(ball_indicator(grid))
    spec.setflags(write=False)
    return spec


def local_lp_field(u: Field, p: float) -> np.ndarray:
    """∫_{B(x0,1)} u^p for every grid point x0 (periodic FFT convolution)."""
    grid = u.grid
    if p < 1:
        raise ValueError("p must be >= 1")
    if grid.half_width < 2:
        raise ConfigurationError("local L^p needs half_width >= 2")
    if grid.spacing > 0.5:
        raise ConfigurationError(f"grid spacing {grid.spacing} > 0.5 under-resolves the unit ball")
    up = np.maximum(u.values, 0.0) ** p
    conv = np.fft.irfftn(np.fft.rfftn(up) * _ball_spectrum(grid), s=grid.shape,
                         axes=tuple(range(grid.dim)))
    return conv * grid.cell_volume


def local_lp_sup(u: Field, p: float) -> float:
    return float(local_lp_field(u, p).max())


# ---------------------------------------------------------------- energy


@dataclass(frozen=True)
class LyapunovSpec:
    p: float
    sigma: SigmaCoefficients
    psi: Field
    M: float
    K_p: float
    eps: float
    eps_prime: float
    kappa1: float
    sup_v0: float
    b: float
    bracket_ok: bool = True

    @property
    def absorbing_level(self) -> float:
        return (self.M / (self.b * self.K_p)) ** self.p


def _perturbation(kappa1, eps, eps_prime, p, chi, sig, tau, V) -> float:
    drift = max(chi * chi, (chi - 2.0 * sig * V / (tau * p)) ** 2)
    return kappa1**2 / (4.0 * eps * (p - 1.0)) + drift * kappa1**2 / (4.0 * eps_prime)


def make_lyapunov_spec(model: ModelSpec, grid: Grid, sup_v0: float, p: Optional[float] = None,
                       eps: float = 1e-2, eps_prime: float = 1e-2,
                       kappa1: Optional[float] = None, center: Sequence[float] = (),
                       eps2: float = 1e-6) -> LyapunovSpec:
    """Energy weight, σ, M and K_p for a consumption run.

    σ is the reference choice unless, for τ != 1, it leaves the |∇v|²
    coefficient of the energy estimate nonnegative somewhere on [0, ‖v0‖∞];
    then the σ built with the opposite sign of D is used if it works, and
    ``bracket_ok`` is False if neither does. ε and ε' are halved until the
    coefficient stays negative with them included. κ₁ defaults to the largest of 1, 1/2, 1/4, ...
    for which the κ₁-dependent part of M is at most 1.
    """
    if model.variant is not Variant.CONSUMPTION:
        raise ValueError("the energy functional is set up for the consumption model")
    n = grid.dim
    p = default_exponent(n) if p is None else p
    tau, chi = model.tau, model.chi
    vs = np.linspace(0.0, sup_v0, 201)
    sc = sigma_for(model, p, sup_v0, n=n, eps2=eps2)
    if not sc.holds:
        raise ValueError(
            f"|chi|*sup_v0 = {abs(model.chi) * sup_v0:g} is too large for p = {p:g}; "
            "the quadratic condition on sigma fails"
        )
    bracket_ok = bool(np.all(dissipation_bracket(vs, sc.sigma, chi, tau, p) < 0))
    if not bracket_ok:
        # for τ != 1 the reference sign of D can leave the bracket positive;
        # retry with the sign obtained by expanding the energy derivative
        alt = sigma_coefficients(tau, chi, p, sup_v0, eps2, d_sign=+1)
        if alt.holds and np.all(dissipation_bracket(vs, alt.sigma, chi, tau, p) < 0):
            sc, bracket_ok = alt, True
    s = sc.sigma
    if bracket_ok:
        for _ in range(60):
            if np.all(dissipation_bracket(vs, s, chi, tau, p, eps, eps_prime) < 0):
                break
            eps, eps_prime = eps / 2, eps_prime / 2
    if kappa1 is None:
        kappa1 = 1.0
        while _perturbation(kappa1, eps, eps_prime, p, chi, s, tau, sup_v0) > 1.0:
            kappa1 /= 2.0
    psi = make_psi(WeightSpec(kappa1, n, tuple(center)), grid)
    M = model.a + _perturbation(kappa1, eps, eps_prime, p, chi, s, tau, sup_v0)
    int_psi = grid.cell_volume * float(np.sum(psi.values))
    K_p = (math.exp(s * sup_v0**2) * int_psi) ** (-1.0 / p)
    return LyapunovSpec(p, sc, psi, M, K_p, eps, eps_prime, kappa1, sup_v0, model.b, bracket_ok)


def lyapunov(state: State, spec: LyapunovSpec, tol_pos: float = DEFAULT_TOL_POS) -> float:
    """Rectangle rule for ∫ u^p exp(σ v²) ψ."""
    v = state.v.values
    lo, hi = kernels.min_max(v)
    if lo < -tol_pos or hi > spec.sup_v0 + tol_pos:
        raise IntegrityError(
            f"v range [{lo:.6g}, {hi:.6g}] leaves [0, {spec.sup_v0:.6g}] beyond the slack"
        )
    check_nonnegative(state.u.values, tol_pos)
    grid = state.grid
    return grid.cell_volume * kernels.lyapunov_sum(state.u.values, v, spec.psi.values,
                                                   spec.p, spec.sigma.sigma)


def lyapunov_bound(initial: State, spec: LyapunovSpec) -> float:
    return max(lyapunov(initial, spec), spec.absorbing_level)


# ---------------------------------------------------------------- trace


def lp_column(p: float) -> str:
    return f"local_lp_p{float(p):g}"


@dataclass
class DiagnosticsConfig:
    p_values: tuple = (2.0,)
    kappa1: float = 0.5
    lyapunov: Optional[LyapunovSpec] = None

    def __post_init__(self):
        self.p_values = tuple(float(p) for p in self.p_values)
        if not self.p_values:
            raise ValueError("need at least one diagnostic exponent")


@dataclass
class DiagnosticsTrace:
    p_values: tuple
    times: list = field(default_factory=list)
    sup_u: list = field(default_factory=list)
    sup_v: list = field(default_factory=list)
    sup_grad_v: list = field(default_factory=list)
    local_lp: dict = field(default_factory=dict)
    weighted_energy: list = field(default_factory=list)
    lyapunov: list = field(default_factory=list)
    lyapunov_bound: float = math.nan
    blown_up_at: Optional[float] = None

    def __post_init__(self):
        self.p_values = tuple(float(p) for p in self.p_values)
        for p in self.p_values:
            self.local_lp.setdefault(p, [])

    def __len__(self):
        return len(self.times)

    @property
    def columns(self) -> list:
        return (["t", "sup_u", "sup_v", "sup_grad_v"] + [lp_column(p) for p in self.p_values]
                + ["weighted_energy", "lyapunov"])

    def rows(self):
        for i in range(len(self.times)):
            yield ([self.times[i], self.sup_u[i], self.sup_v[i], self.sup_grad_v[i]]
                   + [self.local_lp[p][i] for p in self.p_values]
                   + [self.weighted_energy[i], self.lyapunov[i]])

    def append_row(self, row: Sequence[float]):
        k = len(self.p_values)
        if self.times and not row[0] > self.times[-1]:
            raise ValueError(f"trace times must increase: {row[0]!r} after {self.times[-1]!r}")
        self.times.append(row[0])
        self.sup_u.append(row[1])
        self.sup_v.append(row[2])
        self.sup_grad_v.append(row[3])
        for j, p in enumerate(self.p_values):
            self.local_lp[p].append(row[4 + j])
        self.weighted_energy.append(row[4 + k])
        self.lyapunov.append(row[5 + k])

    def as_array(self) -> np.ndarray:
        return np.array(list(self.rows()), dtype=float).reshape(len(self), len(self.columns))


def record(state: State, trace: DiagnosticsTrace, config: DiagnosticsConfig,
           plan: Optional[SpectralPlan] = None, psi: Optional[Field] = None) -> DiagnosticsTrace:
    """Append every configured metric at ``state.t``.

    A blown-up state only sets ``blown_up_at``; nothing is appended after it.
    Repeated calls at the last recorded time are ignored.
    """
    if trace.blown_up_at is not None:
        return trace
    if state.blown_up:
        trace.blown_up_at = state.t
        return trace
    if trace.times and state.t == trace.times[-1]:
        return trace
    grid = state.grid
    plan = plan or SpectralPlan(grid)
    if psi is None:
        psi = make_psi(WeightSpec(config.kappa1, grid.dim), grid)
    u, v = state.u.values, state.v.values
    row = [state.t, kernels.min_max(u)[1], kernels.min_max(v)[1], plan.sup_grad_norm(v)]
    row += [local_lp_sup(state.u, p) for p in trace.p_values]
    row.append(grid.cell_volume * kernels.weighted_power_sum(u, psi.values, trace.p_values[0]))
    row.append(lyapunov(state, config.lyapunov) if config.lyapunov is not None else math.nan)
    trace.append_row(row)
    return trace


class Recorder:
    """Hook object for :func:`chtx.solver.run` that fills a trace."""

    def __init__(self, grid: Grid, config: DiagnosticsConfig, plan: Optional[SpectralPlan] = None,
                 initial: Optional[State] = None):
        self.config = config
        self.plan = plan or SpectralPlan(grid)
        self.psi = make_psi(WeightSpec(config.kappa1, grid.dim), grid)
        self.trace = DiagnosticsTrace(config.p_values)
        if initial is not None and config.lyapunov is not None:
            self.trace.lyapunov_bound = lyapunov_bound(initial, config.lyapunov)

    def __call__(self, state: State):
        record(state, self.trace, self.config, self.plan, self.psi)


def plateaus(values: Sequence[float], factor: float = 2.0) -> bool:
    """Heuristic: last-quarter max <= factor * max over the middle half."""
    vals = np.asarray(values, dtype=float)
    n = vals.size
    if n < 4 or not np.all(np.isfinite(vals)):
        return False
    mid = vals[n // 4: (3 * n) // 4]
    last = vals[(3 * n) // 4:]
    return bool(last.max() <= factor * mid.max())
