"""Time integration of the three chemotaxis systems.

The scheme is operator splitting in Fourier space. Diffusion is integrated
exactly with heat-semigroup symbols; for the parabolic production model the
whole linear signal equation τv_t = Δv - λv + μu, driven by the diffusing u,
is integrated exactly per mode, so constant equilibria are preserved to
roundoff. Chemotactic transport and the remaining reactions are explicit.

* IMEX1: Lie splitting, exact diffusion over dt then one forward-Euler step.
* IMEX2: Strang splitting, half diffusion, SSP-RK2 (Heun) explicit step,
  half diffusion.

For the elliptic model v is never stepped: it is re-solved from u with the
resolvent after every u update, including the intermediate RK stage.

A candidate step is rejected (and dt halved) when it violates the
positivity slack min u >= -tol_pos * max(1, max u); the solver never clamps.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

import numpy as np

from . import kernels
from .model import DEFAULT_TOL_POS, Field, ModelSpec, State, Variant
from .operators import SpectralPlan

log = logging.getLogger(__name__)

EPS_DIV = 1e-30


class Scheme(str, enum.Enum):
    IMEX1 = "IMEX1"
    IMEX2 = "IMEX2"


class Classification(str, enum.Enum):
    COMPLETED = "CompletedBounded"
    BLOWUP = "BlowUpDetected"
    COLLAPSE = "StepCollapse"


class StepCollapse(RuntimeError):
    """Step size fell below the minimum while trying to satisfy the invariants."""


class ContractionError(RuntimeError):
    """Picard iteration stopped contracting; the horizon is too long."""


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    safety: float = 0.5
    blowup_sup_factor: float = 1e6
    blowup_abs: float = 1e12
    scheme: Scheme = Scheme.IMEX2
    snapshot_every: int = 10
    tol_pos: float = DEFAULT_TOL_POS
    min_dt: float = 1e-12
    max_steps: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be >= 0")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")

    def to_dict(self) -> dict:
        d = {
            "dt": self.dt,
            "t_end": self.t_end,
            "safety": self.safety,
            "blowup_sup_factor": self.blowup_sup_factor,
            "blowup_abs": self.blowup_abs,
            "scheme": self.scheme.value,
            "snapshot_every": self.snapshot_every,
            "tol_pos": self.tol_pos,
            "min_dt": self.min_dt,
        }
        if self.max_steps is not None:
            d["max_steps"] = self.max_steps
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        return cls(**d)


@dataclass
class RunOutcome:
    final: State
    classified: Classification
    t_stop: float
    trace: object = None
    steps: int = 0
    rejected: int = 0
    initial_sup_u: float = 0.0
    max_sup_u: float = 0.0

    @property
    def growth(self) -> float:
        """max over the run of sup u, relative to the initial sup u."""
        if self.initial_sup_u > 0:
            return self.max_sup_u / self.initial_sup_u
        return math.inf if self.max_sup_u > 0 else 1.0


class _Stepper:
    """Array-level integrator bound to one model and plan."""

    def __init__(self, model: ModelSpec, plan: SpectralPlan):
        self.model = model
        self.plan = plan
        self.variant = model.variant
        self._symbols = {}

    def _linear_symbols(self, s):
        """Per-mode propagator of u_t = Δu, τv_t = Δv - λv + μu over time s.

        Returns (e^{-k²s}, e^{-as}, μ/τ · (e^{-k²s} - e^{-as}) / (a - k²)) with
        a = (k² + λ)/τ; the last factor tends to μ/τ · s e^{-k²s} as a -> k².
        """
        sym = self._symbols.get(s)
        if sym is None:
            m, k2 = self.model, self.plan.ksq
            a = (k2 + m.lam) / m.tau
            d = a - k2
            Eu = np.exp(-k2 * s)
            Ev = np.exp(-a * s)
            safe = np.where(d == 0.0, 1.0, d)
            coup = np.where(d == 0.0, s * Eu, Eu * -np.expm1(-safe * s) / safe) * (m.mu / m.tau)
            sym = (Eu, Ev, coup)
            if len(self._symbols) > 8:
                self._symbols.clear()
            self._symbols[s] = sym
        return sym

    def resolve(self, u):
        return self.plan.resolve(u, self.model.lam, self.model.mu)

    def diffuse(self, u, v, s):
        m, plan = self.model, self.plan
        if self.variant is Variant.PARABOLIC:
            # the signal source μu is linear, so it is integrated exactly with the diffusion
            Eu, Ev, coup = self._linear_symbols(s)
            uh, vh = plan.forward(u), plan.forward(v)
            return plan.backward(Eu * uh), plan.backward(Ev * vh + coup * uh)
        u = plan.heat(u, s, 0.0, 1.0)
        if self.variant is Variant.CONSUMPTION:
            v = plan.heat(v, s, 0.0, m.tau)
        else:
            v = self.resolve(u)
        return u, v

    def euler(self, u, v, dt):
        m, plan = self.model, self.plan
        u1 = kernels.logistic_update(u, m.a, m.b, dt)
        if m.chi != 0.0:
            fluxes = [kernels.flux(u, g) for g in plan.grad(v)]
            u1 = u1 - (dt * m.chi) * plan.div(fluxes)
        if self.variant is Variant.CONSUMPTION:
            v1 = kernels.consumption_update(v, u, m.tau, dt)
        elif self.variant is Variant.PARABOLIC:
            v1 = v  # all of the signal equation is in the linear substep
        else:
            v1 = self.resolve(u1)
        return u1, v1

    def heun(self, u, v, dt):
        u1, v1 = self.euler(u, v, dt)
        u2, v2 = self.euler(u1, v1, dt)
        un = 0.5 * (u + u2)
        vn = self.resolve(un) if self.variant is Variant.ELLIPTIC else 0.5 * (v + v2)
        return un, vn

    def advance(self, u, v, dt, scheme: Scheme):
        if scheme is Scheme.IMEX1:
            u, v = self.diffuse(u, v, dt)
            return self.euler(u, v, dt)
        u, v = self.diffuse(u, v, 0.5 * dt)
        u, v = self.heun(u, v, dt)
        return self.diffuse(u, v, 0.5 * dt)

    def stable_dt(self, u, v, cfg: SolverConfig) -> float:
        m = self.model
        _, umax = kernels.min_max(u)
        umax = max(umax, 0.0)
        dt = cfg.dt
        if m.chi != 0.0:
            gv = self.plan.sup_grad_norm(v)
            dt = min(dt, cfg.safety * self.plan.grid.spacing / (abs(m.chi) * gv + EPS_DIV))
        dt = min(dt, cfg.safety / (m.a + 2.0 * m.b * umax + EPS_DIV))
        if self.variant is Variant.CONSUMPTION:
            dt = min(dt, cfg.safety * m.tau / (umax + EPS_DIV))
        return dt


def _positivity_ok(arr, tol_pos) -> bool:
    lo, hi = kernels.min_max(arr)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return True  # non-finite values are a blow-up signal, handled by the caller
    return lo >= -tol_pos * max(1.0, hi)


def _finite(*arrs) -> bool:
    return all(bool(np.all(np.isfinite(a))) for a in arrs)


def _plan_for(state: State, plan: Optional[SpectralPlan]) -> SpectralPlan:
    if plan is None:
        return SpectralPlan(state.grid)
    if plan.grid != state.grid:
        raise ValueError("plan and state live on different grids")
    return plan


def consistent_signal(u: Field, model: ModelSpec, plan: Optional[SpectralPlan] = None) -> Field:
    """Elliptic-model signal slaved to ``u``."""
    plan = plan or SpectralPlan(u.grid)
    return Field(u.grid, plan.resolve(u.values, model.lam, model.mu))


def _attempt(stepper: _Stepper, state: State, cfg: SolverConfig, dt: float):
    """Take one accepted step of size <= dt; returns (state, dt_used, rejections)."""
    u, v = state.u.values, state.v.values
    rejected = 0
    while True:
        if dt < cfg.min_dt:
            raise StepCollapse(f"dt fell to {dt:.3e} at t={state.t:.6g}")
        un, vn = stepper.advance(u, v, dt, cfg.scheme)
        if not _finite(un, vn):
            return State(state.t + dt, Field(state.grid, un), Field(state.grid, vn), True), dt, rejected
        if _positivity_ok(un, cfg.tol_pos) and _positivity_ok(vn, cfg.tol_pos):
            return State(state.t + dt, Field(state.grid, un), Field(state.grid, vn)), dt, rejected
        rejected += 1
        dt *= 0.5


def step(state: State, model: ModelSpec, cfg: SolverConfig, plan: Optional[SpectralPlan] = None,
         dt: Optional[float] = None) -> State:
    """Advance one accepted step.

    ``dt`` defaults to ``cfg.dt`` reduced by the transport and reaction
    stability restrictions. A non-finite result comes back flagged
    ``blown_up``; a step that cannot meet the positivity slack above
    ``cfg.min_dt`` raises :class:`StepCollapse`.
    """
    if state.blown_up:
        raise ValueError("cannot step a blown-up state")
    plan = _plan_for(state, plan)
    stepper = _Stepper(model, plan)
    if dt is None:
        dt = stepper.stable_dt(state.u.values, state.v.values, cfg)
    new, _, _ = _attempt(stepper, state, cfg, dt)
    return new


Hook = Callable[[State], None]


def _as_hooks(hooks) -> list:
    if hooks is None:
        return []
    if callable(hooks):
        return [hooks]
    return list(hooks)


def run(initial: State, model: ModelSpec, cfg: SolverConfig, plan: Optional[SpectralPlan] = None,
        hooks: "Hook | Iterable[Hook] | None" = None, trace=None) -> RunOutcome:
    """Step from ``initial`` to ``cfg.t_end``, a blow-up, or a step collapse.

    ``hooks`` are called with the initial state, then every
    ``cfg.snapshot_every`` accepted steps, and with the final state.
    """
    plan = _plan_for(initial, plan)
    hooks = _as_hooks(hooks)
    stepper = _Stepper(model, plan)
    state = initial
    if model.variant is Variant.ELLIPTIC:
        state = State(initial.t, initial.u, consistent_signal(initial.u, model, plan))
    _, sup0 = kernels.min_max(state.u.values)
    sup_threshold = cfg.blowup_sup_factor * sup0 if sup0 > 0 else math.inf
    max_sup = sup0
    for h in hooks:
        h(state)
    steps = rejected = 0
    recorded = True
    classified = Classification.COMPLETED
    t_end = cfg.t_end
    t_eps = 1e-12 * max(1.0, abs(t_end))
    while state.t < t_end - t_eps:
        if cfg.max_steps is not None and steps >= cfg.max_steps:
            break
        dt = min(stepper.stable_dt(state.u.values, state.v.values, cfg), t_end - state.t)
        try:
            new, _, rej = _attempt(stepper, state, cfg, dt)
        except StepCollapse as exc:
            log.info("step collapse: %s", exc)
            classified = Classification.COLLAPSE
            break
        rejected += rej
        steps += 1
        if abs(new.t - t_end) <= t_eps:
            new.t = t_end
        sup = math.inf if new.blown_up else kernels.min_max(new.u.values)[1]
        if not math.isfinite(sup):
            sup = math.inf
        max_sup = max(max_sup, sup)
        if new.blown_up or sup > sup_threshold or sup > cfg.blowup_abs:
            new.blown_up = True
            state = new
            classified = Classification.BLOWUP
            for h in hooks:
                h(state)
            recorded = True
            break
        state = new
        recorded = steps % cfg.snapshot_every == 0
        if recorded:
            for h in hooks:
                h(state)
    if not recorded:
        for h in hooks:
            h(state)
    return RunOutcome(state, classified, state.t, trace, steps, rejected, sup0, max_sup)


# ---------------------------------------------------------------- Picard


def picard_mild(initial: State, model: ModelSpec, cfg: Optional[SolverConfig] = None,
                plan: Optional[SpectralPlan] = None, iterations: int = 8, horizon: float = 0.1,
                subintervals: int = 64, return_distances: bool = False):
    """Fixed-point iteration of the Duhamel (mild) form on [t0, t0 + horizon].

    With T(t) = e^{(Δ-1)t},

        u(t) = T(t)u0 + ∫ T(t-s) [-χ∇·(u∇v) + u(1 + a - bu)] ds
        v(t) = T(t/τ)v0 + (1/τ) ∫ T((t-s)/τ) g(u, v) ds

    with g = (1-u)v for consumption and (1-λ)v + μu for parabolic
    production. Time integrals use the composite midpoint rule, the
    integrand at a midpoint being built from the average of the iterate at
    the two neighbouring nodes. A test oracle for ``step``, not a
    production path.
    """
    if model.variant is Variant.ELLIPTIC:
        raise ValueError("Picard validation is only set up for the parabolic systems")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not 1 <= subintervals <= 64:
        raise ValueError("subintervals must lie in [1, 64]")
    plan = _plan_for(initial, plan)
    m = subintervals
    h = horizon / m
    tau = model.tau
    fwd, bwd = plan.forward, plan.backward
    ksq1 = plan.ksq + 1.0
    Su_h, Su_half = np.exp(-ksq1 * h), np.exp(-ksq1 * h / 2)
    Sv_h, Sv_half = np.exp(-ksq1 * h / tau), np.exp(-ksq1 * h / (2 * tau))
    u0h, v0h = fwd(initial.u.values), fwd(initial.v.values)

    # zeroth iterate: free evolution at every node
    U = [initial.u.values]
    V = [initial.v.values]
    cu, cv = u0h, v0h
    for _ in range(m):
        cu, cv = Su_h * cu, Sv_h * cv
        U.append(bwd(cu))
        V.append(bwd(cv))

    distances = []
    for it in range(iterations):
        Fu, Fv = [], []
        for j in range(m):
            um = 0.5 * (U[j] + U[j + 1])
            vm = 0.5 * (V[j] + V[j + 1])
            fu = um * (1.0 + model.a - model.b * um)
            fu_h = fwd(fu)
            if model.chi != 0.0:
                fu_h = fu_h - model.chi * fwd(plan.div([um * g for g in plan.grad(vm)]))
            if model.variant is Variant.CONSUMPTION:
                fv = (1.0 - um) * vm
            else:
                fv = (1.0 - model.lam) * vm + model.mu * um
            Fu.append(fu_h)
            Fv.append(fwd(fv) / tau)
        newU, newV = [initial.u.values], [initial.v.values]
        free_u, free_v = u0h, v0h
        Gu = np.zeros_like(u0h)
        Gv = np.zeros_like(v0h)
        for i in range(m):
            free_u, free_v = Su_h * free_u, Sv_h * free_v
            Gu = Su_h * Gu + Su_half * Fu[i]
            Gv = Sv_h * Gv + Sv_half * Fv[i]
            newU.append(bwd(free_u + h * Gu))
            newV.append(bwd(free_v + h * Gv))
        d = max(max(float(np.abs(a - b).max()) for a, b in zip(newU, U)),
                max(float(np.abs(a - b).max()) for a, b in zip(newV, V)))
        if distances and d > 2.0 * distances[-1]:
            raise ContractionError(
                f"iterate distance grew from {distances[-1]:.3e} to {d:.3e} at iteration {it}"
            )
        if not math.isfinite(d):
            raise ContractionError("Picard iterate became non-finite")
        distances.append(d)
        U, V = newU, newV

    out = State(initial.t + horizon, Field(initial.grid, U[-1]), Field(initial.grid, V[-1]))
    if return_distances:
        return out, distances
    return out
