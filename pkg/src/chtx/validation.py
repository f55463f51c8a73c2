"""Self-checks behind the ``validate`` subcommand.

Each check returns ``Check(name, passed, detail)``. They cover the
threshold identities, the maximal-regularity constant, the σ construction,
the weight bounds and the spectral operators; the slower solver studies
live in the test suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import thresholds as th
from .model import Field, Grid
from .operators import SpectralPlan, semigroup_gradient_bound_check
from .weights import WeightSpec, psi_gradient, psi_laplacian, psi_values


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


def check_dstar_identities() -> Check:
    worst = 0.0
    for n in range(2, 13):
        for chi in (-2.0, 0.5, 3.0):
            worst = max(worst, abs(th.dstar(1.0, n, chi) - math.sqrt(2.0 / n)))
    # τ=2, n=2, χ>0: n*=1, τ*=-1/2, j=-1, α=3/4 > 1/2, D* = (2/2)(3/2 - 1/2)^{-1}
    hand = abs(th.dstar(2.0, 2, 1.0) - 1.0)
    ok = worst < 1e-12 and hand < 1e-12
    return Check("dstar identities", ok, f"max|D*(1,n)-sqrt(2/n)|={worst:.2e}, |D*(2,2)-1|={hand:.2e}")


def check_cgamma(samples: int = 1000, seed: int = 1) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        g = float(rng.uniform(2.01, 40.0))
        n = int(rng.integers(1, 6))
        C = float(rng.uniform(0.1, 3.0))
        direct = g * math.log(C) - (g - 1.0) * math.log(g - 2.0) + 9.0 * n * (g - 2.0) * math.log(2.0)
        got = th.log_cgamma_bound(g, n, C)
        worst = max(worst, abs(got - direct) / max(1.0, abs(direct)))
    halves = all(
        abs(th.cstar_lower(n, 2.0 * C) - 0.5 * th.cstar_lower(n, C)) <= 1e-12 * th.cstar_lower(n, C)
        for n in (1, 2, 3, 5) for C in (0.5, 1.0, 3.0)
    )
    return Check("cgamma bound", worst < 1e-12 and halves,
                 f"max rel dev of log value={worst:.2e}, halving exact={halves}")


def check_sigma(samples: int = 100, seed: int = 2) -> Check:
    rng = np.random.default_rng(seed)
    bad = 0
    done = 0
    while done < samples:
        tau = float(np.exp(rng.uniform(np.log(0.05), np.log(20.0))))
        chi = float(rng.choice([-1, 1]) * np.exp(rng.uniform(np.log(0.1), np.log(5.0))))
        p = float(rng.uniform(1.05, 4.0))
        limit = th.dstar_at_exponent(tau, p, chi) / abs(chi)
        V = float(rng.uniform(0.0, 0.999) * limit)
        sc = th.sigma_coefficients(tau, chi, p, V)
        vs = np.linspace(0.0, V, 200)
        if not np.all(sc.margin(vs) > 0):
            bad += 1
        done += 1
    closed = max(
        abs(th.sigma_coefficients(1.0, chi, p, 0.1).sigma - p * (p - 1) * chi * chi / 4)
        / (p * (p - 1) * chi * chi / 4)
        for chi in (-3.0, -0.5, 1.0, 2.0) for p in (1.5, 2.0, 3.7)
    )
    return Check("sigma construction", bad == 0 and closed < 1e-12,
                 f"violations={bad}/{samples}, tau=1 closed-form rel dev={closed:.2e}")


def check_weight_bounds(points: int = 10_000, seed: int = 3) -> Check:
    rng = np.random.default_rng(seed)
    margin = 1e-12
    failures = []
    for n in (1, 2, 3):
        for k1 in (0.1, 0.5, 2.0):
            spec = WeightSpec(k1, n)
            X = rng.uniform(-30.0, 30.0, size=(n, points))
            psi = psi_values(spec, X)
            grad = psi_gradient(spec, X)
            gnorm = np.sqrt(sum(g * g for g in grad))
            lap = np.abs(psi_laplacian(spec, X))
            decay = np.exp(-spec.kappa2 * np.sqrt((X * X).sum(axis=0)))
            # scale-aware margin: psi underflows far out, so compare relative to psi
            ok = (np.all(psi > 0)
                  and np.all(psi <= decay * (1 + margin))
                  and np.all(gnorm <= k1 * psi * (1 + margin))
                  and np.all(lap <= k1 * psi * (1 + margin)))
            if not ok:
                failures.append((n, k1))
    return Check("weight bounds", not failures, f"failures={failures}")


def check_operators(random_cases: int = 500, seed: int = 4) -> Check:
    rng = np.random.default_rng(seed)
    g = Grid(1, math.pi, 64)
    plan = SpectralPlan(g)
    x = g.coords()[0]
    errs = {}
    k = 3.0
    f = np.cos(k * x)
    errs["laplacian"] = np.abs(plan.lap(f) + k * k * f).max()
    errs["heat"] = np.abs(plan.heat(f, 0.3, 0.0, 1.0) - np.exp(-k * k * 0.3) * f).max()
    errs["resolve"] = np.abs(plan.resolve(f, 2.0, 1.5) - 1.5 / (2.0 + k * k) * f).max()
    r = rng.standard_normal(64)
    r[10:-9] = 0.0
    rf = np.fft.ifft(r).real * 64
    comp = np.abs(plan.heat(plan.heat(rf, 0.2, 1.0, 1.0), 0.3, 1.0, 1.0)
                  - plan.heat(rf, 0.5, 1.0, 1.0)).max()
    ok_sym = all(e < 1e-8 for e in errs.values()) and comp < 1e-11
    fails = 0
    g2 = Grid(2, math.pi, 32)
    plan2 = SpectralPlan(g2)
    xs = g2.coords()
    for _ in range(random_cases):
        n_modes = 4
        comps = []
        for _c in range(2):
            acc = np.zeros(g2.shape)
            for _m in range(n_modes):
                kx, ky = rng.integers(-6, 7, size=2)
                acc += rng.standard_normal() * np.cos(kx * xs[0] + ky * xs[1] + rng.uniform(0, 2 * np.pi))
            comps.append(Field(g2, acc))
        t = float(np.exp(rng.uniform(np.log(0.01), np.log(5.0))))
        lhs, rhs = semigroup_gradient_bound_check(comps, t, plan2)
        if not lhs <= rhs * (1 + 1e-6):
            fails += 1
    detail = ", ".join(f"{k}={v:.1e}" for k, v in errs.items())
    return Check("operator symbols", ok_sym and fails == 0,
                 f"{detail}, composition={comp:.1e}, gradient-bound failures={fails}/{random_cases}")


ALL_CHECKS = (check_dstar_identities, check_cgamma, check_sigma, check_weight_bounds, check_operators)


def run_all() -> list:
    out = []
    for fn in ALL_CHECKS:
        t0 = time.perf_counter()
        try:
            c = fn()
        except Exception as exc:  # a crashing check is a failing check
            c = Check(fn.__name__, False, f"raised {type(exc).__name__}: {exc}")
        c.seconds = time.perf_counter() - t0
        out.append(c)
    return out
