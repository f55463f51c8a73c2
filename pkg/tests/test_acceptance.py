"""Acceptance criteria 1-10.

Each test records a one-line verdict; ``conftest.py`` prints the block at
the end of the session and ``python3 tests/test_acceptance.py`` prints it
directly.
"""

import math
import time

import numpy as np
import pytest

from chtx import harness, io as chtx_io, solver, validation
from chtx.cli import main as cli_main
from chtx.diagnostics import DiagnosticsConfig, Recorder, make_lyapunov_spec
from chtx.model import Field, Grid, ModelSpec, State, Variant
from chtx.operators import SpectralPlan

VERDICTS = {}


def _report(num, title, ok, detail, t0):
    line = f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail} ({time.perf_counter() - t0:.1f}s)"
    VERDICTS[num] = line
    print(line)
    return ok


def _check_fast(num, title, fn, budget):
    t0 = time.perf_counter()
    c = fn()
    elapsed = time.perf_counter() - t0
    ok = c.passed and elapsed < budget
    _report(num, title, ok, f"{c.detail}; budget {budget}s", t0)
    assert c.passed, c.detail
    assert elapsed < budget


def test_c01_threshold_identities():
    _check_fast(1, "threshold identities", validation.check_dstar_identities, 1.0)


def test_c02_cgamma_formula():
    _check_fast(2, "maximal-regularity constant", validation.check_cgamma, 1.0)


def test_c03_sigma_construction():
    _check_fast(3, "sigma construction", validation.check_sigma, 1.0)


def test_c04_weight_bounds():
    _check_fast(4, "weight bounds", validation.check_weight_bounds, 5.0)


def test_c05_operator_symbols():
    _check_fast(5, "operator symbols", validation.check_operators, 30.0)


# ---------------------------------------------------------------- 6


def _fixed_dt_run(state, model, plan, dt, t_end, scheme=solver.Scheme.IMEX2):
    cfg = solver.SolverConfig(dt=dt, t_end=t_end, scheme=scheme)
    for _ in range(int(round(t_end / dt))):
        state = solver.step(state, model, cfg, plan, dt=dt)
    return state


def test_c06_solver_verification():
    t0 = time.perf_counter()
    g = Grid(1, 16.0, 256)
    plan = SpectralPlan(g)
    x = g.coords()[0]

    # logistic ODE: spatially constant u, chi = 0
    m = ModelSpec(Variant.CONSUMPTION, chi=0.0, a=1.0, b=1.0, tau=1.0)
    u0 = 0.1
    s = _fixed_dt_run(State(0.0, Field.constant(g, u0), Field.zeros(g)), m, plan, 1e-3, 1.0)
    exact = 1.0 / (1.0 + (1.0 / u0 - 1.0) * math.exp(-1.0))
    err_ode = float(np.abs(s.u.values - exact).max())

    # Fisher-KPP: a/b attracts every positive datum
    kpp0 = State(0.0, Field(g, 0.5 + 0.1 * np.cos(math.pi * x / g.half_width)), Field.zeros(g))
    s = _fixed_dt_run(kpp0, m, plan, 0.05, 20.0)
    err_kpp = float(np.abs(s.u.values - m.a / m.b).max())

    # Richardson order on the same problem, dt = 0.1, 0.05, 0.025 to t = 2
    sols = [_fixed_dt_run(kpp0, m, plan, dt, 2.0).u.values for dt in (0.1, 0.05, 0.025)]
    order = math.log2(np.abs(sols[0] - sols[1]).max() / np.abs(sols[1] - sols[2]).max())

    elapsed = time.perf_counter() - t0
    ok = err_ode < 1e-6 and err_kpp < 1e-4 and order >= 1.8 and elapsed < 120
    _report(6, "solver verification", ok,
            f"logistic err={err_ode:.2e}, KPP err={err_kpp:.2e}, IMEX2 order={order:.3f}", t0)
    assert err_ode < 1e-6
    assert err_kpp < 1e-4
    assert order >= 1.8
    assert elapsed < 120


# ---------------------------------------------------------------- 7


def _random_smooth(rng, x, L, base):
    f = np.full_like(x, base)
    for k in range(1, 6):
        f += rng.normal() * 0.3 / k * np.cos(math.pi * k * x / L + rng.uniform(0, 2 * math.pi))
    return np.exp(f)


def test_c07_comparison_principle():
    t0 = time.perf_counter()
    g = Grid(1, 16.0, 256)
    plan = SpectralPlan(g)
    x = g.coords()[0]
    rng = np.random.default_rng(7)
    m = ModelSpec(Variant.CONSUMPTION, chi=1.0, a=1.0, b=1.0, tau=1.0)
    cfg = solver.SolverConfig(dt=0.01, t_end=5.0)
    worst = -math.inf
    steps = 0
    for _ in range(5):
        s = State(0.0, Field(g, _random_smooth(rng, x, 16.0, 0.0)),
                  Field(g, _random_smooth(rng, x, 16.0, -1.0)))
        prev = s.v.values.max()
        while s.t < cfg.t_end - 1e-12:
            s = solver.step(s, m, cfg, plan)
            cur = s.v.values.max()
            worst = max(worst, cur - prev)
            prev = cur
            steps += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 60
    _report(7, "comparison principle", ok, f"largest per-step increase of sup v={worst:.2e} over {steps} steps", t0)
    assert worst <= 1e-10
    assert elapsed < 60


# ---------------------------------------------------------------- 8


def test_c08_lyapunov_bound():
    t0 = time.perf_counter()
    g = Grid(1, 32.0, 256)
    plan = SpectralPlan(g)
    x = g.coords()[0]
    m = ModelSpec(Variant.CONSUMPTION, chi=1.0, a=1.0, b=1.0, tau=1.0)
    init = State(0.0, Field(g, 0.5 + 0.4 * np.exp(-x * x / 2)),
                 Field(g, 0.5 * np.exp(-(x - 1) ** 2 / 4)))
    spec = make_lyapunov_spec(m, g, sup_v0=0.5)
    rec = Recorder(g, DiagnosticsConfig((2.0,), 0.5, spec), plan, init)
    out = solver.run(init, m, solver.SolverConfig(dt=0.01, t_end=50.0), plan, rec, rec.trace)
    L = np.asarray(rec.trace.lyapunov)
    bound = rec.trace.lyapunov_bound
    ratio = float(L.max() / bound)
    elapsed = time.perf_counter() - t0
    ok = (out.classified is solver.Classification.COMPLETED and ratio <= 1.05
          and len(L) > 10 and elapsed < 120)
    _report(8, "energy bound", ok,
            f"max energy/bound={ratio:.4f} over {len(L)} snapshots, p={spec.p:g}, "
            f"sigma={spec.sigma.sigma:.4g}, M={spec.M:.4g}", t0)
    assert out.classified is solver.Classification.COMPLETED
    assert ratio <= 1.05
    assert elapsed < 120


# ---------------------------------------------------------------- 9

REGIME_BASE = """
model: {variant: parabolic_production, chi: 1.0, a: 1.0, b: 1.0, lam: 1.0, mu: 1.0, tau: 1.0}
grid: {dim: 2, half_width: 16.0, points_per_dim: 128}
solver: {dt: 0.01, t_end: 10.0, snapshot_every: 20}
initial_data:
  u: {kind: gaussian, amplitude: 2.0, width: 1.5}
  v: {kind: constant, value: 0.0}
diagnostics: {p: [2.0], lyapunov: false}
"""

# mass 8 / w^2 * 2 pi w^2 = 16 pi; the factor 100 detector is explained in the README
CONTROL = """
model: {variant: parabolic_production, chi: 1.0, a: 0.0, b: 0.0, lam: 1.0, mu: 1.0, tau: 1.0}
grid: {dim: 2, half_width: 4.0, points_per_dim: 256}
solver: {dt: 0.001, t_end: 5.0, snapshot_every: 50, blowup_sup_factor: 100.0}
initial_data:
  u: {kind: gaussian, amplitude: 32.0, width: 0.5}
  v: {kind: constant, value: 0.0}
diagnostics: {p: [2.0], lyapunov: false}
"""


@pytest.mark.slow
def test_c09_regime_experiment(tmp_path):
    t0 = time.perf_counter()
    base = harness.loads_experiment(REGIME_BASE)
    # chi*mu/b runs over {0.25, 0.5, 0.75, 0.95} and {1, 1.5, 1.9} times 4/n
    sw = harness.SweepConfig(base, (("chi", (0.5, 1.0, 1.5, 1.9, 2.0, 3.0, 3.8)),))
    rows = harness.sweep(sw, tmp_path / "sweep")
    n, b = base.grid.dim, base.model.b
    sub = [r for r in rows if r["chi"] * base.model.mu < 4 * b / n]
    sup = [r for r in rows if r not in sub]
    cells_ok = bool(sub) and all(r["classification"] == "CompletedBounded" and r["plateau"] for r in sub)

    ctrl = harness.run_experiment(harness.loads_experiment(CONTROL), write=False)
    o = ctrl.outcome
    ctrl_ok = o.t_stop < 5.0 and (o.classified is solver.Classification.BLOWUP or o.growth >= 1e3)

    elapsed = time.perf_counter() - t0
    ok = cells_ok and ctrl_ok and elapsed < 600
    _report(9, "regime experiment", ok,
            f"{sum(r['classification'] == 'CompletedBounded' for r in sub)}/{len(sub)} subcritical cells bounded "
            f"and plateauing ({len(sup)} cells past the condition, not asserted: "
            f"{','.join(r['classification'] for r in sup)}); control {o.classified.value} at t={o.t_stop:.3f} with growth {o.growth:.3g}", t0)
    assert cells_ok, rows
    assert ctrl_ok
    assert elapsed < 600


# ---------------------------------------------------------------- 10


def test_c10_tooling(tmp_path, capsys):
    t0 = time.perf_counter()
    code = cli_main(["validate"])

    rng = np.random.default_rng(10)
    snaps_ok = True
    for dim, N in ((1, 8), (2, 16), (3, 8)):
        f = Field(Grid(dim, 3.5, N), rng.standard_normal((N,) * dim) * 1e3)
        p = chtx_io.write_snapshot(f, tmp_path / f"s{dim}.chtx")
        back = chtx_io.read_snapshot(p)
        snaps_ok &= back.grid == f.grid and back.values.tobytes() == f.values.tobytes()

    res = harness.run_experiment(harness.loads_experiment(REGIME_BASE.replace("t_end: 10.0", "t_end: 0.2")
                                                          .replace("snapshot_every: 20", "snapshot_every: 2")),
                                 output_dir=tmp_path / "run")
    back = chtx_io.read_trace(tmp_path / "run" / "trace.csv")
    a, bb = res.trace.as_array(), back.as_array()
    csv_ok = a.shape == bb.shape and a.tobytes() == bb.tobytes()

    ok = code == 0 and snaps_ok and csv_ok
    capsys.readouterr()
    _report(10, "tooling", ok, f"validate exit={code}, snapshot bitwise={snaps_ok}, trace CSV lossless={csv_ok}", t0)
    assert code == 0
    assert snaps_ok
    assert csv_ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
