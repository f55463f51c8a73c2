"""Experiment configuration, single runs and parameter sweeps.

Configs are YAML mappings; see README for the grammar. Floats are written
with ``repr`` precision so a config survives a dump/load cycle unchanged.
"""

from __future__ import annotations

import copy
import csv
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import io as chtx_io
from .diagnostics import (DiagnosticsConfig, Recorder, make_lyapunov_spec, plateaus)
from .model import Field, Grid, ModelSpec, State, Variant
from .operators import SpectralPlan
from .solver import Classification, RunOutcome, SolverConfig, consistent_signal, run
from .thresholds import check_conditions

log = logging.getLogger(__name__)

SWEEP_AXES = ("chi", "b", "mu", "tau", "sup_v0")
DEFAULT_SWEEP_CAP = 256


class ConfigError(ValueError):
    """Malformed configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: tuple = (), line: Optional[int] = None,
                 source: Optional[str] = None):
        self.path = tuple(path)
        self.line = line
        self.source = source
        super().__init__(message)

    def __str__(self):
        where = self.source or "<config>"
        if self.line is not None:
            where += f":{self.line}"
        key = ".".join(str(p) for p in self.path)
        msg = super().__str__()
        return f"{where}: {key + ': ' if key else ''}{msg}"


# ---------------------------------------------------------------- initial data

PROFILE_KEYS = {
    "constant": {"value"},
    "gaussian": {"amplitude", "width", "center", "background"},
    "cosine": {"base", "amp", "mode", "random_phase"},
}


@dataclass(frozen=True)
class Profile:
    """Tagged initial profile for one field.

    constant: value
    gaussian: amplitude * exp(-|x - center|² / (2 width²)) + background
    cosine:   base + amp * mean_i cos(π mode x_i / L + phase_i), phases drawn
              from the experiment seed when random_phase is set
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROFILE_KEYS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        extra = set(self.params) - PROFILE_KEYS[self.kind]
        if extra:
            raise ValueError(f"unknown keys for {self.kind} profile: {sorted(extra)}")

    def sample(self, grid: Grid, rng: np.random.Generator) -> np.ndarray:
        P = self.params
        xs = grid.coords()
        if self.kind == "constant":
            return np.full(grid.shape, float(P.get("value", 0.0)))
        if self.kind == "gaussian":
            c = P.get("center") or [0.0] * grid.dim
            if len(c) != grid.dim:
                raise ValueError("gaussian center must have one coordinate per dimension")
            r2 = sum((x - ci) ** 2 for x, ci in zip(xs, c))
            w = float(P["width"])
            return float(P["amplitude"]) * np.exp(-r2 / (2 * w * w)) + float(P.get("background", 0.0))
        L = grid.half_width
        mode = float(P.get("mode", 1))
        phases = rng.uniform(0, 2 * np.pi, grid.dim) if P.get("random_phase") else np.zeros(grid.dim)
        acc = sum(np.cos(np.pi * mode * x / L + ph) for x, ph in zip(xs, phases)) / grid.dim
        return float(P.get("base", 0.0)) + float(P.get("amp", 0.0)) * acc

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind is None:
            raise ValueError("profile needs a 'kind'")
        return cls(kind, d)


@dataclass(frozen=True)
class InitialData:
    u: Profile
    v: Profile = Profile("constant", {"value": 0.0})
    sup_v0: Optional[float] = None  # rescale v so that max v0 equals this

    def build(self, model: ModelSpec, grid: Grid, seed: int,
              plan: Optional[SpectralPlan] = None) -> State:
        rng = np.random.default_rng(seed)
        u = Field(grid, self.u.sample(grid, rng))
        if model.variant is Variant.ELLIPTIC:
            return State(0.0, u, consistent_signal(u, model, plan))
        v = self.v.sample(grid, rng)
        if self.sup_v0 is not None:
            vmax = float(v.max())
            v = v * (self.sup_v0 / vmax) if vmax > 0 else np.full(grid.shape, float(self.sup_v0))
        return State(0.0, u, Field(grid, v))

    def to_dict(self) -> dict:
        d = {"u": self.u.to_dict(), "v": self.v.to_dict()}
        if self.sup_v0 is not None:
            d["sup_v0"] = self.sup_v0
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "InitialData":
        v = d.get("v")
        return cls(Profile.from_dict(d["u"]),
                   Profile.from_dict(v) if v is not None else Profile("constant", {"value": 0.0}),
                   d.get("sup_v0"))


@dataclass(frozen=True)
class DiagnosticsSettings:
    p: tuple = (2.0,)
    kappa1: float = 0.5
    lyapunov: bool = True
    abs_const: float = 1.0
    write_fields: bool = False

    def to_dict(self) -> dict:
        return {"p": list(self.p), "kappa1": self.kappa1, "lyapunov": self.lyapunov,
                "abs_const": self.abs_const, "write_fields": self.write_fields}

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticsSettings":
        d = dict(d)
        if "p" in d:
            p = d["p"]
            d["p"] = tuple(float(x) for x in (p if isinstance(p, (list, tuple)) else [p]))
        return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    grid: Grid
    solver: SolverConfig
    initial_data: InitialData
    diagnostics: DiagnosticsSettings = DiagnosticsSettings()
    seed: int = 0
    output_dir: str = "runs/experiment"

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "grid": self.grid.to_dict(),
            "solver": self.solver.to_dict(),
            "initial_data": self.initial_data.to_dict(),
            "diagnostics": self.diagnostics.to_dict(),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def with_param(self, name: str, value: float) -> "ExperimentConfig":
        if name == "sup_v0":
            return replace(self, initial_data=replace(self.initial_data, sup_v0=float(value)))
        if name == "mu" and self.model.variant is Variant.CONSUMPTION:
            raise ValueError("consumption model has no mu")
        if name == "tau" and self.model.variant is Variant.ELLIPTIC:
            raise ValueError("elliptic model has no tau")
        return replace(self, model=replace(self.model, **{name: float(value)}))


# ---------------------------------------------------------------- parsing

_FLOAT_KEYS = {
    "model": {"chi", "a", "b", "lam", "mu", "tau"},
    "grid": {"half_width"},
    "solver": {"dt", "t_end", "safety", "blowup_sup_factor", "blowup_abs", "tol_pos", "min_dt"},
    "diagnostics": {"kappa1", "abs_const"},
}
_SECTION_KEYS = {
    "model": {"variant", "chi", "a", "b", "lam", "mu", "tau"},
    "grid": {"dim", "half_width", "points_per_dim"},
    "solver": {"dt", "t_end", "safety", "blowup_sup_factor", "blowup_abs", "scheme",
               "snapshot_every", "tol_pos", "min_dt", "max_steps"},
    "initial_data": {"u", "v", "sup_v0"},
    "diagnostics": {"p", "kappa1", "lyapunov", "abs_const", "write_fields"},
}
_TOP_KEYS = {"model", "grid", "solver", "initial_data", "diagnostics", "seed", "output_dir"}
_REQUIRED = ("model", "grid", "solver", "initial_data")


def _line_of(node, path) -> Optional[int]:
    """1-based line of the deepest node along ``path`` in a composed YAML tree."""
    if node is None:
        return None
    line = node.start_mark.line + 1
    for key in path:
        if not isinstance(node, yaml.MappingNode):
            break
        for k, v in node.value:
            if k.value == str(key):
                line = k.start_mark.line + 1
                node = v
                break
        else:
            break
    return line


def _coerce(section: str, d: dict) -> dict:
    out = dict(d)
    for k in _FLOAT_KEYS.get(section, ()):
        if k in out and out[k] is not None:
            if isinstance(out[k], bool) or not isinstance(out[k], (int, float)):
                raise ConfigError(f"expected a number, got {out[k]!r}", (section, k))
            out[k] = float(out[k])
    return out


def experiment_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("top level must be a mapping")
    for k in d:
        if k not in _TOP_KEYS:
            raise ConfigError(f"unknown key {k!r}", (k,))
    for k in _REQUIRED:
        if k not in d:
            raise ConfigError(f"missing required section {k!r}")
    for section, keys in _SECTION_KEYS.items():
        if section not in d:
            continue
        if not isinstance(d[section], dict):
            raise ConfigError("must be a mapping", (section,))
        for k in d[section]:
            if k not in keys:
                raise ConfigError(f"unknown key {k!r}", (section, k))

    def build(section, fn):
        try:
            return fn(_coerce(section, d[section]))
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc), (section,)) from None

    model = build("model", ModelSpec.from_dict)
    grid = build("grid", Grid.from_dict)
    solver = build("solver", SolverConfig.from_dict)
    init = build("initial_data", InitialData.from_dict)
    diag = build("diagnostics", DiagnosticsSettings.from_dict) if "diagnostics" in d \
        else DiagnosticsSettings()
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}", ("seed",))
    out = d.get("output_dir", "runs/experiment")
    if not isinstance(out, str):
        raise ConfigError("output_dir must be a string", ("output_dir",))
    return ExperimentConfig(model, grid, solver, init, diag, seed, out)


def _load_yaml(text: str, source: str):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          line=line, source=source) from None
    return node, data


def loads_experiment(text: str, source: str = "<config>") -> ExperimentConfig:
    node, data = _load_yaml(text, source)
    try:
        return experiment_from_dict(data)
    except ConfigError as exc:
        exc.line = _line_of(node, exc.path)
        exc.source = source
        raise


def load_experiment(path) -> ExperimentConfig:
    path = Path(path)
    return loads_experiment(path.read_text(), str(path))


# ---------------------------------------------------------------- single run


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    outcome: RunOutcome
    trace: object
    report: object
    max_local_lp: float
    plateau: bool
    output_dir: Optional[Path] = None

    def summary(self) -> dict:
        return {
            "classification": self.outcome.classified.value,
            "t_stop": self.outcome.t_stop,
            "steps": self.outcome.steps,
            "rejected_steps": self.outcome.rejected,
            "final_sup_u": float(self.outcome.final.u.values.max()),
            "growth": self.outcome.growth,
            "max_local_lp": self.max_local_lp,
            "plateau": self.plateau,
            "thresholds": self.report.to_dict(),
        }


PLOT_SCRIPT = '''"""Plot the diagnostics trace written next to this script."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).with_name("trace.csv")
with path.open() as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
cols = [c for c in rows[0] if c != "t"]
fig, axes = plt.subplots(len(cols), 1, sharex=True, figsize=(7, 2 * len(cols)))
for ax, c in zip(axes, cols):
    ax.plot(t, [float(r[c]) for r in rows])
    ax.set_ylabel(c, fontsize=8)
axes[-1].set_xlabel("t")
fig.tight_layout()
fig.savefig(path.with_suffix(".png"), dpi=120)
'''


def run_experiment(cfg: ExperimentConfig, write: bool = True,
                   output_dir: Optional[os.PathLike] = None) -> ExperimentResult:
    grid, model = cfg.grid, cfg.model
    plan = SpectralPlan(grid)
    initial = cfg.initial_data.build(model, grid, cfg.seed, plan)
    sup_v0 = float(initial.v.values.max())
    lyap = None
    if cfg.diagnostics.lyapunov and model.variant is Variant.CONSUMPTION and model.chi != 0:
        try:
            lyap = make_lyapunov_spec(model, grid, sup_v0)
        except ValueError as exc:
            log.info("energy functional not available: %s", exc)
    diag = DiagnosticsConfig(cfg.diagnostics.p, cfg.diagnostics.kappa1, lyap)
    recorder = Recorder(grid, diag, plan, initial)
    hooks = [recorder]
    out_dir = Path(output_dir or cfg.output_dir) if write else None
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        if cfg.diagnostics.write_fields:
            snap_dir = out_dir / "snapshots"
            snap_dir.mkdir(exist_ok=True)

            def dump_fields(state: State):
                if state.blown_up:
                    return
                stem = f"t{state.t:014.6f}"
                chtx_io.write_snapshot(state.u, snap_dir / f"u_{stem}.chtx")
                chtx_io.write_snapshot(state.v, snap_dir / f"v_{stem}.chtx")

            hooks.append(dump_fields)
    outcome = run(initial, model, cfg.solver, plan, hooks, trace=recorder.trace)
    report = check_conditions(model, grid.dim, sup_v0, cfg.diagnostics.abs_const)
    first_p = cfg.diagnostics.p[0]
    lp = recorder.trace.local_lp[first_p]
    max_lp = float(np.max(lp)) if lp else math.nan
    result = ExperimentResult(cfg, outcome, recorder.trace, report, max_lp, plateaus(lp), out_dir)
    if write:
        (out_dir / "config.yaml").write_text(cfg.dumps())
        chtx_io.write_trace(recorder.trace, out_dir / "trace.csv")
        chtx_io.write_snapshot(initial.u, out_dir / "u_initial.chtx")
        chtx_io.write_snapshot(initial.v, out_dir / "v_initial.chtx")
        chtx_io.write_snapshot(outcome.final.u, out_dir / "u_final.chtx")
        chtx_io.write_snapshot(outcome.final.v, out_dir / "v_final.chtx")
        (out_dir / "summary.json").write_text(json.dumps(result.summary(), indent=1, default=str))
        (out_dir / "plot_trace.py").write_text(PLOT_SCRIPT)
    return result


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepConfig:
    base: ExperimentConfig
    axes: tuple  # ((name, (values...)), ...)
    parallelism: int = 1
    cap: int = DEFAULT_SWEEP_CAP

    def __post_init__(self):
        axes = tuple((str(n), tuple(float(x) for x in vals)) for n, vals in self.axes)
        if not 1 <= len(axes) <= 2:
            raise ValueError("a sweep needs one or two axes")
        for name, vals in axes:
            if name not in SWEEP_AXES:
                raise ValueError(f"cannot sweep {name!r}; choose from {SWEEP_AXES}")
            if not vals:
                raise ValueError(f"axis {name!r} has no values")
        if len({n for n, _ in axes}) != len(axes):
            raise ValueError("duplicate sweep axis")
        object.__setattr__(self, "axes", axes)
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.size > self.cap:
            raise ValueError(f"sweep has {self.size} cells, above the cap of {self.cap}")

    @property
    def size(self) -> int:
        return math.prod(len(v) for _, v in self.axes)

    def cells(self) -> list:
        names = [n for n, _ in self.axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.axes))]

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "axes": {n: list(v) for n, v in self.axes},
                "parallelism": self.parallelism, "cap": self.cap}


def loads_sweep(text: str, source: str = "<config>") -> SweepConfig:
    node, data = _load_yaml(text, source)
    try:
        if not isinstance(data, dict):
            raise ConfigError("top level must be a mapping")
        for k in data:
            if k not in {"base", "axes", "parallelism", "cap"}:
                raise ConfigError(f"unknown key {k!r}", (k,))
        if "base" not in data or "axes" not in data:
            raise ConfigError("sweep needs 'base' and 'axes'")
        base_d = data["base"]
        if isinstance(base_d, str):
            base_path = Path(source).parent / base_d if source != "<config>" else Path(base_d)
            base = load_experiment(base_path)
        else:
            try:
                base = experiment_from_dict(base_d)
            except ConfigError as exc:
                exc.path = ("base",) + exc.path
                raise
        axes = data["axes"]
        if not isinstance(axes, dict):
            raise ConfigError("axes must map parameter names to value lists", ("axes",))
        for name, vals in axes.items():
            if not isinstance(vals, list) or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in vals):
                raise ConfigError("expected a list of numbers", ("axes", name))
        try:
            return SweepConfig(base, tuple(axes.items()), int(data.get("parallelism", 1)),
                               int(data.get("cap", DEFAULT_SWEEP_CAP)))
        except ValueError as exc:
            raise ConfigError(str(exc), ("axes",)) from None
    except ConfigError as exc:
        if exc.line is None:
            exc.line = _line_of(node, exc.path)
        exc.source = exc.source or source
        raise


def load_sweep(path) -> SweepConfig:
    path = Path(path)
    return loads_sweep(path.read_text(), str(path))


def _run_cell(args):
    index, cfg, params, out_dir = args
    res = run_experiment(cfg, write=out_dir is not None,
                         output_dir=None if out_dir is None else Path(out_dir) / f"cell_{index:03d}")
    rep = res.report
    row = {"cell": index, **params}
    row.update({
        "variant": cfg.model.variant.value,
        "n": cfg.grid.dim,
        "dstar": rep.dstar,
        "cstar_lower": rep.cstar_lower,
        "thm12_ok": rep.thm12_ok,
        "thm13_ok": rep.thm13_ok,
        "thm14_ok": rep.thm14_ok,
        "rmk15_ok": rep.rmk15_ok,
        "binding": ";".join(f"{k}={v}" for k, v in sorted(rep.binding.items())),
        "classification": res.outcome.classified.value,
        "t_stop": res.outcome.t_stop,
        "max_local_lp": res.max_local_lp,
        "plateau": res.plateau,
        "growth": res.outcome.growth,
    })
    return row


def worker_count(requested: int) -> int:
    env = os.environ.get("CHTX_THREADS")
    cap = int(env) if env and env.strip().isdigit() and int(env) > 0 else (os.cpu_count() or 1)
    return max(1, min(requested, cap))


def sweep(cfg: SweepConfig, output_dir: Optional[os.PathLike] = None) -> list:
    """Run every cell; rows come back in axis order regardless of completion order."""
    jobs = []
    for i, params in enumerate(cfg.cells()):
        exp = cfg.base
        for name, value in params.items():
            exp = exp.with_param(name, value)
        jobs.append((i, exp, params, None if output_dir is None else str(output_dir)))
    workers = worker_count(cfg.parallelism)
    if workers == 1 or len(jobs) == 1:
        rows = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    if output_dir is not None:
        write_summary(rows, Path(output_dir) / "summary.csv")
    return rows


def _cell_str(x) -> str:
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(x).lower()
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def write_summary(rows: list, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(rows[0].keys())
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell_str(r[c]) for c in cols])
    return path


def read_summary(path) -> list:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
