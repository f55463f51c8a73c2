"""Command line entry point: ``chtx run|sweep|thresholds|validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness, validation
from .model import ModelSpec, Variant
from .thresholds import check_conditions

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def _cmd_run(args) -> int:
    cfg = harness.load_experiment(args.config)
    res = harness.run_experiment(cfg, output_dir=args.output_dir)
    s = res.summary()
    print(f"classification  {s['classification']}")
    print(f"t_stop          {s['t_stop']:.6g}")
    print(f"final sup u     {s['final_sup_u']:.6g}")
    print(f"max local L^p   {s['max_local_lp']:.6g}  (plateau heuristic: {s['plateau']})")
    print(f"output          {res.output_dir}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = harness.load_sweep(args.config)
    out = Path(args.output_dir or cfg.base.output_dir)
    rows = harness.sweep(cfg, out)
    names = [n for n, _ in cfg.axes]
    for r in rows:
        params = " ".join(f"{n}={r[n]:g}" for n in names)
        print(f"cell {r['cell']:3d}  {params:<28} {r['classification']:<17} t_stop={r['t_stop']:.4g}")
    print(f"summary written to {out / 'summary.csv'}")
    return EXIT_OK


def _cmd_thresholds(args) -> int:
    variant = Variant.parse(args.model)
    kw = {"chi": args.chi, "a": args.a, "b": args.b}
    if variant is not Variant.CONSUMPTION:
        kw.update(lam=args.lam, mu=args.mu)
    if variant is not Variant.ELLIPTIC:
        kw["tau"] = args.tau
    try:
        model = ModelSpec(variant, **kw)
        rep = check_conditions(model, args.n, args.sup_v0, args.abs_const)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json:
        print(json.dumps(rep.to_dict(), indent=1))
    else:
        print(rep.format())
    return EXIT_OK


def _cmd_validate(args) -> int:
    checks = validation.run_all()
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"[{status}] {c.name:<22} {c.seconds:6.2f}s  {c.detail}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chtx", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a YAML config")
    p.add_argument("config")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep from a YAML config")
    p.add_argument("config")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("thresholds", help="evaluate the sufficient conditions")
    p.add_argument("--model", required=True,
                   choices=["consumption", "parabolic", "parabolic_production",
                            "elliptic", "elliptic_production"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--chi", type=float, required=True)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--sup-v0", type=float, default=0.0)
    p.add_argument("--abs-const", type=float, default=1.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_thresholds)

    p = sub.add_parser("validate", help="run the built-in identity and property checks")
    p.set_defaults(func=_cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
