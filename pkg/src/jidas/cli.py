"""Command-line front end.

Exit codes: 0 on success, 1 on a domain error (a JSON line ``{"error": ...,
"message": ...}`` goes to stderr), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .binary_adder import BinaryAdderParams, build, sweep_csv, budget_sweep
from .channel import SdMacSpec, validate
from .errors import JidasError
from .idf_code import build_idf_code
from .region import KINDS, OptConfig, kind_name, region_csv, region_sweep
from .sim import DEFAULT_SEED, TrialPlan, run_trials


class UsageError(Exception):
    pass


def parse_vector(text: str, cast=float) -> list:
    try:
        return [cast(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise UsageError(f"cannot parse comma list {text!r}") from None


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` with ``stop`` included (to within a millionth of a step)."""
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"grid must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise UsageError("grid needs step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-6)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def _budget(args, spec: SdMacSpec) -> list[float]:
    D = parse_vector(args.D)
    if len(D) == 1:
        D = D * spec.num_senders
    if len(D) != spec.num_senders:
        raise UsageError(f"--D needs {spec.num_senders} values, got {len(D)}")
    return D


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _opt_config(args) -> OptConfig:
    cfg = OptConfig()
    if getattr(args, "refine", None):
        cfg = OptConfig(grid=cfg.grid, refine=args.refine)
    return cfg


def cmd_validate(args) -> int:
    report = validate(SdMacSpec.load(args.spec))
    if report.ok:
        print("OK")
        return 0
    report.raise_for_error()
    return 1


def cmd_region(args) -> int:
    spec = SdMacSpec.load(args.spec)
    kinds = [kind_name(k) for k in parse_vector(args.kind, str)] if args.kind else list(KINDS)
    if args.D and args.grid:
        raise UsageError("give either --D or --grid, not both")
    if args.D:
        budgets = [_budget(args, spec)]
    elif args.grid:
        budgets = [[g] * spec.num_senders for g in parse_grid(args.grid)]
    else:
        raise UsageError("region needs --D or --grid")
    points = region_sweep(spec, budgets, kinds, _opt_config(args))
    _emit(region_csv(points, spec.num_senders), args.out)
    return 0


def cmd_simulate(args) -> int:
    spec = SdMacSpec.load(args.spec)
    D = _budget(args, spec)
    M = parse_vector(args.M, int)
    N = parse_vector(args.N, int)
    code = build_idf_code(
        spec, D, args.n, args.eps, M, N, args.seed, mode=args.mode, max_error=args.max_error, cfg=_opt_config(args)
    )
    plan = TrialPlan(args.trials, seed=args.seed, identities=args.identities)
    stats = run_trials(spec, code, plan)
    text = stats.to_json() + "\n" if args.format == "json" else stats.to_csv()
    _emit(text, args.out)
    return 0


def cmd_example(args) -> int:
    params = BinaryAdderParams(args.p)
    if args.spec_out:
        build(params).dump(args.spec_out)
    grid = parse_grid(args.grid) if args.grid else None
    rows = budget_sweep(params, grid, mode=args.layout, cfg=_opt_config(args))
    _emit(sweep_csv(rows, mode=args.layout), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jidas", description="Joint identification and sensing over state-dependent MACs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a channel description")
    v.add_argument("--spec", required=True)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("region", help="rate lower bounds for distortion budgets")
    r.add_argument("--spec", required=True)
    r.add_argument("--kind", help="comma list of det,rand,sep (default: all)")
    r.add_argument("--D", help="comma list of per-sender budgets (one value applies to all)")
    r.add_argument("--grid", help="start:stop:step, same budget for every sender")
    r.add_argument("--refine", type=float, help="finest lattice step of the randomized search")
    r.add_argument("--out")
    r.set_defaults(func=cmd_region)

    s = sub.add_parser("simulate", help="build a code and measure its errors")
    s.add_argument("--spec", required=True)
    s.add_argument("--D", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--M", required=True, help="comma list of color counts")
    s.add_argument("--N", required=True, help="comma list of identity counts")
    s.add_argument("--mode", choices=["det", "rand"], default="det")
    s.add_argument("--trials", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--identities", choices=["random", "pairs"], default="random")
    s.add_argument("--max-error", type=float, default=0.1, help="color-code error target")
    s.add_argument("--refine", type=float)
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("example", help="worked examples")
    ex = e.add_subparsers(dest="example", required=True)
    b = ex.add_parser("binary-adder", help="two-sender binary adder sweep")
    b.add_argument("--p", type=float, default=0.2)
    b.add_argument("--grid", help="start:stop:step (default: 33 points on [0, p])")
    b.add_argument("--layout", choices=["diagonal", "2d"], default="diagonal")
    b.add_argument("--refine", type=float)
    b.add_argument("--spec-out", help="also write the channel description here")
    b.add_argument("--out")
    b.set_defaults(func=cmd_example)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except JidasError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 1
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
