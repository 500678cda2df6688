"""Command-line front end: ``weakkam <command> [options]``.

Graph systems are read from the JSON graph format, value functions from
``state,value`` CSV, Lagrangians from their JSON config.  JSON goes to stdout
(or ``--output``); numbers carry 12 significant digits.  Exit status is 0 on
success, 1 for computation errors or failed audits and 2 for usage errors,
including unreadable or malformed input files.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys as _sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._config import ENV_VAR, resolve_tol
from .audit import run_audit
from .cohomology import alpha_sweep, equivariant_solution
from .critical import aubry, critical_value, weak_kam
from .graphspace import GraphFormatError, InvariantError, load_system, system_to_dict
from .laxoleinik import format_number, read_values, write_values
from .lagrangian import aubry_star, discretize, load_lagrangian, pendulum, twist_audit
from .subsolution import AuditError, pin_to, regularize, strict_subsolution

__all__ = ["main", "build_parser", "UsageError"]


class UsageError(Exception):
    pass


def _clean(obj):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, frozenset, set)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_clean(v) for v in items]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        x = float(format_number(x))
        return int(x) if x.is_integer() and abs(x) < 2 ** 53 else x
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=False) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        _sys.stdout.write(text)


def _emit_side(text: str, args) -> None:
    """Secondary artifact (audit JSON): ``--audit-output`` or stdout once the main output went to a file."""
    if args.audit_output:
        Path(args.audit_output).write_text(text)
    elif args.output:
        _sys.stdout.write(text)
    else:
        _sys.stderr.write(text)


def _values_csv(u) -> str:
    buf = io.StringIO()
    write_values(u, buf)
    return buf.getvalue()


def _require(path: str | None, flag: str = "--input") -> Path:
    if not path:
        raise UsageError(f"{flag} is required")
    p = Path(path)
    if not p.exists() or p.is_dir():
        raise UsageError(f"{flag}: file not found: {path}")
    return p


def _system(args):
    p = _require(args.input)
    try:
        return load_system(p)
    except (GraphFormatError, InvariantError) as exc:
        raise UsageError(f"{p}: {exc}") from None


def _values(args):
    p = _require(args.values, "--values")
    try:
        return read_values(p)
    except ValueError as exc:
        raise UsageError(f"{p}: {exc}") from None


def _lagrangian(args, default=None):
    if not args.input and default is not None:
        return default
    p = _require(args.input)
    try:
        return load_lagrangian(p)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{p}: {exc}") from None


# -- commands ------------------------------------------------------------------

def cmd_critical(args) -> int:
    cv = critical_value(_system(args), args.method, args.exact)
    _emit(_dumps(cv.to_dict()), args.output)
    return 0


def cmd_weak_kam(args) -> int:
    u = weak_kam(_system(args), args.side, args.exact, args.tol)
    _emit(_values_csv(u), args.output)
    return 0


def cmd_aubry(args) -> int:
    _emit(_dumps(aubry(_system(args), args.exact, args.tol).to_dict()), args.output)
    return 0


def cmd_strict(args) -> int:
    u0, audit = strict_subsolution(_system(args), args.exact, args.tol)
    _emit(_values_csv(u0), args.output)
    if args.audit:
        _emit_side(_dumps(audit.to_dict()), args)
    return 0 if audit.passed else 1


def cmd_pin(args) -> int:
    sys = _system(args)
    u, audit = pin_to(_values(args), sys, args.tol)
    _emit(_values_csv(u), args.output)
    if args.audit:
        _emit_side(_dumps(audit.to_dict()), args)
    return 0


def cmd_regularize(args) -> int:
    sys = _system(args)
    _emit(_values_csv(regularize(_values(args), sys, args.tol)), args.output)
    return 0


def cmd_lagrangian_cost(args) -> int:
    L = _lagrangian(args)
    N = args.grid if args.grid is not None else L.grid
    if N is None:
        raise UsageError("grid size missing: pass --grid or set \"grid\" in the config")
    _emit(_dumps(system_to_dict(discretize(L, N))), args.output)
    return 0


def cmd_twist_audit(args) -> int:
    report = twist_audit(_lagrangian(args, pendulum()), sample_count=args.samples)
    _emit(_dumps(report), args.output)
    return 0 if report["pass"] else 1


def cmd_aubry_star(args) -> int:
    L = _lagrangian(args, pendulum())
    _, report = aubry_star(L, args.grid if args.grid is not None else (L.grid or 128))
    _emit(_dumps(report), args.output)
    return 0 if report["pass"] else 1


def cmd_alpha_sweep(args) -> int:
    sys = _system(args)
    if sys.winding_dim != 1:
        raise UsageError("alpha-sweep needs a system with winding_dim 1")
    if args.steps < 1:
        raise UsageError("--steps must be positive")
    grid = np.linspace(args.h_min, args.h_max, args.steps + 1)
    curve = alpha_sweep(sys, grid, args.tol)
    _emit(curve.to_csv(), args.output)
    _emit_side(_dumps(curve.to_dict()), args)
    return 0 if curve.passed else 1


def cmd_equivariant(args) -> int:
    sys = _system(args)
    try:
        h = [float(t) for t in args.h.split(",")]
    except ValueError:
        raise UsageError(f"--h: expected comma-separated numbers, got {args.h!r}") from None
    u, cover, report = equivariant_solution(sys, h, args.copies, args.tol)
    keys = [(i % sys.n, ";".join(str(int(g)) for g in cover.deck[i])) for i in range(len(u))]
    buf = io.StringIO()
    write_values(u, buf, key_header="state,deck", keys=keys)
    _emit(buf.getvalue(), args.output)
    _emit_side(_dumps(report), args)
    return 0 if report["pass"] else 1


def cmd_audit(args) -> int:
    report = run_audit(_system(args), seed=args.seed, instances=args.instances, tol=args.tol)
    _emit(_dumps(report), args.output)
    return 0 if report["pass"] else 1


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="graph JSON (or Lagrangian JSON for Lagrangian commands)")
    common.add_argument("--output", help="write the main artifact here instead of stdout")
    common.add_argument("--tol", type=float, default=None,
                        help=f"tolerance (default: ${ENV_VAR} or 1e-9)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1,
                        help="accepted for compatibility; inner loops are vectorized")

    p = argparse.ArgumentParser(prog="weakkam", description="Discrete weak KAM tools.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("critical", cmd_critical, "critical value and witness cycle")
    sp.add_argument("--method", choices=["karp", "bisect", "brute"], default="karp")
    sp.add_argument("--exact", action="store_true", help="rational arithmetic")

    sp = add("weak-kam", cmd_weak_kam, "weak KAM solution as value CSV")
    sp.add_argument("--side", choices=["minus", "plus"], default="minus")
    sp.add_argument("--exact", action="store_true")

    sp = add("aubry", cmd_aubry, "Aubry nodes and pairs")
    sp.add_argument("--exact", action="store_true")

    sp = add("strict", cmd_strict, "subsolution strict off the Aubry set")
    sp.add_argument("--exact", action="store_true")
    sp.add_argument("--audit", action="store_true", help="also emit the strictness audit JSON")
    sp.add_argument("--audit-output")

    for name, func, help_ in (("pin", cmd_pin, "strict subsolution equal to a given one on its Aubry set"),
                              ("regularize", cmd_regularize, "negative then positive Lax-Oleinik step")):
        sp = add(name, func, help_)
        sp.add_argument("--values", help="value CSV with header state,value")
        if name == "pin":
            sp.add_argument("--audit", action="store_true")
            sp.add_argument("--audit-output")

    sp = add("lagrangian-cost", cmd_lagrangian_cost, "discretize a Lagrangian to a graph JSON")
    sp.add_argument("--grid", type=int)

    sp = add("twist-audit", cmd_twist_audit, "sampled twist conditions of a Lagrangian cost")
    sp.add_argument("--samples", type=int, default=100)

    sp = add("aubry-star", cmd_aubry_star, "Aubry set of a discretized Lagrangian in the cotangent bundle")
    sp.add_argument("--grid", type=int)

    sp = add("alpha-sweep", cmd_alpha_sweep, "Mather alpha function on a grid of classes")
    sp.add_argument("--h-min", type=float, required=True)
    sp.add_argument("--h-max", type=float, required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--audit-output")

    sp = add("equivariant", cmd_equivariant, "lifted equivariant weak KAM solution")
    sp.add_argument("--h", required=True, help="class, comma-separated")
    sp.add_argument("--copies", type=int, required=True)
    sp.add_argument("--audit-output")

    sp = add("audit", cmd_audit, "invariant suite on one system")
    sp.add_argument("--instances", type=int, default=20)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        try:
            resolve_tol(args.tol)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if args.threads < 1:
            raise UsageError("--threads must be positive")
        if args.output and args.input and Path(args.output).resolve() == Path(args.input).resolve():
            raise UsageError("--output must differ from --input")
        return args.func(args)
    except UsageError as exc:
        print(f"weakkam {args.command}: {exc}", file=_sys.stderr)
        return 2
    except AuditError as exc:
        print(f"weakkam {args.command}: {exc}", file=_sys.stderr)
        if exc.audit is not None:
            print(_dumps(exc.audit.to_dict()), end="", file=_sys.stderr)
        return 1
    except (ValueError, ArithmeticError, RuntimeError, AssertionError) as exc:
        print(f"weakkam {args.command}: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
