"""Command-line front end: verify, convergence, workprecision, list-methods, list-problems.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from . import __version__
from .bench import (
    ConfigError,
    ExperimentConfig,
    _parse_tspan,
    estimate_order,
    parse_config,
    parse_method_spec,
    run_convergence,
    run_workprecision,
    write_csv,
)
from .bseries import Poly, symbolic_conditions
from .bseries.conditions import order_conditions
from .integrators import default_mode, mode_label
from .methods import METHODS, get_method, validate_tableau
from .problems import PROBLEMS, RESERVED, get_problem

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="epirk-bench", description="EPIRK-W/K order checks and benchmarks")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="generate order conditions and check a tableau")
    v.add_argument("--method", action="append", required=True)
    v.add_argument("--family", choices=("W", "K", "classical"), help="condition family (default: method's own)")
    v.add_argument("--tol", type=float, help="largest |residual| treated as zero")
    v.add_argument("--quiet", action="store_true", help="only print the summary")

    def runner(name, help_text):
        r = sub.add_parser(name, help=help_text)
        r.add_argument("--config", help="flat key=value experiment file")
        r.add_argument("--method", action="append", help="NAME or NAME@MODE, repeatable")
        r.add_argument("--mode", help="exact, diag, identity, zero, krylov:M or classical:TOL")
        r.add_argument("--problem")
        r.add_argument("--tspan", help="a:b")
        r.add_argument("--out", help="CSV path (default stdout)")
        r.add_argument("--serial", action="store_true", default=None, help="run cells one at a time (default)")
        r.add_argument("--parallel", dest="serial", action="store_false", help="run cells in a thread pool")
        return r

    c = runner("convergence", "fixed-step runs over h0 / 2^i")
    c.add_argument("--h0", type=float)
    c.add_argument("--halvings", type=int)

    w = runner("workprecision", "adaptive runs over a tolerance grid")
    w.add_argument("--rtol", type=float, action="append")
    w.add_argument("--atol", type=float, help="absolute tolerance (default: equal to rtol)")

    sub.add_parser("list-methods", help="registered tableaus")
    sub.add_parser("list-problems", help="registered test problems")
    return p


# verify -----------------------------------------------------------------


def _exact(r) -> Fraction:
    return r.constant_term() if isinstance(r, Poly) else Fraction(r)


def _fmt_residual(r) -> str:
    r = _exact(r)
    return "0" if r == 0 else f"{float(r):.3e}"


def cmd_verify(name: str, family: str | None = None, tol: float | None = None, quiet=False, out=None) -> int:
    out = out or sys.stdout
    tab = get_method(name)
    family = family or tab.family
    rep = validate_tableau(tab, family=family, tol=tol)
    if not quiet:
        symbolic = {c.tree.key: c.residual for c in symbolic_conditions(tab.s, tab.order, family)}
        for embedded, q in ((False, tab.order), (True, tab.embedded_order)):
            label = "embedded" if embedded else "main"
            print(f"{label} weights, {family} conditions up to order {q}:", file=out)
            for c in order_conditions(tab, q, family, embedded):
                print(f"  {c.name:8s} order {c.order}  residual {_fmt_residual(c.residual)}", file=out)
                poly = symbolic[c.tree.key]
                if embedded:
                    poly = str(poly).replace("b[", "bhat[")
                print(f"           {poly} = 0", file=out)
        nxt = [c for c in order_conditions(tab, tab.order + 1, family) if c.order == tab.order + 1 and _exact(c.residual) != 0]
        if nxt and tab.order + 1 <= 4:
            worst = max(nxt, key=lambda c: abs(_exact(c.residual)))
            print(f"order {tab.order + 1} not reached: {len(nxt)} nonzero residuals, largest {worst.name} "
                  f"= {_fmt_residual(worst.residual)}", file=out)
            if family == "W":
                const = _w14_constant(tab.s)
                if const is not None:
                    print(f"tauW14 residual has constant term {const} for any {tab.s}-stage W scheme", file=out)
    print(rep.summary(), file=out)
    return EXIT_OK if rep.order_ok else EXIT_NUMERIC


def _w14_constant(s: int):
    for c in symbolic_conditions(s, 4, "W"):
        if c.name == "tauW14":
            return _exact(c.residual)
    return None


# runners ----------------------------------------------------------------


def _config_from_args(args, experiment: str) -> ExperimentConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = parse_config(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        cfg.experiment = experiment
    else:
        cfg = ExperimentConfig(experiment=experiment)
    if args.method:
        cfg.methods = [parse_method_spec(m, args.mode) for m in args.method]
    elif args.mode:
        cfg.methods = [parse_method_spec(s.name, args.mode) for s in cfg.methods]
    if args.problem:
        cfg.problem = args.problem
    if args.tspan:
        cfg.tspan = _parse_tspan(args.tspan)
    if args.out:
        cfg.out = args.out
    if args.serial is not None:
        cfg.serial = args.serial
    if experiment == "convergence":
        if args.h0 is not None:
            cfg.h0 = args.h0
        if args.halvings is not None:
            cfg.halvings = args.halvings
    else:
        if args.rtol:
            cfg.rtols = tuple(args.rtol)
        if args.atol is not None:
            cfg.atol = args.atol
    return cfg.validate()


def _emit(rows, cfg, extra_comments, out):
    comments = list(cfg.echo()) + list(extra_comments)
    if cfg.out:
        write_csv(rows, cfg.out, comments)
    else:
        write_csv(rows, out, comments)


def cmd_convergence(cfg: ExperimentConfig, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    rows = run_convergence(cfg, log=err)
    orders = []
    for spec in cfg.methods:
        mine = [r for r in rows if r.method == spec.name and r.mode == spec.mode]
        try:
            q = estimate_order([r.h_or_rtol for r in mine], [r.error for r in mine])
            orders.append(f"result order {spec.label} = {q:.6f}")
        except ValueError as exc:
            orders.append(f"result order {spec.label} = nan ({exc})")
    _emit(rows, cfg, orders, out)
    for line in orders:
        print(line, file=err if not cfg.out else out)
    return EXIT_OK if all(r.status == "ok" for r in rows) else EXIT_NUMERIC


def cmd_workprecision(cfg: ExperimentConfig, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    rows = run_workprecision(cfg, log=err)
    _emit(rows, cfg, (), out)
    return EXIT_OK if all(r.status == "ok" for r in rows) else EXIT_NUMERIC


def cmd_list_methods(out=None) -> int:
    out = out or sys.stdout
    for name in METHODS:
        t = get_method(name)
        print(f"{name:18s} family {t.family:9s} stages {t.s}  order {t.order}  embedded {t.embedded_order}  "
              f"default mode {mode_label(default_mode(t))}", file=out)
    return EXIT_OK


def cmd_list_problems(out=None) -> int:
    out = out or sys.stdout
    for name in PROBLEMS:
        p = get_problem(name)
        print(f"{name:14s} dim {p.dim:6d}  tspan {p.tspan[0]:g}:{p.tspan[1]:g}", file=out)
    for name, why in RESERVED.items():
        print(f"{name:14s} not implemented ({why})", file=out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            code = EXIT_OK
            for name in args.method:
                if name not in METHODS:
                    raise UsageError(f"unknown method {name!r}; known: {', '.join(METHODS)}")
                code = max(code, cmd_verify(name, args.family, args.tol, args.quiet))
            return code
        if args.command == "list-methods":
            return cmd_list_methods()
        if args.command == "list-problems":
            return cmd_list_problems()
        cfg = _config_from_args(args, args.command)
        if args.command == "convergence":
            return cmd_convergence(cfg)
        return cmd_workprecision(cfg)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
