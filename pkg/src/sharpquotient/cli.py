"""Command-line front end.

Exit codes: 0 every check passed, 1 a tolerance check failed, 2 usage or
admissibility error.  Options can also come from ``--config FILE`` holding
``key=value`` lines (keys are option names, ``-`` or ``_`` alike); flags given
on the command line override the file.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import (AdmissibilityError, BranchError, DivergenceSuspected, MembershipWarning,
                     NonConvergence, PoleError, PrecisionError)
from .extremiser import MU_NEGATIVE, MU_POSITIVE, ExtremiserSpec, build, euler_lagrange_residual, \
    lambda_of, near_zero_slope
from .forms import (builtin_functions, form_values, from_expression, identity_check, limit_probe,
                    quotient)
from .kummer import KummerParams, m_derivatives, ode_residual, residual_scale
from .minimiser import BASIS_KINDS, MinimiseOptions, build_basis, eigen_certificate, minimise_quotient
from .problem import ProblemParams, derive
from .quadrature import QuadratureSpec
from .report import (ALPHAS, EPS_ABSOLUTE, EPS_FRACTION, IDENTITY_RTOL, LOWER_BOUND_TOL, QUOTIENT_RTOL,
                     STATUS_FAILED, STATUS_WARNING, ConfigError, Record, SweepConfig, csv_text,
                     exit_code, json_report, run_sweep, write_report)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
KUMMER_RESIDUAL_TOL = 1e-9
ODE_RESIDUAL_TOL = 1e-8
LAMBDA_TOL = 1e-6


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _fmt(v) -> str:
    return "null" if v is None else "%.17g" % v


def _quad_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("quadrature")
    d = QuadratureSpec()
    g.add_argument("--rel-tol", type=float, default=d.rel_tol)
    g.add_argument("--abs-floor", type=float, default=d.abs_floor)
    g.add_argument("--split", type=float, default=d.split)
    g.add_argument("--max-refinements", type=int, default=d.max_refinements)
    g.add_argument("--tail-cut", type=float, default=d.tail_cut)
    g.add_argument("--scheme", choices=("split", "expsinh"), default=d.scheme)
    p.add_argument("--config", metavar="FILE", help="key=value file; command-line flags take precedence")
    return p


def _quad(args) -> QuadratureSpec:
    return QuadratureSpec(rel_tol=args.rel_tol, abs_floor=args.abs_floor, split=args.split,
                          max_refinements=args.max_refinements, tail_cut=args.tail_cut,
                          scheme=args.scheme)


def _params(args) -> ProblemParams:
    return ProblemParams(args.mu, args.eps).check()


def _write_json(path: str | None, payload: dict) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands

def cmd_verify(args, out) -> int:
    params = _params(args)
    spec = _quad(args)
    d = derive(params)
    started = datetime.now(timezone.utc)
    funcs = builtin_functions(params.mu)
    for i, expr in enumerate(args.function or []):
        funcs.append(from_expression(expr, label=f"user[{i}]: {expr}"))
    bs = {"minus": [d.b_minus], "plus": [d.b_plus], "both": [d.b_minus, d.b_plus]}[args.b]
    rec = Record(params.mu, params.eps, d.s, d.sharp_const)
    rec.null_reasons.update({"minimiser_value": "not run by verify", "min_minus_sharp": "not run by verify"})
    details = []
    print(f"mu={params.mu:g} eps={params.eps:g} s={d.s:.17g} sharp_const={d.sharp_const:.17g}", file=out)

    worst = 0.0
    for f in funcs:
        try:
            v = form_values(f, params, spec)
            q = v.A * v.B / (v.D * v.D)
        except (DivergenceSuspected, NonConvergence) as exc:
            print(f"  {f.label}: skipped ({exc})", file=out)
            details.append({"function": f.label, "skipped": str(exc)})
            continue
        ok_ineq = q >= d.sharp_const * (1 - IDENTITY_RTOL)
        if not ok_ineq:
            rec.fail(f"inequality violated by {f.label}")
        print(f"  {f.label}: A={v.A:.17g} B={v.B:.17g} D={v.D:.17g} quotient={q:.17g} "
              f"{'ok' if ok_ineq else 'FAIL'}", file=out)
        entry = {"function": f.label, "A": v.A, "B": v.B, "D": v.D, "quotient": q,
                 "inequality_ok": ok_ineq, "identity": []}
        for b in bs:
            for al in args.alpha or ALPHAS:
                ic = identity_check(f, params, al, b, spec, values=v)
                worst = max(worst, ic.scaled_gap)
                good = ic.scaled_gap <= IDENTITY_RTOL
                if not good:
                    rec.fail(f"identity gap for {f.label}")
                print(f"    identity alpha={al:g} b={b:.17g}: lhs={ic.lhs:.17g} g={ic.g:.17g} "
                      f"gap={ic.gap:.3g} {'ok' if good else 'FAIL'}", file=out)
                entry["identity"].append({"alpha": al, "b": b, "lhs": ic.lhs, "g": ic.g, "gap": ic.gap})
        details.append(entry)
    rec.identity_gap_max = worst

    if params.mu == 0:
        rec.null_reasons["extremal_quotient"] = "no extremiser family for mu = 0"
    elif d.s == 0.0:
        rec.null_reasons["extremal_quotient"] = "s = 0: extremiser outside the energy space"
        rec.warn("membership")
    else:
        ext = build(ExtremiserSpec.for_params(params))
        rec.extremal_quotient = quotient(ext, params, spec)
        if abs(rec.extremal_quotient - d.sharp_const) > QUOTIENT_RTOL * d.sharp_const:
            rec.fail("extremal quotient differs from the sharp constant")
    print(f"extremal_quotient={_fmt(rec.extremal_quotient)} identity_gap_max={worst:.3g} "
          f"status={rec.status}", file=out)
    payload = json_report([rec], started=started)
    payload["details"] = details
    _write_json(args.report, payload)
    return EXIT_FAIL if rec.status == STATUS_FAILED else EXIT_OK


def cmd_extremal(args, out) -> int:
    params = _params(args)
    spec = _quad(args)
    d = derive(params)
    branch = None if args.branch == "auto" else args.branch
    es = ExtremiserSpec.for_params(params, lam=args.lam, C=args.C, branch=branch)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", MembershipWarning)
        f = build(es)
    rec = Record(params.mu, params.eps, d.s, d.sharp_const)
    rec.null_reasons.update({"minimiser_value": "not run by extremal", "min_minus_sharp": "not run by extremal"})
    for w in caught:
        print(f"warning: {w.message}", file=out)
        rec.warn("membership")
    print(f"extremiser {f.label}  (b={es.b:.17g})", file=out)
    result = {"b": es.b, "lambda": args.lam, "C": args.C, "branch": es.branch}

    xs = np.logspace(-4, 4, 50)
    res = euler_lagrange_residual(f, params, args.lam, xs).scaled.max()
    result["ode_residual_max"] = float(res)
    ok = res <= ODE_RESIDUAL_TOL
    print(f"ode residual (scaled, 50 points) = {res:.3g} {'ok' if ok else 'FAIL'}", file=out)
    if not ok:
        rec.fail("ode residual")

    slope = near_zero_slope(f)
    result["near_zero_slope"] = slope
    print(f"near-zero log-log slope = {slope:.6g}", file=out)

    try:
        v = form_values(f, params, spec)
        q = quotient(f, params, spec, values=v)
        lam_est = lambda_of(f, params, spec, values=v)
        ic = identity_check(f, params, args.lam, es.b, spec, values=v)
    except (DivergenceSuspected, NonConvergence, ArithmeticError) as exc:
        rec.null_reasons["extremal_quotient"] = f"{type(exc).__name__}: {exc}"
        print(f"quotient not available: {exc}", file=out)
        if rec.status != STATUS_WARNING:
            rec.fail("quotient evaluation failed")
    else:
        rec.extremal_quotient = q
        rec.identity_gap_max = ic.scaled_gap
        result.update({"A": v.A, "B": v.B, "D": v.D, "lambda_of": lam_est,
                       "identity_lhs": ic.lhs, "identity_g": ic.g})
        good_q = abs(q - d.sharp_const) <= QUOTIENT_RTOL * d.sharp_const
        good_l = abs(lam_est - args.lam) <= LAMBDA_TOL * args.lam
        print(f"quotient = {q:.17g} (sharp {d.sharp_const:.17g}) {'ok' if good_q else 'FAIL'}", file=out)
        print(f"lambda_of = {lam_est:.17g} (built {args.lam:g}) {'ok' if good_l else 'FAIL'}", file=out)
        print(f"identity at alpha=lambda: lhs={ic.lhs:.3g} g={ic.g:.3g}", file=out)
        if not good_q:
            rec.fail("quotient")
        if not good_l:
            rec.fail("lambda_of")

    lp = limit_probe(f, params, [1e-6, 1e6])
    result["limit_probe"] = {"x": lp.x.tolist(), "G1": lp.G1.tolist(), "G2": lp.G2.tolist(), "G3": lp.G3.tolist()}
    for i, x in enumerate(lp.x):
        print(f"limit probe x={x:g}: G1={lp.G1[i]:.3g} G2={lp.G2[i]:.3g} G3={lp.G3[i]:.3g}", file=out)
    print(f"status={rec.status}", file=out)
    payload = json_report([rec])
    payload["details"] = result
    _write_json(args.report, payload)
    return EXIT_FAIL if rec.status == STATUS_FAILED else EXIT_OK


def cmd_kummer(args, out) -> int:
    p = KummerParams(args.b, args.mu, args.z_max)
    w, w1, w2 = m_derivatives(p, args.z)
    r = ode_residual(p, args.z)
    sc = residual_scale(p, args.z)
    scaled = abs(r) / sc
    print(f"1F1({args.b:g}; {args.mu:g}; {args.z:g}) = {w:.17g}", file=out)
    print(f"derivative = {w1:.17g}", file=out)
    print(f"second derivative = {w2:.17g}", file=out)
    print(f"ode residual = {r:.3g} (scaled {scaled:.3g})", file=out)
    return EXIT_OK if scaled <= KUMMER_RESIDUAL_TOL else EXIT_FAIL


def cmd_minimise(args, out) -> int:
    params = _params(args)
    spec = _quad(args)
    sharp = derive(params).sharp_const
    opts = MinimiseOptions(restarts=args.restarts, max_iters=args.max_iters, grad_tol=args.grad_tol,
                           seed=args.seed)
    model = build_basis(params, args.K, args.scale, spec, args.kind)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimise_quotient(model, opts)
    cert = eigen_certificate(model)
    print(f"mu={params.mu:g} eps={params.eps:g} K={args.K} scale={args.scale:g} kind={args.kind}", file=out)
    print(f"minimum = {res.value:.17g}", file=out)
    print(f"sharp_const = {sharp:.17g}", file=out)
    print(f"min_minus_sharp = {res.value - sharp:.6g}", file=out)
    print(f"eigen certificate = {cert:.17g}", file=out)
    print(f"converged = {res.converged} (gradient {res.grad_norm:.3g}, restarts {res.restarts_used})", file=out)
    print(f"cond(D) = {model.condition_D:.3g}, gram cross-check = {model.cross_check_error:.3g}", file=out)
    ok = res.value >= sharp - LOWER_BOUND_TOL and res.converged
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args, out) -> int:
    if args.eps_values is not None and args.eps_fractions is not None:
        raise ConfigError("give either eps-values or eps-fractions, not both")
    if args.eps_values is not None:
        mode, vals = EPS_ABSOLUTE, args.eps_values
    else:
        mode, vals = EPS_FRACTION, args.eps_fractions if args.eps_fractions is not None else [0.0, 0.5]
    cfg = SweepConfig(mu_grid=tuple(args.mu_grid or ()), eps_values=tuple(vals), eps_mode=mode,
                      quad=_quad(args), K=args.K, scale=args.scale, restarts=args.restarts,
                      seed=args.seed, min_gap_tol=args.min_gap_tol, output=args.output,
                      fmt=args.format, parallelism=args.parallelism).validate()
    started = datetime.now(timezone.utc)
    records = run_sweep(cfg)
    if cfg.output:
        write_report(records, cfg.output, cfg.fmt, cfg.hash(), started)
    elif cfg.fmt == "csv":
        out.write(csv_text(records))
    else:
        json.dump(json_report(records, cfg.hash(), started), out, indent=2)
        out.write("\n")
    return exit_code(records)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sharpquotient", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    quad = _quad_parent()

    def problem(p):
        p.add_argument("--mu", type=float, required=True)
        p.add_argument("--eps", type=float, required=True)

    p = sub.add_parser("verify", parents=[quad], help="identity and inequality checks on test functions")
    problem(p)
    p.add_argument("--alpha", type=float, action="append",
                   help="alpha values for the identity (repeatable; default -1, 0.5, 1, 2)")
    p.add_argument("--b", choices=("minus", "plus", "both"), default="both")
    p.add_argument("--function", action="append", metavar="EXPR",
                   help="extra test function as a sympy expression in x (repeatable)")
    p.add_argument("--report", metavar="PATH", help="write a JSON report")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("extremal", parents=[quad], help="build and check the closed-form extremiser")
    problem(p)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--branch", choices=("auto", MU_POSITIVE, MU_NEGATIVE), default="auto")
    p.add_argument("--report", metavar="PATH", help="write a JSON report")
    p.set_defaults(handler=cmd_extremal)

    p = sub.add_parser("sweep", parents=[quad], help="grid verification written as CSV or JSON")
    p.add_argument("--mu-grid", type=_float_list)
    p.add_argument("--eps-fractions", type=_float_list, help="fractions of mu^2/4 (default 0,0.5)")
    p.add_argument("--eps-values", type=_float_list, help="absolute eps values")
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--min-gap-tol", type=float, default=None,
                   help="also fail records whose minimiser value exceeds the sharp constant by more")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--output", metavar="PATH")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("kummer", help="evaluate 1F1(b; mu; z) and its ODE residual")
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--z-max", type=float, default=KummerParams(0, 1).z_max)
    p.add_argument("--config", metavar="FILE")
    p.set_defaults(handler=cmd_kummer)

    p = sub.add_parser("minimise", parents=[quad], help="direct minimisation over a trial basis")
    problem(p)
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--kind", choices=BASIS_KINDS, default="laguerre")
    p.add_argument("--max-iters", type=int, default=MinimiseOptions().max_iters)
    p.add_argument("--grad-tol", type=float, default=MinimiseOptions().grad_tol)
    p.set_defaults(handler=cmd_minimise)
    return parser


def read_config(path: str) -> dict[str, str]:
    """``key=value`` lines; blank lines and ``#`` comments ignored."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            values[k.strip().replace("-", "_")] = v.strip()
    return values


def _subcommands(parser) -> set[str]:
    return {name for action in parser._subparsers._group_actions for name in action.choices}


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def _config_path(argv) -> tuple[str | None, str | None]:
    """Subcommand name and ``--config`` value, found before the full parse."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return known.command, known.config


def parse_args(argv=None) -> argparse.Namespace:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    command, path = _config_path(argv)
    if path and command in _subcommands(parser):
        try:
            values = read_config(path)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except ConfigError as exc:
            parser.error(str(exc))
        sp = _subparser(parser, command)
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        # string defaults go through each option's type conversion
        for a in sp._actions:
            if a.dest in values:
                a.required = False
        sp.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.handler(args, out)
    except (AdmissibilityError, BranchError, PoleError, PrecisionError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry_point() -> None:
    sys.exit(main())
