"""Command-line front end: construct | check | oracle | classify.

Exit codes: 0 pass, 1 verification failure, 2 usage or configuration
error, 3 domain error while evaluating.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .core import DimensionError, DomainError, LogFn, MultFn
from .dsl import DSLSyntaxError
from .jsonio import dumps
from .solutions import (
    NormalizationError,
    PsiFn,
    derive_H,
    derive_h,
    from_descriptor,
    make_one,
    make_other,
    make_projection,
    make_shannon,
    make_user,
    make_zero_mu,
    normalization_check,
)
from .verifier import (
    SampleSpec,
    check_associativity,
    check_entropy_classic,
    check_ent_special,
    check_feim,
    check_homogeneity,
    check_modified,
    check_symmetry,
    classify,
    oracle_lemma_log,
    oracle_lemma_mult,
    oracle_normalization,
)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3
EQUATIONS = ("modified", "entropy-classic", "ent-special", "feim", "assoc", "symmetry", "homogeneity")


class UsageError(Exception):
    pass


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _base(text) -> float:
    if text in (None, "e"):
        return math.e
    return float(text)


def _mu_arg(text: str, k: int) -> MultFn:
    if text == "zero":
        return MultFn.zero(k)
    if text == "one":
        return MultFn.one(k)
    if text == "identity":
        return MultFn.identity()
    alpha = _floats(text)
    if len(alpha) != k:
        raise UsageError(f"--mu needs {k} exponents")
    return MultFn.power(alpha)


def _emit(payload: Any, out) -> None:
    text = dumps(payload)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


# --- construct -----------------------------------------------------------

def _psi(args, k, default):
    if args.psi is None and args.psi_kind is None:
        return default
    kind = args.psi_kind or "expr"
    if kind == "neg_x_log_x":
        return PsiFn.neg_x_log_x(k, _base(args.base))
    if args.psi is None:
        raise UsageError(f"--psi is required for psi kind {kind!r}")
    if kind == "const":
        return PsiFn.const(float(args.psi), k)
    if kind == "linear":
        return PsiFn("linear", k, a=tuple(_floats(args.psi)))
    return PsiFn.expr(args.psi, k)


def cmd_construct(args) -> int:
    k = args.k
    case = args.case
    if case == "shannon":
        f = make_shannon(_base(args.base))
    elif case == "expr":
        if not args.expr:
            raise UsageError("--expr is required for case 'expr'")
        f = make_user(args.expr, k)
    elif case == "one":
        f = make_one(_psi(args, k, PsiFn.neg_x_log_x(k)))
    elif case == "other":
        if args.alpha is None:
            raise UsageError("--alpha is required for case 'other'")
        mu = MultFn.power(_floats(args.alpha))
        f = make_other(mu, args.b, _psi(args, k, PsiFn.const(-args.b, k)))
    else:
        l = LogFn(_floats(args.l)) if args.l else LogFn.natural(k, base=_base(args.base))
        psi = _psi(args, k, PsiFn.neg_x_log_x(k, _base(args.base)))
        if case == "zero_mu":
            f = make_zero_mu(l, psi)
        else:
            mu = MultFn.zero(k) if args.mu_coord == "zero" else MultFn.coordinate(int(args.mu_coord), k)
            f = make_projection(mu, l, psi)
    print(normalization_check(f).message(), file=sys.stderr)
    _emit(f.to_descriptor(), args.out)
    return EXIT_PASS


# --- check ---------------------------------------------------------------

def _run_config(args, descriptor) -> dict:
    return {
        "subcommand": "check",
        "descriptor_path": str(args.descriptor) if args.descriptor else None,
        "descriptor": descriptor,
        "equation": args.equation,
        "samples": args.samples,
        "seed": args.seed,
        "lo": args.lo,
        "hi": args.hi,
        "atol": args.atol,
        "rtol": args.rtol,
        "threads": args.threads,
        "mu": args.mu,
        "degree": args.degree,
        "out": args.out,
    }


def run_check(config: dict):
    """Execute a check from a RunConfig dict; returns the ResidualReport."""
    f = from_descriptor(config["descriptor"])
    eq = config["equation"]
    if eq not in EQUATIONS:
        raise UsageError(f"unknown equation {eq!r}")
    spec = SampleSpec(f.k, config["samples"], config["seed"], "cone", config["lo"], config["hi"])
    atol, rtol, threads = config["atol"], config["rtol"], config["threads"]
    mu = _mu_arg(config["mu"], f.k) if config.get("mu") else f.declared_mu()
    if eq in ("modified", "feim") and mu is None:
        raise UsageError("this solution declares no mu; pass --mu")
    if eq in ("entropy-classic", "ent-special") and f.k != 1:
        raise UsageError(f"equation {eq!r} is stated for k = 1, descriptor has k = {f.k}")
    if eq == "modified":
        return check_modified(f, mu, spec, atol, rtol, threads)
    if eq == "entropy-classic":
        return check_entropy_classic(f, spec, atol, rtol, threads)
    if eq == "ent-special":
        return check_ent_special(f, spec, atol, rtol, threads)
    if eq == "feim":
        return check_feim(derive_h(f), mu, spec, atol, rtol, threads)
    if eq == "symmetry":
        return check_symmetry(f, spec, atol, rtol, threads)
    if eq == "homogeneity":
        return check_homogeneity(f, config["degree"], spec, atol, rtol, threads)
    result = check_associativity(derive_H(f), spec, atol, rtol)
    red, exc = result.reports
    return exc if not exc.passed or red.passed else red


def cmd_check(args) -> int:
    if args.from_report:
        saved = _load(args.from_report)
        config = dict(saved["config"])
        if args.threads_override is not None:
            config["threads"] = args.threads_override
        out = args.out
    else:
        if not args.descriptor:
            raise UsageError("a descriptor path is required")
        config = _run_config(args, _load(args.descriptor))
        out = args.out
    report = run_check(config)
    _emit({"tool": "modent", "version": __version__, "config": config, "report": report.to_json()}, out)
    status = "pass" if report.passed else "FAIL"
    print(
        f"{report.equation_id}: {status} max|r|={report.max_abs_residual:.3e} tol={report.tolerance:.3e}",
        file=sys.stderr,
    )
    return EXIT_PASS if report.passed else EXIT_FAIL


# --- oracle --------------------------------------------------------------

def cmd_oracle(args) -> int:
    k = args.k
    spec = SampleSpec(k, args.samples, args.seed, "open_cube")
    if args.lemma == "mult-symmetry":
        mu = MultFn.zero(k) if args.alpha == "zero" else MultFn.power(_floats(args.alpha or "0"))
        if mu.k not in (None, k):
            spec = SampleSpec(mu.k, args.samples, args.seed, "open_cube")
        w = oracle_lemma_mult(mu, spec)
    elif args.lemma == "log-symmetry":
        l = LogFn(_floats(args.coeffs or "0"))
        w = oracle_lemma_log(l, SampleSpec(l.k, args.samples, args.seed, "open_cube"))
    else:
        if not args.case:
            raise UsageError("--case is required for the normalization oracle")
        w = oracle_normalization(args.case, args.delta, SampleSpec(k, args.samples, args.seed, "cone"))
    config = {"subcommand": "oracle", **{key: v for key, v in vars(args).items() if key not in ("func", "command")}}
    _emit({"tool": "modent", "version": __version__, "config": config, "witness": w.to_json()}, args.out)
    if w.found:
        print(f"{w.claim_id}: witness found, violation {w.violation:.6g}", file=sys.stderr)
    else:
        print(f"{w.claim_id}: no witness within {args.samples} samples", file=sys.stderr)
    return EXIT_PASS


# --- classify ------------------------------------------------------------

def cmd_classify(args) -> int:
    f = from_descriptor(_load(args.descriptor))
    if f.k != 1:
        raise UsageError("classification is implemented for k = 1")
    result = classify(f, SampleSpec(1, args.samples, args.seed, "cone"))
    config = {"subcommand": "classify", "descriptor_path": str(args.descriptor), "samples": args.samples, "seed": args.seed}
    _emit({"tool": "modent", "version": __version__, "config": config, **result.to_json()}, args.out)
    return EXIT_FAIL if result.case == "unclassified" else EXIT_PASS


# --- parser --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modent", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"modent {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="write a solution descriptor")
    p.add_argument("--case", required=True, choices=["projection", "one", "other", "zero_mu", "shannon", "expr"])
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--base", default=None, help="logarithm base (number or 'e')")
    p.add_argument("--psi", default=None, help="psi value: DSL over s[i], a constant, or a comma list")
    p.add_argument("--psi-kind", choices=["expr", "const", "linear", "neg_x_log_x"], default=None)
    p.add_argument("--alpha", default=None, help="comma-separated exponents of mu (case 'other')")
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--l", default=None, help="comma-separated log coefficients")
    p.add_argument("--mu-coord", default="0", help="projection coordinate index or 'zero'")
    p.add_argument("--expr", default=None, help="DSL over x[i], y[i], z[i] (case 'expr')")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("check", help="verify an equation on seeded samples")
    p.add_argument("descriptor", nargs="?", default=None)
    p.add_argument("--equation", choices=EQUATIONS, default="modified")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=10.0)
    p.add_argument("--atol", type=float, default=1e-9)
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--mu", default=None, help="'zero', 'one', 'identity' or comma exponents")
    p.add_argument("--degree", type=float, default=1.0)
    p.add_argument("--from-report", default=None, help="re-run the config embedded in a report")
    p.add_argument("--threads-override", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("oracle", help="search for a witness")
    p.add_argument("--lemma", required=True, choices=["mult-symmetry", "log-symmetry", "normalization"])
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--alpha", default=None)
    p.add_argument("--coeffs", default=None)
    p.add_argument("--case", default=None, choices=["projection", "one", "other", "zero_mu"])
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("classify", help="identify the solution family of a k=1 descriptor")
    p.add_argument("descriptor")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (UsageError, NormalizationError, DimensionError, DSLSyntaxError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
