"""Command-line interface.

Exit codes: 0 ok, 1 usage or bad config, 2 numerical failure, 3 verdict
fail, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path


from . import __version__
from .density import invert_density, invert_f_density
from .ensembles import EntryLaw, PopulationShape, draw_sample, build_f_pair, draw_entries
from .errors import InvalidPoint, NumericalError, RMTError
from .harness import (
    ExperimentConfig,
    bias_demonstration,
    compare_samples,
    gaussianity_report,
    persist_results,
    run_experiment,
)
from .lss import TestFunction, lss_covariance, lss_f_matrix
from .stieltjes import CovarianceLSD, SpectralWeights, f_support, solve_companion
from . import lemmas

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERDICT, EXIT_IO = range(5)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


_COMPLEX = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?([+-](\d+\.?\d*|\.\d+)([eE][+-]?\d+)?i)?$")
_IMAG = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?i$")


def parse_complex(text):
    """``"a+bi"``, ``"a"`` or ``"bi"`` (no spaces) to ``complex``."""
    if not (_COMPLEX.match(text) or _IMAG.match(text)):
        raise argparse.ArgumentTypeError(f"malformed complex number {text!r}; expected a+bi")
    return complex(text.replace("i", "j"))


def cjson(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def parse_h(text):
    """``"mp"`` for a point mass at 1, or ``"atoms=t1:w1,t2:w2"``."""
    if text == "mp":
        return SpectralWeights.point_mass()
    if text.startswith("atoms="):
        try:
            pairs = [item.split(":") for item in text[6:].split(",")]
            return SpectralWeights(tuple(float(t) for t, _ in pairs), tuple(float(w) for _, w in pairs))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad spectral weights {text!r}: {exc}") from None
    raise argparse.ArgumentTypeError(f"h must be 'mp' or 'atoms=t:w,...', got {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _test_function(text):
    try:
        return TestFunction.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _echo(config, seed):
    print(json.dumps({"config": config, "seed": seed}, default=str), file=sys.stderr)


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None


def _load_config(path, seed=None):
    d = _read_json(path)
    if seed is not None:
        d["master_seed"] = seed
    try:
        return ExperimentConfig.from_dict(d)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config {path}: {exc}") from None


def _emit(obj, out):
    text = json.dumps(obj, indent=1)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_solve(args):
    _echo({"z": cjson(args.z), "y": args.y, "h": args.h_text, "tol": args.tol}, args.seed)
    cv = solve_companion(args.z, args.y, args.h, args.tol)
    _emit({"z": cjson(cv.z), "y": cv.y, "m_under": cjson(cv.m_under), "m": cjson(cv.m),
           "residual": cv.residual}, args.output)
    return EXIT_OK


def _density_obj(args):
    if args.y1 is not None or args.y2 is not None:
        if args.y1 is None or args.y2 is None:
            raise UsageError("--y1 and --y2 must be given together")
        return invert_f_density(args.y1, args.y2, args.grid)
    if args.y is None:
        raise UsageError("give --y, or --y1 and --y2")
    return invert_density(args.y, args.h, args.grid)


def cmd_density(args):
    _echo({"y": args.y, "y1": args.y1, "y2": args.y2, "h": args.h_text, "grid": args.grid}, args.seed)
    gd = _density_obj(args)
    print(f"support {gd.support_lo:.6f} {gd.support_hi:.6f} atom {gd.atom_at_zero:.6g}", file=sys.stderr)
    if args.output:
        with open(args.output, "w") as fh:
            gd.to_csv(fh)
    else:
        gd.to_csv(sys.stdout)
    return EXIT_OK


def cmd_support(args):
    _echo({"y": args.y, "y1": args.y1, "y2": args.y2, "h": args.h_text}, args.seed)
    if args.y1 is not None or args.y2 is not None:
        if args.y1 is None or args.y2 is None:
            raise UsageError("--y1 and --y2 must be given together")
        lo, hi = f_support(args.y1, args.y2)
        print(f"{lo:.6f} {hi:.6f}")
        return EXIT_OK
    if args.y is None:
        raise UsageError("give --y, or --y1 and --y2")
    iv = CovarianceLSD(args.y, args.h).support_intervals()
    if iv is None:
        raise NumericalError("support could not be bracketed")
    for lo, hi in iv:
        print(f"{lo:.6f} {hi:.6f}")
    return EXIT_OK


def cmd_lss(args):
    cfg = {"pipeline": args.pipeline, "p": args.p, "n": args.n, "N": args.N, "f": str(args.f),
           "law": args.law}
    _echo(cfg, args.seed)
    law = EntryLaw(args.law)
    centralized = args.pipeline.endswith("centralized")
    if args.pipeline.startswith("f-"):
        if args.N is None:
            raise UsageError("F pipelines need --N")
        pair = build_f_pair(draw_entries(args.p, args.n, law, args.seed),
                            draw_entries(args.p, args.N, law, args.seed + 1))
        val = lss_f_matrix(pair, args.f, centralized, check=True)
    else:
        val = lss_covariance(draw_sample(args.p, args.n, law, PopulationShape(), args.seed),
                             args.f, centralized, check=True)
    _emit({"value": val.value, "statistic_kind": val.statistic_kind, "ratios": list(val.ratios),
           "f": str(val.f), "raw_sum": val.raw_sum, "centering": val.centering}, args.output)
    return EXIT_OK


_SUITE_IDS = {"4.2", "4.2'", "4.3", "4.3'", "4.4", "4.5", "4.6"}


def cmd_verify(args):
    lemma = args.lemma
    if lemma not in lemmas.LEMMA_IDS and lemma not in _SUITE_IDS:
        raise UsageError(f"unknown lemma id {lemma!r}; choose from {sorted(set(lemmas.LEMMA_IDS) | _SUITE_IDS)}")
    z = args.z if args.z is not None else (4 + 0j if lemma == "4.1" else 1 + 1j)
    cfg = {"lemma": lemma, "z": cjson(z), "y": args.y, "n": args.n, "reps": args.reps, "p": args.p,
           "N": args.N}
    _echo(cfg, args.seed)
    if lemma == "4.1":
        rep = lemmas.verify_shift_limit(z, args.y, args.n or (100, 200, 400, 800))
    elif lemma == "interlacing":
        n = (args.n or [100])[0]
        rep = lemmas.verify_interlacing_sweep(args.p or 50, n, args.reps or 1000, seed=args.seed)
    elif lemma == "3.1":
        n = (args.n or [100])[0]
        rep = lemmas.verify_exact_decompositions(args.p or 50, n, args.reps or 100, seed=args.seed, z=z)
    elif lemma == "F":
        n = (args.n or [100])[0]
        rep = lemmas.verify_f_decomposition(z, args.p or 50, n, args.N or 200, reps=args.reps or 100,
                                            seed=args.seed)
    else:
        rep = lemmas.lemma_suite(z, args.y, EntryLaw(), args.n or (100, 200, 400), args.reps or 200,
                                 args.seed)[lemma]
    _emit(rep.to_dict(), args.output)
    print("PASS" if rep.passed else f"FAIL lemma {lemma} criteria not met", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_VERDICT


def _results_path(args, stem):
    return Path(args.output) if args.output else Path(f"{stem}.json")


def cmd_experiment(args):
    config = _load_config(args.config, args.seed)
    _echo(config.to_dict(), config.master_seed)
    result = run_experiment(config)
    persist_results(result, _results_path(args, "experiment"))
    print(json.dumps(result.stats.to_dict(), indent=1))
    if config.reps >= 500:
        verdict = gaussianity_report(result.samples)
        print("PASS" if verdict["pass"] else "FAIL " + "; ".join(verdict["reasons"]))
        return EXIT_OK if verdict["pass"] else EXIT_VERDICT
    print("PASS (no normality verdict below 500 reps)")
    return EXIT_OK


def cmd_compare(args):
    doc = _read_json(args.config)
    if not isinstance(doc, dict) or set(doc) != {"a", "b"}:
        raise UsageError("compare config must be an object with keys 'a' and 'b'")
    try:
        ca, cb = ExperimentConfig.from_dict(doc["a"]), ExperimentConfig.from_dict(doc["b"])
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config {args.config}: {exc}") from None
    for attr in ("p", "n", "N", "f"):
        if getattr(ca, attr) != getattr(cb, attr):
            raise UsageError(f"configs differ in {attr}")
    _echo({"a": ca.to_dict(), "b": cb.to_dict()}, [ca.master_seed, cb.master_seed])
    ra = run_experiment(ca)
    rb = run_experiment(cb)
    rep = compare_samples(ra.samples, rb.samples)
    out = _results_path(args, "compare")
    persist_results(ra, out.with_name(out.stem + "_a.json"))
    persist_results(rb, out.with_name(out.stem + "_b.json"))
    out.write_text(json.dumps(rep.to_dict(), indent=1) + "\n")
    print(json.dumps(rep.to_dict(), indent=1))
    print("PASS" if rep.verdict else "FAIL " + "; ".join(rep.reasons))
    return EXIT_OK if rep.verdict else EXIT_VERDICT


def cmd_bias_demo(args):
    if args.config:
        config = _load_config(args.config, args.seed)
    else:
        config = ExperimentConfig("cov-centralized", args.p, args.n, f=args.f, reps=args.reps,
                                  master_seed=args.seed)
    _echo(config.to_dict(), config.master_seed)
    rep = bias_demonstration(config)
    if args.output:
        Path(args.output).write_text(json.dumps(rep, indent=1) + "\n")
    print(json.dumps(rep, indent=1))
    print(f"offset {rep['offset']:.10f} gap {rep['gap']:.10f} limit {rep['limit']:.10f}")
    ok = rep["identity_error"] < 1e-10
    print("PASS" if ok else f"FAIL offset differs from gap by {rep['identity_error']:.3g}")
    return EXIT_OK if ok else EXIT_VERDICT


# ---------------------------------------------------------------------------


def build_parser():
    ap = _Parser(prog="rmtclt", description="Centralized sample covariance CLT toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="master seed (echoed to stderr)")
        p.add_argument("--output", "-o", help="output path (default: stdout)")

    def hflag(p):
        p.add_argument("--h", dest="h_text", default="mp", help="'mp' or 'atoms=t1:w1,t2:w2'")

    p = sub.add_parser("solve", help="solve the companion equation at one point")
    p.add_argument("--z", type=parse_complex, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    hflag(p)
    common(p)
    p.set_defaults(func=cmd_solve)

    for name, fn, helptext in (("density", cmd_density, "density on a grid as CSV"),
                               ("support", cmd_support, "support endpoints")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--y", type=float)
        p.add_argument("--y1", type=float)
        p.add_argument("--y2", type=float)
        if name == "density":
            p.add_argument("--grid", type=int, default=8192)
        hflag(p)
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("lss", help="linear spectral statistic of one random draw")
    p.add_argument("--pipeline", choices=("cov-centralized", "cov-simplified", "f-centralized",
                                           "f-simplified"), default="cov-centralized")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int)
    p.add_argument("--f", type=_test_function, default=TestFunction.monomial(1))
    p.add_argument("--law", choices=("real-gaussian", "complex-gaussian", "real-threepoint"),
                   default="real-gaussian")
    common(p)
    p.set_defaults(func=cmd_lss)

    p = sub.add_parser("verify", help="run a lemma verifier")
    p.add_argument("--lemma", required=True)
    p.add_argument("--z", type=parse_complex)
    p.add_argument("--y", type=float, default=0.5)
    p.add_argument("--n", type=_int_list)
    p.add_argument("--p", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--reps", type=int)
    common(p)
    p.set_defaults(func=cmd_verify)

    for name, fn in (("experiment", cmd_experiment), ("compare", cmd_compare)):
        p = sub.add_parser(name, help=f"{name} from a JSON config")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--output", "-o")
        p.set_defaults(func=fn)

    p = sub.add_parser("bias-demo", help="offset from centering at p/n instead of p/(n-1)")
    p.add_argument("--config")
    p.add_argument("--f", type=_test_function, default=TestFunction.monomial(2))
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_bias_demo)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if hasattr(args, "h_text"):
        try:
            args.h = parse_h(args.h_text)
        except (argparse.ArgumentTypeError, ValueError) as exc:
            print(f"rmtclt: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rmtclt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rmtclt: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, InvalidPoint) as exc:
        print(f"rmtclt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (RMTError, ValueError) as exc:
        print(f"rmtclt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
