"""Command-line front end: harmonic sums, solving, and identity checks.

Every command prints one JSON object per line.  Composition strings list
the parts outermost first, so in "3,1" the LAST number is s_1, the exponent
of the smallest index.

Exit codes: 0 all instances pass, 1 some instance fails, 2 a requested
precision could not be certified, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable

from . import decomp, pmzv
from .harmonic import (
    compositions_up_to,
    finite_mzv,
    format_composition,
    harmonic_sum,
    harmonic_sum_char,
    harmonic_sum_congruent,
    parse_composition,
    psi,
)
from .numkit import padic_reduce, rational_to_str, valuation

EXIT_OK, EXIT_FAIL, EXIT_SHORTFALL, EXIT_USAGE = 0, 1, 2, 64
DEFAULT_SEED = 20240101


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(record: dict, out) -> None:
    out.write(json.dumps(record, separators=(",", ":")) + "\n")
    out.flush()


def _composition(text: str) -> tuple:
    try:
        parts = parse_composition(text)
    except ValueError as exc:
        raise UsageError(str(exc))
    if not parts or any(s < 1 for s in parts):
        raise UsageError(f"composition {text!r} must have positive parts")
    return parts


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"malformed integer list {text!r}")


def _workers() -> int:
    env = os.environ.get("PADIC_MHS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError("PADIC_MHS_THREADS must be an integer")
    return max(1, min(8, os.cpu_count() or 1))


def _run_grid(jobs: Iterable[Callable[[], dict]]) -> list:
    """Run independent instances on a worker pool; results keep the job order."""
    jobs = list(jobs)
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        return list(pool.map(lambda job: job(), jobs))


def _status(records: list) -> int:
    code = EXIT_OK
    for rec in records:
        if rec.get("equal") is False or rec.get("agree") is False:
            rec["failed"] = True
            code = EXIT_FAIL
        elif rec.get("degraded") and code == EXIT_OK:
            code = EXIT_SHORTFALL
    return code


# ---------------------------------------------------------------------------
# harmonic


def cmd_harmonic(args, out) -> int:
    parts = _composition(args.index)
    lower = args.lower or 0
    if args.congruent:
        base, pattern = args.congruent
        try:
            p, k0 = (int(t) for t in base.split("^"))
        except ValueError:
            raise UsageError("--congruent expects P^K0 followed by a 0/1 pattern")
        if set(pattern) - {"0", "1"} or len(pattern) != len(parts):
            raise UsageError("the pattern needs one 0/1 flag per part")
        value = harmonic_sum_congruent(parts, args.upper, p, k0, [c == "1" for c in pattern], lower=lower)
    elif args.exclude:
        value = harmonic_sum_char(tuple(psi(-s) for s in parts), args.upper, lower=lower,
                                  exclude_multiples_of=args.exclude)
    else:
        value = harmonic_sum(parts, args.upper, lower=lower)
    record = {"value": rational_to_str(value)}
    if args.p is not None:
        if args.prec is None:
            raise UsageError("--p needs --prec")
        record["padic"] = padic_reduce(value, args.p, args.prec).to_json()
    _emit(record, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args, out) -> int:
    if args.max_depth not in (1, 2):
        raise UsageError("--max-depth must be 1 or 2")
    try:
        phi = pmzv.build_phi(args.p, args.k, args.max_weight, args.max_depth, args.prec)
    except pmzv.PrecisionShortfall as exc:
        _emit({"status": "shortfall", "message": str(exc)}, out)
        return EXIT_SHORTFALL
    data = phi.to_json()
    with open(args.out, "w") as fh:
        json.dump(data, fh, indent=1)
    short = []
    for w, cert in data["certificates"].items():
        depth = w.count("1")
        if len(w) <= args.max_weight and depth <= args.max_depth and cert is not None and cert < args.prec:
            short.append(w)
    _emit({"status": "shortfall" if short else "ok", "out": args.out, "which": data["which"],
           "coefficients": len(data["coeffs"]), "below_target": short}, out)
    return EXIT_SHORTFALL if short else EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _psi_grid(max_depth: int, max_abs: int, samples: int, rng: random.Random) -> list:
    # exponent tuples of power characters, outermost first
    if samples:
        return [tuple(rng.choice([e for e in range(-max_abs, max_abs + 1) if e]) for _ in range(rng.randint(1, max_depth)))
                for _ in range(samples)]
    return [tuple(-s for s in c) for c in compositions_up_to(max_abs, max_depth)]


def _verify_addition(args, rng):
    jobs = []
    for exps in _psi_grid(args.max_depth, args.max_weight, args.samples, rng):
        chars = tuple(psi(e) for e in exps)
        for total in range(2, args.max_N + 1):
            for N1 in range(1, total):
                params = {"exponents": list(exps), "N1": N1, "N2": total - N1}
                jobs.append(lambda c=chars, a=N1, b=total - N1, pr=params:
                            decomp.harness_record("addition", pr, lambda: decomp.add_bounds(c, a, b)))
    return jobs


def _verify_multiplication(args, rng):
    jobs = []
    for exps in _psi_grid(args.max_depth, args.max_weight, args.samples, rng):
        chars = tuple(psi(e) for e in exps)
        for N in range(1, args.max_N + 1):
            for M in range(1, args.max_N + 1):
                if N * M > args.max_NM:
                    continue
                params = {"exponents": list(exps), "N": N, "M": M}
                jobs.append(lambda c=chars, a=N, b=M, pr=params:
                            decomp.harness_record("multiplication", pr, lambda: decomp.multiply_bounds(c, a, b)))
    return jobs


def _verify_translation(args, rng):
    jobs = []
    for exps in _psi_grid(args.max_depth, args.max_weight, args.samples, rng):
        chars = tuple(psi(e) for e in exps)
        for M in range(0, args.max_N + 1):
            for N in range(1, args.max_N + 1):
                params = {"exponents": list(exps), "M": M, "N": N}
                jobs.append(lambda c=chars, a=M, b=N, pr=params:
                            decomp.harness_record("translation", pr, lambda: decomp.translate_bounds(c, a, b)))
    return jobs


def _verify_digits(args, rng):
    p = args.p
    Ns = [args.N] if args.N else list(range(1, args.max_N + 1))
    jobs = []
    for N in Ns:
        cut = decomp.digit_cutpoints(N, p)
        for parts in compositions_up_to(args.max_weight, args.max_depth):
            params = {"p": p, "N": N, "parts": format_composition(parts), "cutpoints": cut}

            def job(parts=parts, N=N, params=params):
                rec = decomp.harness_record("digits", params, lambda: decomp.digit_decompose(parts, N, p, args.L_max))
                rec["degraded"] = rec["certified_prec"] < args.prec
                return rec
            jobs.append(job)
    return jobs


def _verify_reindex(args, rng):
    jobs = []
    for parts in _compositions_arg(args):
        params = {"p": args.p, "k": args.k, "parts": format_composition(parts), "truncation": args.truncation}

        def job(parts=parts, params=params):
            rec = decomp.harness_record(
                "reindex", params, lambda: decomp.finite_mzv_digit_form(parts, args.p, args.k, args.truncation))
            rec["degraded"] = rec["certified_prec"] < args.prec
            exact = finite_mzv(parts, args.p, args.k)
            fermat = decomp.fermat_digit_form(parts, args.p, args.k, args.r)
            diff = fermat - exact
            rec["fermat_r"] = args.r
            rec["fermat_equal"] = diff == 0 or valuation(diff, args.p) >= args.r
            rec["equal"] = rec["equal"] and rec["fermat_equal"]
            return rec
        jobs.append(job)
    return jobs


def _compositions_arg(args) -> list:
    if args.index:
        return [_composition(t) for t in args.index]
    return list(compositions_up_to(args.max_weight, args.max_depth))


def _load_phi(args, depth: int, weight: int, precision: int):
    if args.phi:
        try:
            with open(args.phi) as fh:
                return pmzv.PhiApprox.from_json(json.load(fh))
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read {args.phi}: {exc}")
    if depth == 1:
        return pmzv.solve_depth1(args.p, args.k, weight, precision)
    return pmzv.build_phi(args.p, args.k, weight, 2, precision)


def _default_weight(p: int, precision: int, depth: int) -> int:
    m = depth + 1
    while pmzv.coefficient_bound(m, depth, p) < precision + 2:
        m += 1
    return m + 2


def _verify_theorem1(args, rng):
    comps = _compositions_arg(args)
    depth = max(len(c) for c in comps)
    if depth > 2 and not args.phi:
        raise UsageError("depth above two needs a coefficient file (--phi)")
    loss = max(sum(c) for c in comps) * pmzv._ilog(args.max_N, args.p)
    target = args.prec + loss + 4
    phi = _load_phi(args, min(depth, 2), _default_weight(args.p, target, min(depth, 2)), target)
    jobs = []
    Ns = range(1, args.max_N + 1) if args.a == 0 else [1]
    for N in Ns:
        for parts in comps:
            jobs.append(lambda N=N, parts=parts: pmzv.verify_theorem1(args.p, args.k, args.a, parts, N, phi, args.prec))
    return jobs


def _verify_theorem2(args, rng):
    comps = _compositions_arg(args)
    depth = max(len(c) for c in comps)
    if depth > 2:
        raise UsageError("the Frobenius-invariant path is available in depth at most two")
    args.k = 1
    target = args.prec + 10
    phi = _load_phi(args, depth, max(_default_weight(args.p, target, depth), 12 * depth + 8), target)
    ks = _int_list(args.k_list)
    jobs = []
    for parts in comps:
        jobs.append(lambda parts=parts: pmzv.verify_theorem2(args.p, parts, args.a, ks, args.prec, phi, args.k_big))
    return jobs


def _verify_yh(args, rng):
    comps = _compositions_arg(args)
    depth = max(len(c) for c in comps)
    if depth > 2 and not args.phi:
        raise UsageError("depth above two needs a coefficient file (--phi)")
    args.k = 1
    wt = max(sum(c) for c in comps)
    target = args.prec + wt + 2
    phi = _load_phi(args, min(depth, 2), _default_weight(args.p, target, min(depth, 2)), target)
    return [lambda parts=parts: pmzv.verify_yasuda_hirose(args.p, parts, args.prec, phi) for parts in comps]


_VERIFIERS = {
    "addition": _verify_addition,
    "multiplication": _verify_multiplication,
    "translation": _verify_translation,
    "digits": _verify_digits,
    "reindex": _verify_reindex,
    "theorem1": _verify_theorem1,
    "theorem2": _verify_theorem2,
    "yasuda-hirose": _verify_yh,
}


def cmd_verify(args, out) -> int:
    rng = random.Random(args.seed)
    try:
        jobs = _VERIFIERS[args.identity](args, rng)
    except pmzv.PrecisionShortfall as exc:
        _emit({"status": "shortfall", "message": str(exc)}, out)
        return EXIT_SHORTFALL
    records = []
    for result in _run_grid(jobs):
        records.extend(result if isinstance(result, list) else [result])
    code = _status(records)
    for rec in records:
        _emit(rec, out)
    return code


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="padic-mhs", description=__doc__.split("\n")[0])
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for sampled grids")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    h = sub.add_parser("harmonic", help="evaluate a harmonic sum exactly")
    h.add_argument("--index", required=True, help='composition "s_d,...,s_1" (last number is s_1)')
    h.add_argument("--upper", type=int, required=True)
    h.add_argument("--lower", type=int)
    h.add_argument("--p", type=int)
    h.add_argument("--prec", type=int)
    h.add_argument("--exclude", type=int, help="skip indices divisible by this number")
    h.add_argument("--congruent", nargs=2, metavar=("P^K0", "PATTERN"),
                   help="impose n_i = n_(i-1) mod P^K0 where PATTERN (outermost first) has a 1")

    s = sub.add_parser("solve", help="solve the Frobenius coefficients and write them to a file")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--max-weight", type=int, required=True)
    s.add_argument("--max-depth", type=int, default=1)
    s.add_argument("--prec", type=int, required=True)
    s.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="check an identity on a grid of instances")
    v.add_argument("identity", choices=sorted(_VERIFIERS))
    v.add_argument("--p", type=int, default=5)
    v.add_argument("--k", type=int, default=1)
    v.add_argument("--a", type=int, default=0)
    v.add_argument("--N", type=int)
    v.add_argument("--max-N", dest="max_N", type=int, default=10)
    v.add_argument("--max-NM", dest="max_NM", type=int, default=400)
    v.add_argument("--max-depth", type=int, default=2)
    v.add_argument("--max-weight", type=int, default=3)
    v.add_argument("--samples", type=int, default=0, help="sample this many character tuples instead of a full grid")
    v.add_argument("--index", action="append", help="composition; may be repeated")
    v.add_argument("--prec", type=int, default=3)
    v.add_argument("--L-max", dest="L_max", type=int, default=8)
    v.add_argument("--truncation", type=int, default=4)
    v.add_argument("--r", type=int, default=2)
    v.add_argument("--k-list", default="1,2")
    v.add_argument("--k-big", type=int, default=4)
    v.add_argument("--phi", help="coefficient file written by the solve command")
    return parser


_COMMANDS = {"harmonic": cmd_harmonic, "solve": cmd_solve, "verify": cmd_verify}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"padic-mhs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # the reader went away (e.g. piped into head); stop quietly, as a shell would on SIGPIPE
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 141


if __name__ == "__main__":
    sys.exit(main())
