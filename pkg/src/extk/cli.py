"""Command-line entry point: ``extk <subcommand> ...``.

Data goes to stdout (or --output), errors go to stderr as JSON. Exit codes:
0 success, 2 validation, 3 resource cap, 4 verification counterexample.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from . import __version__
from . import combinatorics as cb
from . import extendibility as ex
from . import moments as mo
from .errors import ExtkError, ValidationError, VerificationError

SCHEMA = 1


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _default_seed() -> int:
    raw = os.environ.get("EXTK_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ValidationError("EXTK_SEED must be an integer", value=raw)


def _config(args) -> dict:
    skip = {"func", "output", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _envelope(args, payload: dict) -> dict:
    out = {"schema": SCHEMA, "tool": "extk", "version": __version__, "command": args.command, "config": _config(args)}
    if "seed" in vars(args):
        out["seed"] = args.seed
    out.update(payload)
    return out


def _emit(args, text: str) -> None:
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(args, payload: dict) -> None:
    _emit(args, json.dumps(_envelope(args, payload), indent=2) + "\n")


def _csv_with_header(args, body: str) -> str:
    meta = json.dumps(_envelope(args, {}), sort_keys=True)
    return f"# {meta}\n{body}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_moments(args) -> int:
    e = args.ensemble
    if e == "word":
        if not args.word:
            raise ValidationError("--word is required for the word ensemble")
        if args.normalized_limit:
            _emit_json(args, {"limit": mo.word_limit(args.word, args.k)})
            return 0
        poly = mo.gue_word_moment(args.word, args.k, allow_large=args.allow_large)
    elif e == "gue":
        poly = mo.gue_modified_moment(args.p, args.k, balanced=not args.unbalanced, allow_large=args.allow_large)
    elif e == "wishart":
        poly = mo.wishart_modified_moment(args.p, args.k, balanced=not args.unbalanced, allow_large=args.allow_large)
    elif e == "second-moment":
        poly = mo.second_moment_poly(args.p, args.k, allow_large=args.allow_large)
    else:  # gue-pt-leading
        terms = mo.gamma_modified_moment_leading(args.p, args.k, half_only=not args.full)
        _emit_json(args, {"vars": ["d"], "terms": [{"exps": [e_], "coeff": str(c)} for e_, c in terms]})
        return 0
    if args.normalized_limit:
        if e not in ("gue", "wishart") or args.unbalanced:
            raise ValidationError("--normalized-limit supports balanced gue, wishart and word", ensemble=e)
        if e == "wishart":
            poly = poly.at_environment_ratio(mo._rational(args.c))
        deg = 2 * args.p + args.k + 1
        _emit_json(args, {"limit": str(poly.coeff(deg)), "degree": deg})
        return 0
    _emit_json(args, poly.to_json())
    return 0


def cmd_spectrum(args) -> int:
    res = ex.spectrum_experiment(args.ensemble, args.d, args.k, args.reps, args.seed, args.c, args.bins, args.workers)
    if args.format == "json":
        _emit_json(args, res)
        return 0
    lines = ["bin_center,empirical_density,limit_density"]
    edges = res["edges"]
    for i, (dens, lim) in enumerate(zip(res["density"], res["limit_density"])):
        lines.append(f"{(edges[i] + edges[i + 1]) / 2!r},{dens!r},{lim!r}")
    _emit(args, _csv_with_header(args, "\n".join(lines) + "\n"))
    return 0


def _report_out(args, report) -> int:
    if args.format == "csv":
        _emit(args, _csv_with_header(args, report.to_csv()))
    else:
        _emit_json(args, report.to_dict())
    return 0


def cmd_witness(args) -> int:
    return _report_out(args, ex.run_witness_experiment(args.d, args.k, args.c, args.reps, args.seed, args.workers))


def cmd_threshold(args) -> int:
    return _report_out(args, ex.run_threshold_sweep(args.d, args.k, args.c_grid, args.reps, args.seed, args.workers))


def cmd_meanwidth(args) -> int:
    if args.mode == "unbalanced":
        if args.d_a is None or args.d_b is None:
            raise ValidationError("unbalanced mode needs --d-a and --d-b")
        dims = (args.d_a, args.d_b)
    else:
        if args.d is None:
            raise ValidationError("--d is required")
        dims = (args.d, args.d)
    return _report_out(args, ex.estimate_mean_width(args.mode, dims, args.k, args.reps, args.seed, args.workers))


def cmd_comb_verify(args) -> int:
    failures = []
    lift = []
    for p in range(1, args.max_p + 1):
        for k in range(1, args.max_k + 1):
            chk = cb.verify_lift_formula(p, k)
            lift.append({"p": p, "k": k, "cases": chk.cases, "ok": chk.ok})
            if not chk.ok:
                failures.append({"check": "lift", "p": p, "k": k, "counterexamples": chk.counterexamples[:5]})
    counts = []
    for p in range(1, args.max_count_p + 1):
        nc = cb.enumerate_noncrossing(p)
        ncp = cb.enumerate_nc_pairings(2 * p)
        hist = [0] * p
        for part in nc:
            hist[len(part.blocks) - 1] += 1
        nar = [cb.narayana(p, m) for m in range(1, p + 1)]
        row = {"p": p, "nc": len(nc), "nc_pairings": len(ncp), "catalan": cb.catalan(p), "blocks": hist, "narayana": nar}
        counts.append(row)
        if not (len(nc) == len(ncp) == cb.catalan(p) and hist == nar):
            failures.append({"check": "counts", **row})
    # bounds with k are reported separately: enumeration shows they can fail
    # (crossing pairings matching the level sets of f are geodesic for gamma_f)
    bounds, k_violations = [], []
    for p in range(1, min(args.max_p, 4) + 1):
        for delta in range(p // 2 + 1):
            for k in (None, *range(1, min(args.max_k, 2) + 1)):
                rows = [{"kind": "pairing", "p": p, "delta": delta, "k": k, "res": cb.count_defect_pairings(p, delta, k)}]
                for m in range(1, p - 2 * delta + 1):
                    rows.append({"kind": "permutation", "p": p, "delta": delta, "m": m, "k": k,
                                 "res": cb.count_defect_permutations(p, delta, m, k)})
                for row in rows:
                    r = row.pop("res")
                    row.update(count=r.count, bound=str(r.bound), within_bound=r.within_bound)
                    bounds.append(row)
                    if r.within_bound:
                        continue
                    if k is None or args.strict_bounds:
                        failures.append({"check": f"{row['kind']}_bound", **row})
                    else:
                        k_violations.append(row)
    if failures:
        raise VerificationError("counterexample found", failures=failures)
    _emit_json(args, {"status": "pass", "lift": lift, "counts": counts, "bounds": bounds,
                      "k_bound_violations": k_violations})
    return 0


def cmd_table(args) -> int:
    _emit_json(args, ex.comparison_table())
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="extk", description="Random k-extendibility experiments and exact moments.")
    ap.add_argument("--version", action="version", version=f"extk {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seeded=True, fmt=("json", "csv")):
        p.add_argument("--output", "-o", help="write to this file instead of stdout")
        p.add_argument("--format", choices=fmt, default=fmt[0])
        if seeded:
            p.add_argument("--seed", type=int, default=None, help="master seed (default $EXTK_SEED or 0)")
            p.add_argument("--workers", type=int, default=None, help="threads (default: available CPUs)")

    p = sub.add_parser("moments", help="exact moment polynomials")
    p.add_argument("--ensemble", required=True, choices=["gue", "wishart", "gue-pt-leading", "second-moment", "word"])
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--c", type=float, default=1.0, help="environment ratio s = c d^2 for wishart limits")
    p.add_argument("--word", type=_int_list, default=None, help="letters in 1..k, e.g. 1,2,1,2")
    p.add_argument("--unbalanced", action="store_true", help="separate d_A and d_B variables")
    p.add_argument("--full", action="store_true", help="gue-pt-leading: count every compatible level function")
    p.add_argument("--normalized-limit", action="store_true", help="emit only the leading coefficient")
    p.add_argument("--allow-large", action="store_true", help="lift enumeration caps")
    common(p, seeded=False, fmt=("json",))
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("spectrum", help="normalised spectrum histogram with limit overlay")
    p.add_argument("--ensemble", required=True, choices=list(ex.SPECTRUM_ENSEMBLES))
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--bins", type=int, default=0, help="0 selects Freedman-Diaconis binning")
    common(p, fmt=("csv", "json"))
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("witness", help="purity-vs-witness detection on induced states")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--reps", type=int, default=100)
    common(p)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("threshold", help="detection rate across environment ratios")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--c-grid", type=_float_list, required=True, help="e.g. 0.05,0.125,0.5,1")
    p.add_argument("--reps", type=int, default=100)
    common(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("meanwidth", help="Monte Carlo mean-width estimators")
    p.add_argument("--mode", choices=list(ex.MODES), default="plain")
    p.add_argument("--d", type=int)
    p.add_argument("--d-a", type=int)
    p.add_argument("--d-b", type=int)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--reps", type=int, default=50)
    common(p)
    p.set_defaults(func=cmd_meanwidth)

    p = sub.add_parser("comb", help="combinatorial checks")
    csub = p.add_subparsers(dest="comb_command", required=True)
    v = csub.add_parser("verify", help="exhaustive lift, count and defect-bound sweeps")
    v.add_argument("--max-p", type=int, default=4)
    v.add_argument("--max-k", type=int, default=3)
    v.add_argument("--max-count-p", type=int, default=7)
    v.add_argument("--strict-bounds", action="store_true", help="treat violated bounds with k as failures")
    common(v, seeded=False, fmt=("json",))
    v.set_defaults(func=cmd_comb_verify)

    p = sub.add_parser("table", help="minimal k beating other criteria")
    common(p, seeded=False, fmt=("json",))
    p.set_defaults(func=cmd_table)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if "seed" in vars(args) and args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except ExtkError as err:
        sys.stderr.write(json.dumps(err.to_dict(), default=str) + "\n")
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
