"""Command-line entry point: ``abpir {rate,plan,simulate,verify,sweep,appendix}``."""

from __future__ import annotations

import argparse
import json
import sys
from itertools import combinations

from . import sweep as sweep_mod
from .appendix import appendix_rows
from .compiler import FORMATS, build_plan, serialize
from .exact import rat_str
from .params import ProblemInstance, bu_baseline, paramset_to_dict, solve_scheme
from .protocol import FieldSpec, simulate
from .validation import InvalidInstanceError, check_demand_set, parse_range
from .verification import lp_oracle, verify_privacy, verify_recoverability

LP_MAX_K = 10


def _instance_args(p):
    p.add_argument("-N", type=int, required=True, help="number of servers")
    p.add_argument("-K", type=int, required=True, help="number of messages")
    p.add_argument("-D", type=int, required=True, help="number of demand messages")
    p.add_argument("--baseline", action="store_true",
                   help="use the fixed-tail recurrence parameters instead of the optimum")


def _range_arg(text):
    try:
        return parse_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abpir", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="solve scheme parameters and bounds")
    _instance_args(p)

    p = sub.add_parser("plan", help="emit the per-server query plan")
    _instance_args(p)
    p.add_argument("-W", required=True, help="demand set, comma-separated 1-based indices")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=FORMATS, default="json")
    p.add_argument("--out", help="write to this file instead of stdout")

    p = sub.add_parser("simulate", help="run the protocol end to end over F_q")
    _instance_args(p)
    p.add_argument("-W", required=True, help="demand set, comma-separated 1-based indices")
    p.add_argument("-q", type=int, default=2, help="field size: a prime or a power of two")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="write the decode trace as JSON to this file")

    p = sub.add_parser("verify", help="privacy, recoverability and LP-oracle report")
    _instance_args(p)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sweep", help="tabulate bounds, baseline and comparison over a grid")
    p.add_argument("--n-range", type=_range_arg, default=parse_range("2..4"))
    p.add_argument("--k-range", type=_range_arg, default=parse_range("2..8"))
    p.add_argument("--d-rule", choices=sweep_mod.D_RULES, default="all")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")

    p = sub.add_parser("appendix", help="check the two-demand identities and sign pattern")
    p.add_argument("--n-range", type=_range_arg, default=parse_range("2..6"))
    p.add_argument("--k-range", type=_range_arg, default=parse_range("3..13"))
    p.add_argument("--json", action="store_true", help="emit JSON rows instead of a table")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _params(args):
    inst = ProblemInstance(args.N, args.K, args.D)
    return bu_baseline(inst) if args.baseline else solve_scheme(inst)


def cmd_rate(args) -> int:
    _emit(json.dumps(paramset_to_dict(_params(args)), indent=2), None)
    return 0


def cmd_plan(args) -> int:
    params = _params(args)
    W = check_demand_set(args.W, args.K, args.D)
    plan = build_plan(params, W, args.seed)
    _emit(serialize(plan, args.format), args.out)
    return 0


def cmd_simulate(args) -> int:
    params = _params(args)
    W = check_demand_set(args.W, args.K, args.D)
    field = FieldSpec(args.q)
    plan = build_plan(params, W, args.seed)
    result = simulate(plan, field, args.seed)
    status = "OK" if result.ok else "FAILED"
    print(f"decode: {status}, downloaded {result.symbols_downloaded} symbols, rate {rat_str(result.rate)}")
    print(f"recovered == original: {result.ok} ({params.D * params.L} demand symbols over F_{args.q}; "
          f"L={params.L}, M={plan.M} per server, {params.N} servers, {len(result.trace)} decode steps)")
    if result.error:
        print(f"error: {result.error}")
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            json.dump(result.trace.to_list(), fh)
    return 0 if result.ok else 1


def cmd_verify(args) -> int:
    params = _params(args)
    inst = params.instance
    privacy = verify_privacy(params, args.seed)
    recover = []
    for W in combinations(range(1, inst.K + 1), inst.D):
        rep = verify_recoverability(build_plan(params, W, args.seed))
        recover.append({"W": list(W), **rep.to_dict()})
    report = {
        "N": inst.N, "K": inst.K, "D": inst.D, "scheme": params.scheme,
        "rate": rat_str(params.rate),
        "privacy": privacy.to_dict(),
        "recoverability": recover,
    }
    ok = privacy.verdict and all(r["verdict"] == "PASS" for r in recover)
    if inst.K <= LP_MAX_K:
        eq = lp_oracle(inst, "equality")
        ineq = lp_oracle(inst, "inequality")
        closed = params.f[params.t_star - 1] / params.g[params.t_star - 1]
        lp_ok = eq.optimum == 1 / solve_scheme(inst).rate
        report["lp_oracle"] = {
            "equality": eq.to_dict(),
            "inequality": ineq.to_dict(),
            "closed_form": rat_str(closed),
            "matches_closed_form": lp_ok,
            "inequality_gap": rat_str(eq.optimum - ineq.optimum),
        }
        ok = ok and lp_ok and ineq.optimum == eq.optimum
    else:
        report["lp_oracle"] = f"skipped: K > {LP_MAX_K}"
    report["verdict"] = "PASS" if ok else "FAIL"
    _emit(json.dumps(report, indent=2), None)
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    rows = sweep_mod.sweep(args.n_range, args.k_range, args.d_rule)
    text = sweep_mod.to_csv(rows) if args.format == "csv" else sweep_mod.to_json(rows)
    _emit(text, args.out)
    return 0


def cmd_appendix(args) -> int:
    if min(args.n_range) < 2 or min(args.k_range) < 2:
        raise InvalidInstanceError("appendix needs N >= 2 and K >= 2")
    rows = appendix_rows(args.n_range, args.k_range)
    if args.json:
        _emit(json.dumps(rows, indent=2), None)
    else:
        print(f"{'N':>3} {'K':>3}  pair1 pair2 shift  gap  {'signed_sum':>14}  result")
        for r in rows:
            def mark(flag):
                return "ok" if flag else "FAIL"
            print(f"{r['N']:>3} {r['K']:>3}  {mark(r['first_pair']):>5} {mark(r['second_pair']):>5} "
                  f"{mark(r['beta_shift']):>5} {r.get('gap_sign', '-'):>4}  {r['signed_sum']:>14}  "
                  f"{'PASS' if r['passed'] else 'FAIL'}")
        odd = all(r["signed_sum"] != "0" for r in rows if r["K"] % 2)
        even = all(r["signed_sum"] == "0" for r in rows if r["K"] % 2 == 0)
        print(f"sign pattern: odd K > 0: {odd}; even K = 0: {even}")
    return 0 if all(r["passed"] for r in rows) else 1


COMMANDS = {
    "rate": cmd_rate, "plan": cmd_plan, "simulate": cmd_simulate,
    "verify": cmd_verify, "sweep": cmd_sweep, "appendix": cmd_appendix,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InvalidInstanceError, ValueError) as exc:
        parser.error(str(exc))  # exits with status 2
