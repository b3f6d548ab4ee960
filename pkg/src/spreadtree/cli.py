"""Batch command line: solve the worst-case utility problem, search and
verify price-system certificates, price superhedges, and re-verify artifacts.

Every command reads a market specification (see ``docs/market_spec.schema.json``)
and writes deterministic JSON, so identical inputs and seeds produce
byte-identical reports.  Exit codes: 0 success, 1 verification failure or
infeasibility, 2 malformed input, 3 solvability hypothesis unmet.  Any flag
default can be overridden through an environment variable named
``SPREADTREE_<FLAG>`` (e.g. ``SPREADTREE_TOL``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .analysis import (
    best_dual_cps,
    check_optional_strong_supermartingale,
    deflated_value_process,
    superhedge_price,
    variation_bounds,
)
from .cps import find_cps, verify_cps
from .errors import ContractViolation, HypothesisUnmet, MarketSpecError
from .market import bond_ledger, check_self_financing, is_admissible, liquidation_value
from .optimize import Utility, solve_robust
from .specfile import (
    claim_from_dict,
    cps_from_dict,
    cps_to_dict,
    load_market,
    strategy_from_dict,
    strategy_to_dict,
)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_INPUT = 2
EXIT_HYPOTHESIS = 3

_ENV_PREFIX = "SPREADTREE_"


def _env(name: str, fallback):
    raw = os.environ.get(_ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return fallback
    if isinstance(fallback, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(fallback, int) and not isinstance(fallback, bool):
        return int(raw)
    if isinstance(fallback, float):
        return float(raw)
    return raw


def _write_json(path: str | None, doc) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _utility_from_args(args) -> Utility:
    if args.utility == "log":
        return Utility.log()
    if args.alpha is None:
        raise MarketSpecError("--alpha", "power utility needs --alpha in (0, 1)")
    return Utility.power(args.alpha)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spreadtree",
        description="Transaction-cost scenario-tree markets: robust utility, "
        "price-system certificates, superhedging.",
        epilog=f"Flag defaults honour {_ENV_PREFIX}<FLAG> environment variables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--spec", required=True, help="market specification JSON file")
        p.add_argument("--out", default=_env("out", None), help="report file (default: stdout)")

    p_solve = sub.add_parser("solve", help="maximise worst-case expected utility")
    common(p_solve)
    p_solve.add_argument("--utility", choices=("log", "power"), default=_env("utility", "log"))
    p_solve.add_argument("--alpha", type=float, default=_env("alpha", None))
    p_solve.add_argument("--x", type=float, default=_env("x", 1.0), help="initial capital")
    p_solve.add_argument("--lambda-prime", type=float, dest="lambda_prime",
                         default=_env("lambda_prime", None),
                         help="reference cost for the solvability check")
    p_solve.add_argument("--delta", type=float, default=_env("delta", 1e-6))
    p_solve.add_argument("--tol", type=float, default=_env("tol", 1e-6))
    p_solve.add_argument("--seed", type=int, default=_env("seed", 0))
    p_solve.add_argument("--max-iters", type=int, dest="max_iters",
                         default=_env("max_iters", 4000))
    p_solve.add_argument("--csv", default=_env("csv", None),
                         help="terminal liquidation values per (model, scenario)")

    p_cps = sub.add_parser("check-cps", help="search for a price-system certificate")
    common(p_cps)
    p_cps.add_argument("--theta", default=_env("theta", None), help="model name (default: first)")
    p_cps.add_argument("--lambda-prime", type=float, dest="lambda_prime",
                       default=_env("lambda_prime", None),
                       help="cost level to certify (default: the market's)")
    p_cps.add_argument("--delta", type=float, default=_env("delta", 1e-6))

    p_hedge = sub.add_parser("superhedge", help="price a claim by superreplication")
    common(p_hedge)
    p_hedge.add_argument("--theta", default=_env("theta", None))
    p_hedge.add_argument("--claim", required=True, help="claim JSON file: values per scenario")
    p_hedge.add_argument("--witness", default=_env("witness", None),
                         help="file for the superhedging strategy")
    p_hedge.add_argument("--delta", type=float, default=_env("delta", 1e-9))

    p_verify = sub.add_parser("verify", help="re-verify a strategy and certificate bundle")
    common(p_verify)
    p_verify.add_argument("--strategy", required=True, help="strategy JSON file")
    p_verify.add_argument("--certificate", default=_env("certificate", None),
                          help="price-system certificate JSON file")
    p_verify.add_argument("--tol", type=float, default=_env("tol", 1e-9))
    return parser


def _cmd_solve(args) -> int:
    family = load_market(args.spec)
    if args.lambda_prime is not None:
        if not 0.0 < args.lambda_prime < family.transaction_cost:
            raise MarketSpecError("--lambda-prime", "must lie in (0, lambda)")
        family = _with_reference_cost(family, args.lambda_prime)
    utility = _utility_from_args(args)
    result = solve_robust(
        family, utility, args.x, tol=args.tol, max_iters=args.max_iters,
        seed=args.seed, delta=args.delta,
    )
    report = {
        "value": result.value,
        "argmin_theta": result.report.argmin_theta,
        "iterations": result.report.iterations,
        "certified": result.report.certified,
        "no_trade_value": result.report.no_trade_value,
        "x": args.x,
        "lambda": family.transaction_cost,
        "utility": {"kind": utility.kind, "alpha": utility.alpha},
        "seed": args.seed,
        "tol": args.tol,
        "strategy": strategy_to_dict(result.strategy),
    }
    _write_json(args.out, report)
    if args.csv:
        tree = family.tree
        with open(args.csv, "w") as fh:
            fh.write("theta,scenario,probability,terminal_liquidation\n")
            for theta in family.model_names:
                for w in range(tree.n_scenarios):
                    v = liquidation_value(result.strategy, family, theta, w, tree.horizon)
                    fh.write(f"{theta},{tree.labels[w]},{tree.probabilities[w]!r},{v!r}\n")
    return EXIT_OK


def _with_reference_cost(family, lam_p):
    from .market import ModelFamily

    return ModelFamily(
        tree=family.tree, models=family.models,
        transaction_cost=family.transaction_cost, reference_cost=lam_p,
    )


def _cmd_check_cps(args) -> int:
    family = load_market(args.spec)
    theta = args.theta or family.model_names[0]
    if theta not in family.model_names:
        raise MarketSpecError("--theta", f"unknown model {theta!r}")
    lam = args.lambda_prime if args.lambda_prime is not None else family.transaction_cost
    cps = find_cps(family, theta, lambda_check=lam, delta=args.delta)
    feasible = cps is not None
    report = {
        "theta": theta,
        "lambda_check": lam,
        "delta": args.delta,
        "feasible": feasible,
        "certificate": cps_to_dict(cps, family.tree) if feasible else None,
    }
    _write_json(args.out, report)
    return EXIT_OK if feasible else EXIT_VERIFICATION


def _cmd_superhedge(args) -> int:
    family = load_market(args.spec)
    theta = args.theta or family.model_names[0]
    if theta not in family.model_names:
        raise MarketSpecError("--theta", f"unknown model {theta!r}")
    with open(args.claim) as fh:
        claim = claim_from_dict(json.load(fh), family.tree)
    price, witness = superhedge_price(claim, family, theta)
    dual = best_dual_cps(claim, family, theta, delta=args.delta)
    dual_value = None if dual is None else dual[0]
    report = {
        "theta": theta,
        "price": price,
        "dual_value": dual_value,
        "gap": None if dual_value is None else price - dual_value,
    }
    _write_json(args.out, report)
    if args.witness:
        _write_json(args.witness, strategy_to_dict(witness))
    return EXIT_OK


def _cmd_verify(args) -> int:
    family = load_market(args.spec)
    with open(args.strategy) as fh:
        strategy = strategy_from_dict(json.load(fh), family.tree)
    tree = family.tree
    checks: dict = {}
    ok_admissible, violation = is_admissible(strategy, family, tol=args.tol)
    checks["admissible"] = {
        "ok": ok_admissible,
        "violation": None if violation is None else {
            "theta": violation.theta, "scenario": violation.scenario,
            "time": violation.time, "kind": violation.kind, "value": violation.value,
        },
    }
    sf_ok = True
    for theta in family.model_names:
        ledgers = [bond_ledger(strategy, family, theta, w) for w in range(tree.n_scenarios)]
        sf_ok = sf_ok and check_self_financing(ledgers, strategy, family, theta, tol=args.tol)
    checks["self_financing"] = {"ok": sf_ok}
    overall = ok_admissible and sf_ok
    if args.certificate:
        with open(args.certificate) as fh:
            cps = cps_from_dict(json.load(fh), tree)
        cert_ok = verify_cps(cps, family, cps.theta, cps.lambda_check, tol=args.tol)
        checks["certificate"] = {"ok": cert_ok, "theta": cps.theta,
                                 "lambda_check": cps.lambda_check}
        overall = overall and cert_ok
        if cert_ok and ok_admissible:
            worst_overall = None
            super_ok = True
            theta = cps.theta
            paths = [deflated_value_process(strategy, cps, family, theta, w)
                     for w in range(tree.n_scenarios)]
            s_ok, worst = check_optional_strong_supermartingale(paths, tree, tol=args.tol)
            super_ok = super_ok and s_ok
            worst_overall = worst if worst_overall is None else min(worst_overall, worst)
            checks["supermartingale"] = {"ok": super_ok, "worst_slack": worst_overall,
                                         "theta": theta}
            overall = overall and super_ok
            lam = family.transaction_cost
            liquidated = all(
                abs(strategy.share_path(w).value_at(tree.horizon)) < 1e-12
                for w in range(tree.n_scenarios)
            )
            if cps.lambda_check < lam and liquidated:
                report = variation_bounds(strategy, cps, family, theta)
                checks["variation_bound"] = {
                    "ok": report.ok,
                    "expected_up": report.expected_up,
                    "expected_total": report.expected_total,
                    "bound_up": report.bound_up,
                    "bound_total": report.bound_total,
                }
                overall = overall and report.ok
            else:
                checks["variation_bound"] = {
                    "skipped": "needs a certificate below lambda and a liquidated strategy"
                }
    _write_json(args.out, {"ok": overall, "checks": checks})
    return EXIT_OK if overall else EXIT_VERIFICATION


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "check-cps": _cmd_check_cps,
        "superhedge": _cmd_superhedge,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except MarketSpecError as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except HypothesisUnmet as err:
        print(f"hypothesis failure: {err}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ContractViolation as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
