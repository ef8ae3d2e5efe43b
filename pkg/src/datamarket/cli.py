"""Command-line front end: ``datamarket {baseline,price,run,verify,sweep} --config PATH``."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import ConfigError, welfare_opt, welfare_upper_bound
from .config import load_config
from .mechanism import MechanismError, PaymentRule, run_round, welfare_inputs, profit_inputs
from .pricing import InstanceTooLarge, profit_search
from .reports import write_csv, write_json, write_atomic
from .simulation import icc_sweep
from .verification import build_inputs, verify_market


def _envelope(cfg, command: str, results: dict, d_scale: float = 1.0) -> dict:
    out = {
        "tool": "datamarket",
        "version": __version__,
        "command": command,
        "config_sha256": cfg.config_hash,
        "seed": cfg.seed,
        "reps": cfg.reps,
        "objective": cfg.objective,
        "results": results,
    }
    if d_scale != 1.0:
        out["debug_tamper_d"] = d_scale
    return out


def _out(cfg) -> Path:
    return Path(cfg.output)


def cmd_baseline(cfg) -> int:
    market = cfg.market
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        base = welfare_opt(market)
    results = {
        "welfare_opt": base.to_dict(),
        "welfare_upper_bound": welfare_upper_bound(base, market.costs[0], market.costs[1]),
        "warnings": [str(w.message) for w in caught],
    }
    if base.n_opt >= 2:
        results["welfare_inputs"] = welfare_inputs(market, base).to_dict()
    path = write_json(_out(cfg) / "baseline.json", _envelope(cfg, "baseline", results))
    print(f"N_opt={base.n_opt} OPT={base.opt:.6f} -> {path}")
    return 0


def cmd_price(cfg) -> int:
    market = cfg.market
    search = profit_search(market)
    results = {"profit_search": search.to_dict()}
    if search.n_plus >= 2:
        results["profit_inputs"] = profit_inputs(market, search).to_dict()
    path = write_json(_out(cfg) / "price.json", _envelope(cfg, "price", results))
    flag = " (unprofitable)" if search.unprofitable else ""
    print(f"N+={search.n_plus} profit={search.profit:.6f}{flag} -> {path}")
    return 0


def cmd_run(cfg) -> int:
    market = cfg.market
    inputs, _ = build_inputs(market, cfg.objective)
    amounts = PaymentRule(inputs, market).requests.amounts
    header = (
        ["round", "seed", "delta"]
        + [f"price_{j}" for j in range(market.n_buyers)]
        + [f"payment_{i}" for i in range(len(market.costs))]
        + ["residual", "flags"]
    )
    rows, prices, payments, residuals, flag_counts = [], [], [], [], {}
    for r in range(cfg.rounds):
        rng = np.random.default_rng([cfg.seed, 5, r])
        subs = [rng.normal(cfg.mu, market.sigma, size=n) for n in amounts]
        out = run_round(inputs, subs, market, [cfg.seed, 6, r])
        rows.append(
            [r, f"{cfg.seed}:{r}", repr(out.discrepancy)]
            + [repr(p) for p in out.prices]
            + [repr(p) for p in out.payments]
            + [repr(out.bb_residual), "|".join(out.flags)]
        )
        prices.append(out.prices)
        payments.append(out.payments)
        residuals.append(out.bb_residual)
        for f in out.flags:
            flag_counts[f] = flag_counts.get(f, 0) + 1
    out_dir = _out(cfg)
    write_csv(out_dir / "rounds.csv", header, rows)
    results = {
        "mechanism_inputs": inputs.to_dict(),
        "requests": list(amounts),
        "rounds": cfg.rounds,
        "mu": cfg.mu,
        "mean_prices": np.mean(prices, axis=0).tolist(),
        "mean_payments": np.mean(payments, axis=0).tolist(),
        "max_abs_residual": float(np.max(np.abs(residuals))),
        "flag_counts": flag_counts,
    }
    if cfg.broker_absorbs_residual:
        results["broker_net_total"] = -float(np.sum(residuals))
    path = write_json(out_dir / "run.json", _envelope(cfg, "run", results))
    print(f"{cfg.rounds} rounds, max |residual|={results['max_abs_residual']:.3g} -> {path}")
    return 0


def cmd_verify(cfg) -> int:
    checks = verify_market(cfg.market, cfg.objective, cfg.seed, cfg.reps, cfg.bb_rounds, cfg.mu)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}")
    ok = all(c.passed for c in checks)
    results = {"all_pass": ok, "checks": [c.to_dict() for c in checks]}
    path = write_json(_out(cfg) / "verify.json", _envelope(cfg, "verify", results))
    print(f"{'all checks passed' if ok else 'verification FAILED'} -> {path}")
    return 0 if ok else 1


def cmd_sweep(cfg, d_scale: float = 1.0) -> int:
    inputs, _ = build_inputs(cfg.market, cfg.objective)
    report = icc_sweep(inputs, cfg.market, cfg.grid, cfg.reps, cfg.seed, d_scale)
    out_dir = _out(cfg)
    path = write_json(out_dir / "sweep.json", _envelope(cfg, "sweep", report.to_dict(), d_scale))
    write_atomic(out_dir / "sweep.txt", report.to_table())
    print(
        f"{len(report.entries)} deviations, {len(report.failures)} failing, "
        f"concavity {'ok' if all(c.passed for c in report.concavity) else 'FAILED'} -> {path}"
    )
    return 0 if report.all_pass else 1


COMMANDS = {
    "baseline": cmd_baseline,
    "price": cmd_price,
    "run": cmd_run,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="market/run config (JSON)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--reps", type=int, help="Monte Carlo replications (overrides config)")
    common.add_argument("--out", help="report directory (overrides config)")
    common.add_argument("--objective", choices=["welfare", "profit"], help="mechanism instantiation")

    parser = argparse.ArgumentParser(prog="datamarket", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("baseline", parents=[common], help="welfare-optimal non-strategic baseline")
    sub.add_parser("price", parents=[common], help="envy-free profit search")
    run = sub.add_parser("run", parents=[common], help="simulate truthful rounds, write CSV trace")
    run.add_argument("--rounds", type=int, help="number of rounds (overrides config)")
    sub.add_parser("verify", parents=[common], help="budget balance, IR and efficiency checks")
    sweep = sub.add_parser("sweep", parents=[common], help="unilateral deviation sweep")
    sweep.add_argument(
        "--debug-tamper-d", type=float, default=1.0, metavar="FACTOR",
        help="scale penalty coefficients (negative control only)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, reps=args.reps, output=args.out, objective=args.objective,
            rounds=getattr(args, "rounds", None),
        )
        if args.command == "sweep":
            return cmd_sweep(cfg, args.debug_tamper_d)
        return COMMANDS[args.command](cfg)
    except (ConfigError, MechanismError, InstanceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
