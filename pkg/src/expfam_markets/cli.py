"""Command-line interface.

Subcommands:

* ``score``       -- score a mean-parameter report against an outcome.
* ``quote``       -- price a portfolio against a persisted market state.
* ``trade``       -- execute a portfolio, atomically rewriting the state
                     file and optionally appending to a trade log.
* ``simulate``    -- run a configured simulation and write reports.
* ``replay``      -- verify a trade log against an initial state.
* ``equilibrium`` -- solve a multi-trader equilibrium problem.

Exit codes: 0 success, 2 configuration error (bad flags, malformed JSON,
invalid config), 3 domain or convergence error, 4 I/O error.  The
``EXPFAM_MARKETS_SEED`` environment variable supplies a default simulation
seed; an explicit ``--seed`` flag wins over it, and both win over the
config file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .equilibrium import (
    EquilibriumProblem,
    best_response_dynamics,
    closed_form_equilibrium,
    potential,
)
from .errors import ConfigError, ConvergenceError, DomainError
from .families import GaussianMoments, family_from_id
from .harness import (
    SimConfig,
    emit_report,
    parse_belief_theta,
    parse_mean_params,
    replay,
    run_simulation,
)
from .market import load_state, read_trade_log, save_state
from .scoring import log_score

SEED_ENV_VAR = "EXPFAM_MARKETS_SEED"


def _load_json_file(path: str, what: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path}: invalid JSON ({exc})") from exc


def _parse_json_value(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what}: invalid JSON {text!r} ({exc})") from exc


def _cmd_score(args) -> int:
    try:
        family = family_from_id(args.family)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    report = _parse_json_value(args.report, "--report")
    if isinstance(family, GaussianMoments) and not isinstance(report, dict):
        raise ConfigError("gaussian-moments reports are {\"mean\": m, \"variance\": v}")
    mu = parse_mean_params(family, report, "--report")
    outcome = _parse_json_value(args.outcome, "--outcome")
    print(repr(log_score(family, mu, outcome)))
    return 0


def _cmd_quote(args) -> int:
    market = load_state(args.market)
    delta = np.atleast_1d(np.asarray(_parse_json_value(args.delta, "--delta"), dtype=float))
    print(repr(market.quote(delta)))
    return 0


def _cmd_trade(args) -> int:
    market = load_state(args.market, log_path=args.log)
    delta = np.atleast_1d(np.asarray(_parse_json_value(args.delta, "--delta"), dtype=float))
    record = market.execute(delta, trader_id=args.trader)
    save_state(market, args.market)
    print(json.dumps(record.to_dict(), sort_keys=True))
    return 0


def _resolve_seed(args, raw_config: dict) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
    return raw_config.get("seed")


def _cmd_simulate(args) -> int:
    raw = _load_json_file(args.config, "config")
    raw["seed"] = _resolve_seed(args, raw)
    config = SimConfig.from_dict(raw)
    report = run_simulation(config, trade_log_path=args.trade_log)
    emit_report(report, "json", args.out)
    if args.csv:
        emit_report(report, "csv", args.csv)
    print(f"simulated {report.aggregates['completed_rounds']} rounds -> {args.out}"
          + ("" if report.valid else f" (INVALID: {report.error})"))
    return 0 if report.valid else 3


def _cmd_replay(args) -> int:
    records = read_trade_log(args.log)
    state0 = _load_json_file(args.state0, "state")
    market = replay(records, state0)
    print(json.dumps(market.state_dict(), sort_keys=True))
    return 0


def _cmd_equilibrium(args) -> int:
    raw = _load_json_file(args.problem, "problem")
    try:
        family = family_from_id(raw["family"])
        theta0 = raw["theta0"]
        traders = raw["traders"]
        beliefs = [parse_belief_theta(family, td["belief"] if "belief" in td else td,
                                      f"traders[{i}]") for i, td in enumerate(traders)]
        aversions = [float(td["risk_aversion"]) for td in traders]
        problem = EquilibriumProblem(family=family, theta0=theta0,
                                     beliefs=beliefs, risk_aversions=aversions)
    except (KeyError, TypeError, DomainError) as exc:
        raise ConfigError(f"problem {args.problem}: {exc}") from exc
    result = best_response_dynamics(problem)
    theta_eq, _ = closed_form_equilibrium(problem)
    out = {
        "theta_eq": [float(v) for v in theta_eq],
        "prices_eq": [float(v) for v in family.mean_from_natural(theta_eq)],
        "deltas": [[float(v) for v in d] for d in result.deltas],
        "potential_value": potential(problem, result.deltas),
        "br_rounds": result.sweeps,
    }
    print(json.dumps(out, sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expfam-markets",
                                     description="Exponential-family prediction markets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score a mean-parameter report against an outcome")
    p.add_argument("--family", required=True, help="family id, e.g. exponential-rate")
    p.add_argument("--report", required=True, help="JSON report (number, vector, or object)")
    p.add_argument("--outcome", required=True, help="JSON outcome")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("quote", help="price a portfolio against a market state file")
    p.add_argument("--market", required=True, help="market state JSON file")
    p.add_argument("--delta", required=True, help="JSON portfolio vector")
    p.set_defaults(func=_cmd_quote)

    p = sub.add_parser("trade", help="execute a portfolio, updating the state file atomically")
    p.add_argument("--market", required=True, help="market state JSON file (rewritten)")
    p.add_argument("--delta", required=True, help="JSON portfolio vector")
    p.add_argument("--trader", default="", help="trader id recorded in the log")
    p.add_argument("--log", default=None, help="optional JSON-lines trade log to append")
    p.set_defaults(func=_cmd_trade)

    p = sub.add_parser("simulate", help="run a simulation config")
    p.add_argument("--config", required=True, help="simulation config JSON file")
    p.add_argument("--out", required=True, help="JSON report output path")
    p.add_argument("--csv", default=None, help="optional CSV report output path")
    p.add_argument("--trade-log", default=None, help="optional JSON-lines trade log path")
    p.add_argument("--seed", type=int, default=None,
                   help=f"seed override (wins over ${SEED_ENV_VAR} and the config)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("replay", help="verify a trade log against an initial state")
    p.add_argument("--log", required=True, help="JSON-lines trade log")
    p.add_argument("--state0", required=True, help="initial market state JSON file")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("equilibrium", help="solve a multi-trader equilibrium problem")
    p.add_argument("--problem", required=True, help="problem JSON file")
    p.set_defaults(func=_cmd_equilibrium)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
