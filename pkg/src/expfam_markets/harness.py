"""Simulation engine: multi-round markets with sampled outcomes.

A simulation runs a single market through ``rounds`` rounds.  Each round:

1. the scheduled trader(s) compute and execute their trades;
2. an outcome is drawn from the family member at ``true_theta``;
3. every trade executed this round settles -- the trader receives the
   portfolio's payoff and its budget/cash move by ``payoff - cost``, which
   is exactly the trade's myopic impact on the market's log loss;
4. the round's log loss (at the end-of-round state) is recorded.

Outcomes pay off and budgets update every round, so each round behaves as
an independent instance of the market; the share vector carries over
between rounds by default, or snaps back to ``theta0`` when
``state_reset`` is set (a sequence of genuinely fresh instances -- the
configuration used to audit damage bounds, since then the only difference
a trader makes to a round is its own trade).  Trade counters and revenue
always persist.

Outcome draws consume a generator seeded only by ``config.seed``, so two
configurations sharing a seed, a family, and ``true_theta`` see identical
outcome streams -- damage-bound comparisons are paired, not
variance-dominated.  Reports are pure data and serialize byte-identically
for identical configs and seeds.

Budgets, cash, and log losses all share one unit: a trade's myopic impact
IS the trader's budget change, so a trader's cumulative impact equals its
final budget minus its initial one, and never falls below ``-initial``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, CorruptLogError, DomainError
from .families import ExpFamily, VonMisesFisher3, family_from_id
from .market import TRADE_MARGIN, Market, TradeRecord, payoff
from .scoring import moments_from_mean_variance
from .traders import (
    TraderProfile,
    bayesian_market_trade,
    budget_limited_trade,
    exp_utility_trade,
)

TRADER_MODELS = ("risk-neutral", "bayesian", "exp-utility", "budget-limited")


# ----------------------------------------------------------------------
# Configuration
# ----------------------------------------------------------------------

def parse_mean_params(family: ExpFamily, value, where: str) -> np.ndarray:
    """Parse a family-appropriate mean description into a raw mean vector.

    Accepts a raw vector (or scalar for one-dimensional families), a
    ``{"probs": [...]}`` object for categorical, a ``{"mean", "variance"}``
    object for gaussian-moments, or ``{"mean": ...}``/``{"moment": ...}``
    for the remaining families.  Boundary means are admitted (empirical
    means can sit on the boundary); downstream operations that need
    interior values will reject them there.
    """
    try:
        if isinstance(value, dict):
            if "probs" in value:
                mean = np.asarray(value["probs"], dtype=float)
            elif "variance" in value:
                mean = moments_from_mean_variance(value["mean"], value["variance"])
            elif "moment" in value:
                mean = np.atleast_1d(np.asarray(value["moment"], dtype=float))
            elif "mean" in value:
                mean = np.atleast_1d(np.asarray(value["mean"], dtype=float))
            else:
                raise ConfigError(f"{where}: unrecognized mean description {value!r}")
        else:
            mean = np.atleast_1d(np.asarray(value, dtype=float))
        return family.check_mean(mean, margin=0.0)
    except (DomainError, TypeError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_belief_theta(family: ExpFamily, value, where: str) -> np.ndarray:
    """Parse a belief into natural parameters.

    Accepts ``{"theta": [...]}`` directly, or any mean description
    understood by :func:`parse_mean_params` (converted through the inverse
    gradient map, so it must be interior).
    """
    try:
        if isinstance(value, dict) and "theta" in value:
            return family.check_natural(value["theta"])
        if isinstance(value, dict):
            return family.natural_from_mean(parse_mean_params(family, value, where))
        return family.check_natural(value)
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class TraderSpec:
    """One configured trader: behavior model plus profile parameters."""

    id: str
    model: str
    belief_theta: np.ndarray | None = None
    risk_aversion: float = 0.0
    budget: float | None = None
    sample_mean: np.ndarray | None = None
    sample_size: float = 1.0


@dataclass
class SimConfig:
    """Validated simulation configuration."""

    family: ExpFamily
    theta0: np.ndarray
    rounds: int
    true_theta: np.ndarray
    traders: list[TraderSpec]
    seed: int | None = None
    inv_liquidity: float = 1.0
    arrival: str = "round-robin"
    sequence: list[str] = field(default_factory=list)
    state_reset: bool = False

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        """Build and validate a config from parsed JSON; raises ConfigError."""
        if not isinstance(raw, dict):
            raise ConfigError(f"config must be an object, got {type(raw).__name__}")
        try:
            family = family_from_id(raw["family"])
        except KeyError as exc:
            raise ConfigError("config is missing 'family'") from exc
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        if isinstance(family, VonMisesFisher3):
            raise ConfigError("vmf3 outcomes cannot be sampled; simulation unsupported")

        lam = float(raw.get("inv_liquidity", 1.0))
        if not lam > 0.0:
            raise ConfigError(f"inv_liquidity must be positive, got {lam}")

        try:
            theta0 = np.atleast_1d(np.asarray(raw["theta0"], dtype=float))
            family.check_natural(lam * theta0, margin=TRADE_MARGIN)
            true_theta = family.check_natural(raw["true_theta"])
        except KeyError as exc:
            raise ConfigError(f"config is missing {exc}") from exc
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

        rounds = raw.get("rounds")
        if not isinstance(rounds, int) or rounds < 1:
            raise ConfigError(f"rounds must be a positive integer, got {rounds!r}")

        seed = raw.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise ConfigError(f"seed must be an integer, got {seed!r}")

        arrival = raw.get("arrival", "round-robin")
        if arrival not in ("round-robin", "fixed-sequence"):
            raise ConfigError(f"arrival must be 'round-robin' or 'fixed-sequence', got {arrival!r}")

        traders_raw = raw.get("traders")
        if not isinstance(traders_raw, list) or not traders_raw:
            raise ConfigError("config needs a nonempty 'traders' list")
        traders = []
        seen = set()
        for i, td in enumerate(traders_raw):
            where = f"traders[{i}]"
            if not isinstance(td, dict):
                raise ConfigError(f"{where}: must be an object")
            tid = td.get("id")
            if not isinstance(tid, str) or not tid:
                raise ConfigError(f"{where}: needs a nonempty string 'id'")
            if tid in seen:
                raise ConfigError(f"{where}: duplicate trader id {tid!r}")
            seen.add(tid)
            model = td.get("model")
            if model not in TRADER_MODELS:
                raise ConfigError(f"{where}: model must be one of {TRADER_MODELS}, got {model!r}")
            risk_aversion = float(td.get("risk_aversion", 0.0))
            if risk_aversion < 0.0:
                raise ConfigError(f"{where}: risk_aversion must be nonnegative")
            budget = td.get("budget")
            if budget is not None:
                budget = float(budget)
                if budget < 0.0:
                    raise ConfigError(f"{where}: budget must be nonnegative")
            belief = None
            if model == "bayesian":
                sample = td.get("sample")
                if not isinstance(sample, dict) or "mean" not in sample:
                    raise ConfigError(f"{where}: bayesian trader needs sample: {{mean, size}}")
                sample_mean = parse_mean_params(family, sample["mean"], f"{where}.sample.mean")
                sample_size = float(sample.get("size", 1.0))
                if not sample_size > 0.0:
                    raise ConfigError(f"{where}: sample size must be positive")
                if lam != 1.0:
                    raise ConfigError(f"{where}: bayesian traders require inv_liquidity == 1")
            else:
                if "belief" not in td:
                    raise ConfigError(f"{where}: model {model!r} needs a belief")
                belief = parse_belief_theta(family, td["belief"], f"{where}.belief")
                sample_mean, sample_size = None, 1.0
                if model == "budget-limited" and lam != 1.0:
                    raise ConfigError(f"{where}: budget-limited traders require inv_liquidity == 1")
            traders.append(TraderSpec(
                id=tid, model=model, belief_theta=belief,
                risk_aversion=risk_aversion, budget=budget,
                sample_mean=sample_mean, sample_size=sample_size,
            ))

        sequence = raw.get("sequence", [tr.id for tr in traders])
        if arrival == "fixed-sequence":
            unknown = [tid for tid in sequence if tid not in seen]
            if unknown:
                raise ConfigError(f"sequence references unknown trader ids {unknown}")
            if not sequence:
                raise ConfigError("fixed-sequence arrival needs a nonempty sequence")

        return cls(
            family=family, theta0=theta0, rounds=rounds, true_theta=true_theta,
            traders=traders, seed=seed, inv_liquidity=lam, arrival=arrival,
            sequence=list(sequence), state_reset=bool(raw.get("state_reset", False)),
        )


# ----------------------------------------------------------------------
# Report
# ----------------------------------------------------------------------

CSV_COLUMNS = (
    "round", "trader_id", "delta", "cost", "outcome",
    "log_loss_before", "log_loss_after", "myopic_impact", "budget_after",
)


@dataclass
class TradeEvent:
    """One executed-and-settled trade, as reported."""

    round_index: int
    trader_id: str
    delta: list[float]
    cost: float
    outcome: object
    log_loss_before: float | None
    log_loss_after: float | None
    myopic_impact: float
    trader_budgets: dict[str, float | None]

    def to_dict(self) -> dict:
        return {
            "round": self.round_index,
            "trader_id": self.trader_id,
            "delta": self.delta,
            "cost": self.cost,
            "outcome": self.outcome,
            "log_loss_before": self.log_loss_before,
            "log_loss_after": self.log_loss_after,
            "myopic_impact": self.myopic_impact,
            "trader_budgets": self.trader_budgets,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TradeEvent":
        return cls(
            round_index=d["round"], trader_id=d["trader_id"], delta=d["delta"],
            cost=d["cost"], outcome=d["outcome"],
            log_loss_before=d["log_loss_before"], log_loss_after=d["log_loss_after"],
            myopic_impact=d["myopic_impact"], trader_budgets=d["trader_budgets"],
        )


@dataclass
class SimReport:
    """Per-event records plus run-level aggregates."""

    family_id: str
    seed: int
    rounds: int
    inv_liquidity: float
    arrival: str
    state_reset: bool
    valid: bool
    error: str | None
    events: list[TradeEvent]
    aggregates: dict

    def to_dict(self) -> dict:
        return {
            "family": self.family_id,
            "seed": self.seed,
            "rounds": self.rounds,
            "inv_liquidity": self.inv_liquidity,
            "arrival": self.arrival,
            "state_reset": self.state_reset,
            "valid": self.valid,
            "error": self.error,
            "events": [ev.to_dict() for ev in self.events],
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimReport":
        return cls(
            family_id=d["family"], seed=d["seed"], rounds=d["rounds"],
            inv_liquidity=d["inv_liquidity"], arrival=d["arrival"],
            state_reset=d["state_reset"], valid=d["valid"], error=d["error"],
            events=[TradeEvent.from_dict(ev) for ev in d["events"]],
            aggregates=d["aggregates"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


# ----------------------------------------------------------------------
# Simulation
# ----------------------------------------------------------------------

class _TraderState:
    """Running account for one trader.

    Both the budget and the cumulative impact accumulate the same
    per-trade changes sequentially, so the budget floor argument (cost
    capped at the budget, payoff nonnegative for pure purchases) holds in
    float arithmetic, not just in exact arithmetic.
    """

    def __init__(self, spec: TraderSpec):
        self.spec = spec
        self.pnl = 0.0  # cumulative payoff - cost, in budget units
        self.budget = spec.budget  # None means unlimited


def _schedule(config: SimConfig, round_index: int) -> list[TraderSpec]:
    by_id = {tr.id: tr for tr in config.traders}
    if config.arrival == "round-robin":
        return [config.traders[(round_index - 1) % len(config.traders)]]
    return [by_id[tid] for tid in config.sequence]


def _compute_trade(market: Market, state: _TraderState) -> np.ndarray:
    spec = state.spec
    if spec.model == "risk-neutral":
        return spec.belief_theta / market.inv_liquidity - market.theta
    if spec.model == "bayesian":
        return bayesian_market_trade(market, spec.sample_mean, spec.sample_size)
    if spec.model == "budget-limited":
        # Securities with signed payoffs can leave a budget underwater;
        # such a trader can still afford (only) zero-or-negative-cost moves.
        budget = None if state.budget is None else max(0.0, state.budget)
    else:
        budget = None
    profile = TraderProfile(
        id=spec.id, belief_theta=spec.belief_theta,
        risk_aversion=spec.risk_aversion, budget=budget,
    )
    if spec.model == "exp-utility":
        return exp_utility_trade(market, profile)
    return budget_limited_trade(market, profile)


def run_simulation(config: SimConfig, trade_log_path: str | None = None) -> SimReport:
    """Run a configured simulation to completion (or to a flagged abort).

    Deterministic given the config seed: reruns produce byte-identical
    reports.  A round-level domain violation stops the run and returns the
    partial report with ``valid=False`` and the error message attached.
    """
    if config.seed is None:
        raise ConfigError("simulation requires a seed (config, env, or flag)")
    family = config.family
    market = Market(family, config.theta0, config.inv_liquidity, log_path=trade_log_path)
    rng = np.random.default_rng(config.seed)
    states = {tr.id: _TraderState(tr) for tr in config.traders}
    events: list[TradeEvent] = []
    track_loss = config.inv_liquidity == 1.0
    total_log_loss = 0.0 if track_loss else None
    valid, error = True, None

    for round_index in range(1, config.rounds + 1):
        try:
            if config.state_reset and round_index > 1:
                market.reset_theta(config.theta0)
            staged: list[tuple[_TraderState, TradeRecord]] = []
            for spec in _schedule(config, round_index):
                state = states[spec.id]
                delta = _compute_trade(market, state)
                record = market.execute(delta, trader_id=spec.id, round_index=round_index)
                staged.append((state, record))
            outcome = family.sample(config.true_theta, rng)
        except (DomainError, ConvergenceError) as exc:
            valid, error = False, f"round {round_index}: {exc}"
            break

        # Settle: each trade's payoff minus cost is the trader's budget
        # change and the trade's myopic impact on the market's log loss.
        settled = []
        phi = family.statistic(outcome)
        for state, record in staged:
            pay = payoff(family, record.delta, outcome)
            change = pay - record.cost
            state.pnl += change
            if state.budget is not None:
                state.budget += change
            if track_loss:
                loss_before = family.log_partition(record.theta_before) - float(np.dot(record.theta_before, phi))
                loss_after = family.log_partition(record.theta_after) - float(np.dot(record.theta_after, phi))
            else:
                loss_before = loss_after = None
            settled.append((state, record, change, loss_before, loss_after))
        if track_loss:
            total_log_loss += market.log_loss(outcome)

        budgets = {tr.id: states[tr.id].budget for tr in config.traders}
        for state, record, change, loss_before, loss_after in settled:
            events.append(TradeEvent(
                round_index=round_index,
                trader_id=state.spec.id,
                delta=[float(v) for v in record.delta],
                cost=record.cost,
                outcome=outcome,
                log_loss_before=loss_before,
                log_loss_after=loss_after,
                myopic_impact=change,
                trader_budgets=dict(budgets),
            ))

    aggregates = {
        "completed_rounds": events[-1].round_index if events else 0,
        "total_log_loss": total_log_loss,
        "per_trader_impact": {tr.id: states[tr.id].pnl for tr in config.traders},
        "final_budgets": {tr.id: states[tr.id].budget for tr in config.traders},
        "final_theta": [float(v) for v in market.theta],
        "final_prices": [float(v) for v in market.prices()],
        "revenue": market.revenue,
        "n_trades": market.n_trades,
    }
    return SimReport(
        family_id=family.id, seed=config.seed, rounds=config.rounds,
        inv_liquidity=config.inv_liquidity, arrival=config.arrival,
        state_reset=config.state_reset, valid=valid, error=error,
        events=events, aggregates=aggregates,
    )


# ----------------------------------------------------------------------
# Replay and report emission
# ----------------------------------------------------------------------

def replay(records: list[TradeRecord], state0: Market | dict) -> Market:
    """Re-execute a trade log against an initial state, verifying each record.

    Every record's pre-trade state must match the running state exactly
    (a jump back to the initial share vector is accepted, covering
    state-reset simulations), its post-trade state must equal ``before +
    delta``, and its cost must equal the recomputed quote bit-for-bit.
    Returns the reconstructed market; raises CorruptLogError at the first
    offending record.
    """
    if isinstance(state0, Market):
        state0 = state0.state_dict()
    market = Market.from_state_dict(state0)
    theta_init = market.theta.copy()
    for line, record in enumerate(records, 1):
        if not np.array_equal(record.theta_before, market.theta):
            if np.array_equal(record.theta_before, theta_init):
                market.reset_theta(theta_init)
            else:
                raise CorruptLogError(line, f"pre-trade state {record.theta_before} does not match {market.theta}")
        if not np.array_equal(record.theta_after, record.theta_before + record.delta):
            raise CorruptLogError(line, "post-trade state does not equal pre-trade state plus delta")
        try:
            expected_cost = market.quote(record.delta)
        except DomainError as exc:
            raise CorruptLogError(line, f"recorded trade is not executable: {exc}") from exc
        if expected_cost != record.cost:
            raise CorruptLogError(line, f"recorded cost {record.cost!r} != recomputed {expected_cost!r}")
        market.execute(record.delta, trader_id=record.trader_id, round_index=record.round_index)
    return market


def emit_report(report: SimReport, fmt: str, path: str) -> None:
    """Write a report as JSON (lossless round trip) or CSV (one row per event).

    CSV columns: ``round, trader_id, delta, cost, outcome, log_loss_before,
    log_loss_after, myopic_impact, budget_after``.  Vector cells are
    semicolon-joined; an unlimited budget is an empty cell.  A zero-round
    simulation yields a header-only file.
    """
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
        return
    if fmt != "csv":
        raise ConfigError(f"unknown report format {fmt!r}; use 'json' or 'csv'")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for ev in report.events:
            own_budget = ev.trader_budgets.get(ev.trader_id)
            writer.writerow([
                ev.round_index,
                ev.trader_id,
                ";".join(repr(float(v)) for v in ev.delta),
                repr(float(ev.cost)),
                ev.outcome if isinstance(ev.outcome, int) else repr(float(ev.outcome)),
                "" if ev.log_loss_before is None else repr(float(ev.log_loss_before)),
                "" if ev.log_loss_after is None else repr(float(ev.log_loss_after)),
                repr(float(ev.myopic_impact)),
                "" if own_budget is None else repr(float(own_budget)),
            ])
