"""Cost-function automated market maker.

The market sells one security per statistic component: a share of security
``i`` bought as part of portfolio ``delta`` pays ``delta_i * phi_i(x)`` at
outcome ``x``.  The quoted cost of ``delta`` at share vector ``theta`` is
``C(theta + delta) - C(theta)`` where the cost function is the family's
log-partition function, scaled for liquidity:

    C_lam(theta) = (1/lam) * T(lam * theta).

Instantaneous prices are the gradient ``grad C_lam(theta) = grad T(lam*theta)``,
i.e. the mean parameters of the member at ``lam * theta`` -- prices ARE the
market's probabilistic prediction.  Larger ``lam`` (inverse liquidity) moves
prices further per share bought.

The share vector must stay strictly inside the cost function's domain.  In
exact arithmetic the blow-up of ``C`` at the boundary self-enforces this
(no finite-budget trader buys an infinite-cost portfolio), but in floating
point we reject trades that move ``lam * theta`` within ``1e-9`` of the
boundary outright.

One market instance is single-writer: ``execute`` requires exclusive
access, while ``quote``/``prices``/``log_loss`` are read-only and may run
concurrently between writes.  Distinct instances are independent.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .families import ExpFamily, as_params, family_from_id

TRADE_MARGIN = 1e-9


def payoff(family: ExpFamily, delta, x) -> float:
    """Payout of portfolio ``delta`` at outcome ``x``: ``<delta, phi(x)>``."""
    delta = as_params(delta, family.dim, "delta")
    return float(np.dot(delta, family.statistic(x)))


@dataclass
class TradeRecord:
    """One executed trade: portfolio, cost, and the states it bridged."""

    round_index: int
    trader_id: str
    delta: np.ndarray
    cost: float
    theta_before: np.ndarray
    theta_after: np.ndarray

    def to_dict(self) -> dict:
        return {
            "round": self.round_index,
            "trader_id": self.trader_id,
            "delta": [float(v) for v in self.delta],
            "cost": self.cost,
            "theta_before": [float(v) for v in self.theta_before],
            "theta_after": [float(v) for v in self.theta_after],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TradeRecord":
        return cls(
            round_index=int(d["round"]),
            trader_id=str(d["trader_id"]),
            delta=np.asarray(d["delta"], dtype=float),
            cost=float(d["cost"]),
            theta_before=np.asarray(d["theta_before"], dtype=float),
            theta_after=np.asarray(d["theta_after"], dtype=float),
        )


class Market:
    """Share-vector state plus pricing, trading, and accounting.

    Args:
        family: The exponential family whose log partition is the cost.
        theta0: Initial share vector; ``inv_liquidity * theta0`` must be
            strictly interior (e.g. negative shares for ``exponential-rate``).
        inv_liquidity: Price responsiveness ``lam > 0``; default 1.
        n_trades: Trade counter (posted so that conjugate-prior traders can
            weigh the prices as a phantom sample).
        revenue: Cash collected so far; stays equal to the sum of executed
            trade costs.
        log_path: Optional JSON-lines trade log, appended and flushed on
            every execute for replay-based auditing.
    """

    def __init__(self, family: ExpFamily, theta0, inv_liquidity: float = 1.0,
                 n_trades: int = 0, revenue: float = 0.0, log_path: str | None = None):
        self.family = family
        lam = float(inv_liquidity)
        if not lam > 0.0:
            raise DomainError(f"inv_liquidity must be positive, got {inv_liquidity}")
        self.inv_liquidity = lam
        theta0 = as_params(theta0, family.dim, "theta0")
        family.check_natural(lam * theta0, margin=TRADE_MARGIN)
        self.theta = theta0
        self.n_trades = int(n_trades)
        self.revenue = float(revenue)
        self.log_path = log_path
        self.trades: list[TradeRecord] = []

    # ------------------------------------------------------------------
    # Read-only views
    # ------------------------------------------------------------------

    def cost(self, theta=None) -> float:
        """Liquidity-adjusted cost ``(1/lam) T(lam * theta)`` (default: current state)."""
        theta = self.theta if theta is None else as_params(theta, self.family.dim, "theta")
        lam = self.inv_liquidity
        return self.family.log_partition(lam * theta) / lam

    def prices(self) -> np.ndarray:
        """Instantaneous security prices: the mean parameters at ``lam * theta``."""
        return self.family.mean_from_natural(self.inv_liquidity * self.theta)

    def quote(self, delta) -> float:
        """Cost of buying ``delta`` now, without trading.

        Raises DomainError when the purchase would push the share vector out
        of (or within ``1e-9`` of) the cost function's domain -- such trades
        are impossible at any price.
        """
        delta = as_params(delta, self.family.dim, "delta")
        target = self.theta + delta
        lam = self.inv_liquidity
        self.family.check_natural(lam * target, margin=TRADE_MARGIN)
        return self.family.log_partition(lam * target) / lam - self.family.log_partition(lam * self.theta) / lam

    def payoff(self, delta, x) -> float:
        """Payout of ``delta`` at outcome ``x``."""
        return payoff(self.family, delta, x)

    def log_loss(self, x) -> float:
        """Prediction loss ``C(theta) - <theta, phi(x)>`` of the current state.

        Defined only at unit inverse liquidity, where the share vector is
        the natural parameter of the market's predictive density and the
        loss is its negative log likelihood.
        """
        if self.inv_liquidity != 1.0:
            raise DomainError("log_loss requires inv_liquidity == 1")
        phi = self.family.statistic(x)
        return self.family.log_partition(self.theta) - float(np.dot(self.theta, phi))

    def state_dict(self) -> dict:
        """JSON-ready snapshot of the persistent market state."""
        return {
            "family": self.family.id,
            "theta": [float(v) for v in self.theta],
            "inv_liquidity": self.inv_liquidity,
            "n_trades": self.n_trades,
            "revenue": self.revenue,
        }

    @classmethod
    def from_state_dict(cls, d: dict, log_path: str | None = None) -> "Market":
        return cls(
            family=family_from_id(d["family"]),
            theta0=np.asarray(d["theta"], dtype=float),
            inv_liquidity=float(d.get("inv_liquidity", 1.0)),
            n_trades=int(d.get("n_trades", 0)),
            revenue=float(d.get("revenue", 0.0)),
            log_path=log_path,
        )

    # ------------------------------------------------------------------
    # Mutation
    # ------------------------------------------------------------------

    def execute(self, delta, trader_id: str = "", round_index: int | None = None) -> TradeRecord:
        """Buy ``delta``, updating shares, counter, revenue, and the trade log.

        The state is untouched when the quote fails.  ``round_index``
        defaults to the pre-trade trade count.
        """
        delta = as_params(delta, self.family.dim, "delta")
        cost = self.quote(delta)
        if round_index is None:
            round_index = self.n_trades
        record = TradeRecord(
            round_index=int(round_index),
            trader_id=trader_id,
            delta=delta,
            cost=cost,
            theta_before=self.theta,
            theta_after=self.theta + delta,
        )
        self.theta = record.theta_after
        self.n_trades += 1
        self.revenue += cost
        self.trades.append(record)
        if self.log_path is not None:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
                fh.flush()
        return record

    def reset_theta(self, theta0) -> None:
        """Reset the share vector (a fresh market instance); counters persist."""
        theta0 = as_params(theta0, self.family.dim, "theta0")
        self.family.check_natural(self.inv_liquidity * theta0, margin=TRADE_MARGIN)
        self.theta = theta0


# ----------------------------------------------------------------------
# Persistence
# ----------------------------------------------------------------------

def save_state(market: Market, path: str) -> None:
    """Write the market state as JSON via an atomic temp-file rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(market.state_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_state(path: str, log_path: str | None = None) -> Market:
    """Load a market from a JSON state file."""
    with open(path, "r", encoding="utf-8") as fh:
        return Market.from_state_dict(json.load(fh), log_path=log_path)


def read_trade_log(path: str) -> list[TradeRecord]:
    """Parse a JSON-lines trade log."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(TradeRecord.from_dict(json.loads(line)))
    return records
