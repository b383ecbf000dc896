"""
Market session: clock, customer order stream, trader wiring and profit accounting.
"""

from __future__ import annotations

import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .lob import SYSTEM_MAX, SYSTEM_MIN, Order, OrderBook, Trade
from .prb import PrbConfig, PrbTrader
from .prsh import PrshConfig, PrshTrader
from .traders import (
    ALGORITHMS,
    CustomerAssignment,
    GiveawayTrader,
    MarketEvent,
    SessionClock,
    ShaverTrader,
    SniperTrader,
    Trader,
    ZicTrader,
    ZipTrader,
)

DYNAMICS = ("trend", "trendless")


class SessionConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MarketDynamic:
    kind: str
    noise_enabled: bool = True

    def __post_init__(self):
        if self.kind not in DYNAMICS:
            raise ValueError(f"unknown market dynamic {self.kind!r}")


@dataclass(frozen=True)
class PopulationEntry:
    """``count`` traders of ``algo``; each adaptive trader picks its config
    uniformly from ``options`` (empty means the algorithm's defaults)."""

    algo: str
    count: int
    options: tuple = ()


def default_population(*extra: PopulationEntry, n: int = 20) -> tuple[PopulationEntry, ...]:
    base = tuple(PopulationEntry(a, n) for a in ("GVWY", "ZIC", "ZIP", "SNPR", "SHVR"))
    return base + tuple(extra)


@dataclass(frozen=True)
class SessionConfig:
    duration: int = 1000
    ticks_per_second: int = 1
    arrival_rate: float = 2.0
    buyers: tuple[PopulationEntry, ...] = field(default_factory=default_population)
    sellers: tuple[PopulationEntry, ...] = field(default_factory=default_population)
    seed: int = 0
    snpr_window: float = 0.05


def _round(x: float) -> int:
    return int(math.floor(x + 0.5))


def range_at(dynamic: MarketDynamic, t: float, rng: random.Random) -> tuple[int, int]:
    """Supply/demand range at time ``t`` seconds, one noise draw per bound."""
    if dynamic.kind == "trend":
        sd, drift = 5.0, 0.1 * t
    else:
        sd, drift = 20.0, 0.0
    if dynamic.noise_enabled:
        n_lo, n_hi = rng.gauss(0.0, sd), rng.gauss(0.0, sd)
    else:
        n_lo = n_hi = 0.0
    lo = _round(drift + n_lo + 100.0)
    hi = _round(drift + n_hi + 300.0)
    lo = min(max(lo, SYSTEM_MIN), SYSTEM_MAX)
    hi = min(max(hi, SYSTEM_MIN), SYSTEM_MAX)
    if lo > hi:
        lo, hi = hi, lo
    if lo == hi:
        if hi < SYSTEM_MAX:
            hi += 1
        else:
            lo -= 1
    return lo, hi


def next_arrival(rng: random.Random, rate: float) -> float:
    if rate <= 0:
        raise ValueError("arrival rate must be positive")
    while True:
        dt = rng.expovariate(rate)
        if dt > 0.0:
            return dt


class CustomerFeed:
    """Alternating buy/sell customer orders handed to random traders."""

    def __init__(self, buyers: Sequence[str], sellers: Sequence[str]):
        if not buyers and not sellers:
            raise ValueError("population is empty")
        self.buyers = list(buyers)
        self.sellers = list(sellers)
        self.next_side = "buy"

    def assign(self, rng: random.Random, dynamic: MarketDynamic, t: float, tick: int) -> CustomerAssignment:
        side = self.next_side
        self.next_side = "sell" if side == "buy" else "buy"
        pool = self.buyers if side == "buy" else self.sellers
        tid = pool[rng.randrange(len(pool))]
        lo, hi = range_at(dynamic, t, rng)
        return CustomerAssignment(tid, side, rng.randint(lo, hi), tick)


def assign_customer_order(rng, dynamic, t, feed: CustomerFeed, tick: int = 0) -> CustomerAssignment:
    return feed.assign(rng, dynamic, t, tick)


def trade_profit(trade: Trade, buyer_limit: int, seller_limit: int) -> tuple[int, int]:
    return buyer_limit - trade.price, trade.price - seller_limit


@dataclass(frozen=True)
class Fill:
    trade: Trade
    buyer_limit: int
    seller_limit: int
    buyer_algo: str
    seller_algo: str
    aggressor: str


@dataclass
class SessionResult:
    seed: int
    dynamic: str
    per_trader: list[dict]
    per_algo_mean: dict[str, float]
    fills: list[Fill]
    audit: dict = field(default_factory=dict)

    @property
    def trades(self) -> list[Trade]:
        return [f.trade for f in self.fills]

    def algo_counts(self) -> dict[str, int]:
        counts: dict[str, int] = defaultdict(int)
        for row in self.per_trader:
            counts[row["algo"]] += 1
        return dict(counts)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "dynamic": self.dynamic,
            "per_trader": self.per_trader,
            "per_algo_mean": self.per_algo_mean,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _validate(cfg: SessionConfig) -> None:
    if cfg.duration <= 0:
        raise SessionConfigError("duration must be positive")
    if cfg.ticks_per_second < 1:
        raise SessionConfigError("ticks_per_second must be >= 1")
    if not cfg.arrival_rate > 0:
        raise SessionConfigError("arrival rate must be positive")
    for side in (cfg.buyers, cfg.sellers):
        for entry in side:
            if entry.algo not in ALGORITHMS:
                raise SessionConfigError(f"unknown algorithm {entry.algo!r}")
            if entry.count < 0:
                raise SessionConfigError(f"negative count for {entry.algo}")
    n_buy = sum(e.count for e in cfg.buyers)
    n_sell = sum(e.count for e in cfg.sellers)
    if (n_buy == 0) != (n_sell == 0):
        raise SessionConfigError("one side of the market has no traders")


def _build_trader(algo: str, tid: str, side: str, option, cfg: SessionConfig, rng: random.Random,
                  np_rng: np.random.Generator, clock: SessionClock) -> Trader:
    if algo == "GVWY":
        return GiveawayTrader(tid, side, rng, clock)
    if algo == "ZIC":
        return ZicTrader(tid, side, rng, clock)
    if algo == "SHVR":
        return ShaverTrader(tid, side, rng, clock)
    if algo == "SNPR":
        return SniperTrader(tid, side, rng, clock, cfg.snpr_window)
    if algo == "ZIP":
        return ZipTrader(tid, side, rng, clock)
    if algo == "PRSH":
        return PrshTrader(tid, side, rng, clock, option or PrshConfig())
    if algo == "PRB":
        return PrbTrader(tid, side, rng, clock, option or PrbConfig(), np_rng)
    raise SessionConfigError(f"unknown algorithm {algo!r}")


def build_population(cfg: SessionConfig, rng, np_rng, clock) -> list[Trader]:
    traders = []
    for side, entries, prefix in (("buy", cfg.buyers, "B"), ("sell", cfg.sellers, "S")):
        for entry in entries:
            for i in range(entry.count):
                option = rng.choice(entry.options) if entry.options else None
                tid = f"{prefix}-{entry.algo}-{i:02d}"
                traders.append(_build_trader(entry.algo, tid, side, option, cfg, rng, np_rng, clock))
    return traders


ScheduledOrder = tuple[int, str, int]  # (tick, trader_id, limit_price)


def run_session(cfg: SessionConfig, dynamic: MarketDynamic,
                schedule: Optional[Iterable[ScheduledOrder]] = None) -> SessionResult:
    """Run one seeded session.

    ``schedule`` replaces the Poisson customer stream with scripted
    assignments, which is only meant for tests and hand traces.
    """
    _validate(cfg)
    rng = random.Random(cfg.seed)
    np_rng = np.random.default_rng(cfg.seed)
    n_ticks = cfg.duration * cfg.ticks_per_second
    clock = SessionClock(n_ticks, cfg.ticks_per_second)
    traders = build_population(cfg, rng, np_rng, clock)
    by_id = {tr.tid: tr for tr in traders}
    book = OrderBook()
    fills: list[Fill] = []

    adaptive = [tr for tr in traders if tr.algo in ("PRSH", "PRB")]
    zips = [tr for tr in traders if tr.algo == "ZIP"]

    scripted: dict[int, list[tuple[str, int]]] = defaultdict(list)
    feed = None
    next_t = math.inf
    if schedule is not None:
        for tick, tid, limit in schedule:
            scripted[tick].append((tid, limit))
    elif traders:
        feed = CustomerFeed([t.tid for t in traders if t.side == "buy"],
                            [t.tid for t in traders if t.side == "sell"])
        next_t = next_arrival(rng, cfg.arrival_rate)

    def deliver(a: CustomerAssignment, tick: int) -> None:
        tr = by_id[a.trader_id]
        book.cancel(tr.tid)
        tr.on_assignment(a, tick)

    for tick in range(1, n_ticks + 1):
        now = tick / cfg.ticks_per_second
        for tr in adaptive:
            tr.on_tick(tick)

        for tid, limit in scripted.get(tick, ()):
            deliver(CustomerAssignment(tid, by_id[tid].side, limit, tick), tick)
        while next_t <= now:
            deliver(feed.assign(rng, dynamic, next_t, tick), tick)
            next_t += next_arrival(rng, cfg.arrival_rate)

        start_bid, start_ask = book.bids.best(), book.asks.best()
        last_fill: Optional[Fill] = None
        working = [tr for tr in traders if tr.assignment is not None]
        rng.shuffle(working)
        for tr in working:
            if tr.assignment is None:
                continue  # filled as a resting order earlier in this tick
            resting_order = book.resting_order(tr.tid)
            resting = resting_order.price if resting_order is not None else None
            price = tr.quote(tick, book.snapshot(), resting)
            if price is None or price == resting:
                continue
            book_side = "bid" if tr.side == "buy" else "ask"
            trade = book.submit(Order(tr.tid, book_side, price, tick))
            if trade is None:
                continue
            buyer, seller = by_id[trade.buyer_id], by_id[trade.seller_id]
            b_lim, s_lim = buyer.assignment.limit_price, seller.assignment.limit_price
            b_profit, s_profit = trade_profit(trade, b_lim, s_lim)
            last_fill = Fill(trade, b_lim, s_lim, buyer.algo, seller.algo, tr.side)
            fills.append(last_fill)
            buyer.on_fill(trade.price, b_profit, tick)
            seller.on_fill(trade.price, s_profit, tick)

        if zips:
            end_bid, end_ask = book.bids.best(), book.asks.best()
            event = MarketEvent(
                lob=book.snapshot(),
                trade_price=last_fill.trade.price if last_fill else None,
                bid_hit=bool(last_fill and last_fill.aggressor == "sell"),
                ask_lifted=bool(last_fill and last_fill.aggressor == "buy"),
                bid_improved=end_bid is not None and (start_bid is None or end_bid > start_bid),
                ask_improved=end_ask is not None and (start_ask is None or end_ask < start_ask),
            )
            for z in zips:
                z.on_market(event, tick)

    per_trader = [{"id": tr.tid, "algo": tr.algo, "side": tr.side, "profit": tr.profit} for tr in traders]
    totals: dict[str, list[int]] = {}
    for tr in traders:
        totals.setdefault(tr.algo, []).append(tr.profit)
    per_algo_mean = {algo: sum(v) / len(v) for algo, v in totals.items()}
    prb = [tr for tr in traders if tr.algo == "PRB"]
    audit = {
        "prb_stage_checks": sum(tr.stage_checks for tr in prb),
        "prb_fill_checks": sum(tr.fill_checks for tr in prb),
    }
    return SessionResult(cfg.seed, dynamic.kind, per_trader, per_algo_mean, fills, audit)
