"""
Fixed-strategy trader agents: GVWY, ZIC, SHVR, SNPR and ZIP.

Quote rules are plain functions so they can be tested in isolation; the
``*Trader`` classes wrap them with the per-agent state the session needs.
Sides are customer sides, ``"buy"`` or ``"sell"``.  A quote method returning
``None`` means the trader declines to quote on this poll.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .lob import SYSTEM_MAX, SYSTEM_MIN, LobSnapshot

ALGORITHMS = ("GVWY", "ZIC", "SHVR", "SNPR", "ZIP", "PRSH", "PRB")


@dataclass(slots=True)
class CustomerAssignment:
    trader_id: str
    side: str
    limit_price: int
    issue_time: int


@dataclass(frozen=True, slots=True)
class MarketEvent:
    """What a ZIP trader sees at the end of a tick."""

    lob: LobSnapshot
    trade_price: Optional[int] = None
    bid_hit: bool = False
    ask_lifted: bool = False
    bid_improved: bool = False
    ask_improved: bool = False


@dataclass(slots=True)
class SessionClock:
    """Timing information shared by all traders in one session."""

    n_ticks: int
    ticks_per_second: int = 1

    def seconds(self, tick: int) -> float:
        return tick / self.ticks_per_second


def _clamp_price(p: int) -> int:
    return min(max(p, SYSTEM_MIN), SYSTEM_MAX)


def gvwy_quote(limit: int, side: str) -> int:
    return limit


def zic_quote(limit: int, side: str, rng: random.Random) -> int:
    if side == "buy":
        return rng.randint(SYSTEM_MIN, limit)
    return rng.randint(limit, SYSTEM_MAX)


def shvr_quote(limit: int, side: str, lob: LobSnapshot) -> int:
    if side == "buy":
        if lob.best_bid is None:
            return SYSTEM_MIN
        return min(lob.best_bid + 1, limit)
    if lob.best_ask is None:
        return SYSTEM_MAX
    return max(lob.best_ask - 1, limit)


def snpr_quote(
    limit: int, side: str, lob: LobSnapshot, t: float, duration: float, window: float = 0.05
) -> Optional[int]:
    """Lurk until the last ``window`` fraction of the session, then cross the spread."""
    if t < (1.0 - window) * duration:
        return None
    if side == "buy":
        if lob.best_ask is not None and lob.best_ask <= limit:
            return lob.best_ask
        return None
    if lob.best_bid is not None and lob.best_bid >= limit:
        return lob.best_bid
    return None


@dataclass(slots=True)
class ZipState:
    margin: float
    beta: float
    momentum: float
    last_delta: float = 0.0
    ca: float = 5.0  # absolute target perturbation, pennies
    cr: float = 0.05  # relative target perturbation


def zip_quote(state: ZipState, limit: int, side: str) -> int:
    price = int(round(limit * (1.0 + state.margin)))
    if side == "buy":
        price = min(price, limit)
    else:
        price = max(price, limit)
    return _clamp_price(price)


def _zip_target(price: float, up: bool, state: ZipState, rng: random.Random) -> float:
    ptrb_abs = state.ca * rng.random()
    if up:
        return price * (1.0 + state.cr * rng.random()) + ptrb_abs
    return price * (1.0 - state.cr * rng.random()) - ptrb_abs


def zip_adjust(state: ZipState, limit: int, side: str, target: float) -> ZipState:
    """One Widrow-Hoff step with momentum moving the quote toward ``target``.

    The margin is clamped to its sign constraint (buyer <= 0, seller >= 0).
    """
    quote = limit * (1.0 + state.margin)
    delta = (1.0 - state.momentum) * state.beta * (target - quote) + state.momentum * state.last_delta
    margin = (quote + delta) / limit - 1.0
    margin = min(margin, 0.0) if side == "buy" else max(margin, 0.0)
    return ZipState(margin, state.beta, state.momentum, delta, state.ca, state.cr)


def zip_update(
    state: ZipState, limit: int, side: str, event: MarketEvent, rng: random.Random
) -> ZipState:
    """Canonical ZIP margin heuristic driven by one market event."""
    quote = zip_quote(state, limit, side)
    lob = event.lob
    deal = event.trade_price is not None and (event.bid_hit or event.ask_lifted)
    if side == "sell":
        if deal:
            tp = event.trade_price
            if quote <= tp:
                return zip_adjust(state, limit, side, _zip_target(tp, True, state, rng))
            if event.ask_lifted:
                # undercut: someone else sold below our quote
                return zip_adjust(state, limit, side, _zip_target(tp, False, state, rng))
        elif event.ask_improved and lob.best_ask is not None and quote > lob.best_ask:
            if lob.best_bid is not None:
                target = _zip_target(lob.best_bid, True, state, rng)
            else:
                target = lob.worst_ask
            return zip_adjust(state, limit, side, target)
    else:
        if deal:
            tp = event.trade_price
            if quote >= tp:
                return zip_adjust(state, limit, side, _zip_target(tp, False, state, rng))
            if event.bid_hit:
                return zip_adjust(state, limit, side, _zip_target(tp, True, state, rng))
        elif event.bid_improved and lob.best_bid is not None and quote < lob.best_bid:
            if lob.best_ask is not None:
                target = _zip_target(lob.best_ask, False, state, rng)
            else:
                target = lob.worst_bid
            return zip_adjust(state, limit, side, target)
    return state


class Trader:
    """Base agent: holds at most one customer assignment and a profit tally."""

    algo = "NONE"

    def __init__(self, tid: str, side: str, rng: random.Random, clock: SessionClock):
        self.tid = tid
        self.side = side
        self.rng = rng
        self.clock = clock
        self.assignment: Optional[CustomerAssignment] = None
        self.profit = 0
        self.n_trades = 0

    def on_assignment(self, assignment: CustomerAssignment, t: int) -> None:
        self.assignment = assignment

    def quote(self, t: int, lob: LobSnapshot, resting: Optional[int]) -> Optional[int]:
        raise NotImplementedError

    def on_fill(self, price: int, profit: int, t: int) -> None:
        self.profit += profit
        self.n_trades += 1
        self.assignment = None

    def on_tick(self, t: int) -> None:
        """Called at the start of every tick, before any quoting."""

    def on_market(self, event: MarketEvent, t: int) -> None:
        """Called at the end of every tick with that tick's market summary."""


class GiveawayTrader(Trader):
    algo = "GVWY"

    def quote(self, t, lob, resting):
        return gvwy_quote(self.assignment.limit_price, self.side)


class ZicTrader(Trader):
    algo = "ZIC"

    def quote(self, t, lob, resting):
        return zic_quote(self.assignment.limit_price, self.side, self.rng)


class ShaverTrader(Trader):
    algo = "SHVR"

    def quote(self, t, lob, resting):
        best = lob.best_bid if self.side == "buy" else lob.best_ask
        if resting is not None and resting == best:
            # already at the top of the book; shaving ourselves would only leak profit
            return resting
        return shvr_quote(self.assignment.limit_price, self.side, lob)


class SniperTrader(Trader):
    algo = "SNPR"

    def __init__(self, tid, side, rng, clock, window: float = 0.05):
        super().__init__(tid, side, rng, clock)
        self.window = window

    def quote(self, t, lob, resting):
        return snpr_quote(
            self.assignment.limit_price, self.side, lob, t, self.clock.n_ticks, self.window
        )


class ZipTrader(Trader):
    algo = "ZIP"

    def __init__(self, tid, side, rng, clock):
        super().__init__(tid, side, rng, clock)
        margin = rng.uniform(0.05, 0.35)
        self.state = ZipState(
            margin=-margin if side == "buy" else margin,
            beta=rng.uniform(0.1, 0.5),
            momentum=rng.uniform(0.0, 0.1),
        )

    def quote(self, t, lob, resting):
        return zip_quote(self.state, self.assignment.limit_price, self.side)

    def on_market(self, event, t):
        if self.assignment is not None:
            self.state = zip_update(
                self.state, self.assignment.limit_price, self.side, event, self.rng
            )
