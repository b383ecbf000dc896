"""
Strategy-parameterised quoting shared by the PRSH and PRB learners.

A strategy value s in [-1, 1] sets how a quote is drawn between the trader's
own limit price and the passive extreme of its side of the book:

  s = +1  always quote the limit (giveaway behaviour)
  s =  0  uniform over the interval (zero-intelligence behaviour)
  s = -1  always quote the passive extreme

Intermediate values use x = u**g(s) with u ~ U(0, 1) and g(s) = tan(pi (1 + s) / 4),
so the quote distribution moves monotonically between the three anchors.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .lob import SYSTEM_MAX, SYSTEM_MIN, LobSnapshot
from .traders import CustomerAssignment, SessionClock, Trader

EXPONENT_CAP = 1e6


def clamp_strategy(s: float) -> float:
    return min(1.0, max(-1.0, s))


def shape_exponent(s: float) -> float:
    s = clamp_strategy(s)
    if s >= 1.0:
        return EXPONENT_CAP
    if s <= -1.0:
        return 0.0
    return min(math.tan(math.pi * (1.0 + s) / 4.0), EXPONENT_CAP)


def quote_interval(limit: int, side: str, lob: LobSnapshot) -> tuple[int, int]:
    """The [lo, hi] range a PRZI quote is drawn from; never loss-making."""
    if side == "sell":
        hi = lob.worst_ask if lob.worst_ask is not None else SYSTEM_MAX
        return limit, max(hi, limit)
    lo = lob.worst_bid if lob.worst_bid is not None else SYSTEM_MIN
    return min(lo, limit), limit


def przi_quote(s: float, limit: int, side: str, lob: LobSnapshot, rng: random.Random) -> int:
    lo, hi = quote_interval(limit, side, lob)
    width = hi - lo
    if width == 0:
        return lo
    if s >= 1.0:
        return limit
    x = rng.random() ** shape_exponent(s)
    # floor over width+1 cells: exact discrete uniform at s=0, endpoints reachable at s=+-1
    offset = min(int(x * (width + 1)), width)
    if side == "sell":
        return lo + offset
    return hi - offset


def pps_of_fill(profit: float, quote_time: float, fill_time: float, tick: float = 1.0) -> float:
    """Profit per second of one fill; elapsed time is floored at one tick."""
    if fill_time < quote_time:
        raise ValueError("fill precedes quote")
    return profit / max(fill_time - quote_time, tick)


@dataclass
class StrategySlot:
    s: float
    start: int
    end: int
    profit: int = 0
    fills: int = 0
    pps_samples: list[float] = field(default_factory=list)

    def record(self, profit: int, pps: float) -> None:
        self.profit += profit
        self.fills += 1
        self.pps_samples.append(pps)


def slot_pps(slot: StrategySlot) -> float:
    if not slot.pps_samples:
        return 0.0
    return math.fsum(slot.pps_samples) / len(slot.pps_samples)


def window_of(t: int, k: int, w: int) -> tuple[int, int]:
    """Stage index and slot index of zero-based tick ``t`` for k slots of w ticks."""
    span = k * w
    return t // span, (t % span) // w


def stage_count(duration: int, k: int, w: int) -> int:
    return -(-duration // (k * w))


def window_ticks(v: int, k: int, ticks_per_second: int = 1) -> int:
    w = v // k
    if w < 1:
        raise ValueError(f"strategy wait time v={v} too short for k={k}")
    return w * ticks_per_second


class PrziLearner(Trader):
    """Common machinery for traders that quote through a strategy value.

    Subclasses decide which s is live; this class requotes whenever a new
    assignment arrives or the live s changes, and remembers when and under
    which s the resting quote was placed.
    """

    def __init__(self, tid: str, side: str, rng: random.Random, clock: SessionClock):
        super().__init__(tid, side, rng, clock)
        self.needs_quote = False
        self.quote_tick: Optional[int] = None
        self.quote_s: Optional[float] = None
        self.quote_tag = None

    def on_assignment(self, assignment: CustomerAssignment, t: int) -> None:
        super().on_assignment(assignment, t)
        self.needs_quote = True

    def current_strategy(self, t: int) -> tuple[float, object]:
        """Return (s, tag) for a fresh quote at tick t; the tag comes back in fills."""
        raise NotImplementedError

    def quote(self, t, lob, resting):
        if not self.needs_quote and resting is not None:
            return resting
        s, tag = self.current_strategy(t)
        self.needs_quote = False
        self.quote_tick = t
        self.quote_s = s
        self.quote_tag = tag
        return przi_quote(s, self.assignment.limit_price, self.side, lob, self.rng)

    def on_fill(self, price, profit, t):
        super().on_fill(price, profit, t)
        tps = self.clock.ticks_per_second
        pps = pps_of_fill(profit, self.quote_tick / tps, t / tps, 1.0 / tps)
        self.record_fill(self.quote_s, self.quote_tag, profit, pps, t)

    def record_fill(self, s: float, tag, profit: int, pps: float, t: int) -> None:
        raise NotImplementedError
