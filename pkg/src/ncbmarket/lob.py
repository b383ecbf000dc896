"""
Price-time-priority limit order book for a unit-quantity continuous double auction.

Each side keeps a sorted list of occupied price levels and, per level, an
insertion-ordered dict of resting orders (FIFO within a level).  A trader can
hold at most one resting order in the whole book: a new submission from the
same trader first removes the old one, then matches or rests.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from typing import Iterator, Literal, Optional

SYSTEM_MIN = 1
SYSTEM_MAX = 1000

Side = Literal["bid", "ask"]


class PriceBoundsError(ValueError):
    """Raised when an order price falls outside the system price bounds."""


@dataclass(slots=True)
class Order:
    trader_id: str
    side: Side
    price: int
    time: int
    quantity: int = 1


@dataclass(frozen=True, slots=True)
class Trade:
    price: int
    buyer_id: str
    seller_id: str
    time: int


@dataclass(frozen=True, slots=True)
class LobSnapshot:
    best_bid: Optional[int] = None
    best_ask: Optional[int] = None
    worst_bid: Optional[int] = None
    worst_ask: Optional[int] = None
    bid_depth: int = 0
    ask_depth: int = 0


class _BookSide:
    """One half of the book. ``prices`` is ascending regardless of side."""

    __slots__ = ("is_bid", "prices", "levels", "orders")

    def __init__(self, is_bid: bool):
        self.is_bid = is_bid
        self.prices: list[int] = []
        self.levels: dict[int, dict[str, Order]] = {}
        self.orders: dict[str, Order] = {}

    def __len__(self) -> int:
        return len(self.orders)

    def best(self) -> Optional[int]:
        if not self.prices:
            return None
        return self.prices[-1] if self.is_bid else self.prices[0]

    def worst(self) -> Optional[int]:
        if not self.prices:
            return None
        return self.prices[0] if self.is_bid else self.prices[-1]

    def add(self, order: Order) -> None:
        level = self.levels.get(order.price)
        if level is None:
            level = self.levels[order.price] = {}
            bisect.insort(self.prices, order.price)
        level[order.trader_id] = order
        self.orders[order.trader_id] = order

    def remove(self, trader_id: str) -> Optional[Order]:
        order = self.orders.pop(trader_id, None)
        if order is None:
            return None
        level = self.levels[order.price]
        del level[trader_id]
        if not level:
            del self.levels[order.price]
            del self.prices[bisect.bisect_left(self.prices, order.price)]
        return order

    def pop_best(self) -> Order:
        price = self.best()
        level = self.levels[price]
        trader_id = next(iter(level))
        return self.remove(trader_id)

    def iter_orders(self) -> Iterator[Order]:
        prices = reversed(self.prices) if self.is_bid else iter(self.prices)
        for price in prices:
            yield from self.levels[price].values()


class OrderBook:
    """Continuous double auction book; execution at the resting order's price."""

    def __init__(self, min_price: int = SYSTEM_MIN, max_price: int = SYSTEM_MAX):
        self.min_price = min_price
        self.max_price = max_price
        self.bids = _BookSide(is_bid=True)
        self.asks = _BookSide(is_bid=False)

    def _check_price(self, price: int) -> None:
        if not (self.min_price <= price <= self.max_price) or price != int(price):
            raise PriceBoundsError(
                f"price {price!r} outside [{self.min_price}, {self.max_price}]"
            )

    def submit(self, order: Order) -> Optional[Trade]:
        """Replace the trader's resting order with ``order``, then match or rest it.

        Returns the Trade when the order crosses the opposite best quote.
        """
        self._check_price(order.price)
        if order.quantity != 1:
            raise ValueError("orders must have quantity 1")
        self.cancel(order.trader_id)
        if order.side == "bid":
            best_ask = self.asks.best()
            if best_ask is not None and order.price >= best_ask:
                resting = self.asks.pop_best()
                return Trade(resting.price, order.trader_id, resting.trader_id, order.time)
            self.bids.add(order)
        else:
            best_bid = self.bids.best()
            if best_bid is not None and order.price <= best_bid:
                resting = self.bids.pop_best()
                return Trade(resting.price, resting.trader_id, order.trader_id, order.time)
            self.asks.add(order)
        return None

    def cancel(self, trader_id: str) -> bool:
        removed = self.bids.remove(trader_id) or self.asks.remove(trader_id)
        return removed is not None

    def resting_order(self, trader_id: str) -> Optional[Order]:
        return self.bids.orders.get(trader_id) or self.asks.orders.get(trader_id)

    def snapshot(self) -> LobSnapshot:
        return LobSnapshot(
            best_bid=self.bids.best(),
            best_ask=self.asks.best(),
            worst_bid=self.bids.worst(),
            worst_ask=self.asks.worst(),
            bid_depth=len(self.bids),
            ask_depth=len(self.asks),
        )

    def iter_bids(self) -> Iterator[Order]:
        """Resting bids, best (highest) first, FIFO within a price."""
        return self.bids.iter_orders()

    def iter_asks(self) -> Iterator[Order]:
        """Resting asks, best (lowest) first, FIFO within a price."""
        return self.asks.iter_orders()


# convenience wrappers mirroring the operation names used elsewhere
def submit_and_match(order: Order, book: OrderBook) -> Optional[Trade]:
    return book.submit(order)


def cancel(trader_id: str, book: OrderBook) -> bool:
    return book.cancel(trader_id)


def snapshot(book: OrderBook) -> LobSnapshot:
    return book.snapshot()


def write_tape(trades, path) -> None:
    """Dump a trade tape as CSV: time,price,buyer_id,seller_id."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "price", "buyer_id", "seller_id"])
        for tr in trades:
            writer.writerow([tr.time, tr.price, tr.buyer_id, tr.seller_id])
