"""
Limit-order-book market simulator with PRZI-based strategy learners (PRSH,
PRB) and a reproducible experiment harness.
"""

__version__ = "0.1.0"

from .lob import Order, OrderBook, Trade
from .session import MarketDynamic, PopulationEntry, SessionConfig, SessionResult, run_session

__all__ = [
    "__version__",
    "MarketDynamic",
    "Order",
    "OrderBook",
    "PopulationEntry",
    "SessionConfig",
    "SessionResult",
    "Trade",
    "run_session",
]
