"""
PRSH: a k-point stochastic hillclimber over the PRZI strategy value.

Time is cut into stages of k*W ticks.  Within a stage each of the k candidate
strategies is live for one W-tick slot; at the stage boundary the slot with the
best mean profit-per-second seeds the next candidate set through a mutation
function.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .przi import (
    PrziLearner,
    StrategySlot,
    clamp_strategy,
    slot_pps,
    window_of,
    window_ticks,
)
from .traders import SessionClock

MUTATIONS = ("m1", "m2", "m3")


@dataclass(frozen=True)
class PrshConfig:
    k: int = 6
    v: int = 128
    m: str = "m3"
    elitism: bool = True

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"prsh.k must be >= 2, got {self.k}")
        if self.m not in MUTATIONS:
            raise ValueError(f"prsh.m must be one of {MUTATIONS}, got {self.m!r}")
        if self.v // self.k < 1:
            raise ValueError(f"prsh.v={self.v} gives an empty window for k={self.k}")

    @property
    def label(self) -> str:
        return f"k={self.k},v={self.v},m={self.m}"


@dataclass
class StageState:
    ph: int
    strategies: list[float]
    slots: list[StrategySlot] = field(default_factory=list)


def _mutant(s0: float, m: str, i: int, rng: random.Random) -> float:
    if m == "m1":
        return s0 + rng.gauss(0.0, 0.05)
    if m == "m2":
        return s0 + rng.gauss(0.0, 0.15)
    # m3 alternates: odd positions explore upward, even positions downward
    if i % 2 == 1:
        return s0 + rng.uniform(0.0, 0.1)
    return s0 - rng.uniform(0.0, 0.1)


def mutate(s0: float, k: int, m: str, rng: random.Random, elitism: bool = True) -> list[float]:
    """Next candidate set around ``s0``; with elitism ``s0`` itself comes first."""
    if m not in MUTATIONS:
        raise ValueError(f"unknown mutation {m!r}")
    s0 = clamp_strategy(s0)
    if elitism:
        out = [s0]
        idx = range(2, k + 1)
    else:
        out = []
        idx = range(1, k + 1)
    out.extend(clamp_strategy(_mutant(s0, m, i, rng)) for i in idx)
    return out


def make_slots(strategies: list[float], ph: int, w: int) -> list[StrategySlot]:
    k = len(strategies)
    base = ph * k * w
    return [StrategySlot(s, base + i * w, base + (i + 1) * w) for i, s in enumerate(strategies)]


def best_slot(slots: list[StrategySlot]) -> int:
    """Index of the highest mean pps; ties go to the lowest index."""
    best_i, best_v = 0, slot_pps(slots[0])
    for i in range(1, len(slots)):
        v = slot_pps(slots[i])
        if v > best_v:
            best_i, best_v = i, v
    return best_i


def advance_stage(
    stage: StageState, rng: random.Random, m: str, w: int, elitism: bool = True
) -> StageState:
    incumbent = stage.slots[best_slot(stage.slots)].s
    k = len(stage.strategies)
    strategies = mutate(incumbent, k, m, rng, elitism)
    ph = stage.ph + 1
    return StageState(ph, strategies, make_slots(strategies, ph, w))


class PrshTrader(PrziLearner):
    algo = "PRSH"

    def __init__(self, tid: str, side: str, rng: random.Random, clock: SessionClock,
                 config: PrshConfig = PrshConfig()):
        super().__init__(tid, side, rng, clock)
        self.config = config
        self.w = window_ticks(config.v, config.k, clock.ticks_per_second)
        s0 = rng.uniform(-1.0, 1.0)
        strategies = mutate(s0, config.k, config.m, rng, config.elitism)
        self.stage = StageState(0, strategies, make_slots(strategies, 0, self.w))
        self.slot_index = 0
        self.history: list[float] = []

    def on_tick(self, t):
        ph, i = window_of(t - 1, self.config.k, self.w)
        while self.stage.ph < ph:
            self.history.append(self.stage.slots[best_slot(self.stage.slots)].s)
            self.stage = advance_stage(self.stage, self.rng, self.config.m, self.w, self.config.elitism)
            self.needs_quote = True
        if i != self.slot_index:
            self.slot_index = i
            self.needs_quote = True

    def current_strategy(self, t):
        return self.stage.strategies[self.slot_index], (self.stage.ph, self.slot_index)

    def record_fill(self, s, tag, profit, pps, t):
        ph, i = tag
        # a quote placed in an earlier stage belongs to a slot that is already closed
        if ph == self.stage.ph:
            self.stage.slots[i].record(profit, pps)
