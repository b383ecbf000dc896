"""
PRB: bandit-over-bandit over an ensemble of k Gaussian processes.

Inner bandit: each GP proposes strategy values by tempered posterior sampling.
Outer bandit: at every stage boundary one GP is dropped by softmax-weighted
sampling of k-1 survivors (weights from each member's mean profit per quote
during the stage) and replaced by a fresh, empty GP.  Every fill is observed
by all members, so members differ only in how far back their memory reaches.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .gp import DEFAULT_CAPACITY, DEFAULT_NOISE, GaussianProcess, acquire, temperature
from .przi import PrziLearner, window_of, window_ticks
from .traders import SessionClock


class EnsembleInvariantError(AssertionError):
    """Raised when the ensemble breaks its structural contract."""


@dataclass(frozen=True)
class PrbConfig:
    k: int = 2
    v: int = 32
    noise: float = DEFAULT_NOISE
    capacity: int = DEFAULT_CAPACITY

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"prb.k must be >= 2, got {self.k}")
        if self.v // self.k < 1:
            raise ValueError(f"prb.v={self.v} gives an empty window for k={self.k}")

    @property
    def label(self) -> str:
        return f"k={self.k},v={self.v}"


def active_gp(t: int, k: int, w: int) -> int:
    return window_of(t, k, w)[1]


def softmax_weights(means) -> np.ndarray:
    m = np.asarray(means, dtype=float)
    e = np.exp(m - m.max())
    return e / e.sum()


def draw_survivors(means, n_keep: int, rng: random.Random) -> list[int]:
    """Draw ``n_keep`` indices without replacement, renormalising after each draw."""
    weights = list(softmax_weights(means))
    pool = list(range(len(weights)))
    kept = []
    for _ in range(n_keep):
        total = math.fsum(weights[j] for j in pool)
        u = rng.random() * total
        acc = 0.0
        pick = pool[-1]
        for j in pool:
            acc += weights[j]
            if u < acc:
                pick = j
                break
        kept.append(pick)
        pool.remove(pick)
    return kept


class GpEnsemble:
    def __init__(self, k: int, noise: float = DEFAULT_NOISE, capacity: int = DEFAULT_CAPACITY):
        self.k = k
        self.noise = noise
        self.capacity = capacity
        self.stage = 0
        self.members = [GaussianProcess(noise, capacity, created_stage=0) for _ in range(k)]
        self.R = [0.0] * k
        self.n = [0] * k

    def ages(self) -> list[int]:
        return [self.stage - g.created_stage for g in self.members]

    def choose_strategy(self, i: int, tau: float, rng: np.random.Generator) -> float:
        mu, var = self.members[i].posterior()
        self.n[i] += 1
        return acquire(mu, var, tau, rng)

    def observe_fill(self, s: float, profit: float, pps: float, quoting: GaussianProcess | None) -> None:
        """Add (s, pps) to every member; credit profit to the member that quoted."""
        for g in self.members:
            g.add(s, pps)
        if quoting is not None:
            for i, g in enumerate(self.members):
                if g is quoting:
                    self.R[i] += profit
                    break

    def stage_means(self) -> list[float]:
        return [r / n if n else 0.0 for r, n in zip(self.R, self.n)]

    def stage_end(self, rng: random.Random) -> int:
        """Drop one member by softmax retention and append a fresh one. Returns the dropped index."""
        kept = draw_survivors(self.stage_means(), self.k - 1, rng)
        dropped = next(i for i in range(self.k) if i not in kept)
        self.stage += 1
        self.members = [g for i, g in enumerate(self.members) if i != dropped]
        self.members.append(GaussianProcess(self.noise, self.capacity, created_stage=self.stage))
        self.R = [0.0] * self.k
        self.n = [0] * self.k
        return dropped

    def check(self) -> None:
        if len(self.members) != self.k:
            raise EnsembleInvariantError(f"ensemble has {len(self.members)} members, expected {self.k}")
        ages = self.ages()
        if ages.count(0) != 1 and self.stage > 0:
            raise EnsembleInvariantError(f"expected exactly one fresh member, ages={ages}")


class PrbTrader(PrziLearner):
    algo = "PRB"

    def __init__(self, tid: str, side: str, rng: random.Random, clock: SessionClock,
                 config: PrbConfig = PrbConfig(), np_rng: np.random.Generator | None = None):
        super().__init__(tid, side, rng, clock)
        self.config = config
        self.w = window_ticks(config.v, config.k, clock.ticks_per_second)
        self.np_rng = np_rng if np_rng is not None else np.random.default_rng(rng.getrandbits(64))
        self.ensemble = GpEnsemble(config.k, config.noise, config.capacity)
        self.gp_index = 0
        self.stage_checks = 0
        self.fill_checks = 0

    def on_tick(self, t):
        ph, i = window_of(t - 1, self.config.k, self.w)
        while self.ensemble.stage < ph:
            self.ensemble.stage_end(self.rng)
            self.ensemble.check()
            self.stage_checks += 1
            self.needs_quote = True
        if i != self.gp_index:
            self.gp_index = i
            self.needs_quote = True

    def current_strategy(self, t):
        tau = temperature(t, self.clock.n_ticks)
        s = self.ensemble.choose_strategy(self.gp_index, tau, self.np_rng)
        return s, (self.ensemble.stage, self.ensemble.members[self.gp_index])

    def record_fill(self, s, tag, profit, pps, t):
        stage, member = tag
        before = [len(g) for g in self.ensemble.members]
        # profit only counts toward the stage in which the quote was placed
        self.ensemble.observe_fill(s, profit, pps, member if stage == self.ensemble.stage else None)
        for g, n0 in zip(self.ensemble.members, before):
            if len(g) != min(n0 + 1, g.capacity):
                raise EnsembleInvariantError("a fill did not reach every ensemble member")
        self.fill_checks += 1
