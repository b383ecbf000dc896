"""
Quick oracle and calibration checks runnable from an installed package.

These are smaller versions of the acceptance checks: each returns a
``(name, passed, detail)`` triple and none takes more than a few seconds.
"""

from __future__ import annotations

import math
import random
from typing import Callable

import numpy as np

from .gp import JITTER, GaussianProcess, normalize
from .prb import draw_survivors
from .przi import window_of
from .session import MarketDynamic, PopulationEntry, SessionConfig, run_session
from .stats import ks_normal_test, z_test_greater

Check = tuple[str, bool, str]


def _dense_posterior(s, raw, q, noise):
    y = normalize(raw)
    K = np.exp(-0.5 * (s[:, None] - s[None, :]) ** 2) + (noise + JITTER) * np.eye(s.size)
    kq = np.exp(-0.5 * (s[:, None] - q[None, :]) ** 2)
    alpha = np.linalg.solve(K, y)
    for _ in range(3):
        r = (y.astype(np.longdouble) - K.astype(np.longdouble) @ alpha.astype(np.longdouble)).astype(float)
        alpha = alpha + np.linalg.solve(K, r)
    mu = (kq.T.astype(np.longdouble) @ alpha.astype(np.longdouble)).astype(float)
    var = 1.0 - np.einsum("ij,ij->j", kq, np.linalg.solve(K, kq))
    return mu, np.maximum(var, 0.0)


def check_gp(instances: int = 20) -> Check:
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(1, 51))
        noise = float(rng.choice([0.0, 0.01, 0.1]))
        s = rng.uniform(-1, 1, n)
        raw = rng.normal(0, 3, n)
        gp = GaussianProcess(noise)
        for si, ri in zip(s, raw):
            gp.add(si, ri)
        q = np.linspace(-1, 1, 41)
        mu, var = gp.posterior(q)
        mu0, var0 = _dense_posterior(s, raw, q, noise)
        worst = max(worst, float(np.max(np.abs(mu - mu0))), float(np.max(np.abs(var - var0))))
    return "gp oracle", worst <= 1e-8, f"max abs diff {worst:.2e}"


def check_conservation(sessions: int = 4) -> Check:
    bad = 0
    trades = 0
    for i in range(sessions):
        pop = (PopulationEntry("GVWY", 3), PopulationEntry("ZIC", 3), PopulationEntry("SHVR", 3),
               PopulationEntry("SNPR", 3), PopulationEntry("ZIP", 3), PopulationEntry("PRSH", 3),
               PopulationEntry("PRB", 3))
        cfg = SessionConfig(duration=100, buyers=pop, sellers=pop, seed=100 + i)
        res = run_session(cfg, MarketDynamic(("trend", "trendless")[i % 2]))
        for f in res.fills:
            trades += 1
            b = f.buyer_limit - f.trade.price
            s = f.trade.price - f.seller_limit
            if b + s != f.buyer_limit - f.seller_limit:
                bad += 1
            if (f.buyer_algo != "ZIP" and b < 0) or (f.seller_algo != "ZIP" and s < 0):
                bad += 1
    return "profit conservation", bad == 0 and trades > 0, f"{trades} trades, {bad} violations"


def check_schedule(trials: int = 200) -> Check:
    rng = random.Random(3)
    for _ in range(trials):
        k = rng.randint(2, 16)
        v = rng.randint(k, 300)
        T = rng.randint(1, 2000)
        w = v // k
        p = math.ceil(T / (k * w))
        seen = {window_of(t, k, w) for t in range(p * k * w)}
        if len(seen) != p * k:
            return "window schedule", False, f"k={k} v={v} T={T}"
    return "window schedule", True, f"{trials} random schedules"


def check_calibration(batches: int = 200) -> Check:
    rng = np.random.default_rng(4)
    ks = sum(ks_normal_test(rng.normal(size=100)).reject for _ in range(batches)) / batches
    z = sum(z_test_greater(rng.normal(size=100), rng.normal(size=100)).reject
            for _ in range(batches)) / batches
    ok = 0.0 <= ks <= 0.12 and 0.0 <= z <= 0.12
    return "test calibration", ok, f"K-S rejects {ks:.3f}, Z rejects {z:.3f}"


def check_softmax(draws: int = 10000) -> Check:
    rng = random.Random(5)
    kept = sum(draw_survivors([1.0, 0.0], 1, rng)[0] == 1 for _ in range(draws)) / draws
    return "softmax retention", abs(kept - 0.2689) <= 0.02, f"GP 1 survives {kept:.4f}"


CHECKS: tuple[Callable[[], Check], ...] = (
    check_gp, check_conservation, check_schedule, check_calibration, check_softmax,
)


def run_all() -> list[Check]:
    return [c() for c in CHECKS]
