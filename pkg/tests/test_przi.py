import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from ncbmarket.lob import LobSnapshot
from ncbmarket.przi import (
    EXPONENT_CAP,
    StrategySlot,
    pps_of_fill,
    przi_quote,
    shape_exponent,
    slot_pps,
    stage_count,
    window_of,
    window_ticks,
)


def test_shape_exponent_anchors():
    assert shape_exponent(0.0) == pytest.approx(1.0)
    assert shape_exponent(-1.0) == 0.0
    assert shape_exponent(1.0) == EXPONENT_CAP
    xs = np.linspace(-1, 1, 41)
    assert all(shape_exponent(a) <= shape_exponent(b) for a, b in zip(xs, xs[1:]))


def test_quote_anchors():
    rng = random.Random(0)
    lob = LobSnapshot(worst_ask=200)
    assert {przi_quote(1.0, 100, "sell", lob, rng) for _ in range(500)} == {100}
    assert {przi_quote(-1.0, 100, "sell", lob, rng) for _ in range(500)} == {200}


def test_s_zero_is_uniform():
    rng = random.Random(1)
    q = [przi_quote(0.0, 100, "sell", LobSnapshot(worst_ask=200), rng) for _ in range(10000)]
    assert abs(np.mean(q) - 150) < 2
    counts = np.bincount(np.array(q) - 100, minlength=101)
    assert chisquare(counts).pvalue > 0.01


def test_buyer_mirror():
    rng = random.Random(2)
    lob = LobSnapshot(worst_bid=50)
    assert {przi_quote(-1.0, 150, "buy", lob, rng) for _ in range(100)} == {50}
    q = [przi_quote(0.0, 150, "buy", lob, rng) for _ in range(10000)]
    assert abs(np.mean(q) - 100) < 2


@settings(max_examples=300, deadline=None)
@given(st.floats(-1, 1), st.integers(1, 1000), st.sampled_from(["buy", "sell"]),
       st.one_of(st.none(), st.integers(1, 1000)), st.integers(0, 2**32))
def test_quote_never_loss_making(s, limit, side, worst, seed):
    lob = LobSnapshot(worst_bid=worst, worst_ask=worst)
    p = przi_quote(s, limit, side, lob, random.Random(seed))
    assert 1 <= p <= 1000
    assert (p <= limit) if side == "buy" else (p >= limit)


def test_pps():
    assert pps_of_fill(50, 0, 10) == 5.0
    assert pps_of_fill(50, 3, 3) == 50.0
    assert pps_of_fill(0, 0, 7) == 0.0
    with pytest.raises(ValueError):
        pps_of_fill(1, 5, 4)


def test_slot_pps():
    slot = StrategySlot(0.0, 0, 10)
    assert slot_pps(slot) == 0
    slot.record(10, 2.0)
    assert slot_pps(slot) == 2.0
    slot.record(10, 4.0)
    assert slot_pps(slot) == 3.0


def test_window_schedule():
    assert window_ticks(128, 4) == 32
    assert stage_count(1000, 4, 32) == 8
    assert window_of(0, 4, 32) == (0, 0)
    assert window_of(4 * 32 - 1, 4, 32) == (0, 3)
    assert window_of(4 * 32, 4, 32) == (1, 0)
    assert [window_of(t, 2, 3)[1] for t in range(6)] == [0, 0, 0, 1, 1, 1]
    with pytest.raises(ValueError):
        window_ticks(3, 4)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 16), st.integers(2, 300), st.integers(1, 3000))
def test_schedule_partition(k, v, T):
    if v // k < 1:
        return
    w = v // k
    p = math.ceil(T / (k * w))
    windows = [window_of(t, k, w) for t in range(p * k * w)]
    assert len(set(windows)) == p * k
    assert p == stage_count(T, k, w)
    # each window is one contiguous run of exactly w ticks
    runs = [windows[i:i + w] for i in range(0, len(windows), w)]
    assert all(len(set(r)) == 1 for r in runs)
