"""Acceptance criteria, each run at its stated tolerance.

Every test records a one-line PASS/FAIL verdict that is repeated in the
pytest terminal summary under "acceptance criteria".
"""

import csv
import json
import math
import os
import random
import time

import numpy as np
import pytest

from ncbmarket.cli import main
from ncbmarket.gp import JITTER, GaussianProcess, normalize
from ncbmarket.prb import GpEnsemble, active_gp
from ncbmarket.przi import window_of
from ncbmarket.session import MarketDynamic, PopulationEntry, SessionConfig, run_session
from ncbmarket.stats import ks_normal_test, z_test_greater

HERE = os.path.dirname(__file__)
REDUCED = os.path.join(HERE, "data", "reduced.cfg")
ALGOS = ("GVWY", "ZIC", "ZIP", "SNPR", "SHVR", "PRSH", "PRB")
NON_NEGATIVE = {"GVWY", "ZIC", "SHVR", "SNPR", "PRSH", "PRB"}


def dense_oracle(s, raw, q, noise):
    y = normalize(raw)
    K = np.exp(-0.5 * np.subtract.outer(s, s) ** 2) + (noise + JITTER) * np.eye(len(s))
    kq = np.exp(-0.5 * np.subtract.outer(s, q) ** 2)
    alpha = np.linalg.solve(K, y)
    for _ in range(3):
        r = y.astype(np.longdouble) - K.astype(np.longdouble) @ alpha.astype(np.longdouble)
        alpha = alpha + np.linalg.solve(K, r.astype(float))
    mu = (kq.T.astype(np.longdouble) @ alpha.astype(np.longdouble)).astype(float)
    var = np.maximum(1.0 - np.sum(kq * np.linalg.solve(K, kq), axis=0), 0.0)
    return mu, var


def test_1_gp_oracle_equivalence(criterion):
    rng = np.random.default_rng(20220401)
    start = time.perf_counter()
    worst = 0.0
    grid = np.linspace(-1, 1, 201)
    for _ in range(200):
        n = int(rng.integers(1, 51))
        noise = float(rng.choice([0.0, 0.01, 0.1]))
        s = rng.uniform(-1, 1, n)
        raw = rng.normal(0, rng.uniform(0.1, 50), n)
        gp = GaussianProcess(noise)
        for a, b in zip(s, raw):
            gp.add(a, b)
        mu, var = gp.posterior(grid)
        mu0, var0 = dense_oracle(s, raw, grid, noise)
        worst = max(worst, np.max(np.abs(mu - mu0)), np.max(np.abs(var - var0)))
    elapsed = time.perf_counter() - start
    ok = criterion("1", worst <= 1e-8 and elapsed < 10,
                   f"max |diff| {worst:.2e} (tol 1e-8) over 200 instances in {elapsed:.1f}s")
    assert ok


def test_2_conservation_fuzz(criterion):
    rng = random.Random(2)
    start = time.perf_counter()
    trades = violations = 0
    for i in range(100):
        pop = tuple(PopulationEntry(a, rng.randint(0, 6)) for a in ALGOS)
        if sum(e.count for e in pop) == 0:
            pop = (PopulationEntry("ZIC", 2),)
        cfg = SessionConfig(duration=200, buyers=pop, sellers=pop, seed=rng.getrandbits(32))
        res = run_session(cfg, MarketDynamic(("trend", "trendless")[i % 2]))
        for f in res.fills:
            trades += 1
            b = f.buyer_limit - f.trade.price
            s = f.trade.price - f.seller_limit
            if b + s != f.buyer_limit - f.seller_limit:
                violations += 1
            if (f.buyer_algo in NON_NEGATIVE and b < 0) or (f.seller_algo in NON_NEGATIVE and s < 0):
                violations += 1
    elapsed = time.perf_counter() - start
    ok = criterion("2", violations == 0 and trades > 0 and elapsed < 120,
                   f"{trades} trades in 100 sessions, {violations} violations, {elapsed:.1f}s")
    assert ok


def test_3_schedule_partition(criterion):
    rng = random.Random(3)
    bad = []
    for _ in range(1000):
        k = rng.randint(2, 16)
        v = rng.randint(k, 512)
        T = rng.randint(1, 3000)
        w = v // k
        p = math.ceil(T / (k * w))
        seen = {}
        for t in range(p * k * w):
            ph, i = window_of(t, k, w)
            assert i == active_gp(t, k, w)
            seen.setdefault((ph, i), []).append(t)
        widths = {len(ts) for ts in seen.values()}
        contiguous = all(ts[-1] - ts[0] == w - 1 for ts in seen.values())
        if len(seen) != p * k or widths != {w} or not contiguous:
            bad.append((k, v, T))
    ok = criterion("3", not bad, f"1000 random (k, v, T), {len(bad)} bad partitions")
    assert ok


def test_4_statistical_calibration(criterion):
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    ks = sum(ks_normal_test(rng.normal(5, 2, 100)).reject for _ in range(500)) / 500
    z = sum(z_test_greater(rng.normal(1, 1, 100), rng.normal(1, 1, 100)).reject for _ in range(500)) / 500
    elapsed = time.perf_counter() - start
    ok = criterion("4", 0.02 <= ks <= 0.09 and 0.03 <= z <= 0.08 and elapsed < 30,
                   f"K-S rejects {ks:.3f} in [0.02, 0.09]; Z rejects {z:.3f} in [0.03, 0.08]; {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def compare_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("compare")
    start = time.perf_counter()
    rc = main(["compare", "--config", REDUCED, "--runs", "30", "--out", str(out)])
    return out, rc, time.perf_counter() - start


@pytest.mark.slow
def test_5_directional_replication(compare_run, criterion):
    out, rc, elapsed = compare_run
    assert rc == 0
    with open(out / "tests.csv") as fh:
        rows = {r["e"]: r for r in csv.DictReader(fh)}
    verdicts = []
    for e in ("trend", "trendless"):
        mean, p = float(rows[e]["mean"]), float(rows[e]["z_p"])
        verdicts.append((e, mean > 0 and p < 0.05, f"{e} d_mean={mean:.2f} p={p:.3g}"))
    ok = criterion("5", all(v[1] for v in verdicts) and elapsed < 1800,
                   "; ".join(v[2] for v in verdicts) + f"; {elapsed / 60:.1f} min")
    assert ok


@pytest.mark.slow
def test_6_prb_structural_invariants(compare_run, criterion):
    out, rc, _ = compare_run
    assert rc == 0  # any EnsembleInvariantError would have aborted the run with exit 2
    audit = json.loads((out / "audit.json").read_text())
    ens = GpEnsemble(3)
    r = random.Random(6)
    for _ in range(200):
        ens.observe_fill(r.uniform(-1, 1), 1, 1.0, ens.members[r.randrange(3)])
        ens.stage_end(r)
        ens.check()
    ok = criterion("6", audit["prb_stage_checks"] > 0 and audit["prb_fill_checks"] > 0,
                   f"{audit['prb_stage_checks']} stage-boundary and {audit['prb_fill_checks']} "
                   "fill checks held across all PRB sweep and compare sessions")
    assert ok


TINY = """\
duration = 80
sweep.runs = 3
sweep.prsh.k = 2,4
sweep.prsh.v = 32
sweep.prsh.m = m1,m3
sweep.prb.k = 2
sweep.prb.v = 16,32
pop.GVWY = 4
pop.ZIC = 4
pop.ZIP = 4
pop.SNPR = 4
pop.SHVR = 4
pop.PRSH = 4
pop.PRB = 4
"""


def _snapshot(directory):
    return {name: (directory / name).read_bytes() for name in sorted(os.listdir(directory))}


def test_7_determinism(tmp_path, criterion, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY)
    commands = {
        "session": ["session", "--dynamic", "trend", "--seed", "7", "--tape"],
        "sweep-prsh": ["sweep-prsh", "--dynamic", "trendless", "--seed", "3"],
        "sweep-prb": ["sweep-prb", "--dynamic", "trend", "--seed", "3"],
        "compare": ["compare", "--runs", "4", "--seed", "1"],
    }
    mismatched = []
    for name, argv in commands.items():
        snaps = []
        for i, jobs in enumerate(("1", "1", "8")):
            out = tmp_path / f"{name}-{i}"
            assert main(argv + ["--config", str(cfg), "--out", str(out), "--jobs", jobs]) == 0
            snaps.append(_snapshot(out))
        if not (snaps[0] == snaps[1] == snaps[2]):
            mismatched.append(name)
    d_csv = str(tmp_path / "compare-0" / "d.csv")
    kde = []
    for i in range(2):
        assert main(["kde", "--input", d_csv, "--out", str(tmp_path / f"kde-{i}")]) == 0
        kde.append(_snapshot(tmp_path / f"kde-{i}"))
    if kde[0] != kde[1]:
        mismatched.append("kde")
    capsys.readouterr()
    stdout = []
    for _ in range(2):
        main(["session", "--seed", "7", "--config", str(cfg)])
        stdout.append(capsys.readouterr().out)
    if stdout[0] != stdout[1]:
        mismatched.append("session stdout")
    ok = criterion("7", not mismatched,
                   "byte-identical outputs for session, sweeps, compare (jobs 1/1/8), kde and stdout"
                   if not mismatched else f"differences in {mismatched}")
    assert ok


def test_8_softmax_retention(criterion):
    rng = random.Random(8)
    survived = 0
    for _ in range(10000):
        ens = GpEnsemble(2)
        ens.n = [1, 1]
        ens.R = [1.0, 0.0]
        dropped = ens.stage_end(rng)
        survived += dropped == 0
    freq = survived / 10000
    ok = criterion("8", abs(freq - 0.2689) <= 0.02, f"GP 1 survives {freq:.4f} (target 0.2689 +- 0.02)")
    assert ok
