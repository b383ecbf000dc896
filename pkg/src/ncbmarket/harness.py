"""
Experiment protocol: hyperparameter sweeps with winner-set selection, and the
PRB-versus-PRSH comparison.

Every session seed is derived from (master seed, dynamic, cell label, run
index) by SHA-256, so any single run can be reproduced on its own and results
do not depend on execution order or the number of worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .prb import PrbConfig
from .prsh import PrshConfig
from .session import MarketDynamic, PopulationEntry, SessionConfig, run_session
from .stats import (
    DegenerateSampleError,
    TestReport,
    ks_normal_test,
    z_test_greater,
    z_test_positive_mean,
)

SEED_BITS = 63


def derive_seed(master_seed: int, dynamic: str, cell: str, run_index: int) -> int:
    digest = hashlib.sha256(f"{master_seed}|{dynamic}|{cell}|{run_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> (64 - SEED_BITS)


@dataclass(frozen=True)
class SampleSet:
    label: str
    samples: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def std(self) -> float:
        return float(np.std(self.samples, ddof=1)) if self.n > 1 else 0.0


@dataclass
class CellReport:
    config: object
    samples: SampleSet
    ks: Optional[TestReport] = None
    z: Optional[TestReport] = None
    in_winner_set: bool = False


@dataclass
class SweepResult:
    algo: str
    dynamic: str
    cells: list[CellReport]
    best: int
    audit: dict = field(default_factory=dict)

    @property
    def winners(self) -> list:
        return [c.config for c in self.cells if c.in_winner_set]


@dataclass
class ComparisonResult:
    dynamic: str
    d: SampleSet
    ks: Optional[TestReport]
    z: TestReport
    audit: dict = field(default_factory=dict)


def _session_summary(args) -> tuple[dict, dict]:
    cfg, dynamic = args
    res = run_session(cfg, dynamic)
    return res.per_algo_mean, res.audit


def map_sessions(jobs: Iterable[tuple[SessionConfig, MarketDynamic]], n_workers: int = 1) -> list:
    """Run sessions, results in submission order regardless of worker count."""
    jobs = list(jobs)
    if n_workers <= 1 or len(jobs) <= 1:
        return [_session_summary(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(_session_summary, jobs, chunksize=1))


def _merge_audit(audits: Iterable[dict]) -> dict:
    out: dict = {}
    for a in audits:
        for key, val in a.items():
            out[key] = out.get(key, 0) + val
    return out


def prsh_grid(ks: Sequence[int], vs: Sequence[int], ms: Sequence[str]) -> list[PrshConfig]:
    return [PrshConfig(k, v, m) for m in ms for k in ks for v in vs]


def prb_grid(ks: Sequence[int], vs: Sequence[int], noise: float = 0.1, capacity: int = 200) -> list[PrbConfig]:
    return [PrbConfig(k, v, noise, capacity) for k in ks for v in vs]


def _with_population(base: SessionConfig, extra: Sequence[PopulationEntry], seed: int) -> SessionConfig:
    keep = tuple(e for e in base.buyers if e.algo not in ("PRSH", "PRB"))
    pop = keep + tuple(extra)
    return replace(base, buyers=pop, sellers=pop, seed=seed)


def _safe_ks(samples: Sequence[float]) -> Optional[TestReport]:
    try:
        return ks_normal_test(samples)
    except DegenerateSampleError:
        return None


def select_winners(cells: list[CellReport]) -> int:
    """Mark every cell whose mean is not significantly below the best; return best index."""
    means = [c.samples.mean for c in cells]
    best = int(np.argmax(means))
    for c in cells:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # reduced sweeps knowingly use n < 30
                c.z = z_test_greater(cells[best].samples.samples, c.samples.samples)
            c.in_winner_set = not c.z.reject
        except DegenerateSampleError:
            # identical constant samples: indistinguishable from the best only if equal
            c.z = None
            c.in_winner_set = c.samples.mean == cells[best].samples.mean
    cells[best].in_winner_set = True
    return best


def run_sweep(algo: str, dynamic: MarketDynamic, grid: Sequence, runs_per_cell: int,
              base: SessionConfig, master_seed: int = 0, n_per_side: int = 20,
              workers: int = 1, progress: Optional[Callable[[str], None]] = None) -> SweepResult:
    if algo not in ("PRSH", "PRB"):
        raise ValueError(f"can only sweep PRSH or PRB, not {algo!r}")
    if not grid:
        raise ValueError("empty grid")
    if runs_per_cell < 1:
        raise ValueError("runs_per_cell must be >= 1")
    jobs = []
    for cell in grid:
        for run in range(runs_per_cell):
            seed = derive_seed(master_seed, dynamic.kind, f"{algo}:{cell.label}", run)
            jobs.append((_with_population(base, [PopulationEntry(algo, n_per_side, (cell,))], seed), dynamic))
    try:
        outputs = map_sessions(jobs, workers)
    except Exception as exc:
        raise RuntimeError(f"{algo} sweep failed under {dynamic.kind}: {exc}") from exc
    cells = []
    for ci, cell in enumerate(grid):
        chunk = outputs[ci * runs_per_cell:(ci + 1) * runs_per_cell]
        samples = SampleSet(f"{dynamic.kind}:{algo}:{cell.label}", tuple(o[0][algo] for o in chunk))
        cells.append(CellReport(cell, samples, _safe_ks(samples.samples)))
        if progress:
            progress(f"{algo} {cell.label}: mean={samples.mean:.2f}")
    best = select_winners(cells)
    return SweepResult(algo, dynamic.kind, cells, best, _merge_audit(o[1] for o in outputs))


def run_comparison(dynamic: MarketDynamic, prsh_winners: Sequence[PrshConfig],
                   prb_winners: Sequence[PrbConfig], runs: int, base: SessionConfig,
                   master_seed: int = 0, n_per_side: int = 20, workers: int = 1) -> ComparisonResult:
    if not prsh_winners or not prb_winners:
        raise ValueError("winner sets must be non-empty")
    extra = [PopulationEntry("PRSH", n_per_side, tuple(prsh_winners)),
             PopulationEntry("PRB", n_per_side, tuple(prb_winners))]
    jobs = [(_with_population(base, extra, derive_seed(master_seed, dynamic.kind, "compare", run)), dynamic)
            for run in range(runs)]
    outputs = map_sessions(jobs, workers)
    d = SampleSet(f"{dynamic.kind}:d", tuple(o[0]["PRB"] - o[0]["PRSH"] for o in outputs))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        z = z_test_positive_mean(d.samples)
    return ComparisonResult(dynamic.kind, d, _safe_ks(d.samples), z, _merge_audit(o[1] for o in outputs))


def _fmt(x: Optional[float]) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


TABLE_COLUMNS = ["e", "algo", "k", "v", "m", "n", "mean", "std", "ks_p", "z_p", "in_winner_set", "mean_scaled"]


def write_sweep_table(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for c in result.cells:
            m = getattr(c.config, "m", "")
            w.writerow([
                result.dynamic, result.algo, c.config.k, c.config.v, m, c.samples.n,
                _fmt(c.samples.mean), _fmt(c.samples.std),
                _fmt(c.ks.p_value if c.ks else None), _fmt(c.z.p_value if c.z else None),
                int(c.in_winner_set), _fmt(c.samples.mean / 1000.0),
            ])


def read_winners(path, noise: float = 0.1, capacity: int = 200) -> list:
    """Winner-set configs from a sweep table CSV (GP settings are not tabulated)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["in_winner_set"] != "1":
                continue
            if row["algo"] == "PRSH":
                out.append(PrshConfig(int(row["k"]), int(row["v"]), row["m"]))
            else:
                out.append(PrbConfig(int(row["k"]), int(row["v"]), noise, capacity))
    return out


def write_d(result: ComparisonResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["e", "run", "d"])
        for i, d in enumerate(result.d.samples):
            w.writerow([result.dynamic, i, _fmt(d)])


def read_d(path) -> list[float]:
    with open(path, newline="") as fh:
        return [float(row["d"]) for row in csv.DictReader(fh)]


def write_tests(result: ComparisonResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["e", "n", "mean", "std", "ks_stat", "ks_p", "ks_p_asymptotic", "z", "z_p", "reject_null"])
        ks = result.ks
        w.writerow([
            result.dynamic, result.d.n, _fmt(result.d.mean), _fmt(result.d.std),
            _fmt(ks.statistic if ks else None), _fmt(ks.p_value if ks else None),
            _fmt(ks.p_asymptotic if ks else None),
            _fmt(result.z.statistic), _fmt(result.z.p_value), int(result.z.reject),
        ])


def write_kde(points, path, dynamic: Optional[str] = None) -> None:
    """Write (x, density) rows, prefixed by an ``e`` column when ``dynamic`` is given."""
    lead = [] if dynamic is None else [dynamic]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((["e"] if lead else []) + ["x", "density"])
        for x, f in points:
            w.writerow(lead + [_fmt(x), _fmt(f)])
