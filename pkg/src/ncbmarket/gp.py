"""
Gaussian-process posterior over normalised profit-per-second as a function of
the strategy value s, and posterior-sampling acquisition on a fixed grid.

The kernel is the unit-length-scale squared exponential exp(-(s1 - s2)^2 / 2)
with a zero prior mean.  Targets are the mean/variance normalised raw pps
values currently held, so they are recomputed from the raw memory whenever it
changes.  The Cholesky factor of the noisy kernel matrix is maintained
incrementally: appending an observation adds one row, evicting the oldest one
is a rank-one update of the trailing block.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

GRID = np.linspace(-1.0, 1.0, 201)
JITTER = 1e-6
DEFAULT_NOISE = 0.1
DEFAULT_CAPACITY = 200


class GPError(RuntimeError):
    """Raised when the observation set cannot be factorised."""


def kernel(s1, s2):
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    return np.exp(-0.5 * (s1 - s2) ** 2)


def kernel_matrix(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.exp(-0.5 * (a[:, None] - b[None, :]) ** 2)


def normalize(raw: Sequence[float]) -> np.ndarray:
    x = np.asarray(raw, dtype=float)
    if x.size <= 1:
        return np.zeros_like(x)
    sd = x.std()
    if sd == 0.0 or not np.isfinite(sd):
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def _chol_update(L: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cholesky factor of L L^T + x x^T (lower triangular, O(n^2))."""
    L = L.copy()
    x = x.copy()
    n = x.size
    for k in range(n):
        lkk = L[k, k]
        r = math.hypot(lkk, x[k])
        c = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        if k + 1 < n:
            L[k + 1:, k] = (L[k + 1:, k] + s * x[k + 1:]) / c
            x[k + 1:] = c * x[k + 1:] - s * L[k + 1:, k]
    return L


def _refined_solve(K: np.ndarray, solve, b: np.ndarray, steps: int = 2) -> np.ndarray:
    """Solve K x = b, polishing with residuals accumulated in extended precision.

    With zero observation noise K can have condition numbers near 1e8, where a
    plain float64 solve loses about half its digits.
    """
    x = solve(b)
    Kl = K.astype(np.longdouble)
    for _ in range(steps):
        r = b.astype(np.longdouble) - Kl @ x.astype(np.longdouble)
        x = x + solve(r.astype(float))
    return x


def _accurate_matvec(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    return (A.astype(np.longdouble) @ x.astype(np.longdouble)).astype(float)


class GaussianProcess:
    """Bounded-memory GP over (s, raw pps) pairs with FIFO eviction."""

    def __init__(self, noise: float = DEFAULT_NOISE, capacity: int = DEFAULT_CAPACITY,
                 created_stage: int = 0):
        if noise < 0:
            raise ValueError("noise variance must be non-negative")
        self.noise = noise
        self.capacity = capacity
        self.created_stage = created_stage
        self.s = np.empty(0)
        self.raw = np.empty(0)
        self._L = np.empty((0, 0))
        self._diag = 1.0 + noise + JITTER

    def __len__(self) -> int:
        return self.s.size

    @property
    def y(self) -> np.ndarray:
        return normalize(self.raw)

    def add(self, s: float, pps: float) -> None:
        if not (math.isfinite(s) and math.isfinite(pps)):
            raise ValueError(f"non-finite observation ({s}, {pps})")
        if self.s.size >= self.capacity:
            self._evict_oldest()
        n = self.s.size
        if n == 0:
            L = np.array([[math.sqrt(self._diag)]])
        else:
            kvec = kernel(self.s, s)
            row = solve_triangular(self._L, kvec, lower=True, check_finite=False)
            d2 = self._diag - row @ row
            if not d2 > 0.0:
                raise GPError("kernel matrix lost positive definiteness")
            L = np.zeros((n + 1, n + 1))
            L[:n, :n] = self._L
            L[n, :n] = row
            L[n, n] = math.sqrt(d2)
        self._L = L
        self.s = np.append(self.s, s)
        self.raw = np.append(self.raw, pps)

    def _evict_oldest(self) -> None:
        L = self._L
        self._L = _chol_update(L[1:, 1:], L[1:, 0])
        self.s = self.s[1:]
        self.raw = self.raw[1:]

    def posterior(self, queries: Optional[Sequence[float]] = None) -> tuple[np.ndarray, np.ndarray]:
        """Marginal posterior mean and variance at ``queries`` (default: the grid)."""
        q = GRID if queries is None else np.asarray(queries, dtype=float)
        if not np.all(np.isfinite(q)):
            raise ValueError("non-finite query")
        if self.s.size == 0:
            return np.zeros(q.size), np.ones(q.size)
        kq = kernel_matrix(self.s, q)
        K = kernel_matrix(self.s, self.s)
        K.flat[:: K.shape[0] + 1] = self._diag
        alpha = _refined_solve(K, lambda r: cho_solve((self._L, True), r, check_finite=False), self.y)
        mu = _accurate_matvec(kq.T, alpha)
        v = solve_triangular(self._L, kq, lower=True, check_finite=False)
        var = np.maximum(1.0 - np.einsum("ij,ij->j", v, v), 0.0)
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(var))):
            raise GPError("posterior is not finite; observations look corrupted")
        return mu, var


def posterior(s_obs, y_obs, queries, noise: float = DEFAULT_NOISE) -> tuple[np.ndarray, np.ndarray]:
    """One-shot posterior from explicit (s, y) pairs with already-normalised y."""
    s_obs = np.asarray(s_obs, dtype=float)
    y_obs = np.asarray(y_obs, dtype=float)
    q = np.asarray(queries, dtype=float)
    if not (np.all(np.isfinite(s_obs)) and np.all(np.isfinite(y_obs)) and np.all(np.isfinite(q))):
        raise ValueError("non-finite input")
    if s_obs.size == 0:
        return np.zeros(q.size), np.ones(q.size)
    K = kernel_matrix(s_obs, s_obs)
    K.flat[:: s_obs.size + 1] = 1.0 + noise + JITTER
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError as exc:
        raise GPError("singular kernel system") from exc
    kq = kernel_matrix(s_obs, q)
    alpha = _refined_solve(K, lambda r: cho_solve((L, True), r), y_obs)
    v = solve_triangular(L, kq, lower=True)
    return _accurate_matvec(kq.T, alpha), np.maximum(1.0 - np.einsum("ij,ij->j", v, v), 0.0)


def acquire(mu: np.ndarray, var: np.ndarray, tau: float, rng: np.random.Generator,
            grid: np.ndarray = GRID) -> float:
    """Tempered posterior sample: argmax over the grid of mu + tau * (f - mu).

    tau = 1 is a plain (marginal) posterior sample, tau = 0 is greedy on the mean.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("temperature must lie in [0, 1]")
    z = rng.standard_normal(grid.size)
    score = mu + tau * np.sqrt(var) * z
    return float(grid[int(np.argmax(score))])


def temperature(t: float, duration: float) -> float:
    """Linear explore-to-exploit schedule 1 - t/T, clipped to [0, 1]."""
    return min(1.0, max(0.0, 1.0 - t / duration))
