"""Mixing and correctness diagnostics for sampler output."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class DegenerateSeriesWarning(UserWarning):
    """Raised when a series has zero variance, so autocorrelations are undefined."""


@dataclass
class ChainOutput:
    """Samples kept by a chain plus aligned per-sample statistics.

    ``wall_hits`` and ``crossings`` count the events since the previous kept
    sample, so their sums are the total cost of the run. For Metropolis they
    hold proposals and accepted flips; for Gibbs, coordinate updates and
    inclusion changes. ``latent`` stores auxiliary continuous variables,
    such as the probit utilities z.
    """

    spins: np.ndarray
    log_target: np.ndarray
    wall_hits: np.ndarray
    crossings: np.ndarray
    elapsed_ns: np.ndarray
    coefficients: np.ndarray | None = None
    latent: np.ndarray | None = None
    seed: int | None = None
    config: dict = field(default_factory=dict)
    final_state: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.spins.shape[0]
        for name in ("log_target", "wall_hits", "crossings", "elapsed_ns"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} has {getattr(self, name).shape[0]} rows, expected {n}")
        for name in ("coefficients", "latent"):
            arr = getattr(self, name)
            if arr is not None and arr.shape[0] != n:
                raise ValueError(f"{name} row count differs from spins")

    def __len__(self):
        return self.spins.shape[0]

    @property
    def magnetization(self) -> np.ndarray:
        return self.spins.mean(axis=1)

    @property
    def total_cost(self) -> float:
        return float(self.wall_hits.sum())

    @property
    def crossing_rate(self) -> float:
        hits = self.wall_hits.sum()
        return float(self.crossings.sum() / hits) if hits else 0.0


def magnetization(s) -> float:
    """Mean spin (1/d) sum_i s_i."""
    return float(np.mean(s))


def _is_degenerate(x) -> bool:
    return bool(np.ptp(x) == 0)


def acf(series, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation for lags 0..max_lag.

    A constant series has no defined autocorrelation; it returns 1 at lag 0
    and zeros elsewhere and emits ``DegenerateSeriesWarning``.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if n <= max_lag:
        raise ValueError(f"series length {n} must exceed max_lag {max_lag}")
    if _is_degenerate(x):
        warnings.warn("constant series", DegenerateSeriesWarning, stacklevel=2)
        out = np.zeros(max_lag + 1)
        out[0] = 1.0
        return out
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[: max_lag + 1] / n
    return acov / acov[0]


def integrated_time(series) -> float:
    """Integrated autocorrelation time with Geyer's initial positive sequence.

    Pairs Gamma_m = rho_{2m} + rho_{2m+1} are summed until the first
    non-positive pair; tau = -1 + 2 sum Gamma_m.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    rho = acf(x, n - 1)
    tau = -1.0
    for m in range(n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return tau


def ess(series) -> float:
    """Effective sample size N / tau, clamped to (0, N]; 0 for a constant series."""
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if n < 10:
        raise ValueError("ESS needs at least 10 samples")
    if _is_degenerate(x):
        warnings.warn("constant series, ESS reported as 0", DegenerateSeriesWarning, stacklevel=2)
        return 0.0
    tau = integrated_time(x)
    return float(min(n, n / max(tau, 1e-300)))


def min_ess(samples) -> float:
    """Smallest ESS over the columns of an (n, d) array of per-coordinate series."""
    samples = np.asarray(samples)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSeriesWarning)
        return min(ess(samples[:, i]) for i in range(samples.shape[1]))


def min_ess_per_cost(chain: ChainOutput, cost_model: str = "hits") -> float:
    """Smallest per-coordinate ESS of the spins divided by the run's cost.

    ``cost_model`` is ``"hits"`` (wall hits, or flip proposals for Metropolis)
    or ``"wallclock"`` (seconds).
    """
    if cost_model == "hits":
        cost = chain.total_cost
    elif cost_model == "wallclock":
        cost = float(chain.elapsed_ns.sum()) * 1e-9
    else:
        raise ValueError(f"unknown cost model {cost_model!r}")
    if cost <= 0:
        raise ValueError(f"{cost_model} cost is zero; was timing recorded?")
    return min_ess(chain.spins) / cost


def tv_distance(p, q) -> float:
    """Total variation distance 0.5 * sum |p - q| between two tables over the same support.

    Inputs may be counts; each is normalized first.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"support mismatch: {p.shape} vs {q.shape}")
    return float(0.5 * np.abs(p / p.sum() - q / q.sum()).sum())


def state_frequencies(spins) -> np.ndarray:
    """Empirical distribution over the 2^d bit patterns of the rows of ``spins``."""
    spins = np.asarray(spins)
    d = spins.shape[1]
    idx = ((spins > 0).astype(np.int64) << np.arange(d, dtype=np.int64)).sum(axis=1)
    counts = np.bincount(idx, minlength=2**d).astype(float)
    return counts / counts.sum()


def first_passage(series, threshold: float) -> int | None:
    """1-based index of the first element whose absolute value exceeds ``threshold``."""
    hit = np.flatnonzero(np.abs(np.asarray(series)) > threshold)
    return int(hit[0]) + 1 if hit.size else None
