"""Spike-and-slab linear regression: model, exact HMC sampler and exact s-marginals.

The posterior over (w, s) is the Gaussian likelihood exp(-w'Mw/2 + r.w)
times independent priors: w_i ~ N(0, tau2) when s_i = +1 and w_i = 0 when
s_i = -1, with P(s_i = +1) = a. Excluded coefficients are carried as
N(0, tau2) replicas during sampling and zeroed on readout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import logsumexp, ndtr
from scipy.stats import multivariate_normal

from .diagnostics import ChainOutput
from .gated import (
    GatedGaussian,
    LinearConstraint,
    OrthantParams,
    constraint_hit_time,
    run_chain,
    stack_constraints,
)
from .targets import all_states, as_spins

__all__ = [
    "LinearConstraint",
    "SpikeSlabModel",
    "SsState",
    "build_linear_model",
    "constraint_hit_time",
    "exact_marginal_s",
    "initial_state",
    "log_posterior",
    "orthant_params",
    "readout",
    "reflect_velocity",
    "sample_chain",
    "ss_energy_jump",
    "ss_hamiltonian",
    "ss_hmc_step",
]

MAX_EXACT_DIM = 12
MAX_TRUNCATED_EXACT_DIM = 3


@dataclass(frozen=True)
class SpikeSlabModel:
    """Precision-form regression data plus spike-and-slab hyperparameters."""

    M: np.ndarray
    r: np.ndarray
    a: float
    tau2: float
    constraints: tuple[LinearConstraint, ...] = ()
    X: np.ndarray | None = field(default=None, repr=False)
    z: np.ndarray | None = field(default=None, repr=False)
    sigma2: float | None = None
    normalize_replicas: bool = True

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        r = np.asarray(self.r, dtype=float)
        d = r.shape[0]
        if r.ndim != 1 or M.shape != (d, d):
            raise ValueError(f"M must be {d}x{d} to match r")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(r))):
            raise ValueError("M and r must be finite")
        if np.max(np.abs(M - M.T), initial=0.0) > 1e-10:
            raise ValueError("M must be symmetric")
        if not (0.0 < self.a < 1.0):
            raise ValueError("a must lie in (0, 1)")
        if not self.tau2 > 0:
            raise ValueError("tau2 must be positive")
        cons = tuple(self.constraints)
        for con in cons:
            if con.f.shape[0] != d:
                raise ValueError(f"constraint normal has length {con.f.shape[0]}, expected {d}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "constraints", cons)

    @property
    def d(self) -> int:
        return self.r.shape[0]

    @cached_property
    def engine(self) -> GatedGaussian:
        F, c = stack_constraints(self.constraints, self.d)
        Q = self.M + np.eye(self.d) / self.tau2
        return GatedGaussian(
            Q, self.r, np.arange(self.d), self.tau2, self.a, F, c, self.normalize_replicas
        )


def build_linear_model(X, z, sigma2, a, tau2, constraints=()) -> SpikeSlabModel:
    """Model for z = X w + N(0, sigma2) noise: M = X'X / sigma2, r = X'z / sigma2."""
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    if X.ndim != 2 or z.shape != (X.shape[0],):
        raise ValueError(f"X has shape {X.shape} but z has shape {z.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(z))):
        raise ValueError("X and z must be finite")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    M = X.T @ X / sigma2
    return SpikeSlabModel(
        0.5 * (M + M.T), X.T @ z / sigma2, a, tau2, tuple(constraints), X, z, float(sigma2)
    )


def orthant_params(model: SpikeSlabModel, s) -> OrthantParams:
    """Factorization of M_+ + I/tau2 and the centre mu_+ = Sigma_+ r_+ for pattern s."""
    return model.engine.orthant(as_spins(s, model.d))


def ss_hamiltonian(model: SpikeSlabModel, w, g, s) -> float:
    """Hamiltonian of (w, g) in orthant s, without the y part and the inclusion prior."""
    s = as_spins(s, model.d)
    return model.engine.energy_wg(np.asarray(w, float), np.asarray(g, float), s)


def ss_energy_jump(model: SpikeSlabModel, w, g, s, j: int) -> float:
    """Energy released by moving y_j from the s_j = -1 side to the s_j = +1 side."""
    s = as_spins(s, model.d)
    if not 0 <= j < model.d:
        raise IndexError(f"coordinate {j} out of range")
    return model.engine.log_ratio(np.asarray(w, float), np.asarray(g, float), s, j)


def reflect_velocity(model: SpikeSlabModel, wdot, s, constraint: LinearConstraint) -> np.ndarray:
    """Velocity after an elastic bounce off ``constraint`` under the orthant-s metric."""
    orth = orthant_params(model, s)
    return model.engine.reflect(np.asarray(wdot, float), constraint.f, orth)


def readout(w, y):
    """Map (w, y) to (w with excluded entries zeroed, s) with sign(0) = +1."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.where(y >= 0, 1, -1).astype(np.int8)
    return np.where(s > 0, w, 0.0), s


def log_posterior(model: SpikeSlabModel, w, s) -> float:
    """Unnormalized log p(w_+, s | data) with excluded coefficients held at 0.

    Constraints are not checked here.
    """
    s = np.asarray(s)
    inc = s > 0
    wp = np.asarray(w, dtype=float)[inc]
    k = int(inc.sum())
    Mp = model.M[np.ix_(inc, inc)]
    val = -0.5 * wp @ Mp @ wp + model.r[inc] @ wp - 0.5 * (wp @ wp) / model.tau2
    val += -0.5 * k * math.log(2.0 * math.pi * model.tau2)
    val += k * math.log(model.a) + (model.d - k) * math.log1p(-model.a)
    return float(val)


def _coordinate_bounds(model: SpikeSlabModel):
    """Per-coordinate [lo, hi] when every constraint touches a single coordinate."""
    lo = np.full(model.d, -np.inf)
    hi = np.full(model.d, np.inf)
    for con in model.constraints:
        nz = np.flatnonzero(con.f)
        if nz.size != 1:
            raise NotImplementedError("exact marginals support single-coordinate bounds only")
        i = nz[0]
        b = -con.c / con.f[i]
        if con.f[i] > 0:
            lo[i] = max(lo[i], b)
        else:
            hi[i] = min(hi[i], b)
    return lo, hi


def _box_log_mass(mu, cov, lo, hi) -> float:
    k = mu.shape[0]
    if k == 0:
        return 0.0
    if np.any(lo >= hi):
        return -math.inf
    if k == 1:
        sd = math.sqrt(cov[0, 0])
        p = float(ndtr((hi[0] - mu[0]) / sd) - ndtr((lo[0] - mu[0]) / sd))
        return math.log(p) if p > 0 else -math.inf
    if np.all(np.isinf(lo)) and np.all(np.isinf(hi)):
        return 0.0
    # replace infinite limits by wide finite ones; the cdf routine wants finite boxes
    sd = np.sqrt(np.diag(cov))
    lo_f = np.where(np.isinf(lo), mu - 40.0 * sd, lo)
    hi_f = np.where(np.isinf(hi), mu + 40.0 * sd, hi)
    rv = multivariate_normal(mean=mu, cov=cov, seed=0)
    rv.maxpts, rv.abseps, rv.releps = 1_000_000 * k, 1e-10, 1e-8
    p = float(rv.cdf(hi_f, lower_limit=lo_f))
    return math.log(p) if p > 0 else -math.inf


def exact_marginal_s(model: SpikeSlabModel) -> np.ndarray:
    """Posterior p(s) over all 2^d patterns, in ``all_states`` order, with w integrated out.

    Without constraints this is closed form (d <= 12). Single-coordinate
    bounds are handled for d <= 3 by the Gaussian mass of the bounded box;
    a pattern whose excluded coordinates cannot sit at 0 gets probability 0.
    """
    d = model.d
    truncated = len(model.constraints) > 0
    if d > MAX_EXACT_DIM or (truncated and d > MAX_TRUNCATED_EXACT_DIM):
        raise ValueError(f"exact marginal too large for d={d}")
    lo, hi = _coordinate_bounds(model) if truncated else (None, None)
    logp = np.empty(2**d)
    for idx, s in enumerate(all_states(d)):
        inc = s > 0
        k = int(inc.sum())
        lp = k * math.log(model.a) + (d - k) * math.log1p(-model.a)
        if truncated and np.any((lo[~inc] > 0) | (hi[~inc] < 0)):
            logp[idx] = -math.inf
            continue
        if k:
            P = model.M[np.ix_(inc, inc)] + np.eye(k) / model.tau2
            L = np.linalg.cholesky(P)
            Sigma = np.linalg.inv(P)
            mu = Sigma @ model.r[inc]
            logdet_sigma = -2.0 * np.sum(np.log(np.diag(L)))
            lp += -0.5 * k * math.log(model.tau2) + 0.5 * logdet_sigma + 0.5 * model.r[inc] @ mu
            if truncated:
                lp += _box_log_mass(mu, 0.5 * (Sigma + Sigma.T), lo[inc], hi[inc])
        logp[idx] = lp
    return np.exp(logp - logsumexp(logp))


@dataclass
class SsState:
    """Sampler position: coefficients w (replicas included) and augmentation y."""

    w: np.ndarray
    y: np.ndarray

    @property
    def spins(self) -> np.ndarray:
        return np.where(self.y >= 0, 1, -1).astype(np.int8)


def initial_state(model: SpikeSlabModel, rng, spins=None) -> SsState:
    """Start with every coefficient excluded (or the given spins) and feasible replicas.

    Replicas are drawn from N(0, tau2); under positivity-type bounds their
    magnitudes are used. Other constraints need an explicit feasible w.
    """
    d = model.d
    s = -np.ones(d, dtype=np.int8) if spins is None else as_spins(spins, d)
    w = math.sqrt(model.tau2) * rng.standard_normal(d)
    if model.constraints:
        w = np.abs(w)
    model.engine.check_feasible(w)
    y = s * np.maximum(np.abs(rng.standard_normal(d)), 1e-12)
    return SsState(w, y)


def ss_hmc_step(model: SpikeSlabModel, state: SsState, T: float, rng, check_energy=False):
    """One exact HMC iteration; returns (new state, trajectory statistics)."""
    w, y, _, stats = model.engine.step(state.w, state.y, T, rng, check_energy=check_energy)
    return SsState(w, y), stats


def sample_chain(
    model: SpikeSlabModel,
    state: SsState,
    T: float,
    n_samples: int,
    burn_in: int = 0,
    thin: int = 1,
    rng=None,
    seed=None,
    record_timing=False,
) -> ChainOutput:
    """Run the spike-slab HMC chain; rows hold read-out coefficients and spins."""
    rng = np.random.default_rng(seed) if rng is None else rng

    def observe(w, y):
        wr, s = readout(w, y)
        return s, wr, log_posterior(model, wr, s), None

    cols, w, y = run_chain(
        model.engine, state.w, state.y, T, n_samples, burn_in, thin, rng, record_timing, observe
    )
    return ChainOutput(
        **cols,
        seed=seed,
        config={"sampler": "hmc-gauss", "travel_time": T, "burn_in": burn_in, "thin": thin},
        final_state={"w": w, "y": y},
    )
