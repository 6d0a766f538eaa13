"""Spike-and-slab probit regression sampled through latent utilities.

With b_i = +-1 observed, P(b_i | w) = Phi(-b_i x_i.w) is the mass of
z_i ~ N(-x_i.w, 1) on the side z_i b_i >= 0. Sampling (z, w) jointly turns
the posterior into a truncated piecewise Gaussian: in orthant s the pair
(z, w_+) has precision [[I, X_+], [X_+', X_+'X_+ + I/tau2]], excluded w are
N(0, tau2) replicas, and each z_i bounces off the wall z_i b_i = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import log_ndtr

from .diagnostics import ChainOutput
from .gated import GatedGaussian, LinearConstraint, run_chain, stack_constraints
from .spikeslab import readout
from .targets import as_spins


@dataclass(frozen=True)
class ProbitModel:
    X: np.ndarray
    b: np.ndarray
    a: float
    tau2: float
    constraints: tuple[LinearConstraint, ...] = ()
    normalize_replicas: bool = True

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        b = np.asarray(self.b)
        if X.ndim != 2 or b.shape != (X.shape[0],):
            raise ValueError(f"X has shape {X.shape} but b has shape {b.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X must be finite")
        if not np.all((b == 1) | (b == -1)):
            raise ValueError("labels b must be -1 or +1")
        if not (0.0 < self.a < 1.0) or not self.tau2 > 0:
            raise ValueError("need 0 < a < 1 and tau2 > 0")
        for con in self.constraints:
            if con.f.shape[0] != X.shape[1]:
                raise ValueError("constraints act on w and must have length d")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "b", b.astype(np.int8))
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @cached_property
    def engine(self) -> GatedGaussian:
        N, d = self.N, self.d
        Q = np.zeros((N + d, N + d))
        Q[:N, :N] = np.eye(N)
        Q[:N, N:] = self.X
        Q[N:, :N] = self.X.T
        Q[N:, N:] = self.X.T @ self.X + np.eye(d) / self.tau2
        Fz = np.zeros((N, N + d))
        Fz[np.arange(N), np.arange(N)] = self.b
        Fw, cw = stack_constraints(self.constraints, N + d, offset=N)
        F = np.vstack([Fz, Fw])
        c = np.concatenate([np.zeros(N), cw])
        return GatedGaussian(
            Q, np.zeros(N + d), N + np.arange(d), self.tau2, self.a, F, c, self.normalize_replicas
        )


@dataclass
class ProbitState:
    z: np.ndarray
    w: np.ndarray
    y: np.ndarray

    @property
    def spins(self) -> np.ndarray:
        return np.where(self.y >= 0, 1, -1).astype(np.int8)


def probit_log_posterior(model: ProbitModel, w, s) -> float:
    """Unnormalized log p(w_+, s | b) with excluded coefficients at 0."""
    s = np.asarray(s)
    inc = s > 0
    w = np.where(inc, np.asarray(w, dtype=float), 0.0)
    k = int(inc.sum())
    val = float(np.sum(log_ndtr(-model.b * (model.X @ w))))
    val += -0.5 * float(w @ w) / model.tau2 - 0.5 * k * math.log(2.0 * math.pi * model.tau2)
    val += k * math.log(model.a) + (model.d - k) * math.log1p(-model.a)
    return val


def initial_state(model: ProbitModel, rng, spins=None) -> ProbitState:
    """All coefficients excluded (unless ``spins`` is given), z on the labelled sides."""
    d = model.d
    s = -np.ones(d, dtype=np.int8) if spins is None else as_spins(spins, d)
    z = model.b * np.abs(rng.standard_normal(model.N))
    w = math.sqrt(model.tau2) * rng.standard_normal(d)
    if model.constraints:
        w = np.abs(w)
    y = s * np.maximum(np.abs(rng.standard_normal(d)), 1e-12)
    state = ProbitState(z, w, y)
    model.engine.check_feasible(np.concatenate([z, w]))
    return state


def probit_step(model: ProbitModel, state: ProbitState, T: float, rng, check_energy=False):
    """One exact HMC iteration over (z, w, y); returns (new state, statistics)."""
    x0 = np.concatenate([state.z, state.w])
    x, y, _, stats = model.engine.step(x0, state.y, T, rng, check_energy=check_energy)
    N = model.N
    return ProbitState(x[:N], x[N:], y), stats


def sample_chain(
    model: ProbitModel,
    state: ProbitState,
    T: float,
    n_samples: int,
    burn_in: int = 0,
    thin: int = 1,
    rng=None,
    seed=None,
    record_timing=False,
) -> ChainOutput:
    """Probit HMC chain; ``latent`` holds the utilities z of each kept sample."""
    rng = np.random.default_rng(seed) if rng is None else rng
    N = model.N

    def observe(x, y):
        wr, s = readout(x[N:], y)
        return s, wr, probit_log_posterior(model, wr, s), x[:N].copy()

    x0 = np.concatenate([state.z, state.w])
    cols, x, y = run_chain(
        model.engine, x0, state.y, T, n_samples, burn_in, thin, rng, record_timing, observe
    )
    return ChainOutput(
        **cols,
        seed=seed,
        config={"sampler": "hmc-gauss", "travel_time": T, "burn_in": burn_in, "thin": thin},
        final_state={"z": x[:N], "w": x[N:], "y": y},
    )
