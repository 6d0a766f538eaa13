"""Binary target distributions over spin vectors s in {-1, +1}^d.

A target only has to supply the unnormalized ``log_f`` and the single-site
log-ratio ``delta_log_f``; the normalizer is never used by the samplers.
"""
from __future__ import annotations

import abc

import numpy as np

from . import _kernels

MAX_TABULAR_DIM = 20


def as_spins(values, d: int | None = None) -> np.ndarray:
    """Validate ``values`` as a spin vector and return it as an int8 array."""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"spin vector must be one-dimensional, got shape {arr.shape}")
    if d is not None and arr.shape[0] != d:
        raise ValueError(f"spin vector has length {arr.shape[0]}, expected {d}")
    if not np.all((arr == 1) | (arr == -1)):
        raise ValueError("spin entries must be -1 or +1")
    return arr.astype(np.int8)


def spins_from_index(index: int, d: int) -> np.ndarray:
    """Spin pattern whose bit i is set iff s_i = +1."""
    bits = (index >> np.arange(d)) & 1
    return (2 * bits - 1).astype(np.int8)


def spins_to_index(s) -> int:
    s = np.asarray(s)
    return int(np.sum((s > 0).astype(np.int64) << np.arange(s.shape[0], dtype=np.int64)))


def all_states(d: int) -> np.ndarray:
    """All 2^d spin patterns, row k being ``spins_from_index(k, d)``."""
    idx = np.arange(2**d)[:, None]
    return (2 * ((idx >> np.arange(d)) & 1) - 1).astype(np.int8)


class BinaryTarget(abc.ABC):
    """Unnormalized distribution p(s) = f(s) / Z over {-1, +1}^d."""

    d: int

    @abc.abstractmethod
    def log_f(self, s) -> float:
        """Log of the unnormalized mass at ``s``."""

    @abc.abstractmethod
    def delta_log_f(self, s, j: int) -> float:
        """``log f(s with s_j=+1) - log f(s with s_j=-1)``; ignores the current s_j."""

    def kernel(self):
        """Parameter tuple for the compiled fast path, or None."""
        return None

    def _check(self, s, j=None):
        s = np.asarray(s)
        if s.shape != (self.d,):
            raise ValueError(f"spin vector has shape {s.shape}, expected ({self.d},)")
        if j is not None and not 0 <= j < self.d:
            raise IndexError(f"coordinate {j} out of range for d={self.d}")
        return s


class IsingModel(BinaryTarget):
    """Nearest-neighbour Ising model with periodic boundaries, log f = -beta E.

    The lattice is either a ring of ``d`` sites or an ``L x L`` torus with
    row-major site indexing (site = row * L + col). The energy sums one bond
    per site and forward direction (right, and down in 2D), so a torus has
    2 L^2 bond terms even when L = 2 and two of them join the same pair.
    """

    def __init__(self, beta: float, shape: tuple[int, ...]):
        if not beta > 0:
            raise ValueError("beta must be positive")
        if len(shape) not in (1, 2) or any(n < 2 for n in shape):
            raise ValueError("shape must be (d,) or (L, L) with sides >= 2")
        if len(shape) == 2 and shape[0] != shape[1]:
            raise ValueError("2D lattice must be square")
        self.beta = float(beta)
        self.shape = tuple(int(n) for n in shape)
        self.d = int(np.prod(self.shape))
        sites = np.arange(self.d).reshape(self.shape)
        if len(self.shape) == 1:
            fwd = [np.roll(sites, -1)]
            bwd = [np.roll(sites, 1)]
        else:
            fwd = [np.roll(sites, -1, axis=1), np.roll(sites, -1, axis=0)]
            bwd = [np.roll(sites, 1, axis=1), np.roll(sites, 1, axis=0)]
        self.forward = np.stack([f.ravel() for f in fwd], axis=1)
        # full neighbour table, duplicates kept so flips see every bond term
        self.neighbors = np.ascontiguousarray(
            np.concatenate([self.forward, np.stack([b.ravel() for b in bwd], axis=1)], axis=1)
        )

    @classmethod
    def ring(cls, d: int, beta: float) -> "IsingModel":
        return cls(beta, (d,))

    @classmethod
    def torus(cls, L: int, beta: float) -> "IsingModel":
        return cls(beta, (L, L))

    @property
    def variant(self) -> str:
        return "1d" if len(self.shape) == 1 else "2d"

    def neighbors_of(self, site: int) -> np.ndarray:
        """Neighbour sites of ``site`` (with repeats on tiny lattices)."""
        return self.neighbors[site]

    def energy(self, s) -> float:
        s = self._check(s).astype(np.int64)
        return -float(np.sum(s[:, None] * s[self.forward]))

    def log_f(self, s) -> float:
        return -self.beta * self.energy(s)

    def delta_log_f(self, s, j: int) -> float:
        s = self._check(s, j)
        return 2.0 * self.beta * float(np.sum(s[self.neighbors[j]], dtype=np.int64))

    def kernel(self):
        return _kernels.ising_params(self.neighbors, self.beta)

    def __repr__(self):
        return f"IsingModel(beta={self.beta}, shape={self.shape})"


class TabularTarget(BinaryTarget):
    """Explicit table of 2^d positive weights keyed by the bit pattern of s."""

    def __init__(self, weights=None, *, log_weights=None):
        if (weights is None) == (log_weights is None):
            raise ValueError("give exactly one of weights or log_weights")
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and positive")
            logw = np.log(w)
        else:
            logw = np.asarray(log_weights, dtype=float)
            if not np.all(np.isfinite(logw)):
                raise ValueError("log weights must be finite")
        n = logw.shape[0]
        d = n.bit_length() - 1
        if logw.ndim != 1 or n != 2**d or d < 1:
            raise ValueError("table length must be 2^d with d >= 1")
        if d > MAX_TABULAR_DIM:
            raise ValueError(f"tabular targets are limited to d <= {MAX_TABULAR_DIM}")
        self.d = d
        self.log_weights = logw

    @classmethod
    def from_target(cls, target: BinaryTarget) -> "TabularTarget":
        if target.d > MAX_TABULAR_DIM:
            raise ValueError(f"tabular targets are limited to d <= {MAX_TABULAR_DIM}")
        return cls(log_weights=np.array([target.log_f(s) for s in all_states(target.d)]))

    @classmethod
    def random(cls, d: int, rng, scale: float = 1.0) -> "TabularTarget":
        """Random table with log weights drawn from N(0, scale^2)."""
        return cls(log_weights=scale * rng.standard_normal(2**d))

    def probabilities(self) -> np.ndarray:
        p = np.exp(self.log_weights - self.log_weights.max())
        return p / p.sum()

    def log_f(self, s) -> float:
        s = self._check(s)
        return float(self.log_weights[spins_to_index(s)])

    def delta_log_f(self, s, j: int) -> float:
        s = self._check(s, j)
        idx = spins_to_index(s)
        return float(self.log_weights[idx | (1 << j)] - self.log_weights[idx & ~(1 << j)])

    def kernel(self):
        return _kernels.tabular_params(self.log_weights)

    def __repr__(self):
        return f"TabularTarget(d={self.d})"


def exact_distribution(target: BinaryTarget) -> np.ndarray:
    """Normalized probabilities of all 2^d states in ``all_states`` order."""
    if target.d > MAX_TABULAR_DIM:
        raise ValueError("exact enumeration limited to d <= 20")
    logf = np.array([target.log_f(s) for s in all_states(target.d)])
    p = np.exp(logf - logf.max())
    return p / p.sum()

