"""Seeded synthetic datasets for the regression experiments."""
from __future__ import annotations

import numpy as np


def equicorrelated_design(N: int, d: int, rng, diag: float = 3.0, off: float = 0.3) -> np.ndarray:
    """N rows from N(0, C) with C_ii = diag and C_ij = off."""
    C = np.full((d, d), off) + (diag - off) * np.eye(d)
    L = np.linalg.cholesky(C)
    return rng.standard_normal((N, d)) @ L.T


def sparse_weights(d: int, n_nonzero: int, rng, low: float = 1.0, high: float = 10.0) -> np.ndarray:
    """Vector with ``n_nonzero`` entries Uniform(low, high) at random positions."""
    w = np.zeros(d)
    idx = np.sort(rng.choice(d, size=n_nonzero, replace=False))
    w[idx] = rng.uniform(low, high, size=n_nonzero)
    return w


def linear_regression_data(N: int, d: int, n_nonzero: int, sigma2: float, rng):
    """Returns (X, z, w_true) with z = X w_true + N(0, sigma2) noise."""
    X = equicorrelated_design(N, d, rng)
    w = sparse_weights(d, n_nonzero, rng)
    z = X @ w + np.sqrt(sigma2) * rng.standard_normal(N)
    return X, z, w


def probit_data(N: int, d: int, n_nonzero: int, rng):
    """Returns (X, b, w_true): X ~ N(0, I), b = sign of z ~ N(-X w_true, 1) with sign(0) = +1."""
    X = rng.standard_normal((N, d))
    w = sparse_weights(d, n_nonzero, rng, low=0.5, high=2.0)
    z = -(X @ w) + rng.standard_normal(N)
    b = np.where(z >= 0, 1, -1).astype(np.int8)
    return X, b, w
