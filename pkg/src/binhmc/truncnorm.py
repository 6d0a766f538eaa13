"""Tail-stable truncated normal sampling and log-mass for scalar intervals."""
from __future__ import annotations

import math

from scipy.special import log_ndtr, ndtr, ndtri

# beyond this standardized bound the inverse CDF loses too much precision
_TAIL = 8.0


def log_mass(mu: float, sigma: float, lo: float, hi: float) -> float:
    """log P(lo <= X <= hi) for X ~ N(mu, sigma^2), accurate far into either tail."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not lo < hi:
        return -math.inf
    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    if a >= 0.0:
        # both bounds in the upper tail: work with survival functions
        la, lb = float(log_ndtr(-a)), float(log_ndtr(-b))
        return la + math.log1p(-math.exp(lb - la)) if lb < la else -math.inf
    if b <= 0.0:
        la, lb = float(log_ndtr(a)), float(log_ndtr(b))
        return lb + math.log1p(-math.exp(la - lb)) if la < lb else -math.inf
    return math.log1p(-float(ndtr(a)) - float(ndtr(-b)))


def _std_tail(a: float, b: float, rng) -> float:
    """Draw from N(0,1) restricted to [a, b] with a >= _TAIL by exponential rejection."""
    if b - a < 1.0 / a:
        # narrow interval: uniform proposal, envelope exp(-a^2/2)
        while True:
            x = a + (b - a) * rng.random()
            if math.log(rng.random()) <= 0.5 * (a * a - x * x):
                return x
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    while True:
        x = a + rng.standard_exponential() / lam
        if x <= b and math.log(rng.random()) <= -0.5 * (x - lam) ** 2:
            return x


def _std_sample(a: float, b: float, rng) -> float:
    if a >= _TAIL:
        return _std_tail(a, b, rng)
    if b <= -_TAIL:
        return -_std_tail(-b, -a, rng)
    u = rng.random()
    if a >= 0.0:
        pa, pb = float(ndtr(-a)), float(ndtr(-b))
        x = -float(ndtri(pb + u * (pa - pb)))
    elif b <= 0.0:
        pa, pb = float(ndtr(a)), float(ndtr(b))
        x = float(ndtri(pa + u * (pb - pa)))
    else:
        pa, pb = float(ndtr(a)), float(ndtr(b))
        x = float(ndtri(pa + u * (pb - pa)))
    # rounding in the inverse CDF can land a hair outside the interval
    return min(max(x, a), b)


def sample(mu: float, sigma: float, lo: float, hi: float, rng) -> float:
    """One draw from N(mu, sigma^2) conditioned on [lo, hi]; bounds may be infinite."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not lo <= hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if lo == hi:
        return float(lo)
    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    x = _std_sample(a, b, rng)
    if not math.isfinite(x):
        raise FloatingPointError(f"truncated normal draw failed on [{a}, {b}]")
    return min(max(mu + sigma * x, lo), hi)
