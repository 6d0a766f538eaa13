"""Reference samplers: single-flip Metropolis and block Gibbs for spike-and-slab."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import _kernels as K
from . import truncnorm
from .diagnostics import ChainOutput
from .gated import stack_constraints
from .hmc import _keep_mask, _resolve, _run_blocks
from .spikeslab import SpikeSlabModel, log_posterior
from .targets import BinaryTarget, as_spins

# cap on proposal randoms drawn at once (per array)
_DRAW_BUDGET = 1 << 20


@dataclass(frozen=True)
class MetropolisConfig:
    flips_per_sample: int
    seed: int | None = None

    def __post_init__(self):
        if self.flips_per_sample < 1:
            raise ValueError("flips_per_sample must be >= 1")


def matched_flips(d: int, travel_time: float) -> int:
    """Proposals per recorded sample that match an HMC run of the given travel time.

    A Gaussian-HMC coordinate hits its wall about T / pi times per iteration.
    """
    return max(1, round(d * travel_time / math.pi))


def metropolis_flip_step(target: BinaryTarget, s, rng):
    """Propose flipping one uniformly chosen spin; returns (s', accepted)."""
    s = as_spins(s, target.d)
    j = int(rng.integers(target.d))
    dl = target.delta_log_f(s, j)
    log_ratio = -dl if s[j] > 0 else dl
    if log_ratio >= 0.0 or rng.random() < math.exp(log_ratio):
        s = s.copy()
        s[j] = -s[j]
        return s, True
    return s, False


def metropolis_chain(
    target: BinaryTarget,
    s_init,
    cfg: MetropolisConfig,
    n_samples: int,
    burn_in: int = 0,
    thin: int = 1,
    rng=None,
    record_timing: bool = False,
    compiled: bool | None = None,
) -> ChainOutput:
    """Record the state after every ``cfg.flips_per_sample`` proposals.

    ``wall_hits`` counts proposals and ``crossings`` accepted flips.
    """
    if n_samples <= 0 or thin < 1 or burn_in < 0:
        raise ValueError("need n_samples > 0, thin >= 1, burn_in >= 0")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    d = target.d
    s = as_spins(s_init, d).copy()
    log_f0 = target.log_f(s)
    fast, params = _resolve(target, compiled)
    block = K.metropolis_block_nb if fast else K.metropolis_block_py
    flips = cfg.flips_per_sample

    def draw(n):
        return rng.integers(0, d, size=(n, flips)), rng.random((n, flips))

    def run_block(rand, keep, out_s, out_stats, acc):
        return block(s, rand[0], rand[1], params, keep, out_s, out_stats, acc)

    n_steps = burn_in + n_samples * thin
    keep = _keep_mask(n_steps, burn_in, thin)
    rows = max(1, min(256, _DRAW_BUDGET // flips))
    out_s, stats, elapsed = _run_blocks(run_block, n_steps, draw, keep, d, record_timing, rows)
    return ChainOutput(
        spins=out_s,
        log_target=log_f0 + stats[:, 0],
        wall_hits=stats[:, 1].astype(np.int64),
        crossings=stats[:, 2].astype(np.int64),
        elapsed_ns=elapsed,
        seed=cfg.seed,
        config={"sampler": "metropolis", "flips_per_sample": flips, "burn_in": burn_in, "thin": thin},
        final_state={"s": s.copy()},
    )


class _GibbsCache:
    """Per-model constants for the coordinate sweep."""

    def __init__(self, model: SpikeSlabModel):
        self.F, self.c = stack_constraints(model.constraints, model.d)
        self.touch = [np.flatnonzero(self.F[:, i]) for i in range(model.d)]
        self.lam = np.diag(model.M) + 1.0 / model.tau2
        self.log_prior = math.log(model.a / (1.0 - model.a)) - 0.5 * math.log(model.tau2)


def _bounds(cache, Fw, i, wi):
    lo, hi = -math.inf, math.inf
    for k in cache.touch[i]:
        fk = cache.F[k, i]
        b = -(Fw[k] - fk * wi) / fk
        if fk > 0:
            lo = max(lo, b)
        else:
            hi = min(hi, b)
    return lo, hi


def gibbs_ss_step(model: SpikeSlabModel, w, s, rng, _cache=None):
    """One sweep of (w_i, s_i) updates with w_i integrated out of the s_i conditional.

    Excluded coefficients must be 0 and the start feasible. Given the rest,
    w_i has precision lam = M_ii + 1/tau2 and mean nu = (r_i - sum_k M_ik w_k) / lam
    (k != i) restricted to the interval the constraints allow; s_i = +1 has
    odds a/(1-a) / (tau sqrt(lam)) exp(lam nu^2 / 2) times the interval's mass.
    """
    cache = _GibbsCache(model) if _cache is None else _cache
    w = np.array(w, dtype=float)
    s = as_spins(s, model.d).copy()
    if np.any(w[s < 0] != 0):
        raise ValueError("excluded coefficients must be exactly 0")
    M, r = model.M, model.r
    Mw = M @ w
    Fw = cache.F @ w + cache.c
    if Fw.size and Fw.min() < -1e-10:
        raise ValueError("start violates a constraint")
    for i in range(model.d):
        wi = w[i]
        lam = cache.lam[i]
        nu = (r[i] - (Mw[i] - M[i, i] * wi)) / lam
        lo, hi = _bounds(cache, Fw, i, wi)
        if lo > hi:
            raise ValueError(f"coordinate {i} has an empty feasible interval")
        sd = 1.0 / math.sqrt(lam)
        log_odds = (
            cache.log_prior - 0.5 * math.log(lam) + 0.5 * nu * nu * lam + truncnorm.log_mass(nu, sd, lo, hi)
        )
        u = rng.random()
        include = not (lo <= 0.0 <= hi) or u < expit(log_odds)
        new = truncnorm.sample(nu, sd, lo, hi, rng) if include else 0.0
        if new != wi:
            Mw += M[:, i] * (new - wi)
            if Fw.size:
                Fw += cache.F[:, i] * (new - wi)
            w[i] = new
        s[i] = 1 if include else -1
    return w, s


def gibbs_chain(
    model: SpikeSlabModel,
    n_samples: int,
    w_init=None,
    s_init=None,
    burn_in: int = 0,
    thin: int = 1,
    rng=None,
    seed=None,
    record_timing: bool = False,
) -> ChainOutput:
    """Gibbs chain starting, by default, from the empty model.

    ``wall_hits`` counts coordinate updates (d per sweep) and ``crossings``
    changes of inclusion.
    """
    if n_samples <= 0 or thin < 1 or burn_in < 0:
        raise ValueError("need n_samples > 0, thin >= 1, burn_in >= 0")
    rng = np.random.default_rng(seed) if rng is None else rng
    d = model.d
    s = -np.ones(d, dtype=np.int8) if s_init is None else as_spins(s_init, d)
    w = np.zeros(d) if w_init is None else np.where(s > 0, np.asarray(w_init, dtype=float), 0.0)
    cache = _GibbsCache(model)
    spins = np.empty((n_samples, d), dtype=np.int8)
    coef = np.empty((n_samples, d))
    logp = np.empty(n_samples)
    cost = np.zeros((n_samples, 3), dtype=np.int64)
    row = 0
    h = c = ns = 0
    for it in range(burn_in + n_samples * thin):
        t0 = time.perf_counter_ns() if record_timing else 0
        w, s_new = gibbs_ss_step(model, w, s, rng, cache)
        if record_timing:
            ns += time.perf_counter_ns() - t0
        h += d
        c += int(np.sum(s_new != s))
        s = s_new
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            spins[row], coef[row] = s, w
            logp[row] = log_posterior(model, w, s)
            cost[row] = (h, c, ns)
            h = c = ns = 0
            row += 1
    return ChainOutput(
        spins=spins,
        log_target=logp,
        wall_hits=cost[:, 0],
        crossings=cost[:, 1],
        elapsed_ns=cost[:, 2],
        coefficients=coef,
        seed=seed,
        config={"sampler": "gibbs", "burn_in": burn_in, "thin": thin},
        final_state={"w": w.copy(), "s": s.copy()},
    )
