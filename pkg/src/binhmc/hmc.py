"""Exact HMC for binary targets via piecewise continuous augmentations.

Each spin s_i is read out as the sign of a continuous coordinate y_i. Inside
an orthant the augmented potential is quadratic (Gaussian augmentation) or
linear in |y| (exponential augmentation), so trajectories are closed form
and the only events are wall hits y_j = 0, where the momentum q_j either
crosses with a kinetic-energy jump or reflects.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .diagnostics import ChainOutput
from .targets import BinaryTarget, as_spins

AUGMENTATIONS = ("gaussian", "exponential")
SAMPLER_NAMES = {"gaussian": "hmc-gauss", "exponential": "hmc-exp"}
BLOCK_STEPS = 256


@dataclass(frozen=True)
class HmcConfig:
    """Travel time and augmentation for one sampler.

    ``travel_time`` overrides ``half_periods``; otherwise T = (n + 1/2) pi.
    """

    augmentation: str = "gaussian"
    travel_time: float | None = None
    half_periods: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.augmentation not in AUGMENTATIONS:
            raise ValueError(f"augmentation must be one of {AUGMENTATIONS}")
        if self.half_periods < 0:
            raise ValueError("half_periods must be >= 0")
        T = self.T
        if not (T > 0 and math.isfinite(T)):
            raise ValueError("travel time must be positive and finite")
        if self.augmentation == "gaussian":
            k = round(T / math.pi)
            if k > 0 and abs(T - k * math.pi) < 1e-6:
                warnings.warn(
                    "travel time is a multiple of pi; reflected coordinates return to their start",
                    stacklevel=2,
                )

    @property
    def T(self) -> float:
        if self.travel_time is not None:
            return float(self.travel_time)
        return (self.half_periods + 0.5) * math.pi


@dataclass(frozen=True)
class WallEvent:
    t_hit: float
    coord: int
    delta: float
    q_before: float
    q_after: float
    crossed: bool


@dataclass
class Trajectory:
    """Result of one HMC iteration.

    ``energy_start``/``energy_end`` are the full Hamiltonian including
    ``-log f``, so they agree when every wall jump was accounted for.
    """

    y: np.ndarray
    q: np.ndarray
    spins: np.ndarray
    events: list[WallEvent] | None
    n_hits: int
    n_crossings: int
    log_f_change: float
    energy_start: float
    energy_end: float


def gauss_hit_phase(y0: float, q0: float) -> tuple[float, float]:
    """Amplitude u and first hit time of y(t) = u sin(phi + t), phi = atan2(y0, q0)."""
    if y0 == 0.0 and q0 == 0.0:
        raise ValueError("zero amplitude: the coordinate sits at rest on the wall")
    return K.gauss_first_hit(float(y0), float(q0))


def wall_event(delta: float, q_before: float) -> tuple[float, bool]:
    """Momentum after a wall hit given the energy jump ``delta`` into the other side."""
    return K._cross(float(q_before), min(max(float(delta), -K.DELTA_CLAMP), K.DELTA_CLAMP))


def exp_first_hit(y0: float, q0: float, s: int) -> float:
    """First positive root of y0 + q0 t - s t^2 / 2 = 0 for a start inside orthant s."""
    if s not in (-1, 1) or y0 == 0.0 or (y0 > 0) != (s > 0):
        raise ValueError("y0 must be nonzero and on the side given by s")
    return K.exp_first_hit_time(float(y0), float(q0), int(s))


def spins_of(y) -> np.ndarray:
    """Sign readout with sign(0) = +1."""
    return np.where(np.asarray(y) >= 0, 1, -1).astype(np.int8)


def initial_y(s, augmentation: str, rng) -> np.ndarray:
    """Draw y from p(y | s), the augmentation density restricted to orthant s."""
    s = as_spins(s)
    if augmentation == "gaussian":
        mag = np.abs(rng.standard_normal(s.shape[0]))
    elif augmentation == "exponential":
        mag = rng.standard_exponential(s.shape[0])
    else:
        raise ValueError(f"unknown augmentation {augmentation!r}")
    return s * np.maximum(mag, K.ZERO_NUDGE)


def _nudge(y, prev_s=None):
    y = np.array(y, dtype=float)
    zero = y == 0.0
    if zero.any():
        sgn = np.ones_like(y) if prev_s is None else np.asarray(prev_s, dtype=float)
        y[zero] = sgn[zero] * K.ZERO_NUDGE
    return y


def _resolve(target: BinaryTarget, compiled: bool | None):
    """Return (use_compiled, params) for ``target``."""
    params = target.kernel()
    if params is not None and compiled is not False:
        return True, params
    if compiled:
        raise ValueError(f"{type(target).__name__} has no compiled kernel")
    return False, target


def _energy(augmentation, y, q, log_f):
    pot = 0.5 * float(y @ y) if augmentation == "gaussian" else float(np.abs(y).sum())
    return pot + 0.5 * float(q @ q) - log_f


def _step(augmentation, target, y, cfg, rng, q0, record_events, compiled):
    y = _nudge(y)
    d = target.d
    if y.shape != (d,):
        raise ValueError(f"y has shape {y.shape}, expected ({d},)")
    q = rng.standard_normal(d) if q0 is None else np.array(q0, dtype=float)
    if q.shape != (d,):
        raise ValueError(f"q0 has shape {q.shape}, expected ({d},)")
    s = spins_of(y)
    log_f0 = target.log_f(s)
    e0 = _energy(augmentation, y, q, log_f0)

    fast, params = _resolve(target, compiled)
    if augmentation == "gaussian":
        traj = K.gauss_trajectory_nb if fast else K.gauss_trajectory_py
        cap = d * (int(cfg.T // math.pi) + 1) if record_events else 0
    else:
        traj = K.exp_trajectory_nb if fast else K.exp_trajectory_py
        cap = 4 * d * (int(cfg.T) + 1) if record_events else 0

    while True:
        events = np.empty((cap, 6))
        y1, q1, s1 = y.copy(), q.copy(), s.copy()
        n_hits, n_cross, dlogf = traj(y1, q1, s1, cfg.T, params, events)
        if n_hits <= cap or not record_events:
            break
        cap = n_hits

    ev = None
    if record_events:
        ev = [
            WallEvent(float(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4]), bool(r[5]))
            for r in events[:n_hits]
        ]
    e1 = _energy(augmentation, y1, q1, target.log_f(s1))
    return Trajectory(y1, q1, s1, ev, int(n_hits), int(n_cross), float(dlogf), e0, e1)


def gauss_hmc_step(target, y, cfg: HmcConfig, rng, q0=None, record_events=True, compiled=None):
    """One Gaussian-augmentation iteration from position ``y``.

    Momenta are drawn from N(0, I) unless ``q0`` is given. Each coordinate's
    first hit time is computed once; later hits follow every pi. Events are
    processed in global time order and each one evaluates the target's
    ``delta_log_f`` at the spin configuration current at that instant.
    """
    return _step("gaussian", target, y, cfg, rng, q0, record_events, compiled)


def exp_hmc_step(target, y, cfg: HmcConfig, rng, q0=None, record_events=True, compiled=None):
    """One exponential-augmentation iteration from position ``y``.

    After a hit with outgoing momentum q, the same coordinate next hits the
    wall 2|q| later; all other pending hit times are untouched.
    """
    return _step("exponential", target, y, cfg, rng, q0, record_events, compiled)


def _keep_mask(n_steps, burn_in, thin):
    k = np.arange(n_steps)
    return (k >= burn_in) & ((k - burn_in) % thin == thin - 1)


def _run_blocks(run_block, n_steps, draw, keep_all, d, record_timing, block_steps=BLOCK_STEPS):
    """Drive ``run_block`` over fixed-size blocks and collect kept rows."""
    n_keep = int(keep_all.sum())
    out_s = np.empty((n_keep, d), dtype=np.int8)
    out_stats = np.empty((n_keep, 3))
    elapsed = np.zeros(n_keep, dtype=np.int64)
    acc = np.zeros(3)
    row = 0
    pending_ns = 0
    for start in range(0, n_steps, block_steps):
        stop = min(start + block_steps, n_steps)
        rand = draw(stop - start)
        keep = keep_all[start:stop]
        if not record_timing:
            row += run_block(rand, keep, out_s[row:], out_stats[row:], acc)
            continue
        for b in range(stop - start):
            t0 = time.perf_counter_ns()
            r = run_block(
                tuple(x[b : b + 1] for x in rand), keep[b : b + 1], out_s[row:], out_stats[row:], acc
            )
            pending_ns += time.perf_counter_ns() - t0
            if r:
                elapsed[row] = pending_ns
                pending_ns = 0
                row += r
    return out_s, out_stats, elapsed


def sample_chain(
    target: BinaryTarget,
    y_init,
    cfg: HmcConfig,
    n_samples: int,
    burn_in: int = 0,
    thin: int = 1,
    rng=None,
    record_timing: bool = False,
    compiled: bool | None = None,
) -> ChainOutput:
    """Run ``burn_in + n_samples * thin`` HMC iterations and keep every ``thin``-th after burn-in.

    Momenta are drawn block-wise from ``rng`` (default: seeded from
    ``cfg.seed``), so a given seed reproduces the chain bit for bit whether
    or not timing is recorded.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    if thin < 1 or burn_in < 0:
        raise ValueError("thin must be >= 1 and burn_in >= 0")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    d = target.d
    y = _nudge(y_init)
    if y.shape != (d,):
        raise ValueError(f"y_init has shape {y.shape}, expected ({d},)")
    s = spins_of(y)
    log_f0 = target.log_f(s)

    fast, params = _resolve(target, compiled)
    block = K.hmc_block_nb if fast else K.hmc_block_py
    gaussian = cfg.augmentation == "gaussian"
    T = cfg.T

    def run_block(rand, keep, out_s, out_stats, acc):
        return block(gaussian, y, rand[0], s, T, params, keep, out_s, out_stats, acc)

    n_steps = burn_in + n_samples * thin
    keep = _keep_mask(n_steps, burn_in, thin)
    out_s, stats, elapsed = _run_blocks(
        run_block, n_steps, lambda n: (rng.standard_normal((n, d)),), keep, d, record_timing
    )
    return ChainOutput(
        spins=out_s,
        log_target=log_f0 + stats[:, 0],
        wall_hits=stats[:, 1].astype(np.int64),
        crossings=stats[:, 2].astype(np.int64),
        elapsed_ns=elapsed,
        seed=cfg.seed,
        config={"sampler": SAMPLER_NAMES[cfg.augmentation], "travel_time": T,
                "burn_in": burn_in, "thin": thin},
        final_state={"y": y.copy()},
    )


def matched_exponential_time(gaussian_T: float) -> float:
    """Exponential travel time with the same expected wall-hit count as a Gaussian one.

    At equilibrium a Gaussian coordinate hits its wall once per pi, an
    exponential one at rate 1/sqrt(2 pi).
    """
    return gaussian_T * math.sqrt(2.0 * math.pi) / math.pi
