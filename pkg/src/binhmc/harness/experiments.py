"""Experiment runners behind the CLI: chains, CSV traces and key=value summaries."""
from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..baselines import MetropolisConfig, gibbs_chain, matched_flips, metropolis_chain
from ..diagnostics import ChainOutput, DegenerateSeriesWarning, acf, ess, first_passage, min_ess
from ..gated import positivity
from ..hmc import HmcConfig, initial_y, matched_exponential_time, sample_chain
from .. import probit as pb
from .. import spikeslab as ss
from ..targets import IsingModel
from .config import ExperimentConfig
from .data import linear_regression_data, probit_data

ISING_COLUMNS = ["iter", "magnetization", "log_f", "wall_hits", "crossings", "elapsed_ns"]
SWEEP_COLUMNS = [
    "n", "sampler", "travel_time", "cost_per_sample", "median_min_ess", "median_min_ess_per_cost",
]


@dataclass
class RunResult:
    out_dir: Path
    summary: dict
    chain: ChainOutput | None = None
    extras: dict = field(default_factory=dict)


def derive_seeds(seed: int, n: int) -> list[int]:
    """``n`` independent 63-bit seeds from one root; a single replicate keeps the root."""
    if n == 1:
        return [int(seed)]
    kids = np.random.SeedSequence(int(seed)).spawn(n)
    return [int(k.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for k in kids]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_summary(path: Path, summary: dict, cfg: ExperimentConfig | None = None) -> None:
    """key=value lines; the resolved config follows under ``config.`` keys."""
    lines = [f"{k}={_fmt(v)}\n" for k, v in summary.items()]
    if cfg is not None:
        lines += [f"config.{line}\n" for line in cfg.echo().splitlines()]
    path.write_text("".join(lines))


def _quiet_ess(series) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSeriesWarning)
        return ess(series) if len(series) >= 10 else math.nan


def _min_ess_nonconstant(samples) -> float:
    samples = np.asarray(samples)
    keep = np.ptp(samples, axis=0) > 0
    if samples.shape[0] < 10 or not keep.any():
        return math.nan
    return min_ess(samples[:, keep])


def _per_cost(value: float, cost: float) -> float:
    return value / cost if cost > 0 else math.nan


# ---------------------------------------------------------------- binary targets


def ising_target(cfg: ExperimentConfig) -> IsingModel:
    if cfg.experiment == "ising2d":
        return IsingModel.torus(cfg.L, cfg.beta)
    return IsingModel.ring(cfg.d, cfg.beta)


def run_binary_chain(target, sampler, s0, T, n_samples, burn_in, thin, seed, timing=False) -> ChainOutput:
    """One chain of ``sampler`` on a binary target; Metropolis is cost-matched to T."""
    rng = np.random.default_rng(seed)
    if sampler == "metropolis":
        cfg = MetropolisConfig(matched_flips(target.d, T), seed)
        return metropolis_chain(target, s0, cfg, n_samples, burn_in, thin, rng, timing)
    aug = "gaussian" if sampler == "hmc-gauss" else "exponential"
    y0 = initial_y(s0, aug, rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        hcfg = HmcConfig(aug, travel_time=T, seed=seed)
    return sample_chain(target, y0, hcfg, n_samples, burn_in, thin, rng, timing)


def _ising_start(cfg, target, data_seed):
    if cfg.experiment == "ising2d":
        rng = np.random.default_rng(data_seed)
        return np.where(rng.random(target.d) < 0.5, 1, -1).astype(np.int8)
    return np.ones(target.d, dtype=np.int8)


def _run_ising(cfg: ExperimentConfig, out: Path, seed: int, data_seed: int) -> RunResult:
    target = ising_target(cfg)
    s0 = _ising_start(cfg, target, data_seed)
    t0 = time.perf_counter()
    chain = run_binary_chain(
        target, cfg.sampler, s0, cfg.T, cfg.samples, cfg.burn_in, cfg.thin, seed, cfg.timing
    )
    runtime = time.perf_counter() - t0
    m = chain.magnetization
    rows = zip(range(1, len(chain) + 1), m, chain.log_target, chain.wall_hits, chain.crossings, chain.elapsed_ns)
    write_csv(out / "trace.csv", ISING_COLUMNS, rows)
    if cfg.states:
        write_csv(out / "states.csv", [f"s_{i + 1}" for i in range(target.d)], chain.spins.tolist())
    cost = chain.total_cost
    spins_ess = _min_ess_nonconstant(chain.spins)
    summary = {
        "experiment": cfg.experiment,
        "sampler": cfg.sampler,
        "seed": seed,
        "data_seed": data_seed,
        "samples": len(chain),
        "cost_unit": "flip_proposals" if cfg.sampler == "metropolis" else "wall_hits",
        "cost": int(cost),
        "cost_per_sample": cost / len(chain),
        "ess_magnetization": _quiet_ess(m),
        "min_ess": spins_ess,
        "min_ess_per_cost": _per_cost(spins_ess, cost),
        "crossing_rate": chain.crossing_rate,
        "mean_abs_magnetization": float(np.mean(np.abs(m))),
    }
    if cfg.experiment == "ising2d":
        fp = first_passage(m, cfg.threshold)
        summary["first_passage"] = fp if fp is not None else "none"
    if cfg.sampler == "metropolis":
        summary["flips_per_sample"] = chain.config["flips_per_sample"]
    else:
        summary["travel_time"] = cfg.T
    summary["runtime_s"] = runtime
    return RunResult(out, summary, chain)


# ---------------------------------------------------------------- regression


def regression_model(cfg: ExperimentConfig, data_seed: int):
    """Spike-slab model built from the synthetic linear-regression recipe."""
    rng = np.random.default_rng(data_seed)
    X, z, w_true = linear_regression_data(cfg.N, cfg.d, cfg.nonzeros, cfg.sigma2, rng)
    cons = positivity(cfg.d) if cfg.positive else ()
    return ss.build_linear_model(X, z, cfg.sigma2, cfg.a, cfg.tau2, cons), w_true


def probit_model(cfg: ExperimentConfig, data_seed: int):
    rng = np.random.default_rng(data_seed)
    X, b, w_true = probit_data(cfg.N, cfg.d, cfg.nonzeros, rng)
    cons = positivity(cfg.d) if cfg.positive else ()
    return pb.ProbitModel(X, b, cfg.a, cfg.tau2, cons), w_true


def _regression_outputs(cfg, out, chain, w_true, runtime, seed, data_seed, extra):
    k = min(cfg.trace_coefs, chain.coefficients.shape[1])
    header = ["iter", "log_post", "active_count"] + [f"w_{i + 1}" for i in range(k)]
    active = (chain.spins > 0).sum(axis=1)
    rows = (
        [i + 1, lp, int(a)] + list(w)
        for i, (lp, a, w) in enumerate(zip(chain.log_target, active, chain.coefficients[:, :k]))
    )
    write_csv(out / "trace.csv", header, rows)
    d = chain.spins.shape[1]
    write_csv(out / "inclusion.csv", [f"s_{i + 1}" for i in range(d)], (chain.spins > 0).astype(int).tolist())
    write_csv(out / "truth.csv", ["index", "w_true"], ([i + 1, w] for i, w in enumerate(w_true)))
    n = len(chain)
    first = int(np.flatnonzero(w_true)[0]) if np.any(w_true) else 0
    series = chain.coefficients[:, first]
    cost = chain.total_cost
    coef_ess = _min_ess_nonconstant(chain.coefficients)
    summary = {
        "experiment": cfg.experiment,
        "sampler": cfg.sampler,
        "seed": seed,
        "data_seed": data_seed,
        "samples": n,
        "cost_unit": "coordinate_updates" if cfg.sampler == "gibbs" else "wall_hits",
        "cost": int(cost),
        "cost_per_sample": cost / n,
        "ess_log_post": _quiet_ess(chain.log_target),
        "min_ess": coef_ess,
        "min_ess_per_cost": _per_cost(coef_ess, cost),
        "crossing_rate": chain.crossing_rate,
        "first_true_index": first + 1,
        "acf10_first_true": float(acf(series, 10)[10]) if n > 10 and np.ptp(series) > 0 else math.nan,
        "median_log_post_last_half": float(np.median(chain.log_target[n // 2 :])),
        "min_coefficient": float(chain.coefficients.min()),
        "mean_active": float(active.mean()),
    }
    summary.update(extra)
    if cfg.sampler != "gibbs":
        summary["travel_time"] = cfg.T
    summary["runtime_s"] = runtime
    return summary


def _run_spikeslab(cfg, out, seed, data_seed) -> RunResult:
    model, w_true = regression_model(cfg, data_seed)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    if cfg.sampler == "gibbs":
        chain = gibbs_chain(
            model, cfg.samples, burn_in=cfg.burn_in, thin=cfg.thin, rng=rng, seed=seed,
            record_timing=cfg.timing,
        )
    else:
        state = ss.initial_state(model, rng)
        chain = ss.sample_chain(
            model, state, cfg.T, cfg.samples, cfg.burn_in, cfg.thin, rng, seed, cfg.timing
        )
    runtime = time.perf_counter() - t0
    summary = _regression_outputs(cfg, out, chain, w_true, runtime, seed, data_seed, {})
    return RunResult(out, summary, chain, {"model": model, "w_true": w_true})


def _run_probit(cfg, out, seed, data_seed) -> RunResult:
    model, w_true = probit_model(cfg, data_seed)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    state = pb.initial_state(model, rng)
    chain = pb.sample_chain(model, state, cfg.T, cfg.samples, cfg.burn_in, cfg.thin, rng, seed, cfg.timing)
    runtime = time.perf_counter() - t0
    extra = {"min_z_times_b": float(np.min(chain.latent * model.b))}
    summary = _regression_outputs(cfg, out, chain, w_true, runtime, seed, data_seed, extra)
    return RunResult(out, summary, chain, {"model": model, "w_true": w_true})


# ---------------------------------------------------------------- ESS sweep


def sweep_settings(d: int, n: int, sampler: str):
    """(travel time, nominal cost per sample) for half-period index n >= 1.

    The Gaussian sampler runs T = (n - 1/2) pi; the exponential one gets the
    travel time with the same expected number of wall hits; Metropolis makes
    d (n - 1/2) proposals per recorded sample.
    """
    T = (n - 0.5) * math.pi
    if sampler == "hmc-exp":
        T = matched_exponential_time(T)
    return T, matched_flips(d, (n - 0.5) * math.pi)


def ess_sweep(cfg: ExperimentConfig, out: Path | None = None):
    """Median (over replicates) smallest per-spin ESS divided by cost, per (n, sampler).

    Every replicate starts from a disordered configuration drawn from its data
    seed, shared by all samplers. Returns (rows, per-replicate rows).
    """
    target = IsingModel.ring(cfg.d, cfg.beta)
    seeds = derive_seeds(cfg.seed, cfg.replicates)
    data_seeds = derive_seeds(cfg.seed if cfg.data_seed is None else cfg.data_seed, cfg.replicates)
    starts = [np.where(np.random.default_rng(ds).random(cfg.d) < 0.5, 1, -1).astype(np.int8) for ds in data_seeds]
    rows, reps = [], []
    for n in range(cfg.n_min, cfg.n_max + 1):
        for sampler in cfg.sampler_list():
            T, flips = sweep_settings(cfg.d, n, sampler)
            esses, costs, vals = [], [], []
            for r, (seed, s0) in enumerate(zip(seeds, starts)):
                chain = run_binary_chain(target, sampler, s0, T, cfg.samples, cfg.burn_in, cfg.thin, seed)
                e = _min_ess_nonconstant(chain.spins)
                cost = chain.total_cost
                esses.append(e)
                costs.append(cost / len(chain))
                vals.append(_per_cost(e, cost))
                reps.append([n, sampler, r, seed, e, int(cost), vals[-1]])
            rows.append([n, sampler, T, float(np.median(costs)), float(np.median(esses)), float(np.median(vals))])
    if out is not None:
        write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
        write_csv(
            out / "sweep_replicates.csv",
            ["n", "sampler", "replicate", "seed", "min_ess", "cost", "min_ess_per_cost"],
            reps,
        )
    return rows, reps


def _sweep_summary(cfg, rows) -> dict:
    table = {(r[0], r[1]): r[5] for r in rows}
    ns = sorted({r[0] for r in rows})
    summary = {"experiment": "ess-sweep", "seed": cfg.seed, "d": cfg.d, "beta": cfg.beta}
    names = cfg.sampler_list()
    if "hmc-gauss" in names:
        for other in names:
            if other == "hmc-gauss":
                continue
            wins = sum(table[(n, "hmc-gauss")] >= table[(n, other)] for n in ns)
            summary[f"gauss_ge_{other}"] = f"{wins}/{len(ns)}"
    for name in names:
        best = max(ns, key=lambda n: table[(n, name)])
        summary[f"best_n_{name}"] = best
    return summary


# ---------------------------------------------------------------- dispatch

_RUNNERS = {
    "ising1d": _run_ising,
    "ising2d": _run_ising,
    "spikeslab": _run_spikeslab,
    "probit": _run_probit,
}


def _write_plots(result: RunResult, cfg: ExperimentConfig) -> None:
    from .plots import plot_sweep, plot_trace

    if cfg.experiment == "ess-sweep":
        plot_sweep(result.out_dir / "sweep.csv", result.out_dir / "sweep.svg")
    else:
        column = "magnetization" if cfg.experiment.startswith("ising") else "log_post"
        plot_trace(result.out_dir / "trace.csv", result.out_dir / "trace.svg", column)


def run_experiment(cfg: ExperimentConfig) -> list[RunResult]:
    """Run every replicate of ``cfg`` and write its artifacts under ``cfg.out``.

    With one replicate the files go directly in ``cfg.out``; otherwise each
    replicate gets ``rep000``, ``rep001``, ... and a ``replicates.csv`` index.
    """
    root = Path(cfg.out)
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.txt").write_text(cfg.echo())
    if cfg.experiment == "ess-sweep":
        t0 = time.perf_counter()
        rows, _ = ess_sweep(cfg, root)
        summary = _sweep_summary(cfg, rows)
        summary["runtime_s"] = time.perf_counter() - t0
        write_summary(root / "summary.txt", summary, cfg)
        result = RunResult(root, summary, extras={"rows": rows})
        if cfg.plot:
            _write_plots(result, cfg)
        return [result]

    runner = _RUNNERS[cfg.experiment]
    seeds = derive_seeds(cfg.seed, cfg.replicates)
    data_root = cfg.seed if cfg.data_seed is None else cfg.data_seed
    data_seeds = derive_seeds(data_root, cfg.replicates)
    results = []
    for r, (seed, dseed) in enumerate(zip(seeds, data_seeds)):
        out = root if cfg.replicates == 1 else root / f"rep{r:03d}"
        out.mkdir(parents=True, exist_ok=True)
        res = runner(cfg, out, seed, dseed)
        write_summary(out / "summary.txt", res.summary, cfg)
        if cfg.plot:
            _write_plots(res, cfg)
        results.append(res)
    if cfg.replicates > 1:
        keys = [k for k in results[0].summary if k not in ("experiment", "sampler", "runtime_s")]
        write_csv(
            root / "replicates.csv",
            ["replicate"] + keys,
            ([r] + [res.summary[k] for k in keys] for r, res in enumerate(results)),
        )
    return results
