"""Exact HMC for binary distributions and spike-and-slab regression."""
from .baselines import MetropolisConfig, gibbs_chain, gibbs_ss_step, matched_flips, metropolis_chain
from .diagnostics import ChainOutput, acf, ess, first_passage, magnetization, min_ess, tv_distance
from .gated import LinearConstraint, positivity
from .hmc import HmcConfig, exp_hmc_step, gauss_hmc_step, initial_y, matched_exponential_time, sample_chain
from .probit import ProbitModel
from .spikeslab import SpikeSlabModel, build_linear_model, exact_marginal_s, log_posterior
from .targets import BinaryTarget, IsingModel, TabularTarget, exact_distribution

__version__ = "0.1.0"

__all__ = [
    "BinaryTarget", "ChainOutput", "HmcConfig", "IsingModel", "LinearConstraint",
    "MetropolisConfig", "ProbitModel", "SpikeSlabModel", "TabularTarget", "acf",
    "build_linear_model", "ess", "exact_distribution", "exact_marginal_s", "exp_hmc_step",
    "first_passage", "gauss_hmc_step", "gibbs_chain", "gibbs_ss_step", "initial_y",
    "log_posterior", "magnetization", "matched_exponential_time", "matched_flips",
    "metropolis_chain", "min_ess", "positivity", "sample_chain", "tv_distance",
]
