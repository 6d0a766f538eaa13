"""``binhmc`` command line: one subcommand per experiment."""
from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENTS, ConfigError, parse_config, parse_real
from .experiments import run_experiment

_HELP = {
    "ising1d": "periodic 1D Ising chain, all spins up at the start",
    "ising2d": "periodic 2D Ising lattice from a disordered start",
    "spikeslab": "spike-and-slab linear regression on synthetic data",
    "probit": "spike-and-slab probit regression on synthetic data",
    "ess-sweep": "ESS per unit cost across travel times on the 1D Ising chain",
}


def _key_value(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run")
    g.add_argument("--config", metavar="PATH", help="key=value file; flags override it")
    g.add_argument("--seed", type=int, help="sampler seed (default 0)")
    g.add_argument("--data-seed", type=int, help="seed for synthetic data and random starts (default: --seed)")
    g.add_argument("--out", metavar="DIR", help="output directory (default runs)")
    g.add_argument("--samples", type=int, metavar="N", help="kept samples per chain")
    g.add_argument("--burn-in", type=int, metavar="N", help="discarded iterations")
    g.add_argument("--thin", type=int, metavar="K", help="keep every K-th iteration")
    g.add_argument("--sampler", help="hmc-gauss, hmc-exp, metropolis or gibbs (per experiment)")
    tt = g.add_mutually_exclusive_group()
    tt.add_argument("--travel-time", type=parse_real, metavar="REAL", help="HMC travel time, e.g. 2.5pi")
    tt.add_argument("--half-periods", type=int, metavar="N", help="travel time (N + 1/2) pi")
    g.add_argument("--full-scale", action="store_true", default=None, help="use the large problem sizes")
    g.add_argument("--replicates", type=int, metavar="R", help="independent replicate runs")
    g.add_argument("--timing", action="store_true", default=None, help="record per-sample wall-clock in elapsed_ns")
    g.add_argument("--states", action="store_true", default=None, help="also write states.csv (Ising)")
    g.add_argument("--plot", action="store_true", default=None, help="render SVG charts from the CSVs")
    m = p.add_argument_group("model")
    m.add_argument("--beta", type=parse_real, help="inverse temperature")
    m.add_argument("--d", type=int, help="number of spins or coefficients")
    m.add_argument("--L", type=int, help="2D lattice side")
    m.add_argument("--N", type=int, help="number of observations")
    m.add_argument(
        "--set", type=_key_value, action="append", default=[], metavar="KEY=VALUE",
        help="any other config key (repeatable)",
    )
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="binhmc", description="Exact HMC experiments for binary and spike-and-slab targets.")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    common = _common()
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=_HELP[name], description=_HELP[name])
    return parser


def _overrides(ns: argparse.Namespace) -> dict:
    over = dict(ns.set)
    for key in (
        "seed", "data_seed", "out", "samples", "burn_in", "thin", "sampler", "travel_time",
        "half_periods", "full_scale", "replicates", "timing", "states", "plot", "beta", "d", "L", "N",
    ):
        v = getattr(ns, key)
        if v is not None:
            over[key] = v
    return over


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = parse_config(ns.experiment, ns.config, _overrides(ns))
    except (ConfigError, OSError) as err:
        print(f"binhmc: error: {err}", file=sys.stderr)
        return 2
    try:
        results = run_experiment(cfg)
    except (OSError, ValueError) as err:
        print(f"binhmc: error: {err}", file=sys.stderr)
        return 1
    for res in results:
        print(f"[{res.out_dir}]")
        for k, v in res.summary.items():
            print(f"  {k} = {v}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
