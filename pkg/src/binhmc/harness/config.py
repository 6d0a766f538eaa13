"""Flat key=value experiment configuration with command-line overrides."""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass
from pathlib import Path

EXPERIMENTS = ("ising1d", "ising2d", "spikeslab", "probit", "ess-sweep")
SAMPLERS = ("hmc-gauss", "hmc-exp", "metropolis", "gibbs")
BINARY_SAMPLERS = ("hmc-gauss", "hmc-exp", "metropolis")
REGRESSION_SAMPLERS = ("hmc-gauss", "gibbs")


class ConfigError(ValueError):
    """Invalid, missing or unknown configuration key."""


def parse_real(text: str) -> float:
    """Float with an optional trailing ``pi`` factor: ``2.5pi``, ``pi/2``, ``0.5*pi``."""
    t = text.strip().lower().replace(" ", "").replace("π", "pi")
    m = re.fullmatch(r"(.*?)\*?pi(?:/(.+))?", t)
    if m:
        coef = float(m.group(1)) if m.group(1) else 1.0
        div = float(m.group(2)) if m.group(2) else 1.0
        return coef * math.pi / div
    return float(t)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    experiment: str
    sampler: str | None = None
    seed: int = 0
    data_seed: int | None = None
    out: str = "runs"
    samples: int | None = None
    burn_in: int = 0
    thin: int = 1
    travel_time: float | None = None
    half_periods: int | None = None
    full_scale: bool = False
    replicates: int = 1
    timing: bool = False
    states: bool = False
    plot: bool = False
    # model sizes and parameters
    d: int | None = None
    L: int | None = None
    N: int | None = None
    beta: float | None = None
    sigma2: float | None = None
    a: float | None = None
    tau2: float | None = None
    positive: bool | None = None
    nonzeros: int | None = None
    trace_coefs: int | None = None
    # ising2d first-passage threshold
    threshold: float = 0.9
    # ess-sweep ranges
    n_min: int = 1
    n_max: int | None = None
    samplers: str = "hmc-gauss,hmc-exp,metropolis"

    @property
    def T(self) -> float:
        """Resolved HMC travel time."""
        if self.travel_time is not None:
            return self.travel_time
        return (self.half_periods + 0.5) * math.pi

    def sampler_list(self) -> list[str]:
        names = [s.strip() for s in self.samplers.split(",") if s.strip()]
        for s in names:
            if s not in BINARY_SAMPLERS:
                raise ConfigError(f"samplers: {s!r} is not one of {BINARY_SAMPLERS}")
        return names

    def echo(self) -> str:
        """Resolved configuration as key=value lines."""
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name}={_fmt(v)}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_REAL_KEYS = {"travel_time", "beta", "sigma2", "a", "tau2", "threshold"}

# desk-scale defaults, then the sizes used when full_scale is set
_DEFAULTS = {
    "ising1d": dict(sampler="hmc-gauss", d=100, samples=1000, travel_time=12.5 * math.pi),
    "ising2d": dict(sampler="hmc-gauss", L=32, samples=200, travel_time=2.5 * math.pi),
    "spikeslab": dict(
        sampler="hmc-gauss", N=200, d=50, samples=1000, travel_time=0.5 * math.pi,
        sigma2=100.0, a=0.1, tau2=100.0, positive=True, nonzeros=10, trace_coefs=10,
    ),
    "probit": dict(
        sampler="hmc-gauss", N=100, d=5, samples=1000, travel_time=0.5 * math.pi,
        a=0.2, tau2=4.0, positive=False, nonzeros=2, trace_coefs=5,
    ),
    "ess-sweep": dict(d=100, samples=3000, replicates=10, n_max=7),
}
_FULL = {
    "ising1d": dict(d=400),
    "ising2d": dict(L=100),
    "spikeslab": dict(N=700, d=150),
    "probit": {},
    "ess-sweep": dict(n_max=13),
}
_REQUIRED = {"ising1d": ("beta",), "ising2d": ("beta",), "ess-sweep": ("beta",)}
_ALLOWED_SAMPLERS = {
    "ising1d": BINARY_SAMPLERS,
    "ising2d": BINARY_SAMPLERS,
    "spikeslab": REGRESSION_SAMPLERS,
    "probit": ("hmc-gauss",),
    "ess-sweep": (None,),
}


def coerce(key: str, text: str):
    """Convert the string ``text`` to the type of config field ``key``."""
    key = key.replace("-", "_")
    if key not in _FIELDS:
        raise ConfigError(f"unknown key {key!r}")
    if key in _REAL_KEYS:
        conv = parse_real
    else:
        typ = str(_FIELDS[key].type)
        if "bool" in typ:
            conv = _parse_bool
        elif "int" in typ:
            conv = int
        elif "float" in typ:
            conv = float
        else:
            conv = str
    try:
        return conv(text)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad value for {key!r}: {text!r} ({err})") from None


def read_file(path) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def parse_config(experiment: str | None = None, path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults, an optional file and overrides (strings or typed values).

    Overrides win over the file. ``experiment`` may come from any layer; an
    explicit argument wins over both.
    """
    raw: dict = {}
    if path is not None:
        raw.update(read_file(path))
    over = {k.replace("-", "_"): v for k, v in (overrides or {}).items() if v is not None}
    # travel_time and half_periods are alternatives; the later layer's choice wins
    for a, b in (("travel_time", "half_periods"), ("half_periods", "travel_time")):
        if a in over and b not in over:
            raw.pop(b, None)
    raw.update(over)
    if experiment is not None:
        raw["experiment"] = experiment
    exp = raw.pop("experiment", None)
    if exp is None:
        raise ConfigError("missing required key 'experiment'")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment: {exp!r} is not one of {EXPERIMENTS}")
    values = {}
    for k, v in raw.items():
        values[k] = coerce(k, v) if isinstance(v, str) else v
        if k not in _FIELDS:
            raise ConfigError(f"unknown key {k!r}")

    full = bool(values.get("full_scale", False))
    merged = dict(_DEFAULTS[exp])
    if full:
        merged.update(_FULL[exp])
    if "half_periods" in values and "travel_time" not in values:
        merged.pop("travel_time", None)
    merged.update(values)
    if merged.get("travel_time") is None and merged.get("half_periods") is None:
        merged["half_periods"] = 1
    for key in _REQUIRED.get(exp, ()):
        if merged.get(key) is None:
            raise ConfigError(f"missing required key {key!r} for {exp}")
    cfg = ExperimentConfig(experiment=exp, **merged)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    allowed = _ALLOWED_SAMPLERS[cfg.experiment]
    if cfg.sampler not in allowed:
        raise ConfigError(f"sampler: {cfg.sampler!r} not valid for {cfg.experiment} (choose from {allowed})")
    for key in ("samples", "thin", "replicates", "d", "L", "N", "nonzeros", "trace_coefs", "n_min", "n_max"):
        v = getattr(cfg, key)
        if v is not None and v < 1:
            raise ConfigError(f"{key} must be positive, got {v}")
    for key in ("burn_in", "half_periods", "seed"):
        v = getattr(cfg, key)
        if v is not None and v < 0:
            raise ConfigError(f"{key} must be nonnegative, got {v}")
    for key in ("beta", "sigma2", "tau2"):
        v = getattr(cfg, key)
        if v is not None and not v > 0:
            raise ConfigError(f"{key} must be positive, got {v}")
    if cfg.a is not None and not 0 < cfg.a < 1:
        raise ConfigError(f"a must lie in (0, 1), got {cfg.a}")
    if cfg.travel_time is not None and not (cfg.travel_time > 0 and math.isfinite(cfg.travel_time)):
        raise ConfigError("travel_time must be positive and finite")
    if cfg.experiment in ("ising1d", "ising2d", "ess-sweep"):
        size = cfg.L if cfg.experiment == "ising2d" else cfg.d
        if size < 2:
            raise ConfigError("lattice side must be at least 2")
    if cfg.experiment == "ess-sweep":
        if cfg.n_max < cfg.n_min:
            raise ConfigError("n_max must be >= n_min")
        cfg.sampler_list()
    if cfg.nonzeros is not None and cfg.d is not None and cfg.nonzeros > cfg.d:
        raise ConfigError(f"nonzeros ({cfg.nonzeros}) exceeds d ({cfg.d})")
