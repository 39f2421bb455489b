"""Experiment configuration: TOML files, validation and defaults."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .distributions import duration_from_record, reward_from_record
from .errors import ConfigurationError, DomainError, RegimeWarning
from .measures import TelecomParams

EXPERIMENTS = (
    "limit-check",
    "ld-moderate",
    "ld-intermediate",
    "ld-multisession",
    "ld-ultra",
    "constants",
    "measure-selftest",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration of one experiment run.

    ``rho_rule`` selects the deviation level: ``"kappa"`` gives ``rho = kappa t``,
    ``"power"`` gives ``rho = t^beta`` and ``"fixed"`` takes ``rho_values``
    pairwise with ``t_grid``.
    """

    experiment: str
    Q: float = 1.0
    gamma: float = 1.5
    reward: dict = field(default_factory=lambda: {"kind": "uniform", "b": 1.0})
    duration: dict = field(default_factory=lambda: {"kind": "pareto", "gamma": 1.5, "u_min": 1.0})
    t_grid: tuple = (1000.0,)
    rho_rule: str = "kappa"
    kappa: float = 0.5
    beta: float = 0.8
    rho_values: tuple = ()
    kappas: tuple = (0.5,)
    h: float = 0.1
    residual: str = "gaussian"
    skew_tol: float = 0.01
    estimator: str = "conditional"
    n_max: int | None = None
    replicates: int = 10000
    constant_replicates: int = 10**6
    seed: int = 0
    threads: int = 0
    out: str = "results"
    a: float | None = None
    L: float = 1.0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.rho_rule not in ("kappa", "power", "fixed"):
            raise ConfigurationError("rho_rule must be 'kappa', 'power' or 'fixed'")
        if self.rho_rule == "fixed" and len(self.rho_values) != len(self.t_grid):
            raise ConfigurationError("rho_values must pair with t_grid")
        if self.estimator not in ("conditional", "crude"):
            raise ConfigurationError("estimator must be 'conditional' or 'crude'")
        if self.replicates < 1 or self.seed < 0:
            raise ConfigurationError("replicates must be >= 1 and seed >= 0")
        if any(not (t > 0 and math.isfinite(t)) for t in self.t_grid) or not self.t_grid:
            raise ConfigurationError("t_grid must hold positive finite times")
        if not 0 < self.h:
            raise ConfigurationError("h must be positive")
        try:
            self.params()
            law = self.reward_law()
            if self.experiment == "limit-check" and self.a is not None:
                duration_from_record(self.duration)
        except DomainError as e:
            raise ConfigurationError(str(e)) from e
        if self.experiment != "measure-selftest":
            try:
                law.moment(self.gamma)
            except DomainError as e:
                raise ConfigurationError(f"E R^gamma must be finite: {e}") from e
        if law.delta <= self.gamma:
            warnings.warn("reward tail index does not exceed gamma; outside the Telecom regime", RegimeWarning, stacklevel=3)
        if self.experiment == "ld-moderate" and self.rho_rule == "power" and not 1.0 / self.gamma < self.beta < 1.0:
            warnings.warn(f"beta = {self.beta} lies outside (1/gamma, 1)", RegimeWarning, stacklevel=3)
        if self.experiment == "ld-ultra" and law.tail_index is None:
            warnings.warn("ultralarge experiment with a reward law that is not regularly varying", RegimeWarning, stacklevel=3)

    def params(self):
        return TelecomParams(Q=self.Q, gamma=self.gamma)

    def reward_law(self):
        return reward_from_record(self.reward)

    def duration_law(self):
        return duration_from_record(self.duration)

    def rho_for(self, i, t):
        if self.rho_rule == "kappa":
            return self.kappa * t
        if self.rho_rule == "power":
            return t**self.beta
        return float(self.rho_values[i])

    def to_record(self):
        rec = asdict(self)
        rec["t_grid"] = list(self.t_grid)
        rec["rho_values"] = list(self.rho_values)
        rec["kappas"] = list(self.kappas)
        return rec

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


_SCALARS = {"experiment", "seed", "replicates", "threads", "out", "estimator", "constant_replicates"}
_SECTIONS = {
    "params": {"Q", "gamma"},
    "grid": {"t"},
    "rho": {"rule", "kappa", "beta", "values", "kappas"},
    "split": {"h", "residual", "skew_tol"},
    "estimator": {"kind", "n_max"},
    "limit": {"a", "L"},
}


def config_from_mapping(doc, experiment=None):
    """Validate a parsed TOML document and build an ``ExperimentConfig``."""
    doc = dict(doc)
    known = _SCALARS | set(_SECTIONS) | {"reward", "duration"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    exp = doc.get("experiment", experiment)
    if experiment is not None and exp != experiment:
        raise ConfigurationError(f"config is for {exp!r} but {experiment!r} was requested")
    if exp is None:
        raise ConfigurationError("no experiment named")
    kw["experiment"] = exp
    for k in ("seed", "replicates", "threads", "constant_replicates"):
        if k in doc:
            kw[k] = int(doc[k])
    if "out" in doc:
        kw["out"] = str(doc["out"])
    for sec, keys in _SECTIONS.items():
        body = doc.get(sec, {})
        if sec == "estimator" and isinstance(body, str):
            body = {"kind": body}
        if not isinstance(body, dict):
            raise ConfigurationError(f"[{sec}] must be a table")
        bad = set(body) - keys
        if bad:
            raise ConfigurationError(f"unknown keys in [{sec}]: {sorted(bad)}")
    p = doc.get("params", {})
    kw.update({k: float(v) for k, v in p.items()})
    if "t" in doc.get("grid", {}):
        kw["t_grid"] = tuple(float(x) for x in doc["grid"]["t"])
    r = doc.get("rho", {})
    if "rule" in r:
        kw["rho_rule"] = r["rule"]
    for k in ("kappa", "beta"):
        if k in r:
            kw[k] = float(r[k])
    if "values" in r:
        kw["rho_values"] = tuple(float(x) for x in r["values"])
    if "kappas" in r:
        kw["kappas"] = tuple(float(x) for x in r["kappas"])
    s = doc.get("split", {})
    if "h" in s:
        kw["h"] = float(s["h"])
    if "residual" in s:
        kw["residual"] = str(s["residual"])
    if "skew_tol" in s:
        kw["skew_tol"] = float(s["skew_tol"])
    e = doc.get("estimator", {})
    if isinstance(e, str):
        e = {"kind": e}
    if "kind" in e:
        kw["estimator"] = e["kind"]
    if "n_max" in e:
        kw["n_max"] = int(e["n_max"])
    lim = doc.get("limit", {})
    if "a" in lim:
        kw["a"] = float(lim["a"])
    if "L" in lim:
        kw["L"] = float(lim["L"])
    if "reward" in doc:
        kw["reward"] = dict(doc["reward"])
    if "duration" in doc:
        kw["duration"] = dict(doc["duration"])
    try:
        return ExperimentConfig(**kw)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(str(e)) from e


def load_config(path, experiment=None):
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"{path}: {e}") from e
    return config_from_mapping(doc, experiment)


# Built-in configurations reproducing the desk-scale checks.
DEFAULTS = {
    "measure-selftest": {"experiment": "measure-selftest"},
    "constants": {"experiment": "constants", "rho": {"kappas": [0.25, 0.5, 0.75, 1.5]}},
    "limit-check": {
        "experiment": "limit-check",
        "replicates": 10000,
        "grid": {"t": [10000.0]},
        "limit": {"a": 10000.0, "L": 1.0},
    },
    "ld-moderate": {
        "experiment": "ld-moderate",
        "replicates": 20000,
        "grid": {"t": [1e6]},
        "rho": {"rule": "fixed", "values": [1e5]},
    },
    "ld-intermediate": {
        "experiment": "ld-intermediate",
        "replicates": 20000,
        "grid": {"t": [100.0, 1000.0, 10000.0]},
        "rho": {"rule": "kappa", "kappa": 0.5},
    },
    "ld-multisession": {
        "experiment": "ld-multisession",
        "replicates": 20000,
        "grid": {"t": [50.0, 100.0, 200.0]},
        "rho": {"rule": "kappa", "kappa": 1.5},
    },
    "ld-ultra": {
        "experiment": "ld-ultra",
        "replicates": 20000,
        "reward": {"kind": "pareto", "m": 3.0, "x_min": 1.0},
        "grid": {"t": [100.0]},
        "rho": {"rule": "fixed", "values": [1e4]},
    },
}


def default_config(experiment):
    if experiment not in DEFAULTS:
        raise ConfigurationError(f"unknown experiment {experiment!r}")
    return config_from_mapping(DEFAULTS[experiment], experiment)
