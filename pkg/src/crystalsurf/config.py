"""Experiment configuration: INI-style files with per-experiment sections.

A config file looks like

    [experiment]
    kind = compare
    beta = 0.01

    [profile]
    kind = sine
    amplitude = 0.1

    [kmc]
    n = 50, 100, 200
    replicas = 32

    [pde]
    grid = 256

    [times]
    report = 5e-5, 1e-4

    [seeds]
    master = 12345

    [output]
    dir = out/run1

Unknown sections or keys are rejected; every run writes a manifest echoing
the fully resolved configuration, and re-running from that manifest
reproduces the outputs byte for byte.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .profiles import InitialProfile

EXPERIMENTS = (
    "kmc", "pde", "mm", "compare", "rates", "wetting", "selfsim", "decay",
    "gibbs-table",
)

_SCHEMA = {
    "experiment": {"kind", "beta"},
    "profile": {"kind", "amplitude", "shift", "table"},
    "kmc": {"n", "replicas", "event_cap", "rate_window"},
    "pde": {"grid", "form", "rel_tol", "abs_tol", "method"},
    "mm": {"steps"},
    "times": {"report", "t_final"},
    "selfsim": {"interval", "tol", "max_iter"},
    "wetting": {"threshold"},
    "gibbs": {"betas", "lambdas", "moments"},
    "seeds": {"master"},
    "output": {"dir", "formats"},
}


@dataclass
class ExperimentConfig:
    """Fully resolved description of one run."""

    experiment: str = "pde"
    beta: float = 1.0
    profile: InitialProfile = field(default_factory=InitialProfile)
    n_values: tuple = (50,)          # microscopic lattice sizes
    replicas: int = 8
    event_cap: int = 500_000_000
    rate_window: float = 0.25        # window half-width, fraction of t_final
    n_grid: int = 256
    form: str = "slope"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-11
    method: str = "BDF"
    report_times: tuple = ()
    t_final: float = 1e-4
    mm_steps: int = 32
    selfsim_interval: float = 5e-4
    selfsim_tol: float = 1e-3
    selfsim_max_iter: int = 200
    wetting_threshold: float = 1e-6
    gibbs_betas: tuple = (0.01, 0.1, 0.25, 0.5)
    gibbs_lambdas: tuple = (-2.0, -0.5, 0.0, 0.5, 2.0)
    gibbs_moments: tuple = (-3, -2, -1, 0, 1, 2, 3)
    master_seed: int = 0
    out_dir: str = "out"
    formats: tuple = ("csv",)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}"
            )
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if any(n < 4 for n in self.n_values):
            raise ConfigError("lattice sizes must be >= 4")
        if self.replicas < 1:
            raise ConfigError("need at least one replica")
        if self.n_grid < 5:
            raise ConfigError("pde grid must have >= 5 points")
        if self.t_final < 0 or self.selfsim_interval <= 0:
            raise ConfigError("time horizons must be nonnegative")
        if not 0 < self.rate_window < 1:
            raise ConfigError("rate_window must be in (0, 1)")

    def resolved(self) -> dict:
        """JSON-ready echo of every field (the manifest payload)."""
        doc = asdict(self)
        prof = doc.pop("profile")
        if prof.get("table") is not None:
            prof["table"] = np.asarray(prof["table"]).tolist()
        doc["profile"] = prof
        for key in ("n_values", "report_times", "formats", "gibbs_betas",
                    "gibbs_lambdas", "gibbs_moments"):
            doc[key] = list(doc[key])
        return doc


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate an INI config file (or a manifest .json echo)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        if "config" in doc:  # a manifest: replay its embedded config
            doc = doc["config"]
        prof = doc.pop("profile", {})
        table = prof.pop("table", None)
        if table is not None:
            prof["table"] = np.asarray(table, dtype=float)
        doc.pop("experiment_version", None)
        cfg_kwargs = {k: v for k, v in doc.items()}
        for key in ("n_values", "report_times", "formats", "gibbs_betas",
                    "gibbs_lambdas", "gibbs_moments"):
            if key in cfg_kwargs:
                cfg_kwargs[key] = tuple(cfg_kwargs[key])
        try:
            return ExperimentConfig(profile=InitialProfile(**prof), **cfg_kwargs)
        except TypeError as err:
            raise ConfigError(f"bad manifest field: {err}") from err

    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse {path}: {err}") from err

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    kw = {}
    get = parser.get
    if parser.has_section("experiment"):
        if parser.has_option("experiment", "kind"):
            kw["experiment"] = get("experiment", "kind")
        if parser.has_option("experiment", "beta"):
            kw["beta"] = float(get("experiment", "beta"))
    prof_kw = {}
    if parser.has_section("profile"):
        sec = parser["profile"]
        if "kind" in sec:
            prof_kw["kind"] = sec["kind"]
        if "amplitude" in sec:
            prof_kw["amplitude"] = float(sec["amplitude"])
        if "shift" in sec:
            prof_kw["shift"] = float(sec["shift"])
        if "table" in sec:
            rows = np.loadtxt(sec["table"], delimiter=",", skiprows=1)
            prof_kw["table"] = rows
    if parser.has_section("kmc"):
        sec = parser["kmc"]
        if "n" in sec:
            kw["n_values"] = _ints(sec["n"])
        if "replicas" in sec:
            kw["replicas"] = int(sec["replicas"])
        if "event_cap" in sec:
            kw["event_cap"] = int(float(sec["event_cap"]))
        if "rate_window" in sec:
            kw["rate_window"] = float(sec["rate_window"])
    if parser.has_section("pde"):
        sec = parser["pde"]
        if "grid" in sec:
            kw["n_grid"] = int(sec["grid"])
        if "form" in sec:
            kw["form"] = sec["form"]
        if "rel_tol" in sec:
            kw["rel_tol"] = float(sec["rel_tol"])
        if "abs_tol" in sec:
            kw["abs_tol"] = float(sec["abs_tol"])
        if "method" in sec:
            kw["method"] = sec["method"]
    if parser.has_section("times"):
        sec = parser["times"]
        if "report" in sec:
            kw["report_times"] = _floats(sec["report"])
        if "t_final" in sec:
            kw["t_final"] = float(sec["t_final"])
    if parser.has_section("mm") and "steps" in parser["mm"]:
        kw["mm_steps"] = int(parser["mm"]["steps"])
    if parser.has_section("selfsim"):
        sec = parser["selfsim"]
        if "interval" in sec:
            kw["selfsim_interval"] = float(sec["interval"])
        if "tol" in sec:
            kw["selfsim_tol"] = float(sec["tol"])
        if "max_iter" in sec:
            kw["selfsim_max_iter"] = int(sec["max_iter"])
    if parser.has_section("wetting") and "threshold" in parser["wetting"]:
        kw["wetting_threshold"] = float(parser["wetting"]["threshold"])
    if parser.has_section("gibbs"):
        sec = parser["gibbs"]
        if "betas" in sec:
            kw["gibbs_betas"] = _floats(sec["betas"])
        if "lambdas" in sec:
            kw["gibbs_lambdas"] = _floats(sec["lambdas"])
        if "moments" in sec:
            kw["gibbs_moments"] = _ints(sec["moments"])
    if parser.has_section("seeds") and "master" in parser["seeds"]:
        kw["master_seed"] = int(parser["seeds"]["master"])
    if parser.has_section("output"):
        sec = parser["output"]
        if "dir" in sec:
            kw["out_dir"] = sec["dir"]
        if "formats" in sec:
            kw["formats"] = tuple(sec["formats"].replace(",", " ").split())

    try:
        return ExperimentConfig(profile=InitialProfile(**prof_kw), **kw)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
