"""Run configuration and the named presets that reproduce the figures.

A configuration is a nested JSON document::

    {"command": "simulate", "seed": 3, "dt": 1e-4, "steps": 10000,
     "lattice": {"L": 500}, "hazard": {"a": 2.0, "min_size": {...}},
     "driver": {"kind": "linear", "p0": 0.4, "C": 1.0}, "price": {"kappa": 0.2}}

All rates are per unit of simulated time and ``dt`` is shared by the driver
and the price process. The figure presets use ``dt = 1e-4``, so a rate of 1
per unit time is 1e-4 per step.
"""

from __future__ import annotations

import copy
import itertools
import json
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .driver import DriverSpec
from .errors import ConfigError, DomainError
from .hazard import ActivityLaw, HazardModel, MinSizeRule, PercolationConstants
from .market import MODES, PriceParams
from .percolation import LatticeSpec

__all__ = ["RunConfig", "load_config", "load_preset", "preset_names", "expand_sweep", "set_dotted"]

COMMANDS = ("simulate", "hazard-curve", "sweep", "fit")


@dataclass
class RunConfig:
    seed: int
    command: str = "simulate"
    name: str = ""
    description: str = ""
    dt: float = 1.0
    steps: int = 1000
    mode: str = "reshuffled"
    replicas: int = 1
    lattice: dict = field(default_factory=lambda: {"L": 100, "periodic": False})
    hazard: dict = field(default_factory=lambda: {"a": 2.0, "r0": 1.0, "s_star_prefactor": 1.0,
                                                  "min_size": {"kind": "fixed", "value": 1}})
    driver: dict = field(default_factory=lambda: {"kind": "linear", "p0": 0.4, "C": 0.0})
    price: dict = field(default_factory=lambda: {"kappa": 0.2, "eta": 0.0, "initial_price": 1.0})
    p_grid: dict | list | None = None
    fit_window: list | None = None
    sweep: dict = field(default_factory=dict)
    overlay_zero_volatility: bool = False

    # -- builders -----------------------------------------------------------

    def lattice_spec(self) -> LatticeSpec:
        return LatticeSpec(int(self.lattice["L"]), bool(self.lattice.get("periodic", False)))

    def hazard_model(self) -> HazardModel:
        h = self.hazard
        r0 = float(h.get("r0", 1.0))
        if "atoms" in h:
            law = ActivityLaw.heterogeneous([tuple(x) for x in h["atoms"]], r0)
        else:
            law = ActivityLaw.homogeneous(float(h["a"]), r0)
        ms = h.get("min_size", {"kind": "fixed", "value": 1})
        return HazardModel(law, MinSizeRule(ms["kind"], ms["value"]),
                           PercolationConstants.for_dimension(2, h.get("p_c")),
                           float(h.get("s_star_prefactor", 1.0)), h.get("normalization", "occupied"))

    def driver_spec(self) -> DriverSpec:
        d = self.driver
        kind = d.get("kind", "linear")
        p0 = float(d["p0"])
        reset = float(d.get("reset_value", p0))
        if kind == "linear":
            return DriverSpec.linear(p0, float(d.get("C", 0.0)), self.dt, reset)
        return DriverSpec.ou(p0, float(d.get("theta", 0.0)), float(d.get("sigma_p", 0.0)), self.dt, reset)

    def price_params(self, eta: float | None = None) -> PriceParams:
        pr = self.price
        return PriceParams(kappa=float(pr["kappa"]),
                           eta=float(pr.get("eta", 0.0)) if eta is None else eta,
                           dt=self.dt,
                           initial_price=float(pr.get("initial_price", 1.0)),
                           noise=pr.get("noise", "binary"),
                           crash_prob=pr.get("crash_prob", "linear"))

    def p_values(self) -> np.ndarray:
        g = self.p_grid
        if g is None:
            raise ConfigError("p_grid: required for hazard curves")
        if isinstance(g, dict):
            n = int(round((g["stop"] - g["start"]) / g["step"])) + 1
            return np.round(g["start"] + g["step"] * np.arange(n), 12)
        return np.asarray(g, dtype=float)

    # -- (de)serialization --------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict, source_text: str | None = None) -> RunConfig:
        problems = []
        known = set(cls.__dataclass_fields__)
        for k in d:
            if k not in known:
                problems.append(_where(k, f"unknown key", source_text))
        if "seed" not in d or d["seed"] is None:
            problems.append("seed: required (runs are never seeded from the clock)")
        if problems:
            raise ConfigError(problems)
        cfg = cls(**copy.deepcopy(d))
        cfg.validate(source_text)
        return cfg

    def validate(self, source_text: str | None = None):
        problems = []

        def check(key, fn):
            try:
                fn()
            except (DomainError, ConfigError, KeyError, TypeError, ValueError) as exc:
                msg = f"missing {exc}" if isinstance(exc, KeyError) else str(exc)
                problems.append(_where(key, msg, source_text))

        if not isinstance(self.seed, int) or self.seed < 0:
            problems.append(_where("seed", "must be a non-negative integer", source_text))
        if self.command not in COMMANDS:
            problems.append(_where("command", f"must be one of {COMMANDS}", source_text))
        if self.mode not in MODES:
            problems.append(_where("mode", f"must be one of {MODES}", source_text))
        if not (isinstance(self.steps, int) and self.steps >= 0):
            problems.append(_where("steps", "must be a non-negative integer", source_text))
        if not (isinstance(self.replicas, int) and self.replicas >= 1):
            problems.append(_where("replicas", "must be a positive integer", source_text))
        check("lattice", self.lattice_spec)
        check("hazard", self.hazard_model)
        check("driver", self.driver_spec)
        check("price", self.price_params)
        if self.command == "hazard-curve" or self.p_grid is not None:
            check("p_grid", self._check_grid)
        if self.fit_window is not None and len(self.fit_window) != 2:
            problems.append(_where("fit_window", "must be [low, high]", source_text))
        for key, values in self.sweep.items():
            if not isinstance(values, list) or not values:
                problems.append(_where(key, "sweep range must be a non-empty list", source_text))
        if problems:
            raise ConfigError(problems)

    def _check_grid(self):
        p = self.p_values()
        if p.size == 0 or (p <= 0).any() or (p >= 1).any():
            raise ValueError("values must lie in (0, 1)")
        if p.size > 1 and not np.all(np.diff(p) > 0):
            raise ValueError("values must be strictly increasing")

    def echo(self) -> dict:
        """Header block written to every output file."""
        d = self.to_dict()
        d.pop("description", None)
        return {"config": d}


def _where(key: str, msg: str, text: str | None) -> str:
    loc = ""
    if text:
        needle = f'"{key.split(".")[-1]}"'
        for i, line in enumerate(text.splitlines(), 1):
            if needle in line:
                loc = f" (line {i})"
                break
    return f"{key}: {msg}{loc}"


def load_config(path) -> RunConfig:
    with open(path) as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return RunConfig.from_dict(d, text)


def preset_names() -> list[str]:
    files = resources.files("perchazard").joinpath("presets").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def load_preset(name: str) -> RunConfig:
    if name not in preset_names():
        raise ConfigError(f"preset: unknown name {name!r}; available: {', '.join(preset_names())}")
    text = resources.files("perchazard").joinpath("presets", f"{name}.json").read_text()
    return RunConfig.from_dict(json.loads(text), text)


def set_dotted(d: dict, key: str, value):
    node = d
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def expand_sweep(base: RunConfig, ranges: dict) -> list[tuple[dict, dict]]:
    """Cartesian product of sweep ranges; returns ``(cell_params, config_dict)`` pairs."""
    keys = list(ranges)
    cells = []
    for combo in itertools.product(*(ranges[k] for k in keys)):
        params = dict(zip(keys, combo))
        d = base.to_dict()
        d["sweep"] = {}
        for k, v in params.items():
            set_dotted(d, k, v)
        cells.append((params, d))
    return cells
