"""Synthetic JLS price paths driven by the percolation crash hazard.

Each step the occupancy fraction is advanced, a lattice configuration is
realized at that fraction, the hazard h is read off its clusters, a crash is
drawn with probability ``min(1, h dt)`` and the price is multiplied by
``1 + kappa h dt + eta dw - kappa dj``. After a crash the driver is reset.
Because the crash probability equals the drift compensation, the expected
price is constant from one step to the next.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .driver import DriverSpec, DriverState, initial_state, reset_after_crash, step_driver, step_driver_batch
from .errors import DomainError, PositivityError
from .hazard import HazardModel, empirical_hazard
from .percolation import (
    IncrementalLattice,
    LatticeSpec,
    cluster_histogram,
    generate_reshuffled,
    label_clusters,
)
from .rng import as_generator

__all__ = [
    "PriceParams",
    "MarketState",
    "CrashEvent",
    "MarketPath",
    "LatticeHazard",
    "HazardBank",
    "crash_probability",
    "draw_crash",
    "draw_crashes",
    "step_price",
    "run_simulation",
    "ensemble_final_prices",
]

MODES = ("reshuffled", "incremental")


@dataclass(frozen=True)
class PriceParams:
    kappa: float
    eta: float = 0.0
    dt: float = 1.0
    initial_price: float = 1.0
    noise: str = "binary"  # +-sqrt(dt) random walk, or "gaussian"
    crash_prob: str = "linear"  # min(1, h dt), or "exponential": 1 - exp(-h dt)

    def __post_init__(self):
        problems = []
        if not 0 < self.kappa < 1:
            problems.append(f"kappa must lie in (0, 1), got {self.kappa}")
        if self.eta < 0:
            problems.append(f"eta must be non-negative, got {self.eta}")
        if not self.dt > 0:
            problems.append(f"dt must be positive, got {self.dt}")
        if not self.initial_price > 0:
            problems.append(f"initial_price must be positive, got {self.initial_price}")
        if self.noise not in ("binary", "gaussian"):
            problems.append(f"unknown noise {self.noise!r}")
        if self.crash_prob not in ("linear", "exponential"):
            problems.append(f"unknown crash_prob {self.crash_prob!r}")
        if problems:
            raise DomainError("; ".join(problems))


@dataclass(frozen=True)
class MarketState:
    price: float
    t: float = 0.0
    crash_count: int = 0


@dataclass(frozen=True)
class CrashEvent:
    t: float
    h: float
    p: float


@dataclass
class MarketPath:
    """Time series of one run; row 0 is the initial state."""

    t: np.ndarray
    p: np.ndarray
    h: np.ndarray
    price: np.ndarray
    crash: np.ndarray
    meta: dict = field(default_factory=dict)

    COLUMNS = ("t", "p", "h", "price", "crash")

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        self.price = np.asarray(self.price, dtype=float)
        self.crash = np.asarray(self.crash, dtype=np.int8)

    def __len__(self):
        return self.t.size

    @property
    def log_price(self) -> np.ndarray:
        return np.log(self.price)

    def crash_events(self) -> list[CrashEvent]:
        return [CrashEvent(float(self.t[i]), float(self.h[i]), float(self.p[i]))
                for i in np.flatnonzero(self.crash)]

    def validate(self):
        if self.t.size > 1 and not np.all(np.diff(self.t) > 0):
            raise DomainError("times must be strictly increasing")
        if not np.isin(self.crash, (0, 1)).all():
            raise DomainError("crash flags must be 0 or 1")
        if (self.h < 0).any():
            raise DomainError("hazard must be non-negative")
        if (self.price <= 0).any():
            raise DomainError("price must be positive")


# ---------------------------------------------------------------------------
# crash draws and price updates


def crash_probability(h, dt: float, exponential: bool = False):
    h = np.asarray(h, dtype=float)
    q = -np.expm1(-h * dt) if exponential else np.minimum(1.0, h * dt)
    return float(q) if q.ndim == 0 else q


def draw_crash(h: float, dt: float, seed=None, exponential: bool = False) -> bool:
    """Thinning of the crash point process on one step.

    One uniform is consumed per call whatever ``h`` is, so the stream stays
    aligned across runs that differ only in their hazard.
    """
    if h < 0 or not dt > 0:
        raise DomainError("need h >= 0 and dt > 0")
    u = as_generator(seed).random()
    return bool(u < crash_probability(h, dt, exponential))


def draw_crashes(h, dt: float, rng: np.random.Generator, exponential: bool = False) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    return rng.random(h.shape) < crash_probability(h, dt, exponential)


def _volatility_increment(params: PriceParams, rng) -> float:
    if params.eta == 0:
        return 0.0
    if params.noise == "binary":
        return math.sqrt(params.dt) * (1.0 if rng.random() < 0.5 else -1.0)
    return math.sqrt(params.dt) * rng.standard_normal()


def step_price(state: MarketState, h: float, params: PriceParams, crash: bool, seed=None) -> MarketState:
    dw = _volatility_increment(params, as_generator(seed)) if params.eta else 0.0
    mult = 1.0 + params.kappa * h * params.dt + params.eta * dw - (params.kappa if crash else 0.0)
    if not mult > 0:
        raise PositivityError(
            f"price multiplier {mult:.6g} <= 0 at t={state.t + params.dt:.6g} (h={h:.6g}, dw={dw:.3g})",
            state=state, multiplier=mult)
    return MarketState(state.price * mult, state.t + params.dt, state.crash_count + bool(crash))


# ---------------------------------------------------------------------------
# hazard sources


class LatticeHazard:
    """Realizes lattice configurations at a given fraction and returns h."""

    def __init__(self, lattice: LatticeSpec, model: HazardModel, mode: str, rng):
        if mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
        self.lattice, self.model, self.mode = lattice, model, mode
        self.rng = as_generator(rng)
        self._inc = IncrementalLattice(lattice, self.rng) if mode == "incremental" else None

    def _target(self, p):
        return math.floor(p * self.lattice.N + 0.5)

    def hazard(self, p: float) -> float:
        if self._inc is None:
            hist = cluster_histogram(label_clusters(generate_reshuffled(self.lattice, p, self.rng)))
        else:
            self._inc.fill_to(self._target(p))
            hist = self._inc.histogram()
        if hist.occupied_count == 0:
            return 0.0
        return empirical_hazard(hist, self.model, p)

    def reset(self, p: float):
        """Fragment the network after a crash (incremental mode only)."""
        if self._inc is not None:
            self._inc.reset(self._target(p))


class HazardBank:
    """Empirical hazards precomputed on a grid of occupancy fractions.

    ``sample`` snaps each requested fraction to the nearest node and returns
    one of the ``per_node`` stored values at random. Used to drive large
    vectorized ensembles where relabelling a lattice per replica and step
    would be prohibitive.
    """

    def __init__(self, lattice: LatticeSpec, model: HazardModel, p_nodes, per_node: int, seed=0):
        self.p_nodes = np.asarray(sorted(p_nodes), dtype=float)
        src = LatticeHazard(lattice, model, "reshuffled", rngmod.stream(seed, 0, "lattice"))
        self.values = np.array([[src.hazard(p) for _ in range(per_node)] for p in self.p_nodes])

    def nearest(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        i = np.clip(np.searchsorted(self.p_nodes, p), 1, self.p_nodes.size - 1) if self.p_nodes.size > 1 \
            else np.zeros(p.shape, dtype=int)
        if self.p_nodes.size > 1:
            left_closer = (p - self.p_nodes[i - 1]) <= (self.p_nodes[i] - p)
            i = np.where(left_closer, i - 1, i)
        return i

    def sample(self, p, rng: np.random.Generator) -> np.ndarray:
        i = self.nearest(p)
        k = rng.integers(self.values.shape[1], size=np.shape(i))
        return self.values[i, k]


# ---------------------------------------------------------------------------
# simulations


def run_simulation(lattice: LatticeSpec, model: HazardModel, driver: DriverSpec, params: PriceParams,
                   steps: int, mode: str = "reshuffled", seed: int = 0, replica: int = 0):
    """Simulate one replica; return ``(MarketPath, [CrashEvent, ...])``."""
    if not math.isclose(driver.dt, params.dt, rel_tol=1e-12):
        raise DomainError(f"driver dt {driver.dt} differs from price dt {params.dt}")
    if steps < 0:
        raise DomainError("steps must be non-negative")
    streams = rngmod.replica_streams(seed, replica)
    source = LatticeHazard(lattice, model, mode, streams["lattice"])
    exponential = params.crash_prob == "exponential"

    dstate: DriverState = initial_state(driver)
    mstate = MarketState(params.initial_price)
    n = steps + 1
    t = np.empty(n)
    p = np.empty(n)
    h = np.empty(n)
    price = np.empty(n)
    crash = np.zeros(n, dtype=np.int8)
    t[0], p[0], h[0], price[0] = 0.0, dstate.p, source.hazard(dstate.p), mstate.price
    events = []

    for k in range(1, n):
        dstate = step_driver(dstate, driver, streams["driver"])
        hk = source.hazard(dstate.p)
        crashed = draw_crash(hk, params.dt, streams["crash"], exponential)
        mstate = step_price(mstate, hk, params, crashed, streams["volatility"])
        t[k], p[k], h[k], price[k] = dstate.t, dstate.p, hk, mstate.price
        if crashed:
            crash[k] = 1
            events.append(CrashEvent(dstate.t, hk, dstate.p))
            dstate = reset_after_crash(dstate, driver)
            source.reset(dstate.p)

    path = MarketPath(t, p, h, price, crash, meta={"seed": seed, "replica": replica, "mode": mode,
                                                   "clamps": dstate.clamps})
    return path, events


def ensemble_final_prices(model: HazardModel, driver: DriverSpec, params: PriceParams, steps: int,
                          replicas: int, seed: int = 0, hazard=None, lattice: LatticeSpec | None = None):
    """Final price of many replicas advanced in lock-step.

    ``hazard(p, rng) -> h`` supplies the hazard for an array of fractions,
    e.g. :meth:`HazardBank.sample`. Without it every replica realizes its
    own reshuffled lattice each step (exact but slow). Returns
    ``(final_prices, crash_counts)``.
    """
    if not math.isclose(driver.dt, params.dt, rel_tol=1e-12):
        raise DomainError(f"driver dt {driver.dt} differs from price dt {params.dt}")
    g = {name: rngmod.stream(seed, 0, name) for name in rngmod.STREAMS}
    if hazard is None:
        if lattice is None:
            raise DomainError("need either a hazard sampler or a lattice")
        src = LatticeHazard(lattice, model, "reshuffled", g["lattice"])

        def hazard(pp, _rng):
            return np.array([src.hazard(x) for x in pp])

    exponential = params.crash_prob == "exponential"
    p = np.full(replicas, driver.p0)
    price = np.full(replicas, float(params.initial_price))
    crashes = np.zeros(replicas, dtype=np.int64)
    sqdt = math.sqrt(params.dt)
    for _ in range(steps):
        p = step_driver_batch(p, driver, g["driver"])
        h = hazard(p, g["lattice"])
        crashed = draw_crashes(h, params.dt, g["crash"], exponential)
        mult = 1.0 + params.kappa * h * params.dt - params.kappa * crashed
        if params.eta:
            if params.noise == "binary":
                dw = sqdt * np.where(g["volatility"].random(replicas) < 0.5, 1.0, -1.0)
            else:
                dw = sqdt * g["volatility"].standard_normal(replicas)
            mult = mult + params.eta * dw
        if not (mult > 0).all():
            raise PositivityError("price multiplier <= 0 in ensemble", multiplier=float(mult.min()))
        price *= mult
        crashes += crashed
        p = np.where(crashed, driver.reset_value, p)
    return price, crashes
