"""Ensemble statistics and exponent estimation.

* :func:`hazard_curve` averages the empirical hazard over independent
  lattice realizations on a grid of occupancy fractions;
* :func:`fit_singularity` regresses ``ln h`` on ``ln(p_c - p)``;
* :func:`saddle_point_convergence` follows the effective exponent of a
  heterogeneous activity law as the cutoff size grows;
* :func:`bubble_segments` and :func:`excursions` dissect simulated paths.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from . import rng as rngmod
from .errors import DomainError, InsufficientDataError
from .hazard import ActivityLaw, HazardModel, PercolationConstants, effective_exponent
from .market import LatticeHazard, MarketPath
from .percolation import LatticeSpec

__all__ = [
    "HazardCurve",
    "PowerLawFit",
    "SaddlePointReport",
    "BubbleSegment",
    "Excursion",
    "hazard_curve",
    "fit_singularity",
    "saddle_point_convergence",
    "bubble_segments",
    "excursions",
    "path_summary",
    "model_summary",
]


def model_summary(model: HazardModel) -> dict:
    law = model.law
    return {
        "exponents": list(law.exponents),
        "weights": list(law.weights),
        "r0": law.r0,
        "min_size": {"kind": model.min_size.kind, "value": model.min_size.value},
        "s_star_prefactor": model.s_star_prefactor,
        "d": model.constants.d,
        "p_c": model.constants.p_c,
    }


@dataclass
class HazardCurve:
    p: np.ndarray
    h_mean: np.ndarray
    h_stderr: np.ndarray  # NaN where only one replica contributed
    replicas: np.ndarray
    L: int
    mode: str = "reshuffled"
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.h_mean = np.asarray(self.h_mean, dtype=float)
        self.h_stderr = np.asarray(self.h_stderr, dtype=float)
        self.replicas = np.asarray(self.replicas, dtype=np.int64)
        if self.p.size > 1 and not np.all(np.diff(self.p) > 0):
            raise DomainError("p values of a hazard curve must be strictly increasing")
        if (self.replicas < 1).any():
            raise DomainError("every point needs at least one replica")

    def __len__(self):
        return self.p.size


def _replica_row(args):
    spec, model, p_grid, mode, seed, replica = args
    src = LatticeHazard(spec, model, mode, rngmod.stream(seed, replica, "lattice"))
    return [src.hazard(p) for p in p_grid]


def _column_stats(col):
    n = len(col)
    mean = math.fsum(col) / n
    if n == 1:
        return mean, math.nan
    var = math.fsum((x - mean) ** 2 for x in col) / (n - 1)
    return mean, math.sqrt(var / n)


def hazard_samples(spec: LatticeSpec, model: HazardModel, p_grid, replicas: int,
                   mode: str = "reshuffled", seed: int = 0, parallelism: int = 1) -> np.ndarray:
    """Matrix of hazards, one row per replica and one column per fraction."""
    p_grid = [float(p) for p in p_grid]
    tasks = [(spec, model, p_grid, mode, seed, r) for r in range(replicas)]
    if parallelism > 1 and replicas > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as ex:
            rows = list(ex.map(_replica_row, tasks, chunksize=max(1, replicas // (4 * parallelism))))
    else:
        rows = [_replica_row(t) for t in tasks]
    return np.array(rows, dtype=float).reshape(replicas, len(p_grid))


def hazard_curve(spec: LatticeSpec, model: HazardModel, p_grid, replicas: int,
                 mode: str = "reshuffled", seed: int = 0, parallelism: int = 1) -> HazardCurve:
    """Mean and standard error of the empirical hazard at each fraction.

    Replica ``r`` always uses the lattice stream ``(seed, r)``; in
    incremental mode it fills one lattice through the whole (increasing)
    grid. Aggregation uses exactly rounded sums, so the result does not
    depend on replica order or on ``parallelism``.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    if p_grid.size == 0 or (p_grid <= 0).any() or (p_grid >= 1).any():
        raise DomainError("p grid values must lie in (0, 1)")
    if replicas < 1:
        raise DomainError("need at least one replica")
    H = hazard_samples(spec, model, p_grid, replicas, mode, seed, parallelism)
    mean, se = zip(*(_column_stats(H[:, j].tolist()) for j in range(p_grid.size)))
    return HazardCurve(p_grid, np.array(mean), np.array(se), np.full(p_grid.size, replicas),
                       spec.L, mode, model_summary(model))


@dataclass
class PowerLawFit:
    exponent: float
    amplitude: float
    window: tuple
    r_squared: float
    stderr: float
    ci95: tuple
    n_points: int
    residual_rms: float
    weighted: bool


def fit_singularity(curve: HazardCurve, constants: PercolationConstants | None = None,
                    window: tuple | None = None, weighted: bool | None = None) -> PowerLawFit:
    """Fit ``h = A (p_c - p)**(-alpha)`` by least squares in log-log space.

    Default window is (0.75 p_c, 0.97 p_c). Points are weighted by the
    inverse variance of ``ln h`` when every point has at least 10 replicas.
    """
    constants = constants or PercolationConstants.two_d()
    pc = constants.p_c
    lo, hi = window if window is not None else (0.75 * pc, 0.97 * pc)
    if not hi < pc:
        raise DomainError(f"fit window upper end {hi} must lie below p_c={pc}")
    if not lo < hi:
        raise DomainError(f"empty fit window ({lo}, {hi})")
    sel = (curve.p >= lo) & (curve.p <= hi)
    n = int(sel.sum())
    if n < 5:
        raise InsufficientDataError(f"{n} curve points inside the window, need at least 5")
    h = curve.h_mean[sel]
    if (h <= 0).any():
        raise DomainError("hazard must be positive inside the fit window")
    x = np.log(pc - curve.p[sel])
    y = np.log(h)
    se = curve.h_stderr[sel]
    if weighted is None:
        weighted = bool((curve.replicas[sel] >= 10).all() and np.isfinite(se).all() and (se > 0).all())
    w = (h / se) ** 2 if weighted else np.ones(n)

    X = np.column_stack([np.ones(n), x])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    intercept, slope = coef
    resid = y - X @ coef
    ss_res = float(np.sum(w * resid**2))
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    cov = np.linalg.inv((X * w[:, None]).T @ X) * (ss_res / (n - 2))
    slope_se = float(math.sqrt(max(cov[1, 1], 0.0)))
    tq = stats.t.ppf(0.975, n - 2)
    exponent = -float(slope)
    return PowerLawFit(
        exponent=exponent,
        amplitude=float(math.exp(intercept)),
        window=(float(lo), float(hi)),
        r_squared=float(r2),
        stderr=slope_se,
        ci95=(exponent - tq * slope_se, exponent + tq * slope_se),
        n_points=n,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        weighted=weighted,
    )


@dataclass
class SaddlePointReport:
    s_star: np.ndarray
    exponent: np.ndarray  # d ln h / d ln s*
    limit: float  # largest atom minus mu
    monotone_approach: bool  # |limit - exponent| never grows along s_star

    @property
    def gap(self) -> np.ndarray:
        return self.limit - self.exponent

    @property
    def scaled_gap(self) -> np.ndarray:
        """Gap multiplied by ln s*; stays O(1) under logarithmic convergence."""
        return self.gap * np.log(self.s_star)

    def rows(self):
        return list(zip(self.s_star.tolist(), self.exponent.tolist()))


def saddle_point_convergence(law: ActivityLaw, constants: PercolationConstants, s_star_list,
                             s_m: float = 1) -> SaddlePointReport:
    s_star = np.asarray(s_star_list, dtype=float)
    if s_star.size > 1 and not np.all(np.diff(s_star) > 0):
        raise DomainError("s* values must be increasing")
    if law.a_max <= constants.mu:
        raise DomainError("activity law needs support above mu")
    xi = np.array([effective_exponent(s, law, constants, s_m) for s in s_star])
    limit = law.a_max - constants.mu
    gaps = np.abs(limit - xi)
    return SaddlePointReport(s_star, xi, limit, bool(np.all(np.diff(gaps) <= 1e-12)))


# ---------------------------------------------------------------------------
# path dissection


@dataclass
class BubbleSegment:
    start: int  # first row index
    stop: int  # one past the last row
    mean_convexity: float  # mean second difference of ln price; NaN if undersized
    m: float | None = None  # exponent of A - B (t_c - t)**m when that form wins
    undersized: bool = False

    @property
    def length(self) -> int:
        return self.stop - self.start


def _fit_finite_time_forms(t, y):
    """Return m if A - B (tc - t)**m (0 < m < 1) beats A + B (tc - t)**(-k)."""
    if t.size < 6:
        return None
    t0, t1 = t[0], t[-1]
    span = t1 - t0
    tt = (t - t0) / span
    yy = y - y[0]

    def capped(tc, A, B, m):
        return A - B * (tc - tt) ** m

    def pure(tc, A, B, k):
        return A + B * (tc - tt) ** (-k)

    def sse(f, x0, bounds):
        try:
            popt, _ = optimize.curve_fit(lambda x, *q: f(*q), tt, yy, p0=x0, bounds=bounds, maxfev=4000)
        except (RuntimeError, ValueError, optimize.OptimizeWarning):
            return math.inf, None
        return float(np.sum((f(*popt) - yy) ** 2)), popt

    eps = 1e-6
    amp = max(abs(yy[-1]), 1e-12)
    s_cap, q_cap = sse(capped, [1.05, amp, amp, 0.5], ([1 + eps, -np.inf, 0, 1e-3], [10, np.inf, np.inf, 1 - 1e-3]))
    s_pure, _ = sse(pure, [1.05, 0.0, amp * 0.01, 0.5], ([1 + eps, -np.inf, 0, 1e-3], [10, np.inf, np.inf, 10]))
    if q_cap is not None and s_cap < s_pure:
        return float(q_cap[3])
    return None


def bubble_segments(path: MarketPath, p_threshold_fraction: float, p_c: float | None = None,
                    fit_m: bool = True) -> list[BubbleSegment]:
    """Maximal crash-free windows where p exceeds ``p_threshold_fraction * p_c``.

    Windows with fewer than 3 rows are kept but marked undersized.
    """
    if len(path) == 0:
        raise DomainError("empty path")
    p_c = PercolationConstants.two_d().p_c if p_c is None else p_c
    inside = (path.p > p_threshold_fraction * p_c) & (path.crash == 0)
    logp = path.log_price
    out = []
    for start, stop in _runs(inside):
        if stop - start < 3:
            out.append(BubbleSegment(start, stop, math.nan, None, True))
            continue
        conv = float(np.mean(np.diff(logp[start:stop], 2)))
        m = _fit_finite_time_forms(path.t[start:stop], logp[start:stop]) if fit_m else None
        out.append(BubbleSegment(start, stop, conv, m))
    return out


def _runs(mask):
    """(start, stop) pairs of maximal runs of True."""
    mask = np.asarray(mask, dtype=bool)
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(edges == 1).tolist(), np.flatnonzero(edges == -1).tolist()))


@dataclass
class Excursion:
    start: int
    stop: int
    crashed: bool  # a crash happened while p was above the threshold
    censored: bool  # still above the threshold when the path ended

    @property
    def length(self) -> int:
        return self.stop - self.start


def excursions(path: MarketPath, threshold_fraction: float = 0.95, p_c: float | None = None,
               min_length: int = 1) -> list[Excursion]:
    """Maximal runs with p above ``threshold_fraction * p_c``.

    A crash row keeps its pre-reset p, so a crash terminates the run it
    belongs to. Runs that end by p falling back below the threshold with no
    crash are bubbles that deflated by mean reversion.
    """
    p_c = PercolationConstants.two_d().p_c if p_c is None else p_c
    above = path.p > threshold_fraction * p_c
    out = []
    for start, stop in _runs(above):
        cuts = [c + 1 for c in (np.flatnonzero(path.crash[start:stop]) + start).tolist() if c + 1 < stop]
        edges = [start] + cuts + [stop]
        for a, b in zip(edges[:-1], edges[1:]):
            crashed = bool(path.crash[b - 1])
            ex = Excursion(a, b, crashed, (not crashed) and b == len(path))
            if ex.length >= min_length:
                out.append(ex)
    return out


def path_summary(path: MarketPath, threshold_fraction: float = 0.95, p_c: float | None = None) -> dict:
    """Crash frequency, mean bubble amplitude and crash share of excursions."""
    n_crash = int(path.crash.sum())
    duration = float(path.t[-1] - path.t[0]) if len(path) > 1 else 0.0
    logp = path.log_price
    amps = []
    prev = 0
    for i in np.flatnonzero(path.crash):
        if i - 1 >= prev:
            amps.append(float(logp[i - 1] - logp[prev:i].min()))
        prev = i
    exc = [e for e in excursions(path, threshold_fraction, p_c) if not e.censored]
    return {
        "steps": len(path) - 1,
        "crashes": n_crash,
        "crash_rate": n_crash / duration if duration > 0 else 0.0,
        "crashes_per_step": n_crash / max(len(path) - 1, 1),
        "mean_bubble_amplitude": float(np.mean(amps)) if amps else math.nan,
        "excursions": len(exc),
        "excursion_crash_fraction": (sum(e.crashed for e in exc) / len(exc)) if exc else math.nan,
        "clamps": int(path.meta.get("clamps", 0)),
    }
