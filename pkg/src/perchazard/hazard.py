"""Crash hazard rate from cluster statistics and from percolation scaling.

The empirical branch sums the super-linear flip rate ``R(s) = r0 * s**a``
over clusters of size at least ``s_m``, weighted by the cluster numbers
``n(s)``. The theoretical branch replaces that sum by the integral of
``s**(a - 1 - mu)`` between ``s_m`` and the cutoff ``s*``, with
``s* = prefactor * |p - p_c| ** (-1/sigma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, NormalizationError, SingularityError
from .percolation import ClusterSizeHistogram

__all__ = [
    "ActivityLaw",
    "MinSizeRule",
    "PercolationConstants",
    "HazardModel",
    "activity_rate",
    "empirical_hazard",
    "characteristic_size",
    "theoretical_hazard",
    "heterogeneous_hazard_integral",
    "effective_exponent",
    "singularity_exponent",
]

P_C_SQUARE_SITE = 0.5927462
_UPPER_CRITICAL_DIM = 6


@dataclass(frozen=True)
class ActivityLaw:
    """Flip rate of a cluster as a function of its size.

    A single atom is the homogeneous law ``r0 * s**a``; several atoms
    ``(a_k, w_k)`` represent a discretized density Q(a) and give
    ``r0 * sum_k w_k * s**a_k``.
    """

    exponents: tuple
    weights: tuple = (1.0,)
    r0: float = 1.0

    def __post_init__(self):
        exps = tuple(float(a) for a in np.atleast_1d(self.exponents))
        ws = tuple(float(w) for w in np.atleast_1d(self.weights))
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "weights", ws)
        if len(exps) == 0 or len(exps) != len(ws):
            raise DomainError("exponents and weights must be non-empty and of equal length")
        if any(a <= 0 for a in exps):
            raise DomainError(f"activity exponents must be positive, got {min(exps)}")
        if any(w <= 0 for w in ws):
            raise DomainError("weights must be positive")
        if abs(math.fsum(ws) - 1.0) > 1e-9:
            raise DomainError(f"weights must sum to 1, got {math.fsum(ws)}")
        if not self.r0 > 0:
            raise DomainError(f"r0 must be positive, got {self.r0}")

    @classmethod
    def homogeneous(cls, a: float, r0: float = 1.0) -> ActivityLaw:
        return cls((a,), (1.0,), r0)

    @classmethod
    def heterogeneous(cls, atoms, r0: float = 1.0, normalize: bool = False) -> ActivityLaw:
        atoms = list(atoms)
        exps = [a for a, _ in atoms]
        ws = [w for _, w in atoms]
        if normalize:
            total = math.fsum(ws)
            ws = [w / total for w in ws]
        return cls(tuple(exps), tuple(ws), r0)

    @classmethod
    def uniform(cls, lo: float, hi: float, n_atoms: int, r0: float = 1.0) -> ActivityLaw:
        """Uniform density on [lo, hi], discretized by the midpoint rule."""
        if not hi > lo or n_atoms < 1:
            raise DomainError("need hi > lo and at least one atom")
        width = (hi - lo) / n_atoms
        exps = lo + width * (np.arange(n_atoms) + 0.5)
        return cls(tuple(exps), tuple(np.full(n_atoms, 1.0 / n_atoms)), r0)

    @property
    def is_homogeneous(self) -> bool:
        return len(self.exponents) == 1

    @property
    def a(self) -> float:
        if not self.is_homogeneous:
            raise DomainError("heterogeneous law has no single exponent")
        return self.exponents[0]

    @property
    def a_max(self) -> float:
        return max(self.exponents)


@dataclass(frozen=True)
class MinSizeRule:
    """Smallest cluster size able to trigger a crash.

    ``fixed``: ``s_m = value``; ``occupied``: ``value * p * L**2``;
    ``fractal``: ``value * p * L**d_f``. Non-fixed rules are rounded to the
    nearest integer and floored at 1.
    """

    kind: str = "fixed"
    value: float = 1

    KINDS = ("fixed", "occupied", "fractal")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown min-size rule {self.kind!r}")
        if self.kind == "fixed" and (int(self.value) != self.value or self.value < 1):
            raise DomainError(f"fixed s_m must be an integer >= 1, got {self.value}")
        if self.kind != "fixed" and not self.value > 0:
            raise DomainError(f"min-size fraction must be positive, got {self.value}")

    @classmethod
    def fixed(cls, s_m: int) -> MinSizeRule:
        return cls("fixed", int(s_m))

    @classmethod
    def occupied_fraction(cls, c: float) -> MinSizeRule:
        return cls("occupied", float(c))

    @classmethod
    def fractal_fraction(cls, c: float) -> MinSizeRule:
        return cls("fractal", float(c))

    def resolve(self, p: float | None = None, L: int | None = None, d_f: float = 91 / 48) -> int:
        if self.kind == "fixed":
            return int(self.value)
        if p is None or L is None:
            raise DomainError(f"rule {self.kind!r} needs both p and L")
        scale = L * L if self.kind == "occupied" else L**d_f
        return max(1, math.floor(self.value * p * scale + 0.5))


@dataclass(frozen=True)
class PercolationConstants:
    d: int
    beta: float
    nu: float
    sigma: float
    mu: float
    d_f: float
    p_c: float

    @classmethod
    def two_d(cls) -> PercolationConstants:
        """Exact 2D exponents with the square-lattice site threshold."""
        return cls(d=2, beta=5 / 36, nu=4 / 3, sigma=36 / 91, mu=96 / 91, d_f=91 / 48,
                   p_c=P_C_SQUARE_SITE)

    @classmethod
    def for_dimension(cls, d: int, p_c: float | None = None) -> PercolationConstants:
        """Exponents for d = 2, 3 or d >= 6 (mean field).

        ``mu`` and ``d_f`` follow from hyperscaling, ``sigma`` from
        ``mu / sigma = nu * d``; above six dimensions d is replaced by 6.
        """
        if d == 2:
            c = cls.two_d()
            return c if p_c is None else cls(**{**c.__dict__, "p_c": p_c})
        if d == 3:
            beta, nu, default_pc = 0.418, 0.876, 0.3116081  # simple cubic, site
        elif d >= _UPPER_CRITICAL_DIM:
            beta, nu = 1.0, 0.5
            default_pc = 0.1090171 if d == 6 else None  # hypercubic, site
        else:
            raise DomainError(f"no exponent set for d={d}")
        de = min(d, _UPPER_CRITICAL_DIM)
        d_f = de - beta / nu
        mu = de / d_f
        sigma = mu / (nu * de)
        pc = default_pc if p_c is None else p_c
        if pc is None:
            raise DomainError(f"no default threshold for d={d}; pass p_c")
        return cls(d=d, beta=beta, nu=nu, sigma=sigma, mu=mu, d_f=d_f, p_c=pc)

    @property
    def hyperscaling_dim(self) -> int:
        return min(self.d, _UPPER_CRITICAL_DIM)

    def mu_from_exponents(self) -> float:
        de = self.hyperscaling_dim
        return de / (de - self.beta / self.nu)

    def consistency_errors(self) -> dict[str, float]:
        """Absolute residuals of the scaling relations (all ~0 when consistent)."""
        de = self.hyperscaling_dim
        return {
            "mu": abs(self.mu - self.mu_from_exponents()),
            "mu/sigma": abs(self.mu / self.sigma - self.nu * de),
            "d_f": abs(self.d_f - (de - self.beta / self.nu)),
        }


@dataclass(frozen=True)
class HazardModel:
    law: ActivityLaw
    min_size: MinSizeRule = field(default_factory=MinSizeRule)
    constants: PercolationConstants = field(default_factory=PercolationConstants.two_d)
    s_star_prefactor: float = 1.0
    normalization: str = "occupied"  # divide by occupied sites, or "site" for all sites

    def __post_init__(self):
        if not self.s_star_prefactor > 0:
            raise DomainError("s* prefactor must be positive")
        if self.normalization not in ("occupied", "site"):
            raise DomainError(f"unknown normalization {self.normalization!r}")

    def s_m(self, p: float | None = None, L: int | None = None) -> int:
        return self.min_size.resolve(p, L, self.constants.d_f)


# ---------------------------------------------------------------------------
# empirical branch


def activity_rate(s, law: ActivityLaw):
    """Flip rate of a cluster of size ``s`` (scalar or array)."""
    s = np.asarray(s, dtype=float)
    if law.is_homogeneous:
        out = law.r0 * np.power(s, law.exponents[0])
    else:
        a = np.asarray(law.exponents)
        w = np.asarray(law.weights)
        out = law.r0 * (w * np.power(s[..., None], a)).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def empirical_hazard(hist: ClusterSizeHistogram, model: HazardModel, p: float | None = None) -> float:
    """Sum of flip rates over clusters of size >= s_m, weighted by n(s).

    ``p`` only matters for size-dependent ``s_m`` rules; it defaults to the
    occupied fraction of the histogram.
    """
    if hist.occupied_count <= 0:
        raise NormalizationError("hazard is undefined on an empty lattice")
    L = None
    if hist.site_count is not None:
        L = math.isqrt(hist.site_count)
        if p is None:
            p = hist.occupied_count / hist.site_count
    s_m = model.s_m(p, L)
    keep = hist.sizes >= s_m
    if not keep.any():
        return 0.0
    rates = activity_rate(hist.sizes[keep], model.law)
    if model.normalization == "site":
        if hist.site_count is None:
            raise NormalizationError("per-site normalization needs the lattice size")
        return float(np.sum(rates * hist.counts[keep])) / hist.site_count
    return float(np.sum(rates * hist.counts[keep])) / hist.occupied_count


# ---------------------------------------------------------------------------
# theoretical branch


def characteristic_size(p: float, constants: PercolationConstants, prefactor: float = 1.0) -> float:
    dist = abs(p - constants.p_c)
    if dist == 0:
        raise SingularityError("s* diverges at p = p_c")
    return prefactor * dist ** (-1.0 / constants.sigma)


def _power_integral(s_lo: float, s_hi: float, e: float) -> float:
    """Integral of s**(e - 1) over [s_lo, s_hi]; the e -> 0 limit is a log."""
    lo, hi = math.log(s_lo), math.log(s_hi)
    if e == 0:
        return hi - lo
    return (math.expm1(e * hi) - math.expm1(e * lo)) / e


def theoretical_hazard(p: float, model: HazardModel, L: int | None = None) -> float:
    """Closed-form hazard for a homogeneous law, approached from below p_c.

    For ``a < mu`` the result is the constant ``r0 * s_m**(a-mu) / (mu-a)``;
    for ``a >= mu`` both ends of the integral are kept. The value is floored
    at 0 when s* falls below s_m (empty range).
    """
    law, const = model.law, model.constants
    if not law.is_homogeneous:
        raise DomainError("theoretical_hazard needs a homogeneous law")
    if p >= const.p_c:
        raise DomainError(f"theoretical hazard is defined for p < p_c={const.p_c}, got {p}")
    s_m = model.s_m(p, L)
    e = law.a - const.mu
    if e < 0:
        return law.r0 * s_m**e / (-e)
    s_star = characteristic_size(p, const, model.s_star_prefactor)
    if s_star <= s_m:
        return 0.0
    return law.r0 * _power_integral(s_m, s_star, e)


def heterogeneous_hazard_integral(s_star: float, law: ActivityLaw, constants: PercolationConstants,
                                  s_m: float = 1) -> float:
    """Hazard for a discretized Q(a), integrated over sizes in [s_m, s*]."""
    if not s_star > s_m >= 1:
        raise DomainError(f"need s* > s_m >= 1, got s*={s_star}, s_m={s_m}")
    terms = [w * (law.r0 * _power_integral(s_m, s_star, a - constants.mu))
             for a, w in zip(law.exponents, law.weights)]
    return math.fsum(terms)


def effective_exponent(s_star: float, law: ActivityLaw, constants: PercolationConstants,
                       s_m: float = 1, step: float = 1e-4) -> float:
    """Centered finite-difference estimate of d ln h / d ln s*."""
    if not s_star > math.e:
        raise DomainError("effective exponent needs s* > e")
    up = heterogeneous_hazard_integral(s_star * math.exp(step), law, constants, s_m)
    down = heterogeneous_hazard_integral(s_star * math.exp(-step), law, constants, s_m)
    return (math.log(up) - math.log(down)) / (2 * step)


def singularity_exponent(a: float, constants: PercolationConstants | None = None,
                         exact: bool = False):
    """Predicted exponent alpha of h ~ (p_c - p)**(-alpha) for homogeneous a > mu.

    With ``exact=True`` and the 2D constants the value is returned as a
    :class:`~fractions.Fraction` (e.g. 43/18 for a = 2).
    """
    constants = constants or PercolationConstants.two_d()
    if a <= constants.mu:
        return Fraction(0) if exact else 0.0
    if exact:
        if constants.d != 2:
            raise DomainError("exact arithmetic is only available in 2D")
        a_q = Fraction(a).limit_denominator(10**6)
        return (a_q - Fraction(96, 91)) / Fraction(36, 91)
    return (a - constants.mu) / constants.sigma
