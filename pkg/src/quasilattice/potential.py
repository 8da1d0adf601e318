"""Radial pair potentials, their positive/negative splitting and the
core/tail parameter certification, plus the absolute Mayer integral C(beta)
and the activity radius it controls."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn


class CertificationError(ValueError):
    """The potential admits no valid core/tail parameter set."""


FAMILIES = ("pure-repulsive", "power-core-with-tail", "lennard-jones",
            "zero", "hard-core")


def _surface_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / gamma_fn(d / 2.0)


def _ball_volume(d: int, r: float) -> float:
    return math.pi ** (d / 2.0) / gamma_fn(d / 2.0 + 1.0) * r ** d


@dataclass(frozen=True)
class Potential:
    """A radial pair interaction from one of the built-in families.

    ``zero`` and ``hard-core`` are test-only stubs: ``zero`` needs the
    explicit ``test_only`` flag and bypasses certification.
    """

    family: str
    dimension: int
    params: MappingProxyType
    test_only: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown potential family {self.family!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if self.family == "zero" and not self.test_only:
            raise ValueError("the zero potential is test-only; pass test_only=True")
        if self.family == "power-core-with-tail":
            s, d, e0 = self.params["s"], self.dimension, self.params["eps0"]
            if not s > d + e0:
                raise ValueError("power-core-with-tail requires s > d + eps0")

    # -- constructors -------------------------------------------------

    @classmethod
    def pure_repulsive(cls, c_r: float, s: float, d: int) -> "Potential":
        if c_r <= 0 or s <= 0:
            raise ValueError("c_r and s must be positive")
        return cls("pure-repulsive", d, MappingProxyType({"c_r": c_r, "s": s}))

    @classmethod
    def power_core_with_tail(cls, c_r: float, s: float, c_a: float,
                             eps0: float, d: int) -> "Potential":
        if min(c_r, s, c_a, eps0) <= 0:
            raise ValueError("all parameters must be positive")
        return cls("power-core-with-tail", d,
                   MappingProxyType({"c_r": c_r, "s": s, "c_a": c_a, "eps0": eps0}))

    @classmethod
    def lennard_jones(cls, epsilon: float, sigma: float, d: int = 3) -> "Potential":
        if epsilon <= 0 or sigma <= 0:
            raise ValueError("epsilon and sigma must be positive")
        return cls("lennard-jones", d,
                   MappingProxyType({"epsilon": epsilon, "sigma": sigma}))

    @classmethod
    def zero(cls, d: int, test_only: bool = False) -> "Potential":
        return cls("zero", d, MappingProxyType({}), test_only=test_only)

    @classmethod
    def hard_core(cls, sigma: float, d: int) -> "Potential":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls("hard-core", d, MappingProxyType({"sigma": sigma}),
                   test_only=True)

    # -- evaluation ---------------------------------------------------

    def phi(self, r):
        """phi(r) for r > 0; vectorized over numpy arrays."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("pair potential is defined for r > 0 only")
        p = self.params
        if self.family == "pure-repulsive":
            return p["c_r"] * r ** (-p["s"])
        if self.family == "power-core-with-tail":
            return p["c_r"] * r ** (-p["s"]) \
                - p["c_a"] * r ** (-(self.dimension + p["eps0"]))
        if self.family == "lennard-jones":
            x6 = (p["sigma"] / r) ** 6
            return 4.0 * p["epsilon"] * (x6 * x6 - x6)
        if self.family == "hard-core":
            return np.where(r < p["sigma"], np.inf, 0.0)
        return np.zeros_like(r)

    def split(self, r):
        """(phi_plus, phi_minus), both nonnegative, phi = plus - minus."""
        v = self.phi(r)
        return np.maximum(v, 0.0), np.maximum(-v, 0.0)

    def phi_minus(self, r):
        return self.split(r)[1]

    # -- structural helpers ------------------------------------------

    @property
    def has_attraction(self) -> bool:
        return self.family in ("power-core-with-tail", "lennard-jones")

    @property
    def repulsion_exponent(self) -> float:
        """The core exponent s of the family (12 for Lennard-Jones)."""
        if self.family in ("pure-repulsive", "power-core-with-tail"):
            return self.params["s"]
        if self.family == "lennard-jones":
            return 12.0
        raise ValueError(f"{self.family} has no power core")

    @property
    def zero_crossing(self) -> float:
        """Smallest r beyond which the potential is attractive (inf if never)."""
        p = self.params
        if self.family == "power-core-with-tail":
            return (p["c_r"] / p["c_a"]) ** (1.0 / (p["s"] - self.dimension - p["eps0"]))
        if self.family == "lennard-jones":
            return p["sigma"]
        return math.inf

    @property
    def attraction_peak(self) -> float:
        """The r maximizing phi_minus (inf for purely repulsive)."""
        p = self.params
        if self.family == "power-core-with-tail":
            return (p["c_r"] * p["s"]
                    / (p["c_a"] * (self.dimension + p["eps0"]))) \
                ** (1.0 / (p["s"] - self.dimension - p["eps0"]))
        if self.family == "lennard-jones":
            return 2.0 ** (1.0 / 6.0) * p["sigma"]
        return math.inf


@dataclass(frozen=True)
class AssumptionAParams:
    """Certified core/tail parameters: phi >= phi0/r^s on r <= r0 and
    phi >= -phi1/r^(d+eps0) on r >= R."""

    r0: float
    R: float
    phi0: float
    phi1: float
    s: float
    eps0: float

    def __post_init__(self):
        if not (self.r0 > 0 and self.R > self.r0 and self.phi0 > 0
                and self.phi1 > 0 and self.eps0 > 0):
            raise ValueError("invalid certification parameters")


# Grid density for the sampled verification sweep of a certification.
_N_GRID = 10_000
# Sampled extrema get these safety factors before being trusted.
_SAFETY_UP = 1.05
_SAFETY_DOWN = 0.95


def _verify_params(p: Potential, params: AssumptionAParams) -> None:
    d = p.dimension
    core_r = np.geomspace(params.r0 * 1e-6, params.r0, _N_GRID)
    core_ok = p.phi(core_r) >= params.phi0 * core_r ** (-params.s) - 1e-12
    if not np.all(core_ok):
        raise CertificationError("core lower bound fails on the sampling grid")
    tail_r = np.geomspace(params.R, params.R * 1e4, _N_GRID)
    tail_ok = p.phi(tail_r) >= -params.phi1 * tail_r ** (-(d + params.eps0)) - 1e-12
    if not np.all(tail_ok):
        raise CertificationError("tail lower bound fails on the sampling grid")


def certify_assumption_a(p: Potential) -> AssumptionAParams:
    """Produce and grid-verify core/tail parameters for a built-in family."""
    d = p.dimension
    if p.family == "zero":
        raise CertificationError("the zero potential has no repulsive core")

    if p.family == "pure-repulsive":
        s = p.params["s"]
        params = AssumptionAParams(r0=1.0, R=2.0, phi0=p.params["c_r"],
                                   phi1=1.0, s=s, eps0=1.0)
    elif p.family == "hard-core":
        sigma = p.params["sigma"]
        params = AssumptionAParams(r0=sigma, R=2.0 * sigma, phi0=sigma ** (d + 1),
                                   phi1=1.0, s=float(d + 1), eps0=1.0)
    elif p.family == "power-core-with-tail":
        s, c_r, c_a, eps0 = (p.params["s"], p.params["c_r"],
                             p.params["c_a"], p.params["eps0"])
        r0 = min(1.0, 0.9 * p.zero_crossing)
        # phi(r) r^s = c_r - c_a r^(s-d-eps0) is decreasing; exact minimum at r0.
        phi0 = _SAFETY_DOWN * (c_r - c_a * r0 ** (s - d - eps0))
        if phi0 <= 0:
            raise CertificationError("no positive core constant below r0")
        R = max(1.1 * p.zero_crossing, 2.0 * r0)
        phi1 = _SAFETY_UP * c_a  # phi_minus <= c_a r^-(d+eps0) everywhere
        params = AssumptionAParams(r0=r0, R=R, phi0=phi0, phi1=phi1, s=s, eps0=eps0)
    elif p.family == "lennard-jones":
        sigma = p.params["sigma"]
        r0, R, s, eps0 = 0.9 * sigma, 1.5 * sigma, 12.0, 3.0
        grid = np.geomspace(r0 * 1e-4, r0, _N_GRID)
        phi0 = _SAFETY_DOWN * float(np.min(p.phi(grid) * grid ** s))
        if phi0 <= 0:
            raise CertificationError("no positive core constant below r0")
        tail = np.geomspace(R, 100.0 * sigma, _N_GRID)
        phi1 = _SAFETY_UP * float(np.max(p.phi_minus(tail) * tail ** (d + eps0)))
        params = AssumptionAParams(r0=r0, R=R, phi0=phi0, phi1=phi1, s=s, eps0=eps0)
    else:
        raise CertificationError(f"family {p.family!r} is not certifiable")

    if p.family != "hard-core":
        _verify_params(p, params)
    return params


from .estimate import Estimate  # noqa: E402  (leaf import, avoids cycles)


def mayer_c_beta(p: Potential, beta: float, tol: float = 1e-10) -> Estimate:
    """C(beta), the integral of |e^{-beta phi(|x|)} - 1| over R^d.

    Radial reduction with adaptive quadrature; the far tail is replaced by
    the analytic bound |e^x - 1| <= |x| e^{|x|} and booked as trunc_bound.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    d = p.dimension
    if p.family == "zero":
        return Estimate(0.0, 0.0, 0.0, "quadrature")
    if p.family == "hard-core":
        return Estimate(_ball_volume(d, p.params["sigma"]), 0.0, 0.0, "quadrature")

    cert = certify_assumption_a(p)
    surf = _surface_area(d)

    def integrand(r):
        v = p.phi(r)
        return np.abs(np.expm1(-beta * v)) * r ** (d - 1)

    # Cut the tail where the analytic remainder bound drops below tol/2.
    def tail_bound(rc):
        u = beta * cert.phi1 * rc ** (-(d + cert.eps0))
        return surf * beta * cert.phi1 * math.exp(u) * rc ** (-cert.eps0) / cert.eps0

    r_cut = max(cert.R, 1.0)
    while tail_bound(r_cut) > tol / 2 and r_cut < 1e12:
        r_cut *= 2.0

    total, qerr = 0.0, 0.0
    for lo, hi in ((0.0, cert.r0), (cert.r0, cert.R)):
        if hi <= lo:
            continue
        val, err = integrate.quad(integrand, lo, hi, limit=400,
                                  epsabs=tol / 10, epsrel=1e-12)
        total += val
        qerr += err
    if r_cut > cert.R:
        # far piece under t = 1/r, which compresses the slow power tail
        val, err = integrate.quad(lambda t: integrand(1.0 / t) / t ** 2,
                                  1.0 / r_cut, 1.0 / cert.R, limit=400,
                                  epsabs=tol / 10, epsrel=1e-12)
        total += val
        qerr += err
    return Estimate(surf * total, 0.0, tail_bound(r_cut) + surf * qerr,
                    "quadrature")


def activity_radius(p: Potential, beta: float, B: float,
                    c_beta: float | None = None) -> float:
    """z_max = e^{-2 beta B - 1} / C(beta); the small-activity series for the
    correlation functions converges strictly below it."""
    if B < 0:
        raise ValueError("B must be nonnegative")
    if c_beta is None:
        c_beta = mayer_c_beta(p, beta).value
    if c_beta == 0.0:
        return math.inf
    return math.exp(-2.0 * beta * B - 1.0) / c_beta
