"""Configuration energies, the hard-core-corrected cube potential, and the
superstability constant suite (b, v0, A, B and their partition-free bound)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import gamma as gamma_fn

from .lattice import CubeGrid, as_points, occupancy
from .potential import Potential, certify_assumption_a, _surface_area

INF = math.inf


class CoarseEdgeError(ValueError):
    """b(a) <= 2*v0(a): the cube edge is too coarse for positive A(a)."""


# -- raw energy kernels ----------------------------------------------

def _phi_tolerant(p: Potential, r: np.ndarray) -> np.ndarray:
    """phi on distances that may contain exact zeros (mapped to +inf)."""
    r = np.asarray(r, dtype=float)
    safe = np.where(r > 0, r, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        v = p.phi(safe)
    return np.where(r > 0, v, INF)


def total_energy(p: Potential, gamma) -> float:
    """U(gamma): sum of phi over all unordered pairs."""
    pts = as_points(gamma)
    n = len(pts)
    if n < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    iu = np.triu_indices(n, k=1)
    rr = r[iu]
    if np.any(rr == 0):
        raise ValueError("coincident points: pair potential undefined at 0")
    return float(np.sum(_phi_tolerant(p, rr)))


def interaction_energy(p: Potential, eta, gamma) -> float:
    """W(eta; gamma): sum of phi over cross pairs of two disjoint configurations."""
    e, g = as_points(eta), as_points(gamma)
    if len(e) == 0 or len(g) == 0:
        return 0.0
    diff = e[:, None, :] - g[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(r == 0):
        raise ValueError("configurations overlap: pair potential undefined at 0")
    return float(np.sum(_phi_tolerant(p, r)))


def hardcore_energy(p: Potential, grid: CubeGrid, gamma) -> float:
    """U under the cube-corrected potential: +inf as soon as any cube of the
    partition holds two points, otherwise the plain energy."""
    occ = occupancy(grid, gamma)
    if any(n >= 2 for n in occ.values()):
        return INF
    return total_energy(p, gamma)


def batch_total_energy(p: Potential, pts: np.ndarray) -> np.ndarray:
    """U for a batch of configurations, shape (m, n, d) -> (m,)."""
    m, n = pts.shape[0], pts.shape[1]
    if n < 2:
        return np.zeros(m)
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    iu = np.triu_indices(n, k=1)
    return np.sum(_phi_tolerant(p, r[:, iu[0], iu[1]]), axis=-1)


def batch_interaction_energy(p: Potential, eta: np.ndarray,
                             pts: np.ndarray) -> np.ndarray:
    """W(eta; gamma) for a batch of gammas, shapes (k, d), (m, n, d) -> (m,)."""
    if len(eta) == 0 or pts.shape[1] == 0:
        return np.zeros(pts.shape[0])
    diff = eta[None, :, None, :] - pts[:, None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    return np.sum(_phi_tolerant(p, r), axis=(1, 2))


def boltzmann(u, beta: float):
    """e^{-beta u} with exact zero at the infinite-energy marker."""
    u = np.asarray(u, dtype=float)
    with np.errstate(over="ignore"):
        out = np.exp(-beta * u)
    return np.where(np.isinf(u), 0.0, out)


# -- stability constants ---------------------------------------------

@dataclass(frozen=True)
class StabilityConstants:
    b: float            # inf of phi_plus over same-cube pairs
    v0: float           # lattice sum of sup phi_minus over cube pairs
    A: float            # (b - 2 v0) / 4
    B_local: float      # v0 / 2
    C_d: float          # core constant of the s = d logarithmic branch
    a_m: float          # edge solving b = 2 v0 (r0 sentinel if none)
    B_global: float     # partition-independent stability constant
    a: float            # the edge all a-dependent entries refer to
    d: int              # space dimension


def _b_of_a(p: Potential, a: float) -> float:
    """inf of phi_plus over pairs inside one cube of edge a."""
    d = p.dimension
    diag = a * math.sqrt(d)
    if diag <= p.zero_crossing:
        # phi_plus is decreasing up to the zero crossing: inf at max separation
        return float(p.split(diag)[0])
    r = np.linspace(diag / 4096, diag, 4096)
    return 0.95 * float(np.min(p.split(r)[0]))


def _v0_of_a(p: Potential, a: float, cert, tol: float) -> float:
    """Lattice sum of sup-pair phi_minus: exact (sup at the clamped peak of
    the unimodal phi_minus) out to the decreasing regime, then an integral
    upper bound on the remainder, added back (upper-estimate direction)."""
    if not p.has_attraction:
        return 0.0
    d = p.dimension
    diag = math.sqrt(d)
    # enumerate every cube whose nearest approach can precede the phi_minus
    # peak; beyond that phi_minus is decreasing and the tail integrates
    m0 = int(math.ceil(max(cert.R, p.attraction_peak) / a)) + 2
    axes = np.arange(-m0, m0 + 1)
    grids = np.meshgrid(*([axes] * d), indexing="ij")
    j = np.stack([g.ravel() for g in grids], axis=-1)  # ((2m0+1)^d, d)
    near = a * np.sqrt(np.sum(np.maximum(np.abs(j) - 1, 0) ** 2, axis=-1))
    far = a * np.sqrt(np.sum((np.abs(j) + 1) ** 2, axis=-1))
    r_sup = np.clip(p.attraction_peak, np.maximum(near, 1e-300), far)
    total = float(np.sum(p.phi_minus(r_sup)))
    # remainder: sup over each omitted cube is below phi_minus at a point
    # within a*sqrt(d) of any of its interior points, phi_minus decreasing
    r_tail = max(a * (m0 - 1 - diag), p.attraction_peak)
    tail_val, _ = integrate.quad(
        lambda r: float(p.phi_minus(r)) * r ** (d - 1), r_tail, np.inf,
        limit=400)
    total += _surface_area(d) * tail_val / a ** d
    return total


def stability_constants(p: Potential, grid: CubeGrid,
                        tol: float = 1e-10) -> StabilityConstants:
    """b(a), v0(a), A(a) = (b - 2 v0)/4, B(a) = v0/2, C_d and the global
    (a-free) stability bound, all at the grid's edge."""
    if p.family == "zero":
        # ideal-gas stub: every constant degenerates but the epsilon_1
        # bound machinery stays valid with b = v0 = 0
        return StabilityConstants(b=0.0, v0=0.0, A=0.0, B_local=0.0,
                                  C_d=0.0, a_m=INF, B_global=0.0,
                                  a=grid.a, d=grid.d)
    cert = certify_assumption_a(p)
    a, d = grid.a, grid.d
    if grid.d != p.dimension:
        raise ValueError("grid dimension does not match the potential")
    if a >= cert.r0:
        raise ValueError(f"edge a={a} must be below the core radius r0={cert.r0}")
    if cert.s == d:
        raise ValueError(
            "s = d logarithmic-superstability branch is not supported; "
            "constants are computed for s > d only")
    b = _b_of_a(p, a)
    v0 = _v0_of_a(p, a, cert, tol)
    if b <= 2.0 * v0:
        raise CoarseEdgeError(
            f"b(a)={b:.6g} <= 2*v0(a)={2 * v0:.6g}: choose a below the "
            "b > 2*v0 threshold")
    A = (b - 2.0 * v0) / 4.0
    C_d = (1.0 / a ** d) * math.pi ** (d / 2.0) / (d * gamma_fn(d / 2.0)) \
        * cert.phi0
    gb = global_bounds(p, tol)
    return StabilityConstants(b=b, v0=v0, A=A, B_local=v0 / 2.0, C_d=C_d,
                              a_m=gb.a_m, B_global=gb.B_global, a=a, d=d)


@dataclass(frozen=True)
class GlobalBounds:
    a_m: float
    B_global: float
    phi_minus_integral: float   # the 'very close to int(phi_minus)' quantity
    B_closed_form: float        # candidate value from the closed formula
    closed_form_holds: bool
    at_boundary: bool           # no b = 2 v0 root below r0; a_m capped at r0


def phi_minus_integral(p: Potential) -> float:
    """Integral of phi_minus over R^d (radial reduction)."""
    if not p.has_attraction:
        return 0.0
    d = p.dimension
    surf = _surface_area(d)
    val, _ = integrate.quad(
        lambda r: float(p.phi_minus(r)) * r ** (d - 1),
        p.zero_crossing, np.inf, limit=400)
    return surf * val


def global_bounds(p: Potential, tol: float = 1e-8) -> GlobalBounds:
    """Solve b(a) = 2 v0(a) for a_m and evaluate the partition-free stability
    constant B = v0(a_m)/2; purely repulsive interactions get B = 0."""
    if p.family == "zero":
        return GlobalBounds(INF, 0.0, 0.0, 0.0, True, True)
    cert = certify_assumption_a(p)
    if not p.has_attraction:
        return GlobalBounds(cert.r0, 0.0, 0.0, 0.0, True, True)

    pmi = phi_minus_integral(p)

    def f(a):
        return _b_of_a(p, a) - 2.0 * _v0_of_a(p, a, cert, tol)

    a_hi = cert.r0 * (1.0 - 1e-9)
    grid = np.geomspace(cert.r0 * 1e-3, a_hi, 200)
    vals = np.array([f(a) for a in grid])
    sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    d, s = p.dimension, cert.s
    B_closed = (2.0 ** (2 * d - s) * d ** (s * d / 2.0) * pmi ** s
                / cert.phi0 ** d) ** (1.0 / (s - d))
    if len(sign_change) == 0:
        # attraction too weak: b > 2 v0 everywhere below r0, B = v0/2 at the
        # largest admissible edge is a valid (if lazy) stability constant
        B = _v0_of_a(p, a_hi, cert, tol) / 2.0
        return GlobalBounds(cert.r0, B, pmi, B_closed, B <= B_closed, True)
    i = sign_change[-1]
    a_m = optimize.brentq(f, grid[i], grid[i + 1], rtol=max(tol, 1e-12))
    B = _v0_of_a(p, a_m, cert, tol) / 2.0
    return GlobalBounds(a_m, B, pmi, B_closed, B <= B_closed, False)


def check_superstability(p: Potential, consts: StabilityConstants,
                         grid: CubeGrid, gamma) -> float:
    """U(gamma) minus the superstability lower bound
    A * sum_{|gamma_cube| >= 2} |gamma_cube|^2 - B_local * |gamma|;
    a nonnegative margin certifies the instance."""
    pts = as_points(gamma)
    u = total_energy(p, pts) if len(pts) >= 2 else 0.0
    occ = occupancy(grid, pts)
    quad = sum(n * n for n in occ.values() if n >= 2)
    bound = consts.A * quad - consts.B_local * len(pts)
    return u - bound
