"""Correlation functions three ways: direct definition (full and dilute),
the continuum Kirkwood-Salzburg series, and its discrete cube analogue,
plus the edge-refinement convergence report tying them together."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .energy import batch_total_energy, boltzmann, total_energy
from .estimate import Estimate
from .lattice import Region, as_points, chi_minus, cube_of
from .partition import (EnsembleParams, MomentTable, _series_from_moments,
                        dilute_cube_sum, grand_truncation_bound,
                        sample_moments)
from .potential import Potential, activity_radius, mayer_c_beta

# Weight comparisons against the -2B threshold use this slack.
PI_W_TOL = 1e-12


class RadiusError(ValueError):
    """Activity above the convergence radius e^{-2 beta B - 1}/C(beta)."""


@dataclass(frozen=True)
class KSTruncation:
    """Series cut and integral budgets for the Kirkwood-Salzburg solvers.

    ``order`` is N in sum_{n=0}^{N} z^{n+1} K^n delta; ``cutoff_radius``
    truncates Mayer factors in space; ``quad_budget`` is the sample count
    per stochastic integral (continuum) or the Gauss node count per cube
    (discrete); ``xi`` scales the E_xi tail norm (default z e^{2 beta B + 1}).
    """

    order: int
    cutoff_radius: float = 0.0
    quad_budget: int = 2000
    xi: float = 0.0

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("series order must be nonnegative")
        if self.quad_budget < 1:
            raise ValueError("quad_budget must be positive")


@dataclass(frozen=True)
class KSFunction:
    """A symmetric function of finite configurations, zero above n_cap.

    ``evaluate`` maps an (m, d) point array (continuum) or a sorted site
    tuple (discrete) to a real value; the empty configuration maps to 1
    for correlation functions and 0 for delta.
    """

    n_cap: int
    evaluate: Callable

    @classmethod
    def delta(cls, n_cap: int = 1) -> "KSFunction":
        def _delta(arg):
            return 1.0 if _config_size(arg) == 1 else 0.0
        return cls(n_cap, _delta)


def _config_size(arg) -> int:
    if isinstance(arg, tuple):
        return len(arg)
    return len(as_points(arg))


def series_tail_bound(ens: EnsembleParams, c_beta: float, B: float,
                      order: int, n_eta: int, xi: float = 0.0) -> float:
    """Geometric E_xi tail of the KS series past order N:
    sum_{n>N} z^{n+1} ||K^n delta|| xi^{|eta|} <= z xi^{|eta|-1} q^{N+1}/(1-q)
    with q = e^{xi C(beta) - 1} from ||K|| <= e^{2 beta B + xi C(beta)}/xi."""
    if xi <= 0.0:
        xi = ens.z * math.exp(2.0 * ens.beta * B + 1.0)
    if c_beta == 0.0:
        return 0.0
    q = math.exp(xi * c_beta - 1.0)
    if q >= 1.0:
        return math.inf
    return ens.z * xi ** (n_eta - 1) * q ** (order + 1) / (1.0 - q)


def _check_radius(p: Potential, ens: EnsembleParams, B: float,
                  c_beta: float, override_radius: bool) -> None:
    z_max = activity_radius(p, ens.beta, B, c_beta)
    if ens.z >= z_max and not override_radius:
        raise RadiusError(
            f"z={ens.z} is at or above the convergence radius "
            f"e^(-2 beta B - 1)/C(beta) = {z_max:.6g}; pass "
            "override_radius=True to proceed anyway")


# -- direct definitions ----------------------------------------------

def rho_direct(p: Potential, region: Region, ens: EnsembleParams, eta,
               n_max: int, samples: int, seed: int,
               b_global: float = 0.0,
               tables: tuple | None = None) -> Estimate:
    """rho_Lambda(eta) = (z^|eta|/Z) sum_n (z^n/n!) int e^{-beta U(eta u gamma)};
    numerator and Z share the seed so their samples are coupled."""
    eta_pts = as_points(eta)
    if len(eta_pts) == 0:
        return Estimate(1.0, 0.0, 0.0, "monte-carlo")
    if tables is None:
        t_eta = sample_moments(p, region, ens, n_max, samples, seed, eta=eta_pts)
        t_bg = sample_moments(p, region, ens, n_max, samples, seed)
    else:
        t_eta, t_bg = tables
    num, num_err = _series_from_moments(region, ens, t_eta.mean_full,
                                        t_eta.var_full, t_eta.samples)
    den, den_err = _series_from_moments(region, ens, t_bg.mean_full,
                                        t_bg.var_full, t_bg.samples)
    pref = ens.z ** len(eta_pts)
    value = pref * num / den
    err = abs(value) * math.hypot(num_err / num if num else 0.0,
                                  den_err / den)
    tb = grand_truncation_bound(region, ens, t_eta.n_max, b_global) \
        * pref * (1.0 + abs(value)) / den
    return Estimate(value, err, tb, "monte-carlo")


def rho_dilute_direct(p: Potential, region: Region, ens: EnsembleParams,
                      eta) -> Estimate:
    """Dilute correlation function by cube-subset enumeration:
    z^|eta| e^{-beta U(eta)} times the bracketed sum over cube subsets of
    the region minus eta's cubes, over Z_minus.  Non-dilute eta -> exact 0."""
    eta_pts = as_points(eta)
    grid = region.grid
    if len(eta_pts) == 0:
        return Estimate(1.0)
    if not chi_minus(grid, region, eta_pts):
        return Estimate(0.0)
    eta_cubes = {cube_of(grid, x) for x in eta_pts}
    for c in eta_cubes:
        if c not in set(region.cubes):
            raise ValueError(f"eta point in cube {c} lies outside the region")
    rest = [c for c in region.cubes if c not in eta_cubes]
    num, num_q = dilute_cube_sum(p, region, ens, rest, eta=eta_pts)
    den, den_q = dilute_cube_sum(p, region, ens, region.cubes)
    u_eta = total_energy(p, eta_pts) if len(eta_pts) >= 2 else 0.0
    pref = ens.z ** len(eta_pts) * float(boltzmann(u_eta, ens.beta))
    value = pref * num / den
    qerr = abs(value) * (num_q / num + den_q / den) if num else pref * num_q / den
    return Estimate(value, 0.0, qerr, "enumeration")


def rho_dilute_mc(p: Potential, region: Region, ens: EnsembleParams, eta,
                  n_max: int, samples: int, seed: int,
                  b_global: float = 0.0,
                  tables: tuple | None = None) -> Estimate:
    """Indicator-restricted Monte-Carlo version of rho_dilute_direct,
    sharing its sample stream with rho_direct for coupled comparisons."""
    eta_pts = as_points(eta)
    if len(eta_pts) == 0:
        return Estimate(1.0, 0.0, 0.0, "monte-carlo")
    if not chi_minus(region.grid, region, eta_pts):
        return Estimate(0.0, 0.0, 0.0, "monte-carlo")
    if tables is None:
        t_eta = sample_moments(p, region, ens, n_max, samples, seed, eta=eta_pts)
        t_bg = sample_moments(p, region, ens, n_max, samples, seed)
    else:
        t_eta, t_bg = tables
    num, num_err = _series_from_moments(region, ens, t_eta.mean_dilute,
                                        t_eta.var_dilute, t_eta.samples)
    den, den_err = _series_from_moments(region, ens, t_bg.mean_dilute,
                                        t_bg.var_dilute, t_bg.samples)
    pref = ens.z ** len(eta_pts)
    value = pref * num / den
    err = abs(value) * math.hypot(num_err / num if num else 0.0,
                                  den_err / den)
    tb = grand_truncation_bound(region, ens, t_eta.n_max, b_global) \
        * pref * (1.0 + abs(value)) / den
    return Estimate(value, err, tb, "monte-carlo")


# -- continuum Kirkwood-Salzburg -------------------------------------

class MayerSampler:
    """Importance sampler for offsets with density |e^{-beta phi(r)} - 1|
    (radially, times the sphere factor), piecewise constant over a radial
    table so the weights mayer/density are exact for the table density."""

    def __init__(self, p: Potential, beta: float, cutoff: float,
                 n_bins: int = 4096):
        from .potential import _surface_area
        self.p, self.beta, self.d = p, beta, p.dimension
        self.cutoff = cutoff
        self.surf = _surface_area(self.d)
        edges = np.linspace(cutoff * 1e-9, cutoff, n_bins + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        dens = np.abs(np.expm1(-beta * p.phi(mid))) * self.surf \
            * mid ** (self.d - 1)
        mass = dens * np.diff(edges)
        self.edges, self.mass = edges, mass
        self.norm = float(np.sum(mass))
        self.cum = np.cumsum(mass) / self.norm
        self.dens = dens / self.norm  # probability density of r

    def mayer(self, r):
        return np.expm1(-self.beta * self.p.phi(np.maximum(r, 1e-300)))

    def sample(self, center: np.ndarray, k: int, rng) -> tuple:
        """k offsets around center; returns (points (k, d), weights (k,))
        with weight_i = mayer(r_i) surf r^{d-1} / density(r_i) so that
        E[prod w_i f(y)] = int prod mayer(|y_i - x|) f(y) dy (cutoff ball)."""
        u = rng.random(k)
        bins = np.searchsorted(self.cum, u)
        lo, hi = self.edges[bins], self.edges[bins + 1]
        r = lo + rng.random(k) * (hi - lo)
        if self.d == 1:
            dirs = np.where(rng.random(k) < 0.5, -1.0, 1.0)[:, None]
        else:
            g = rng.standard_normal((k, self.d))
            dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
        pts = center[None, :] + r[:, None] * dirs
        # the r-density actually sampled is the piecewise constant dens[bin]
        w = self.mayer(r) * self.surf * r ** (self.d - 1) / self.dens[bins]
        return pts, w

    def tail_mass(self, tol_grid: int = 2048) -> float:
        """Upper bound on the absolute Mayer mass beyond the cutoff."""
        r = np.geomspace(self.cutoff, self.cutoff * 1e4, tol_grid)
        f = np.abs(np.expm1(-self.beta * self.p.phi(r))) * self.surf \
            * r ** (self.d - 1)
        # f is decreasing past the cutoff for the supported families
        return float(np.trapz(f, r)) + f[-1] * r[-1]


def default_cutoff(p: Potential, beta: float, tol: float = 1e-8) -> float:
    """Smallest tabulated radius beyond which |e^{-beta phi} - 1| < tol."""
    if p.family == "zero":
        return 1.0
    r = np.geomspace(1e-3, 1e6, 20_000)
    big = np.abs(np.expm1(-beta * p.phi(r))) >= tol
    if not big.any():
        return float(r[0])
    last = int(np.nonzero(big)[0][-1])
    return float(r[min(last + 1, len(r) - 1)])


def _pi_weights(beta: float, B: float, w_vals: np.ndarray) -> np.ndarray:
    """Normalized pi_W over the pivots; uniform fallback when every
    indicator is zero (near -2B ties decided with the comparison slack)."""
    pi = (w_vals >= -2.0 * B - PI_W_TOL).astype(float)
    tot = pi.sum()
    if tot == 0.0:
        return np.full(len(w_vals), 1.0 / len(w_vals))
    return pi / tot


def ks_apply_continuum(p: Potential, ens: EnsembleParams, f: KSFunction,
                       trunc: KSTruncation, B: float = 0.0,
                       seed: int = 0) -> KSFunction:
    """One application of the continuum KS operator to f by importance
    sampling of the nested Mayer integrals."""
    cutoff = trunc.cutoff_radius or default_cutoff(p, ens.beta)
    sampler = None if p.family == "zero" else MayerSampler(p, ens.beta, cutoff)
    n_cap = f.n_cap + 1

    def mayer_sum(x, other_pts, k_max, rng):
        """sum_k (1/k!) int prod mayer(y_i - x) f(other u {y}) dy."""
        if sampler is None or k_max < 1:
            return 0.0
        total = 0.0
        m = trunc.quad_budget
        for k in range(1, k_max + 1):
            acc = 0.0
            for _ in range(m):
                ys, w = sampler.sample(x, k, rng)
                cfg = np.concatenate([other_pts, ys]) if len(other_pts) \
                    else ys
                acc += float(np.prod(w)) * f.evaluate(cfg)
            total += acc / m / math.factorial(k)
        return total

    def evaluate(arg):
        pts = as_points(arg)
        m = len(pts)
        if m == 0 or m > n_cap:
            return 0.0
        rng = np.random.default_rng([seed, _points_key(pts)])
        if m == 1:
            return mayer_sum(pts[0], pts[:0], f.n_cap, rng)
        # pairwise interaction of each pivot with the rest
        diff = pts[:, None, :] - pts[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        with np.errstate(divide="ignore", over="ignore"):
            phi_m = np.where(r > 0, p.phi(np.maximum(r, 1e-300)), 0.0)
        w_vals = np.sum(phi_m, axis=1)
        pi = _pi_weights(ens.beta, B, w_vals)
        total = 0.0
        for i in range(m):
            if pi[i] == 0.0:
                continue
            rest = np.delete(pts, i, axis=0)
            bw = float(boltzmann(w_vals[i], ens.beta))
            bracket = f.evaluate(rest) \
                + mayer_sum(pts[i], rest, f.n_cap - (m - 1), rng)
            total += pi[i] * bw * bracket
        return total

    return KSFunction(n_cap, evaluate)


def _points_key(pts: np.ndarray) -> int:
    """Deterministic 63-bit key from rounded coordinates for substreams."""
    q = np.round(np.asarray(pts, dtype=float).ravel() * 2.0 ** 24).astype(np.int64)
    h = np.int64(1469598103934665603)
    for v in q:
        h = np.int64((int(h) ^ int(v)) * 1099511628211 & 0x7FFFFFFFFFFFFFFF)
    return int(h)


def ks_series_continuum(p: Potential, ens: EnsembleParams, eta,
                        trunc: KSTruncation, B: float = 0.0, seed: int = 0,
                        override_radius: bool = False,
                        replicas: int = 3) -> Estimate:
    """rho(eta) ~ sum_{n=0}^{N} z^{n+1} (K^n delta)(eta), importance-sampled;
    statistical error from independent replicas, tail from the E_xi bound."""
    eta_pts = as_points(eta)
    c_beta = mayer_c_beta(p, ens.beta).value
    _check_radius(p, ens, B, c_beta, override_radius)
    n_eta = len(eta_pts)
    if n_eta == 0:
        return Estimate(1.0)

    def one_pass(rep_seed):
        total = 0.0
        f = KSFunction.delta()
        for n in range(trunc.order + 1):
            if n > 0:
                # cost of the nested sampling is the budget product over
                # levels, so later applications get geometrically fewer draws
                level = KSTruncation(
                    order=trunc.order, cutoff_radius=trunc.cutoff_radius,
                    quad_budget=max(6, trunc.quad_budget // 8 ** (n - 1)),
                    xi=trunc.xi)
                f = ks_apply_continuum(p, ens, f, level, B,
                                       seed=rep_seed + 1000 * n)
            if n_eta <= n + 1:
                total += ens.z ** (n + 1) * f.evaluate(eta_pts)
        return total

    vals = np.array([one_pass(seed + 77 * r) for r in range(replicas)])
    value = float(np.mean(vals))
    stat = float(np.std(vals, ddof=1) / math.sqrt(replicas)) \
        if replicas > 1 else 0.0
    tail = series_tail_bound(ens, c_beta, B, trunc.order, n_eta, trunc.xi)
    if sampler_is_stochastic(p, trunc):
        method = "monte-carlo"
    else:
        method, stat = "quadrature", 0.0
    return Estimate(value, stat, tail, method)


def sampler_is_stochastic(p: Potential, trunc: KSTruncation) -> bool:
    return p.family != "zero" and trunc.order >= 1


# -- discrete Kirkwood-Salzburg --------------------------------------

@dataclass
class _SiteLattice:
    """Evaluation lattice for the cube operator: Gauss nodes inside every
    region cube plus the anchor points of eta, each site a small int id."""

    positions: np.ndarray      # (n_sites, d)
    cube_ids: np.ndarray       # (n_sites,) int cube index within the region
    weights: np.ndarray        # quadrature weight (0 for anchors)
    cube_sites: list           # per cube, list of node site ids
    anchor_sites: tuple        # site ids of eta's points
    mayer: np.ndarray = field(default=None)
    phi_tab: np.ndarray = field(default=None)


def _build_lattice(p: Potential, region: Region, beta: float, eta_pts,
                   nodes: int) -> _SiteLattice:
    if region.grid.d != 1:
        raise NotImplementedError("discrete KS lattice is d=1 only")
    a = region.grid.a
    xg, wg = leggauss(nodes)
    pos, cid, wt, cube_sites = [], [], [], []
    cube_index = {c: i for i, c in enumerate(region.cubes)}
    for c in region.cubes:
        ids = []
        for j in range(nodes):
            ids.append(len(pos))
            pos.append([c[0] * a + 0.5 * a * xg[j]])
            cid.append(cube_index[c])
            wt.append(0.5 * a * wg[j])
        cube_sites.append(ids)
    anchors = []
    for x in eta_pts:
        anchors.append(len(pos))
        pos.append(list(np.atleast_1d(x)))
        cid.append(cube_index[cube_of(region.grid, x)])
        wt.append(0.0)
    pos = np.asarray(pos, dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    with np.errstate(divide="ignore", over="ignore"):
        phi_tab = np.where(r > 0, p.phi(np.maximum(r, 1e-300)), np.inf)
    same = np.asarray(cid)[:, None] == np.asarray(cid)[None, :]
    phi_tab = np.where(same, np.inf, phi_tab)  # hard-core cube correction
    mayer = np.expm1(-beta * np.where(np.isinf(phi_tab), np.inf, phi_tab))
    mayer = np.where(np.isinf(phi_tab), -1.0, mayer)
    return _SiteLattice(pos, np.asarray(cid), np.asarray(wt), cube_sites,
                        tuple(anchors), mayer, phi_tab)


def _ks_discrete_value(lat: _SiteLattice, ens: EnsembleParams, B: float,
                       order: int, sites: tuple, memo: dict) -> float:
    """((K_minus)^n delta)(sites) on the evaluation lattice, memoized."""
    m = len(sites)
    if m == 0 or m > order + 1:
        return 0.0
    if order == 0:
        return 1.0 if m == 1 else 0.0
    key = (order, sites)
    if key in memo:
        return memo[key]
    beta = ens.beta
    used_cubes = set(int(lat.cube_ids[s]) for s in sites)
    free_cubes = [i for i in range(len(lat.cube_sites)) if i not in used_cubes]

    def q_sum(pivot, rest, inner_order, k_max):
        """Sum-integral over nonempty cube sets Q disjoint from the sites,
        Gauss-integrated per cube, of prod Mayer(pivot, Q) * value(rest u Q)."""
        total = 0.0
        k_max = min(k_max, inner_order + 1 - len(rest), len(free_cubes))
        if k_max < 1:
            return 0.0
        import itertools as it
        for k in range(1, k_max + 1):
            for cube_set in it.combinations(free_cubes, k):
                for combo in it.product(*(lat.cube_sites[c] for c in cube_set)):
                    w = 1.0
                    for s_new in combo:
                        w *= lat.weights[s_new] * lat.mayer[pivot, s_new]
                        if w == 0.0:
                            break
                    if w == 0.0:
                        continue
                    new_sites = tuple(sorted(rest + combo))
                    inner = _ks_discrete_value(lat, ens, B, inner_order,
                                               new_sites, memo)
                    if inner != 0.0:
                        total += w * inner
        return total

    if m == 1:
        val = q_sum(sites[0], (), order - 1, order)
        memo[key] = val
        return val

    w_vals = np.array([
        float(np.sum(lat.phi_tab[s, list(set(sites) - {s})])) for s in sites])
    pi = _pi_weights(beta, B, w_vals)
    val = 0.0
    for i, s in enumerate(sites):
        if pi[i] == 0.0:
            continue
        rest = tuple(x for x in sites if x != s)
        bw = 0.0 if math.isinf(w_vals[i]) else math.exp(-beta * w_vals[i])
        if bw == 0.0:
            continue
        bracket = _ks_discrete_value(lat, ens, B, order - 1, rest, memo) \
            + q_sum(s, rest, order - 1, order - m + 1)
        val += pi[i] * bw * bracket
    memo[key] = val
    return val


def ks_apply_discrete(p: Potential, region: Region, ens: EnsembleParams,
                      f: KSFunction, trunc: KSTruncation, eta=(),
                      B: float = 0.0) -> KSFunction:
    """One application of the cube KS operator on the site lattice; f and
    the result map sorted site-id tuples to values."""
    lat = _build_lattice(p, region, ens.beta, as_points(eta),
                         trunc.quad_budget)
    n_cap = f.n_cap + 1

    def evaluate(sites):
        m = len(sites)
        if m == 0 or m > n_cap:
            return 0.0
        used = set(int(lat.cube_ids[s]) for s in sites)
        free = [i for i in range(len(lat.cube_sites)) if i not in used]
        import itertools as it

        def q_sum(pivot, rest, k_cap):
            total = 0.0
            for k in range(1, min(k_cap, len(free)) + 1):
                for cube_set in it.combinations(free, k):
                    for combo in it.product(
                            *(lat.cube_sites[c] for c in cube_set)):
                        w = 1.0
                        for s_new in combo:
                            w *= lat.weights[s_new] * lat.mayer[pivot, s_new]
                        if w != 0.0:
                            total += w * f.evaluate(
                                tuple(sorted(rest + combo)))
            return total

        if m == 1:
            return q_sum(sites[0], (), f.n_cap)
        w_vals = np.array([
            float(np.sum(lat.phi_tab[s, list(set(sites) - {s})]))
            for s in sites])
        pi = _pi_weights(ens.beta, B, w_vals)
        total = 0.0
        for i, s in enumerate(sites):
            if pi[i] == 0.0 or math.isinf(w_vals[i]):
                continue
            rest = tuple(x for x in sites if x != s)
            bracket = f.evaluate(rest) + q_sum(s, rest, f.n_cap - (m - 1))
            total += pi[i] * math.exp(-ens.beta * w_vals[i]) * bracket
        return total

    return KSFunction(n_cap, evaluate)


def ks_series_discrete(p: Potential, region: Region, ens: EnsembleParams,
                       eta, trunc: KSTruncation, B: float = 0.0,
                       override_radius: bool = False) -> Estimate:
    """rho_minus(s) ~ sum_{n=0}^{N} z^{n+1} ((K_minus)^n delta)(s) with eta's
    points as anchors; quadrature error estimated by node refinement."""
    eta_pts = as_points(eta)
    c_beta = mayer_c_beta(p, ens.beta).value
    _check_radius(p, ens, B, c_beta, override_radius)
    n_eta = len(eta_pts)
    if n_eta == 0:
        return Estimate(1.0)
    cubes = [cube_of(region.grid, x) for x in eta_pts]
    if len(set(cubes)) < n_eta:
        # anchors share a cube: chi_minus prefactor kills every term
        return Estimate(0.0)

    def run(nodes):
        lat = _build_lattice(p, region, ens.beta, eta_pts, nodes)
        memo: dict = {}
        total = 0.0
        for n in range(trunc.order + 1):
            if n_eta <= n + 1:
                total += ens.z ** (n + 1) * _ks_discrete_value(
                    lat, ens, B, n, tuple(sorted(lat.anchor_sites)), memo)
        return total

    g = trunc.quad_budget
    coarse = run(max(2, g - 1))
    value = run(g)
    tail = series_tail_bound(ens, c_beta, B, trunc.order, n_eta, trunc.xi)
    return Estimate(value, 0.0, tail + abs(value - coarse), "quadrature")


# -- convergence report ----------------------------------------------

CONVERGENCE_CSV_HEADER = ("a,rho_full,rho_full_err,rho_minus,rho_minus_err,"
                         "diff,remainder_R,z_ratio")


@dataclass(frozen=True)
class ConvergenceRow:
    a: float
    rho_full: float
    rho_full_err: float
    rho_minus: float
    rho_minus_err: float
    diff: float
    remainder_R: float
    z_ratio: float
    # 1 - Z_minus/Z on shared samples; resolves gaps far below 2^-52
    z_deficit: float = 0.0


def convergence_report(p: Potential, ens: EnsembleParams, eta, regions,
                       n_max: int, samples: int, seed: int,
                       b_global: float = 0.0) -> tuple:
    """Per-edge rows of rho_full, rho_minus, their difference, the exact
    remainder R = rho_full - (Z_minus/Z) rho_minus_full computed on shared
    samples, and the Z_minus/Z column.  Returns (rows, notes); edges where
    eta is not dilute are skipped with a note."""
    eta_pts = as_points(eta)
    rows, notes = [], []
    for i, region in enumerate(regions):
        a = region.grid.a
        if not chi_minus(region.grid, region, eta_pts):
            notes.append(f"a={a:g}: eta not dilute, row skipped")
            continue
        sub = int(np.random.SeedSequence([seed, 13, i]).generate_state(1)[0])
        t_eta = sample_moments(p, region, ens, n_max, samples, sub,
                               eta=eta_pts)
        t_bg = sample_moments(p, region, ens, n_max, samples, sub)
        rf = rho_direct(p, region, ens, eta_pts, n_max, samples, sub,
                        b_global, tables=(t_eta, t_bg))
        rm = rho_dilute_mc(p, region, ens, eta_pts, n_max, samples, sub,
                           b_global, tables=(t_eta, t_bg))
        num_ex, _ = _series_from_moments(region, ens, t_eta.mean_excess,
                                         t_eta.var_excess, t_eta.samples)
        z_f, _ = _series_from_moments(region, ens, t_bg.mean_full,
                                      t_bg.var_full, t_bg.samples)
        z_ex, _ = _series_from_moments(region, ens, t_bg.mean_excess,
                                       t_bg.var_excess, t_bg.samples)
        pref = ens.z ** len(eta_pts)
        # identity rho = (Z_minus/Z) rho_minus + R on shared samples:
        # R = z^|eta| (Num_full - Num_dilute)/Z; the per-sample difference
        # is accumulated directly so values below 2^-52 of rho survive
        remainder = pref * num_ex / z_f
        deficit = z_ex / z_f
        rows.append(ConvergenceRow(
            a=a, rho_full=rf.value, rho_full_err=rf.total_err,
            rho_minus=rm.value, rho_minus_err=rm.total_err,
            diff=rf.value - rm.value, remainder_R=remainder,
            z_ratio=1.0 - deficit, z_deficit=deficit))
    return rows, notes
