"""Grand partition functions (full and dilute), the dilute/dense
factorization with its direct cross-check, the per-cube excess bound
epsilon_1(a), and pressure tables over edge sweeps."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammainc

from .energy import (StabilityConstants, _phi_tolerant,
                     batch_interaction_energy, batch_total_energy, boltzmann)
from .estimate import Estimate
from .lattice import Region, as_points, uniform_points_in_region
from .potential import Potential

ENUMERATION_CUBE_LIMIT = 24


@dataclass(frozen=True)
class EnsembleParams:
    z: float
    beta: float

    def __post_init__(self):
        if self.z < 0 or self.beta <= 0:
            raise ValueError("activity must be >= 0 and beta > 0")


def poisson_tail(x: float, n_max: int) -> float:
    """sum_{n > n_max} x^n / n!  (the stability truncation bound kernel)."""
    if x == 0.0:
        return 0.0
    return float(math.exp(x) * gammainc(n_max + 1, x))


# -- shared Monte-Carlo kernel ---------------------------------------

@dataclass(frozen=True)
class MomentTable:
    """Per-particle-number sample moments of the Boltzmann weight over
    uniform configurations in a region, with the dilute indicator applied
    to the same draws (so full/dilute/excess estimates are coupled)."""

    n_max: int
    samples: int
    mean_full: np.ndarray     # <w>, w = e^{-beta U(eta u gamma)}
    var_full: np.ndarray
    mean_dilute: np.ndarray   # <w * chi_minus(eta u gamma)>
    var_dilute: np.ndarray
    mean_excess: np.ndarray   # <w * (1 - chi_minus)>
    var_excess: np.ndarray


def _dilute_mask(region: Region, pts: np.ndarray) -> np.ndarray:
    """chi_minus for a batch (m, n, d): 1 iff all points sit in distinct cubes."""
    m, n = pts.shape[0], pts.shape[1]
    if n < 2:
        return np.ones(m, dtype=bool)
    idx = np.floor(pts / region.grid.a + 0.5).astype(np.int64)
    # collapse the d index components into one sortable key per point
    lo = idx.min(axis=(0, 1), keepdims=True)
    span = idx.max(axis=(0, 1), keepdims=True) - lo + 1
    strides = np.cumprod(np.concatenate([[1], span.ravel()[:-1]]))
    key = np.sum((idx - lo) * strides, axis=-1)
    key.sort(axis=1)
    return np.all(np.diff(key, axis=1) != 0, axis=1)


def sample_moments(p: Potential, region: Region, ens: EnsembleParams,
                   n_max: int, samples: int, seed: int,
                   eta=None) -> MomentTable:
    """Draw `samples` uniform n-point configurations for each n <= n_max
    (substream [seed, n]) and record the coupled weight moments."""
    if n_max < 0 or samples < 1:
        raise ValueError("n_max must be >= 0 and samples >= 1")
    eta_pts = as_points(eta) if eta is not None else None
    d = region.grid.d
    mf = np.zeros(n_max + 1)
    vf = np.zeros(n_max + 1)
    md = np.zeros(n_max + 1)
    vd = np.zeros(n_max + 1)
    me = np.zeros(n_max + 1)
    ve = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        if n == 0:
            pts = np.zeros((1, 0, d))
            full = eta_pts.reshape(1, -1, d) \
                if eta_pts is not None and len(eta_pts) else pts
            w0 = float(boltzmann(batch_total_energy(p, full), ens.beta)[0]) \
                if full.shape[1] else 1.0
            chi0 = float(_dilute_mask(region, full)[0]) if full.shape[1] else 1.0
            mf[0], md[0], me[0] = w0, w0 * chi0, w0 * (1.0 - chi0)
            continue
        rng = np.random.default_rng([seed, n])
        pts = uniform_points_in_region(region, samples * n, rng) \
            .reshape(samples, n, d)
        if eta_pts is not None and len(eta_pts):
            full = np.concatenate(
                [np.broadcast_to(eta_pts, (samples,) + eta_pts.shape), pts],
                axis=1)
        else:
            full = pts
        w = boltzmann(batch_total_energy(p, full), ens.beta)
        chi = _dilute_mask(region, full).astype(float)
        wd = w * chi
        we = w - wd
        mf[n], vf[n] = float(np.mean(w)), float(np.var(w))
        md[n], vd[n] = float(np.mean(wd)), float(np.var(wd))
        me[n], ve[n] = float(np.mean(we)), float(np.var(we))
    return MomentTable(n_max, samples, mf, vf, md, vd, me, ve)


def _series_from_moments(region: Region, ens: EnsembleParams,
                         mean: np.ndarray, var: np.ndarray,
                         samples: int) -> tuple[float, float]:
    n = np.arange(len(mean))
    log_c = n * math.log(max(ens.z, 1e-300)) + n * math.log(region.volume) \
        - np.array([math.lgamma(k + 1) for k in n])
    c = np.where(ens.z == 0.0, np.where(n == 0, 1.0, 0.0), np.exp(log_c))
    value = float(np.sum(c * mean))
    err = float(math.sqrt(np.sum(c * c * var / samples)))
    return value, err


def grand_truncation_bound(region: Region, ens: EnsembleParams,
                           n_max: int, b_global: float) -> float:
    """Stability bound on the omitted n > n_max terms of the grand series."""
    x = ens.z * region.volume * math.exp(ens.beta * b_global)
    return poisson_tail(x, n_max)


def z_grand(p: Potential, region: Region, ens: EnsembleParams,
            n_max: int, samples: int, seed: int,
            b_global: float = 0.0,
            table: MomentTable | None = None) -> Estimate:
    """Grand partition function by the truncated activity series with
    per-term Monte-Carlo integrals."""
    if table is None:
        table = sample_moments(p, region, ens, n_max, samples, seed)
    value, err = _series_from_moments(region, ens, table.mean_full,
                                      table.var_full, table.samples)
    tb = grand_truncation_bound(region, ens, n_max, b_global)
    est = Estimate(value, err, tb, "monte-carlo")
    if tb > 1e-6 * value:
        est = est.with_warning(
            f"truncation bound {tb:.3g} exceeds 1e-6 of the partial sum")
    return est


# -- dilute partition function ---------------------------------------

def _gl_nodes_for(k: int, override: int | None = None) -> int:
    if override is not None:
        return override
    if k <= 2:
        return 16
    if k <= 4:
        return 8
    return 4


def dilute_cube_sum(p: Potential, region: Region, ens: EnsembleParams,
                    cubes, eta=None, nodes: int | None = None,
                    k_cap: int | None = None) -> tuple[float, float]:
    """The bracketed dilute sum over a cube list (d = 1 tensor quadrature):

        sum_k z^k sum_{k-subsets} int...int e^{-beta W(eta; y)} e^{-beta U(y)}

    including the empty term 1.  Returns (value, quadrature error estimate).
    """
    if region.grid.d != 1:
        raise NotImplementedError("tensor-quadrature enumeration is d=1 only")
    a = region.grid.a
    eta_pts = as_points(eta) if eta is not None else np.zeros((0, 1))
    cubes = sorted(cubes)
    n_avail = len(cubes)
    k_max = n_avail if k_cap is None else min(k_cap, n_avail)
    total, quad_err = 1.0, 0.0

    def subset_integral(subset, g):
        xg, wg = leggauss(g)
        centers = np.array([c[0] * a for c in subset])
        axes = [centers[i] + 0.5 * a * xg for i in range(len(subset))]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)[:, :, None]
        wts = np.meshgrid(*([0.5 * a * wg] * len(subset)), indexing="ij")
        weight = np.prod(np.stack([w.ravel() for w in wts], axis=-1), axis=-1)
        u = batch_total_energy(p, pts)
        if len(eta_pts):
            u = u + batch_interaction_energy(p, eta_pts, pts)
        return float(np.sum(weight * boltzmann(u, ens.beta)))

    for k in range(1, k_max + 1):
        g = _gl_nodes_for(k, nodes)
        term = 0.0
        for subset in itertools.combinations(cubes, k):
            val = subset_integral(subset, g)
            if k <= 2:
                # direct refinement check on the cheap low-k terms
                quad_err += ens.z ** k * abs(subset_integral(subset, 2 * g) - val)
            term += val
        quad_err += (1e-6 * ens.z ** k * abs(term)) if k > 2 else 0.0
        total += ens.z ** k * term
    return total, quad_err


def _dilute_bracket_batch(p: Potential, region: Region, ens: EnsembleParams,
                          cubes, etas: np.ndarray, nodes: int = 8,
                          k_cap: int | None = None) -> np.ndarray:
    """dilute_cube_sum evaluated for a whole batch of anchor configurations
    at once (d = 1); etas has shape (S, n, d), the result shape (S,)."""
    if region.grid.d != 1:
        raise NotImplementedError("tensor-quadrature enumeration is d=1 only")
    a = region.grid.a
    cubes = sorted(cubes)
    S = etas.shape[0]
    out = np.ones(S)
    k_max = len(cubes) if k_cap is None else min(k_cap, len(cubes))
    xg, wg = leggauss(nodes)
    for k in range(1, k_max + 1):
        for subset in itertools.combinations(cubes, k):
            centers = np.array([c[0] * a for c in subset])
            axes = [centers[i] + 0.5 * a * xg for i in range(k)]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)[:, :, None]
            wts = np.meshgrid(*([0.5 * a * wg] * k), indexing="ij")
            weight = np.prod(np.stack([w.ravel() for w in wts], axis=-1),
                             axis=-1)
            base = weight * boltzmann(batch_total_energy(p, pts), ens.beta)
            # cross energy W(eta_s; mesh config m) for every sample at once
            diff = etas[:, None, :, None, 0] - pts[None, :, None, :, 0]
            r = np.abs(diff)
            w_cross = np.sum(_phi_tolerant(p, r), axis=(2, 3))
            out += ens.z ** k * (boltzmann(w_cross, ens.beta) @ base)
    return out


def z_dilute(p: Potential, region: Region, ens: EnsembleParams,
             mode: str = "enumerate", n_max: int = 0, samples: int = 0,
             seed: int = 0, b_global: float = 0.0,
             nodes: int | None = None,
             table: MomentTable | None = None) -> Estimate:
    """Dilute-restricted grand partition function.

    ``enumerate``: exact sum over cube subsets with tensor quadrature
    (region capped at 24 cubes).  ``monte-carlo``: the indicator-restricted
    estimator on the same sample stream as z_grand, so full/dilute/excess
    estimates are coupled draw by draw.
    """
    if mode == "enumerate":
        if region.n_cubes > ENUMERATION_CUBE_LIMIT:
            raise ValueError(
                f"enumerate mode supports at most {ENUMERATION_CUBE_LIMIT} cubes")
        value, qerr = dilute_cube_sum(p, region, ens, region.cubes, nodes=nodes)
        return Estimate(value, 0.0, qerr, "enumeration")
    if mode != "monte-carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if table is None:
        table = sample_moments(p, region, ens, n_max, samples, seed)
    value, err = _series_from_moments(region, ens, table.mean_dilute,
                                      table.var_dilute, table.samples)
    tb = grand_truncation_bound(region, ens, n_max, b_global)
    return Estimate(value, err, tb, "monte-carlo")


# -- factorization ---------------------------------------------------

def z_plus(p: Potential, region: Region, ens: EnsembleParams,
           n_max: int, samples: int, seed: int, b_global: float = 0.0,
           table: MomentTable | None = None) -> Estimate:
    """Z_plus = Z / Z_minus via the coupled estimator 1 + excess/Z_minus;
    the excess integrand is nonnegative, so tiny factor gaps survive."""
    if table is None:
        table = sample_moments(p, region, ens, n_max, samples, seed)
    zm, zm_err = _series_from_moments(region, ens, table.mean_dilute,
                                      table.var_dilute, table.samples)
    ex, ex_err = _series_from_moments(region, ens, table.mean_excess,
                                      table.var_excess, table.samples)
    value = 1.0 + ex / zm
    err = math.hypot(ex_err / zm, ex * zm_err / zm ** 2)
    tb = grand_truncation_bound(region, ens, n_max, b_global) / zm
    return Estimate(value, err, tb, "monte-carlo")


def _dense_bracket_sum(p: Potential, region: Region, ens: EnsembleParams,
                       consts: StabilityConstants, samples: int, seed: int,
                       n_cap: int) -> tuple:
    """Sum over nonempty dense cube sets X of (occupancy-weighted dense
    integrals) x (conditional dilute bracket over the remaining cubes).
    Returns (total, variance, pruned bound, Z_minus, Z_minus quad err)."""
    if region.n_cubes > 8:
        raise ValueError("direct bracketed evaluation is for small regions")
    a, d = region.grid.a, region.grid.d
    zm, zm_q = dilute_cube_sum(p, region, ens, region.cubes)
    total, var_acc, pruned = 0.0, 0.0, 0.0
    cubes = list(region.cubes)
    bB = ens.beta * consts.B_local
    task = 0
    for x_size in range(1, len(cubes) + 1):
        for x_set in itertools.combinations(cubes, x_size):
            rest = [c for c in cubes if c not in x_set]
            for counts in itertools.product(range(2, n_cap + 1), repeat=x_size):
                log_w = 0.0
                for n_c in counts:
                    log_w += n_c * math.log(ens.z * a ** d) - math.lgamma(n_c + 1)
                weight = math.exp(log_w)
                task += 1
                # stability bound on this task's full contribution:
                # e^{-beta U} <= e^{beta B N} and the dilute bracket factors
                n_tot_b = sum(counts)
                cap = weight * math.exp(bB * n_tot_b) \
                    * (1.0 + ens.z * a ** d * math.exp(bB)) ** len(rest)
                if cap < 1e-13 * max(zm, 1.0):
                    pruned += cap
                    continue
                rng = np.random.default_rng([seed, 7, task])
                n_tot = sum(counts)
                lows = np.repeat(
                    (np.asarray(x_set, dtype=float) - 0.5) * a, counts, axis=0)
                pts = lows[None, :, :] + rng.random((samples, n_tot, d)) * a
                w_dense = boltzmann(batch_total_energy(p, pts), ens.beta)
                g_vals = _dilute_bracket_batch(p, region, ens, rest, pts)
                prod = w_dense * g_vals
                total += weight * float(np.mean(prod))
                var_acc += weight ** 2 * float(np.var(prod)) / samples
    return total, var_acc, pruned, zm, zm_q


def z_plus_direct(p: Potential, region: Region, ens: EnsembleParams,
                  consts: StabilityConstants, samples: int, seed: int,
                  n_cap: int = 6) -> Estimate:
    """Z_plus from its defining bracketed sum over dense cube sets, with the
    conditional dilute integrals enumerated per dense draw.  Small regions
    only; this is the cross-check path for the factorization."""
    total, var_acc, pruned, zm, _ = _dense_bracket_sum(
        p, region, ens, consts, samples, seed, n_cap)
    # per-cube tail of the omitted n > n_cap occupation numbers
    tail = epsilon1_series_tail(consts, ens, n_cap)
    tb = (2 ** region.n_cubes) * tail + pruned
    return Estimate(1.0 + total / zm, math.sqrt(var_acc) / zm, tb / zm,
                    "monte-carlo")


def z_partition_of_unity(p: Potential, region: Region, ens: EnsembleParams,
                         consts: StabilityConstants, samples: int, seed: int,
                         n_cap: int = 6) -> Estimate:
    """Z reconstructed over all 2^N dense/dilute indicator assignments: the
    all-dilute term is the enumerated Z_minus, every other assignment is a
    dense-occupancy integral times its conditional dilute bracket."""
    total, var_acc, pruned, zm, zm_q = _dense_bracket_sum(
        p, region, ens, consts, samples, seed, n_cap)
    tail = epsilon1_series_tail(consts, ens, n_cap)
    tb = (2 ** region.n_cubes) * tail + pruned + zm_q
    return Estimate(zm + total, math.sqrt(var_acc), tb, "monte-carlo")


# -- epsilon_1 bound machinery ---------------------------------------

def epsilon1(consts: StabilityConstants, ens: EnsembleParams) -> float:
    """Closed-form bound on the per-cube dense-occupancy excess:
    (1/2) z^2 a^{2d} e^{-beta(b - 5 v0)} exp{z a^d e^{-beta(b - 3 v0)}}."""
    a_d = consts.a ** consts.d
    return 0.5 * ens.z ** 2 * a_d ** 2 \
        * math.exp(-ens.beta * (consts.b - 5.0 * consts.v0)) \
        * math.exp(ens.z * a_d * math.exp(-ens.beta * (consts.b - 3.0 * consts.v0)))


def epsilon1_series(consts: StabilityConstants, ens: EnsembleParams,
                    n_start: int = 2) -> float:
    """The exact per-cube excess series
    sum_{n >= n_start} (a^d z)^n / n! * e^{-beta(b-2v0) n^2 / 4 + 3 beta v0 n / 2},
    truncated when terms drop below 1e-30."""
    a_d = consts.a ** consts.d
    total, n = 0.0, n_start
    while n < 10_000:
        log_t = n * math.log(max(ens.z * a_d, 1e-300)) - math.lgamma(n + 1) \
            - 0.25 * ens.beta * (consts.b - 2.0 * consts.v0) * n * n \
            + 1.5 * ens.beta * consts.v0 * n
        t = math.exp(log_t)
        total += t
        if t < 1e-30:
            break
        n += 1
    return total


def epsilon1_series_tail(consts: StabilityConstants, ens: EnsembleParams,
                         n_cap: int) -> float:
    """Tail of the exact excess series beyond occupation number n_cap."""
    return epsilon1_series(consts, ens, n_start=n_cap + 1)


# -- pressure sweep --------------------------------------------------

@dataclass(frozen=True)
class PressureRow:
    a: float
    n_cubes: int
    volume: float
    p_full: float
    p_full_err: float
    p_minus: float
    p_minus_err: float
    p_plus: float
    p_plus_err: float
    eps1: float
    bound: float

    @property
    def bound_ok(self) -> bool:
        return self.p_plus <= self.bound + 3.0 * self.p_plus_err


PRESSURE_CSV_HEADER = ("a,n_cubes,volume,p_full,p_full_err,p_minus,"
                      "p_minus_err,p_plus,p_plus_err,eps1,bound")


def pressure_row(p: Potential, region: Region, ens: EnsembleParams,
                 consts: StabilityConstants, n_max: int, samples: int,
                 seed: int) -> PressureRow:
    """One coupled full/dilute/excess pressure evaluation at a single edge."""
    table = sample_moments(p, region, ens, n_max, samples, seed)
    zf, zf_err = _series_from_moments(region, ens, table.mean_full,
                                      table.var_full, samples)
    zm, zm_err = _series_from_moments(region, ens, table.mean_dilute,
                                      table.var_dilute, samples)
    ex, ex_err = _series_from_moments(region, ens, table.mean_excess,
                                      table.var_excess, samples)
    inv = 1.0 / (ens.beta * region.volume)
    a_d = region.grid.a ** region.grid.d
    e1 = epsilon1(consts, ens)
    return PressureRow(
        a=region.grid.a, n_cubes=region.n_cubes, volume=region.volume,
        p_full=inv * math.log(zf), p_full_err=inv * zf_err / zf,
        p_minus=inv * math.log(zm), p_minus_err=inv * zm_err / zm,
        p_plus=inv * math.log1p(ex / zm), p_plus_err=inv * ex_err / (zm + ex),
        eps1=e1, bound=math.log1p(e1) / (ens.beta * a_d))


def pressures(p: Potential, sweep, ens: EnsembleParams,
              consts_by_a, n_max: int, samples: int, seed: int) -> list:
    """Pressure rows for a decreasing-edge region sweep; each sweep point
    gets its own deterministic substream derived from the experiment seed."""
    rows = []
    for i, region in enumerate(sweep):
        consts = consts_by_a[region.grid.a]
        rows.append(pressure_row(p, region, ens, consts, n_max, samples,
                                 seed=int(np.random.SeedSequence(
                                     [seed, 11, i]).generate_state(1)[0])))
    return rows
