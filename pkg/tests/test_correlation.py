import math

import numpy as np
import pytest

from quasilattice.correlation import (KSFunction, KSTruncation, RadiusError,
                                      convergence_report, ks_apply_continuum,
                                      ks_series_continuum, ks_series_discrete,
                                      rho_dilute_direct, rho_dilute_mc,
                                      rho_direct, series_tail_bound,
                                      _pi_weights)
from quasilattice.lattice import CubeGrid, Region
from quasilattice.partition import EnsembleParams
from quasilattice.potential import Potential, activity_radius, mayer_c_beta

ZERO = Potential.zero(1, test_only=True)
REP = Potential.pure_repulsive(1.0, 2.0, 1)
CB = mayer_c_beta(REP, 1.0).value
Z_MAX = activity_radius(REP, 1.0, 0.0, CB)


def test_rho_direct_trivials():
    reg = Region.box(CubeGrid(1.0, 1), (4,))
    ens = EnsembleParams(0.5, 1.0)
    assert rho_direct(ZERO, reg, ens, [], 10, 100, 1).value == 1.0
    est = rho_direct(ZERO, reg, ens, [0.3, 1.2], 20, 200, 1)
    assert est.value == pytest.approx(0.25, abs=1e-10)


def test_rho_dilute_direct_ideal_gas_oracle():
    # zero potential, z=1, a=1: rho_minus = z^|eta| / (1+z a)^|eta|
    reg = Region.box(CubeGrid(1.0, 1), (4,))
    ens = EnsembleParams(1.0, 1.0)
    assert rho_dilute_direct(ZERO, reg, ens, [0.3]).value \
        == pytest.approx(0.5, rel=1e-12)
    assert rho_dilute_direct(ZERO, reg, ens, [0.3, 2.2]).value \
        == pytest.approx(0.25, rel=1e-12)
    # two points in one cube: exact zero
    assert rho_dilute_direct(ZERO, reg, ens, [0.3, 0.4]).value == 0.0


def test_rho_dilute_two_path_oracle():
    # 6-cube enumeration vs the indicator-restricted MC estimator
    reg = Region.box(CubeGrid(0.5, 1), (6,))
    ens = EnsembleParams(0.5, 1.0)
    eta = [0.6, 2.1]
    enum = rho_dilute_direct(REP, reg, ens, eta)
    mc = rho_dilute_mc(REP, reg, ens, eta, n_max=14, samples=4000, seed=8)
    assert abs(enum.value - mc.value) <= 3 * mc.stat_err + mc.trunc_bound \
        + enum.trunc_bound


def test_ks_apply_continuum_examples():
    ens = EnsembleParams(0.05, 1.0)
    tr = KSTruncation(order=1, quad_budget=4000)
    kf = ks_apply_continuum(REP, ens, KSFunction.delta(), tr, seed=2)
    # (K delta)({x}) = -C(beta) for a purely repulsive potential
    val = kf.evaluate(np.array([[0.0]]))
    assert val < 0
    assert val == pytest.approx(-CB, rel=0.05)
    # |eta| = 2: only the delta(eta minus x) term survives
    pts = np.array([[0.0], [0.7]])
    expect = math.exp(-REP.phi(0.7))
    assert kf.evaluate(pts) == pytest.approx(expect, rel=1e-10)
    # depth bound
    assert kf.evaluate(np.array([[0.0], [1.0], [2.0]])) == 0.0


def test_ks_series_continuum_heads():
    ens = EnsembleParams(0.05, 1.0)
    assert ks_series_continuum(REP, ens, [0.0], KSTruncation(order=0)).value \
        == pytest.approx(0.05)
    assert ks_series_continuum(REP, ens, [0.0, 1.0],
                               KSTruncation(order=0)).value == 0.0
    est = ks_series_continuum(REP, ens, [0.0],
                              KSTruncation(order=1, quad_budget=4000), seed=4)
    expect = 0.05 - 0.05 ** 2 * CB
    assert abs(est.value - expect) <= 3 * est.stat_err + 1e-4


def test_ks_series_continuum_ideal_closure():
    ens = EnsembleParams(0.3, 1.0)
    for order, eta in ((1, [0.0]), (2, [0.0, 1.0])):
        est = ks_series_continuum(ZERO, ens, eta, KSTruncation(order=order),
                                  override_radius=True)
        assert est.value == pytest.approx(0.3 ** len(eta), rel=1e-12)


def test_ks_radius_guard():
    ens = EnsembleParams(2.0 * Z_MAX, 1.0)
    with pytest.raises(RadiusError):
        ks_series_continuum(REP, ens, [0.0], KSTruncation(order=1))
    reg = Region.box(CubeGrid(0.5, 1), (4,))
    with pytest.raises(RadiusError):
        ks_series_discrete(REP, reg, ens, [0.3], KSTruncation(order=1))


def test_ks_series_continuum_matches_rho_direct():
    # two-method consistency at small z on a box large enough that
    # finite-volume effects sit below the comparison tolerance
    z = 0.25 * Z_MAX
    ens = EnsembleParams(z, 1.0)
    reg = Region.box(CubeGrid(0.5, 1), (32,))
    eta = [8.0]
    direct = rho_direct(REP, reg, ens, eta, n_max=16, samples=4000, seed=6)
    ks = ks_series_continuum(REP, ens, eta,
                             KSTruncation(order=2, quad_budget=400), seed=6)
    tol = 3 * math.hypot(direct.stat_err, ks.stat_err) + ks.trunc_bound \
        + direct.trunc_bound + 0.02 * abs(ks.value)
    assert abs(direct.value - ks.value) <= tol


def test_ks_discrete_base_cases():
    reg = Region.box(CubeGrid(0.5, 1), (4,))
    ens = EnsembleParams(0.05, 1.0)
    # N=0 head: z for one anchor, 0 for two
    tr0 = KSTruncation(order=0, quad_budget=4)
    assert ks_series_discrete(REP, reg, ens, [0.3], tr0).value \
        == pytest.approx(0.05)
    assert ks_series_discrete(REP, reg, ens, [0.3, 1.3], tr0).value == 0.0
    # order 1, |s|=2: z^3 e^{-beta phi(x2-x1)} on top of the empty head
    tr1 = KSTruncation(order=1, quad_budget=4)
    est = ks_series_discrete(REP, reg, ens, [0.3, 1.3], tr1)
    expect = 0.05 ** 2 * math.exp(-REP.phi(1.0))
    assert est.value == pytest.approx(expect, rel=1e-12)
    # anchors sharing a cube: chi_minus kills everything
    assert ks_series_discrete(REP, reg, ens, [0.3, 0.4], tr1).value == 0.0


def test_ks_discrete_matches_enumeration():
    ens = EnsembleParams(0.5 * Z_MAX, 1.0)
    reg = Region.box(CubeGrid(0.5, 1), (4,))
    tr = KSTruncation(order=4, quad_budget=4)
    for eta in ([1.02], [0.48, 1.27]):
        ks = ks_series_discrete(REP, reg, ens, eta, tr)
        direct = rho_dilute_direct(REP, reg, ens, eta)
        assert abs(ks.value - direct.value) <= ks.trunc_bound \
            + direct.trunc_bound


def test_series_tail_bound_geometric():
    ens = EnsembleParams(0.9 * Z_MAX, 1.0)
    tails = [series_tail_bound(ens, CB, 0.0, n, 1) for n in range(2, 7)]
    ratios = [b / a for a, b in zip(tails, tails[1:])]
    q_ref = ens.z * CB * math.e
    assert all(r <= q_ref + 0.05 for r in ratios)
    assert all(0 < r < 1 for r in ratios)


def test_pi_weights_normalized_and_fallback():
    w = np.array([0.5, -1.0, math.inf])
    pi = _pi_weights(1.0, 0.0, w)
    assert pi.sum() == pytest.approx(1.0)
    assert pi[1] == 0.0  # below -2B = 0
    all_bad = np.array([-5.0, -9.0])
    pi2 = _pi_weights(1.0, 1.0, all_bad)  # -2B = -2, all below
    assert np.allclose(pi2, 0.5)


def test_permutation_symmetry():
    ens = EnsembleParams(0.03, 1.0)
    reg = Region.box(CubeGrid(0.5, 1), (4,))
    tr = KSTruncation(order=3, quad_budget=4)
    a = ks_series_discrete(REP, reg, ens, [0.3, 1.3], tr).value
    b = ks_series_discrete(REP, reg, ens, [1.3, 0.3], tr).value
    assert a == pytest.approx(b, rel=1e-13)


def test_convergence_report_skips_non_dilute():
    ens = EnsembleParams(0.5, 1.0)
    regions = [Region.box(CubeGrid(a, 1), (int(4 / a),)) for a in (1.0, 0.5)]
    eta = [0.1, 0.4]  # same (centered) cube at a=1, distinct at a=0.5
    rows, notes = convergence_report(REP, ens, eta, regions, n_max=12,
                                     samples=200, seed=4)
    assert len(rows) == 1 and rows[0].a == 0.5
    assert len(notes) == 1 and "a=1" in notes[0]


def test_convergence_report_ideal_gas_diff():
    # diff column matches z^|eta| (1 - (1+z a)^-|eta|) for the ideal gas
    ens = EnsembleParams(0.5, 1.0)
    regions = [Region.box(CubeGrid(a, 1), (int(4 / a),)) for a in (1.0, 0.5)]
    rows, _ = convergence_report(ZERO, ens, [0.25], regions, n_max=18,
                                 samples=400, seed=9)
    for row in rows:
        expect = 0.5 * (1.0 - 1.0 / (1.0 + 0.5 * row.a))
        tol = 3 * (row.rho_full_err + row.rho_minus_err) + 1e-10
        assert abs(row.diff - expect) <= tol
        assert 0 < row.z_deficit < 1
        assert row.z_ratio == pytest.approx(1.0 - row.z_deficit)
