import math

import numpy as np
import pytest

from quasilattice.potential import (AssumptionAParams, CertificationError,
                                    Potential, activity_radius,
                                    certify_assumption_a, mayer_c_beta)


def test_family_constructors_validate():
    with pytest.raises(ValueError):
        Potential.pure_repulsive(-1.0, 2.0, 1)
    with pytest.raises(ValueError):
        Potential.power_core_with_tail(1.0, 2.0, 1.0, 1.0, 1)  # s <= d+eps0
    with pytest.raises(ValueError):
        Potential.zero(1)  # needs the explicit test_only flag
    Potential.zero(1, test_only=True)


def test_phi_rejects_nonpositive_distance():
    p = Potential.pure_repulsive(1.0, 2.0, 1)
    with pytest.raises(ValueError):
        p.phi(0.0)
    with pytest.raises(ValueError):
        p.phi(np.array([1.0, -0.5]))


def test_split_reconstructs_phi():
    p = Potential.power_core_with_tail(1.0, 4.0, 0.5, 1.0, 1)
    r = np.geomspace(0.05, 50.0, 400)
    plus, minus = p.split(r)
    assert np.all(plus >= 0) and np.all(minus >= 0)
    assert np.allclose(plus - minus, p.phi(r))
    assert np.all(plus * minus == 0.0)


def test_zero_crossing_and_peak():
    p = Potential.power_core_with_tail(1.0, 4.0, 0.5, 1.0, 1)
    rc = p.zero_crossing
    assert abs(float(p.phi(rc))) < 1e-12
    rp = p.attraction_peak
    grid = np.geomspace(rc * 1.0001, 100.0, 5000)
    assert float(p.phi_minus(rp)) >= float(np.max(p.phi_minus(grid))) - 1e-10

    lj = Potential.lennard_jones(1.0, 1.0)
    assert lj.zero_crossing == 1.0
    assert abs(float(lj.phi(lj.attraction_peak)) + 1.0) < 1e-12


def test_certification_families():
    for p in (Potential.pure_repulsive(1.0, 2.0, 1),
              Potential.power_core_with_tail(1.0, 4.0, 0.1, 1.0, 1),
              Potential.lennard_jones(1.0, 1.0)):
        cert = certify_assumption_a(p)
        assert 0 < cert.r0 < cert.R
        assert cert.phi0 > 0 and cert.phi1 > 0 and cert.eps0 > 0
    with pytest.raises(CertificationError):
        certify_assumption_a(Potential.zero(1, test_only=True))


def test_certified_bounds_hold_on_random_grid():
    rng = np.random.default_rng(1234)
    p = Potential.power_core_with_tail(1.0, 4.0, 0.1, 1.0, 1)
    cert = certify_assumption_a(p)
    r_core = cert.r0 * rng.random(2000).clip(1e-6, 1.0)
    assert np.all(p.phi(r_core) >= cert.phi0 * r_core ** (-cert.s) - 1e-12)
    r_tail = cert.R * (1.0 + 100.0 * rng.random(2000))
    lower = -cert.phi1 * r_tail ** (-(p.dimension + cert.eps0))
    assert np.all(p.phi(r_tail) >= lower - 1e-12)


def test_assumption_params_validate():
    with pytest.raises(ValueError):
        AssumptionAParams(r0=1.0, R=0.5, phi0=1.0, phi1=1.0, s=2.0, eps0=1.0)


def test_mayer_c_beta_analytic_gaussian_tail():
    # phi = 1/r^2 in d=1: C(beta) = 2 sqrt(pi beta)
    p = Potential.pure_repulsive(1.0, 2.0, 1)
    for beta in (0.5, 1.0, 2.0):
        est = mayer_c_beta(p, beta)
        exact = 2.0 * math.sqrt(math.pi * beta)
        assert abs(est.value - exact) <= est.trunc_bound + 1e-9


def test_mayer_c_beta_hard_core_and_zero():
    hc = Potential.hard_core(0.5, 1)
    assert mayer_c_beta(hc, 1.0).value == pytest.approx(1.0, abs=1e-12)
    hc3 = Potential.hard_core(1.0, 3)
    assert mayer_c_beta(hc3, 2.0).value == pytest.approx(4 * math.pi / 3)
    z = Potential.zero(1, test_only=True)
    assert mayer_c_beta(z, 1.0).value == 0.0


def test_activity_radius():
    p = Potential.pure_repulsive(1.0, 2.0, 1)
    c = mayer_c_beta(p, 1.0).value
    assert activity_radius(p, 1.0, 0.0, c) == pytest.approx(
        math.exp(-1.0) / c)
    assert activity_radius(p, 1.0, 1.0, c) < activity_radius(p, 1.0, 0.0, c)
    z = Potential.zero(1, test_only=True)
    assert activity_radius(z, 1.0, 0.0) == math.inf
    with pytest.raises(ValueError):
        activity_radius(p, 1.0, -0.5, c)
