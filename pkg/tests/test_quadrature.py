import math

import mpmath
import numpy as np
import pytest

from hyprel.exceptions import BudgetExceededError, DomainError
from hyprel.geodesics import GeodesicConfig, GeodesicH2, truncated_length_exact
from hyprel.halfspace import DefiningFunction
from hyprel.quadrature import (
    CutoffProfile,
    adaptive_gauss_legendre,
    cutoff_vol,
    geodesic_immersion,
    hemisphere_immersion,
    level_crossings,
    phi_ramp,
    vol_eps,
    weighted_vol_eps,
)
from hyprel.weights import Weight


def test_gauss_legendre_polynomial_exact():
    res = adaptive_gauss_legendre(lambda x: 7 * x ** 15 - x ** 4 + 2, -1.0, 2.0, tol=1e-13)
    exact = 7 * (2 ** 16 - 1) / 16 - (2 ** 5 + 1) / 5 + 6
    assert res.value == pytest.approx(exact, rel=1e-14)
    value, err = res
    assert err <= 1e-13 * max(1.0, abs(exact))


def test_gauss_legendre_smooth_and_peaked():
    res = adaptive_gauss_legendre(lambda x: 1.0 / (1e-4 + x * x), -1.0, 1.0, tol=1e-10)
    exact = 2 * math.atan(1 / 1e-2) / 1e-2
    assert abs(res.value - exact) <= max(res.error_bound, 1e-10 * exact)


def test_budget_exceeded_keeps_estimate():
    with pytest.raises(BudgetExceededError) as info:
        adaptive_gauss_legendre(lambda x: np.abs(x) ** -0.9, 0.0, 1.0, tol=1e-14, budget=2000)
    assert info.value.value is not None and info.value.error_bound > 0


def test_level_crossings():
    cuts = level_crossings(np.sin, 0.0, math.pi, [0.5])
    assert np.allclose(cuts, [math.pi / 6, 5 * math.pi / 6], atol=1e-12)


def test_unit_normals():
    s = geodesic_immersion(GeodesicConfig([(0, 1), (2, 5)]))
    t = np.linspace(0.01, 3.1, 50)
    for k in range(2):
        _, v, _ = s.evaluate(k, t)
        assert np.max(np.abs(np.linalg.norm(v, axis=-1) - 1)) < 1e-12
    h = hemisphere_immersion(2.0)
    _, v, _ = h.evaluate(0, np.linspace(0.01, 1.5, 20), np.full(20, 0.7))
    assert np.max(np.abs(np.linalg.norm(v, axis=-1) - 1)) < 1e-12


@pytest.mark.parametrize("eps", [0.3, 0.1, 1e-2, 1e-3])
def test_geodesic_length_oracle(eps):
    s = geodesic_immersion([GeodesicH2(0.0, 1.0)])
    res = vol_eps(s, None, eps, tol=1e-9)
    exact = truncated_length_exact(GeodesicH2(0.0, 1.0), eps)
    assert abs(res.value - exact) <= max(1e-9, 1e-8)
    assert abs(res.value - exact) <= res.error_bound + 64 * np.finfo(float).eps * exact


@pytest.mark.parametrize("R,eps", [(1.0, 0.1), (1.0, 1e-3), (2.5, 0.05)])
def test_hemisphere_closed_form(R, eps):
    res = vol_eps(hemisphere_immersion(R), None, eps, tol=1e-10, rtol=1e-13)
    exact = 2 * math.pi * (R / eps - 1)
    assert res.value == pytest.approx(exact, rel=1e-12)


def test_empty_truncation_gives_zero():
    s = geodesic_immersion([GeodesicH2(0.0, 1.0)])
    res = vol_eps(s, None, 0.6)
    assert res.value == 0.0 and res.empty
    with pytest.raises(DomainError):
        vol_eps(s, None, 0.0)


def test_monotone_in_eps():
    s = geodesic_immersion(GeodesicConfig([(0, 1), (2, 4)]))
    r = DefiningFunction.tilted(0.3)
    vals = [vol_eps(s, r, e, tol=1e-10).value for e in np.geomspace(0.4, 1e-3, 12)]
    assert np.all(np.diff(vals) > 0)


def test_weighted_constant_and_unit_normal_weights():
    s = geodesic_immersion(GeodesicConfig([(0, 1), (2, 4)]))
    plain = vol_eps(s, None, 0.05, tol=1e-11).value
    assert weighted_vol_eps(s, None, 0.05, Weight.constant(1.0), tol=1e-11).value == pytest.approx(plain, rel=1e-13)
    vv = Weight.from_matrix(np.eye(2))
    assert weighted_vol_eps(s, None, 0.05, vv, tol=1e-11).value == pytest.approx(plain, rel=1e-13)


def test_weighted_vertical_square_oracle():
    # on a semicircle v = (cos t, sin t) and y = R sin t, so the weighted length is int sin t dt
    R, eps = 0.5, 0.05
    th0 = mpmath.asin(mpmath.mpf(eps) / R)
    oracle = float(mpmath.quad(lambda t: mpmath.sin(t) ** 2 / mpmath.sin(t), [th0, mpmath.pi - th0]))
    s = geodesic_immersion([GeodesicH2(0.0, 1.0)])
    assert weighted_vol_eps(s, None, eps, Weight.vertical_square(), tol=1e-12).value == pytest.approx(oracle, abs=1e-11)


def test_two_dimensional_path_agrees_with_revolution_shortcut():
    # a weight forces the outer angular integral; psi = 1 must reproduce the radial shortcut
    h = hemisphere_immersion(1.0)
    a = vol_eps(h, None, 0.2, tol=1e-10).value
    b = weighted_vol_eps(h, None, 0.2, Weight.constant(1.0), tol=1e-8).value
    assert b == pytest.approx(a, rel=1e-9)


def test_off_axis_defining_function_hemisphere():
    # the scaled r is not radial about the hemisphere axis, so the 2D path runs
    h = hemisphere_immersion(1.0)
    r = DefiningFunction.scaled((0.3, 0.0), 0.5)
    val = vol_eps(h, r, 0.2, tol=1e-8).value
    t = np.linspace(0, math.pi / 2, 2001)[1:-1]
    phi = np.linspace(0, 2 * math.pi, 2001)[:-1]
    T, P = np.meshgrid(t, phi)
    pts = np.stack([np.cos(T) * np.cos(P), np.cos(T) * np.sin(P), np.sin(T)], -1)
    dens = np.cos(T) / np.sin(T) ** 2 * (r(pts) >= 0.2)
    crude = dens.sum() * (t[1] - t[0]) * (phi[1] - phi[0])
    assert val == pytest.approx(crude, rel=5e-3)


def test_cutoff_profile_shape():
    c = CutoffProfile(0.2, 0.5, 0.05)
    t = np.array([0.1, 0.15, 0.2, 0.35, 0.5, 0.55, 0.7])
    assert np.allclose(c(t), [0, 0, 1, 1, 1, 0, 0])
    assert np.all(np.abs(np.diff(c(np.linspace(0, 1, 10001)))) <= 1.5 / 0.05 * 1e-4 + 1e-12)
    assert phi_ramp(0.175, 0.2, 0.05) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        CutoffProfile(0.05, 0.5, 0.05)
    with pytest.raises(DomainError):
        CutoffProfile(0.3, 0.2, 0.05)


def test_cutoff_converges_to_sharp_truncation():
    s = geodesic_immersion([GeodesicH2(0.0, 1.0)])
    sharp = vol_eps(s, None, 0.1, tol=1e-12).value
    gaps = []
    for d in (0.02, 0.01, 0.005, 0.0025):
        gaps.append(abs(cutoff_vol(s, None, CutoffProfile(0.1, 1.0, d), tol=1e-12).value - sharp))
    gaps = np.array(gaps)
    assert np.all(gaps / np.array([0.02, 0.01, 0.005, 0.0025]) < 20)
    assert np.polyfit(np.log([0.02, 0.01, 0.005, 0.0025]), np.log(gaps), 1)[0] == pytest.approx(1.0, abs=0.05)


def test_cutoff_thin_annulus_mass():
    s = geodesic_immersion([GeodesicH2(0.0, 1.0)])
    masses = np.array([cutoff_vol(s, None, CutoffProfile(0.1, 0.1, d), tol=1e-12).value for d in (0.01, 0.005)])
    # two crossings, each contributing about (ds/y per unit height) * delta
    assert masses[0] / masses[1] == pytest.approx(2.0, rel=0.05)


def test_cutoff_covering_everything_is_total_area():
    # the profile is 1 on the whole truncated curve: compare against the sharp truncation at t1
    s = geodesic_immersion([GeodesicH2(0.0, 1.0)])
    a = cutoff_vol(s, None, CutoffProfile(0.2, 1.0, 0.05), tol=1e-12).value
    b = vol_eps(s, None, 0.2, tol=1e-12).value
    c = vol_eps(s, None, 0.15, tol=1e-12).value
    assert b < a < c


def test_truncation_tail_slope():
    s1 = geodesic_immersion(GeodesicConfig([(0, 1), (2, 4)]))
    s2 = geodesic_immersion(GeodesicConfig([(0, 2), (1, 4)]))
    eps = np.geomspace(0.2, 0.2 / 64, 7)
    d = np.array([vol_eps(s1, None, e, 1e-12).value - vol_eps(s2, None, e, 1e-12).value for e in eps])
    inc = np.abs(np.diff(d))
    assert np.polyfit(np.log(eps[1:]), np.log(inc), 1)[0] >= 1.0
