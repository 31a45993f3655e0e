import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from hyprel.exceptions import DomainError, EmptyTruncationError, GeometryError
from hyprel.expansion import fit_expansion, geometric_eps_grid, relative_entropy_numeric
from hyprel.halfspace import DefiningFunction
from hyprel.minimal import (
    ShootingControls,
    alexakis_mazzeo_area,
    boundary_taylor,
    hemisphere_surface,
    hemisphere_vol_eps,
    separation_rate,
    shoot,
)
from hyprel.quadrature import vol_eps


def _series_oracle(r0, a3):
    """Rational series solution of the Euler-Lagrange equation of int rho sqrt(1 + rho'^2) / y^2 dy."""
    y = sp.symbols("y", positive=True)
    f = sp.Function("rho")
    el = sp.calculus.euler.euler_equations(f(y) * sp.sqrt(1 + f(y).diff(y) ** 2) / y ** 2, f(y), y)[0].lhs
    a2, a4 = sp.symbols("a2 a4")
    ser = r0 + a2 * y ** 2 + a3 * y ** 3 + a4 * y ** 4
    expr = sp.simplify(el.subs(f(y), ser).doit() * y ** 3 * sp.sqrt(1 + sp.diff(ser, y) ** 2) ** 3)
    poly = sp.expand(sp.series(expr, y, 0, 4).removeO())
    sol = sp.solve([poly.coeff(y, 1), poly.coeff(y, 3)], [a2, a4], dict=True)[0]
    return sol[a2], sol[a4]


@pytest.mark.parametrize("r0,a3", [(1, 0), (1, sp.Rational(1, 3)), (2, sp.Rational(-3, 4)), (sp.Rational(1, 2), 5)])
def test_series_matches_symbolic_recursion(r0, a3):
    a2, a4 = _series_oracle(sp.nsimplify(r0), sp.nsimplify(a3))
    tay = boundary_taylor(float(r0), float(a3), 4)
    c = tay.coefficients
    assert c[1] == 0.0
    assert c[2] == pytest.approx(float(a2), rel=1e-14)
    assert c[3] == float(a3)
    assert c[4] == pytest.approx(float(a4), rel=1e-13, abs=1e-14)


def test_hemisphere_series():
    c = boundary_taylor(1.0, 0.0, 4).coefficients
    assert c == pytest.approx((1.0, 0.0, -0.5, 0.0, -0.125), abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(r0=st.floats(0.1, 10), a3=st.floats(-10, 10))
def test_series_structure(r0, a3):
    tay = boundary_taylor(r0, a3, 4)
    assert tay.coefficients[1] == 0.0
    assert tay.coefficients[2] == pytest.approx(-0.5 / r0, rel=1e-14)
    # a4 is affine in a3
    lin = boundary_taylor(r0, 0.0).coefficients[4]
    slope = boundary_taylor(r0, 1.0).coefficients[4] - lin
    assert tay.coefficients[4] == pytest.approx(lin + slope * a3, rel=1e-10, abs=1e-10)


def test_series_validation():
    with pytest.raises(DomainError):
        boundary_taylor(0.0, 1.0)
    with pytest.raises(DomainError):
        boundary_taylor(1.0, 0.0, 5)


def test_hemisphere_closed_forms():
    assert hemisphere_vol_eps(1.0, 0.1) == pytest.approx(18 * math.pi)
    with pytest.raises(EmptyTruncationError):
        hemisphere_vol_eps(2.0, 2.0)
    am = alexakis_mazzeo_area(hemisphere_surface(1.0))
    assert am["area"] == pytest.approx(-2 * math.pi, abs=1e-12)


def test_shooting_a3_zero_is_hemisphere():
    shot = shoot(1.0, 0.0, ShootingControls())
    # the hemisphere reaches the axis instead of landing
    assert shot.status == "reached-axis"


def test_landing_map_continuity():
    c = ShootingControls()
    a = np.linspace(0.3, 0.6, 5)
    coarse = np.array([shoot(1.0, v, c).landing for v in a])
    mids = np.array([shoot(1.0, v, c).landing for v in 0.5 * (a[1:] + a[:-1])])
    assert np.all(np.isfinite(coarse))
    # the midpoints sit between their neighbours up to curvature of the map
    interp = 0.5 * (coarse[1:] + coarse[:-1])
    assert np.max(np.abs(mids - interp)) < 1e-2


def test_catenoids_found(catenoid_pair):
    s1, s2 = catenoid_pair.surfaces
    assert s1.topology == "annulus" and s1.euler_characteristic == 0
    for s in (s1, s2):
        assert s.radii == (1.0, 2.0)
        assert abs(s.landing - 2.0) < 1e-7
        assert max(abs(v) for v in s.boundary_slopes()) < 1e-2
        assert s.ode_residual() <= 1e-8
        assert s.mean_curvature_fd() <= 1e-6
    assert np.all(catenoid_pair.trace[:, 0][:-1] <= catenoid_pair.trace[:, 0][1:])


def test_profile_samples(catenoid_pair, tmp_path):
    s = catenoid_pair.surfaces[0]
    prof = s.profile_samples()
    assert np.all(np.diff(prof[:, 0]) >= 0)
    assert prof[0, 2] == 0.0 and prof[-1, 2] == pytest.approx(0.0, abs=1e-12)
    assert np.all(prof[1:-1, 2] > 0) and np.all(prof[:, 1] > 0)
    s.write_profile_csv(tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().startswith("s,rho,y\n")
    catenoid_pair.write_trace_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().startswith("a3,landing_radius\n")


def test_alexakis_mazzeo_matches_fit(catenoid_pair):
    for s in catenoid_pair.surfaces:
        am = alexakis_mazzeo_area(s)
        assert am["area"] < 0
        rows = [(e, *vol_eps(s.immersion(), None, e, 1e-9, rtol=1e-13))
                for e in geometric_eps_grid(0.1 * s.max_height(), 1e-3)]
        fit = fit_expansion(rows, 2)
        assert abs(fit.constant_term - am["area"]) <= 1e-2 * abs(am["area"])


def test_separation_rate(catenoid_pair):
    s1, s2 = catenoid_pair.surfaces
    for side in (0, 1):
        assert 2.7 <= separation_rate(s1, s2, side=side).slope <= 3.3
    same = separation_rate(s1, s1)
    assert same.coincident
    with pytest.raises(GeometryError):
        separation_rate(s1, hemisphere_surface(1.0))


def test_catenoid_pair_entropy_identity(catenoid_pair):
    s1, s2 = catenoid_pair.surfaces
    grid = geometric_eps_grid(0.1 * min(s1.max_height(), s2.max_height()), 1e-3)
    fits = []
    for s in (s1, s2):
        rows = [(e, *vol_eps(s.immersion(), None, e, 1e-9, rtol=1e-13)) for e in grid]
        fits.append(fit_expansion(rows, 2))
    target = fits[0].constant_term - fits[1].constant_term
    bar_fit = fits[0].constant_error + fits[1].constant_error
    values = []
    for r in (DefiningFunction.height(), DefiningFunction.tilted(0.3)):
        est = relative_entropy_numeric(s1.immersion(), s2.immersion(), r, grid, tol=1e-9)
        assert abs(est.value - target) <= est.error_bar + bar_fit
        values.append(est.value)
    assert abs(values[0] - values[1]) <= 1e-4
