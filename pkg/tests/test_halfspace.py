import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyprel.exceptions import DomainError
from hyprel.halfspace import (
    DefiningFunction,
    HalfSpacePoint,
    MobiusMap,
    NormalField,
    conformal_factor,
    eval_defining,
    hyperbolic_distance,
    mobius_apply,
    normal_projection_field,
)

coord = st.floats(-5, 5, allow_nan=False)
height = st.floats(1e-3, 5, allow_nan=False)


def test_point_validation():
    with pytest.raises(DomainError):
        HalfSpacePoint((0.0,), 0.0)
    with pytest.raises(DomainError):
        HalfSpacePoint((0.0,), -1.0)
    p = HalfSpacePoint((1.0, 2.0), 0.5)
    assert p.n == 2
    assert HalfSpacePoint.from_array(p.as_array()) == p


def test_conformal_factor():
    assert conformal_factor(HalfSpacePoint((3.0,), 0.5)) == 4.0


def test_distance_vertical_segment():
    # along a vertical line the distance is log of the height ratio
    d = hyperbolic_distance(HalfSpacePoint((0.0,), 1.0), HalfSpacePoint((0.0,), math.e ** 2))
    assert d == pytest.approx(2.0, abs=1e-14)


def test_distance_matches_arccosh():
    p, q = np.array([0.3, 0.7]), np.array([-1.1, 2.5])
    ref = math.acosh(1 + np.sum((p - q) ** 2) / (2 * p[1] * q[1]))
    assert hyperbolic_distance(p, q) == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("r", [DefiningFunction.height(), DefiningFunction.scaled(0.0, 1.0),
                               DefiningFunction.scaled(0.5, 0.3), DefiningFunction.tilted(0.3),
                               DefiningFunction.tilted(-0.5)])
def test_defining_functions_comparable_to_height(r):
    xs, ys = np.meshgrid(np.linspace(-1, 1, 21), np.geomspace(1e-4, 1, 21))
    pts = np.stack([xs, ys], axis=-1)
    ratio = r(pts) / ys
    assert np.all(ratio >= 0.25) and np.all(ratio <= 4.0)
    assert np.allclose(r.ratio_to_height(pts), ratio, rtol=1e-14)


def test_defining_function_roundtrip_and_point_eval():
    for r in (DefiningFunction.height(), DefiningFunction.scaled((0.2,), 0.7), DefiningFunction.tilted(0.3)):
        assert DefiningFunction.from_dict(r.to_dict()) == r
    assert eval_defining(DefiningFunction.tilted(0.5), HalfSpacePoint((9.0,), 0.2)) == pytest.approx(0.22)
    with pytest.raises(DomainError):
        DefiningFunction.from_dict({"kind": "wobbly"})


def test_radial_symmetry_flag():
    assert DefiningFunction.height().is_radial_about((1.0, 2.0))
    assert DefiningFunction.scaled((0.0, 0.0), 1.0).is_radial_about((0.0, 0.0))
    assert not DefiningFunction.scaled((0.5, 0.0), 1.0).is_radial_about((0.0, 0.0))


mobius = st.tuples(coord, coord, coord, coord).filter(lambda t: t[0] * t[3] - t[1] * t[2] > 0.1)


@settings(max_examples=200, deadline=None)
@given(m=mobius, p=st.tuples(coord, height), q=st.tuples(coord, height))
def test_mobius_preserves_distance(m, p, q):
    f = MobiusMap(*m)
    P, Q = HalfSpacePoint((p[0],), p[1]), HalfSpacePoint((q[0],), q[1])
    d0 = hyperbolic_distance(P, Q)
    d1 = hyperbolic_distance(f.apply_point(P), f.apply_point(Q))
    assert d1 == pytest.approx(d0, rel=1e-9, abs=1e-9)


def test_mobius_group_operations():
    m = MobiusMap(2.0, 1.0, 1.0, 3.0)
    ident = m @ m.inverse()
    p = HalfSpacePoint((0.4,), 0.9)
    q = ident.apply_point(p)
    assert q.x[0] == pytest.approx(0.4, abs=1e-14) and q.y == pytest.approx(0.9, abs=1e-14)
    assert m.pole() == -3.0
    with pytest.raises(DomainError):
        m.apply_boundary(-3.0)
    with pytest.raises(DomainError):
        MobiusMap(0.0, 1.0, 1.0, 0.0)
    assert mobius_apply(m, 1.0) == pytest.approx(0.75)
    assert isinstance(mobius_apply(m, p), HalfSpacePoint)


def test_normal_field_on_semicircle():
    f = NormalField(0.0, 1.0)
    for th in (0.3, 1.0, math.pi / 2, 2.5):
        q = np.array([math.cos(th), math.sin(th)])
        vec, diag = normal_projection_field(f, q)
        assert np.allclose(vec, math.sin(th) * q, atol=1e-15)
        assert diag["height_component"] == pytest.approx(math.sin(th) ** 2, abs=1e-15)


def test_normal_field_apex_is_vertical():
    f = NormalField(2.0, 1.5)
    vec, _ = normal_projection_field(f, HalfSpacePoint((2.0,), 0.9))
    assert vec[0] == 0.0 and vec[1] == pytest.approx(1.5)
    assert np.linalg.norm(vec) <= 1.5 + 1e-15


def test_normal_field_center_rejected():
    with pytest.raises(DomainError):
        NormalField(0.0, 1.0).field(np.array([0.0, 0.0]))


@pytest.mark.parametrize("rad", [0.8, 1.0, 1.3])
def test_normal_field_boundary_rates(rad):
    f = NormalField(0.0, 1.0)
    ys = np.geomspace(1e-4, 1e-1, 12)
    q = np.stack([np.sqrt(rad ** 2 - ys ** 2), ys], axis=-1)
    hc = np.abs(f.field(q)[:, 1])
    div = np.abs(f.hyperbolic_divergence(q))
    assert np.polyfit(np.log(ys), np.log(hc), 1)[0] >= 1.9
    assert np.polyfit(np.log(ys), np.log(div), 1)[0] >= 0.9
    # height component / y^2 tends to 1/R along the surface itself
    if rad == 1.0:
        assert hc[0] / ys[0] ** 2 == pytest.approx(1.0, rel=1e-6)
