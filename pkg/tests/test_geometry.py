import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvx.geometry import (
    ORIENTATIONS,
    PAR_AXIS,
    PERP_AXIS,
    FieldPoint,
    GeometryError,
    Orientation,
    axial_transverse_projection,
    degeneracy_angles,
    field_at_angle,
    polar_angle,
    resolve_field,
)

finite = st.floats(-5, 5, allow_nan=False)


def test_axes_unit_and_tetrahedral():
    for o in ORIENTATIONS:
        assert np.linalg.norm(o.axis) == pytest.approx(1.0, abs=1e-12)
    for a, b in itertools.combinations(ORIENTATIONS, 2):
        assert float(a.axis @ b.axis) == pytest.approx(-1.0 / 3.0, abs=1e-12)


def test_axis_convention():
    s = 1 / math.sqrt(3)
    assert np.allclose(Orientation.LAMBDA.axis, [s, s, s])
    assert np.allclose(Orientation.PHI.axis, [-s, -s, s])
    assert np.allclose(Orientation.CHI.axis, [s, -s, -s])
    assert np.allclose(Orientation.KAPPA.axis, [-s, s, -s])
    # the transverse field direction is orthogonal to lambda and phi
    assert abs(PERP_AXIS @ Orientation.LAMBDA.axis) < 1e-15
    assert abs(PERP_AXIS @ Orientation.PHI.axis) < 1e-15


def test_resolve_field_examples():
    s = 1 / math.sqrt(3)
    assert np.allclose(resolve_field(FieldPoint(1, 0)), [s, s, s], atol=1e-15)
    assert np.allclose(resolve_field(FieldPoint(0, 1)), [-1 / math.sqrt(2), 1 / math.sqrt(2), 0], atol=1e-15)
    assert np.linalg.norm(resolve_field(FieldPoint(1.24, 1.05))) == pytest.approx(math.hypot(1.24, 1.05), abs=1e-12)
    assert np.allclose(resolve_field(FieldPoint(0, 0, (0.1, -0.2, 0.3))), [0.1, -0.2, 0.3])


@given(finite, finite, finite, finite, st.tuples(finite, finite, finite), st.tuples(finite, finite, finite))
def test_resolve_field_linear(a1, b1, a2, b2, g1, g2):
    lhs = resolve_field(FieldPoint(a1 + a2, b1 + b2, tuple(x + y for x, y in zip(g1, g2))))
    rhs = resolve_field(FieldPoint(a1, b1, g1)) + resolve_field(FieldPoint(a2, b2, g2))
    assert np.allclose(lhs, rhs, atol=1e-12)


@given(st.tuples(finite, finite, finite), st.sampled_from(ORIENTATIONS))
def test_projection_pythagoras(B, o):
    B = np.array(B)
    ax, tr = axial_transverse_projection(B, o)
    assert tr >= 0
    assert ax * ax + tr * tr == pytest.approx(float(B @ B), rel=1e-10, abs=1e-12)


def test_projection_examples():
    B = 2.0 * Orientation.LAMBDA.axis
    ax, tr = axial_transverse_projection(B, Orientation.LAMBDA)
    assert ax == pytest.approx(2.0) and tr == pytest.approx(0.0, abs=1e-12)
    B = resolve_field(FieldPoint(1, 0))
    for o in (Orientation.PHI, Orientation.CHI, Orientation.KAPPA):
        assert abs(axial_transverse_projection(B, o)[0]) == pytest.approx(1 / 3, abs=1e-12)
    t = math.radians(22.2)
    ax, _ = axial_transverse_projection(resolve_field(FieldPoint(math.cos(t), math.sin(t))), Orientation.KAPPA)
    assert abs(ax) < 2e-3


def test_polar_angle():
    assert polar_angle(FieldPoint(1, 0)) == pytest.approx(0.0)
    assert polar_angle(FieldPoint(0, 1)) == pytest.approx(90.0)
    assert polar_angle(FieldPoint(1.24, 1.05)) == pytest.approx(40.26, abs=0.05)
    assert 0 <= polar_angle(FieldPoint(-1, -1e-3)) < 180
    with pytest.raises(GeometryError):
        polar_angle(FieldPoint(0, 0, (1, 1, 1)))


def test_degeneracy_angles_closed_form():
    got = degeneracy_angles()
    thetas = [a.theta for a in got]
    expected = [0.0,
                math.degrees(math.atan(math.sqrt(6) / 6)),
                math.degrees(math.atan(math.sqrt(6) / 3)),
                math.degrees(math.atan(2 * math.sqrt(6) / 3)),
                90.0]
    assert thetas == pytest.approx(expected, abs=1e-10)
    kinds = [a.kind for a in got]
    assert kinds == ["triple-overlap", "transverse-axis", "pair-overlap", "pair-overlap", "pair-overlap"]
    L, P, C, K = ORIENTATIONS
    assert got[0].participants == {P, C, K}
    assert got[1].participants == {K}
    assert set(got[2].pairs) == {(L, C), (P, K)}
    assert set(got[3].pairs) == {(L, K)}
    assert set(got[4].pairs) == {(L, P), (C, K)}


@pytest.mark.parametrize("mag", [0.3, 1.0, 7.5])
def test_degeneracy_angles_projection_check(mag):
    for a in degeneracy_angles():
        B = resolve_field(field_at_angle(a.theta, mag))
        proj = {o: abs(axial_transverse_projection(B, o)[0]) for o in ORIENTATIONS}
        if a.kind == "transverse-axis":
            for o in a.participants:
                assert proj[o] < 1e-10 * mag
        else:
            for group in a.pairs:
                vals = [proj[o] for o in group]
                assert max(vals) - min(vals) < 1e-10 * mag


def test_degeneracy_angles_complete():
    # brute force: sign changes of |a_i| - |a_j| and of a_i over a 0.01 deg sweep
    th = np.arange(0.0, 90.0 + 1e-9, 0.01)
    t = np.radians(th)
    B = np.outer(np.cos(t), PAR_AXIS) + np.outer(np.sin(t), PERP_AXIS)
    proj = {o: B @ o.axis for o in ORIENTATIONS}
    known = [a.theta for a in degeneracy_angles()]
    hits = []
    for f in [np.abs(proj[a]) - np.abs(proj[b]) for a, b in itertools.combinations(ORIENTATIONS, 2)] + \
             [proj[o] for o in ORIENTATIONS]:
        zero = np.flatnonzero(np.abs(f) < 1e-12)
        flips = np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)
        hits += list(th[zero]) + list(th[flips])
    for h in hits:
        assert min(abs(h - k) for k in known) <= 0.011
