import math
from fractions import Fraction

import numpy as np
import pytest

from nvx.geometry import ORIENTATIONS, FieldPoint, Orientation, degeneracy_angles
from nvx.hamiltonian import Isotope, PhysicalConstants
from nvx.spectra import (
    SpectraError,
    find_degeneracies,
    hyperfine_spacing,
    nv_angle_to_perp,
    odmr_map,
    transition_lines,
)

C = PhysicalConstants()


def test_zero_field_lines_at_D():
    lines = transition_lines(Orientation.LAMBDA, FieldPoint(0, 0), C, Isotope.NONE)
    assert len(lines) == 2
    assert all(ln.frequency == pytest.approx(C.D) for ln in lines)


def test_axial_lines():
    lines = transition_lines(Orientation.LAMBDA, FieldPoint(1.24, 0), C, Isotope.NONE)
    f = {ln.branch: ln.frequency for ln in lines}
    assert f["plus"] == pytest.approx(C.D + C.gamma_e * 1.24, abs=1e-9)
    assert f["minus"] == pytest.approx(C.D - C.gamma_e * 1.24, abs=1e-9)


def test_kappa_branches_meet_near_zero_axial():
    lines = transition_lines(Orientation.KAPPA, FieldPoint(1.24, 0.506), C, Isotope.N15)
    plus = sorted(ln.frequency for ln in lines if ln.branch == "plus")
    minus = sorted(ln.frequency for ln in lines if ln.branch == "minus")
    assert min(abs(p - m) for p in plus for m in minus) < 0.5


def test_map_size_and_order():
    m = odmr_map([Orientation.CHI], 0.5, [0.1, 0.2, 0.3], C, Isotope.NONE)
    assert len(m.lines) == 6
    assert [ln.field.B_perp for ln in m.lines] == [0.1, 0.1, 0.2, 0.2, 0.3, 0.3]
    with pytest.raises(SpectraError):
        odmr_map([Orientation.CHI], 0.5, [0.3, 0.2], C, Isotope.NONE)


def test_map_groups_n15():
    grid = np.round(np.arange(0.8, 1.3001, 0.05), 6)
    m = odmr_map(ORIENTATIONS, 1.24, grid, C, Isotope.N15)
    f = m.frequencies()
    # at the double crossing, upper-band lines form one group from two orientations
    b = list(grid).index(1.0)
    upper = {k[0] for k, v in f.items() if v[b] > C.D}
    assert len(upper) == 4


def test_map_lipschitz():
    grid = np.round(np.arange(0.3, 1.3001, 0.01), 6)
    m = odmr_map(ORIENTATIONS, 1.24, grid, C, Isotope.N15)
    for k, v in m.frequencies().items():
        jumps = np.abs(np.diff(v))
        assert np.all(jumps < 2 * C.gamma_e * 0.01), k


def test_electron_only_events_match_geometry():
    B_par = 1.24
    grid = np.round(np.arange(0.0, 3.0001, 0.02), 6)
    m = odmr_map(ORIENTATIONS, B_par, grid, C, Isotope.NONE)
    events = find_degeneracies(m, gap_tolerance=0.05)
    expected = [B_par * math.tan(math.radians(a.theta)) for a in degeneracy_angles()
                if 0 < a.theta < 90 and a.kind == "pair-overlap"]
    assert expected == pytest.approx([1.0124, 2.0248], abs=1e-3)
    for x in expected:
        assert min(abs(e.B_perp - x) for e in events) < 1e-3
    ev = min(events, key=lambda e: abs(e.B_perp - expected[0]))
    pairs = {frozenset((a[0], b[0])) for a, b in ev.pairs}
    L, P, Ch, K = ORIENTATIONS
    assert {frozenset((L, Ch)), frozenset((P, K))} <= pairs


def test_event_gaps_within_tolerance():
    grid = np.round(np.arange(0.3, 1.3001, 0.01), 6)
    m = odmr_map(ORIENTATIONS, 1.24, grid, C, Isotope.N15)
    tol = 0.05
    for e in find_degeneracies(m, tol):
        assert e.min_gap <= tol
        vals = m.evaluate(e.B_perp)
        assert min(abs(vals[a] - vals[b]) for a, b in e.pairs) <= tol


def test_hyperfine_spacing_formula():
    assert hyperfine_spacing(2.8024, 0.0, C) == pytest.approx(0.1)
    with pytest.raises(SpectraError):
        hyperfine_spacing(1.0, 90.0, C)
    alpha = nv_angle_to_perp(Orientation.KAPPA)
    assert alpha == pytest.approx(math.degrees(math.acos(math.sqrt(2 / 3))), abs=1e-9)
    assert nv_angle_to_perp(Orientation.LAMBDA) == pytest.approx(90.0)


def _grouped(xs, window):
    # the two orientation pairs of one hyperfine crossing can sit a few uT apart
    groups = []
    for x in sorted(xs):
        if groups and x - groups[-1][-1] <= window:
            groups[-1].append(x)
        else:
            groups.append([x])
    return [float(np.mean(g)) for g in groups]


def test_hyperfine_spacing_matches_diagonalization():
    grid = np.round(np.arange(0.7, 1.3001, 0.01), 6)
    alpha = nv_angle_to_perp(Orientation.KAPPA)
    for iso, n_events in ((Isotope.N15, 3), (Isotope.N14, 5)):
        m = odmr_map(ORIENTATIONS, 1.24, grid, C, iso)
        ev = _grouped([e.B_perp for e in find_degeneracies(m, 0.05)], 0.015)
        assert len(ev) == n_events
        spacing = np.mean(np.diff(ev))
        formula = hyperfine_spacing(C.hf(iso).A_par, alpha, C)
        assert spacing == pytest.approx(formula, rel=0.03)


def test_transition_labels_unique():
    for iso in Isotope:
        for b in (0.0, 0.5, 1.05):
            lines = transition_lines(Orientation.KAPPA, FieldPoint(1.24, b), C, iso)
            keys = [ln.key for ln in lines]
            assert len(set(keys)) == len(keys) == 2 * iso.dim
            assert all(ln.frequency > 0 for ln in lines)
            assert {ln.m_I for ln in lines} == {iso.spin - k for k in range(iso.dim)}
