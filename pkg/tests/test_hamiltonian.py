import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvx.geometry import ORIENTATIONS, Orientation
from nvx.hamiltonian import (
    HamiltonianError,
    Isotope,
    PhysicalConstants,
    basis_labels,
    crystal_spin_operators,
    dipolar_hamiltonian,
    eigensystem,
    is_hermitian,
    local_frame,
    single_nv_hamiltonian,
    spin_matrices,
    two_nv_hamiltonian,
)

C = PhysicalConstants()
vec = st.tuples(*[st.floats(-3, 3, allow_nan=False)] * 3)
isos = st.sampled_from(list(Isotope))
orients = st.sampled_from(ORIENTATIONS)


def transitions(H):
    w = np.linalg.eigvalsh(H)
    return np.sort(np.abs(w[:, None] - w[None, :]).ravel())


def test_spin_matrices():
    sx, sy, sz = spin_matrices(1)
    assert np.allclose(sz, np.diag([1, 0, -1]))
    assert np.allclose(sx @ sx + sy @ sy + sz @ sz, 2 * np.eye(3))
    for s in (Fraction(1, 2), 1):
        sx, sy, sz = spin_matrices(s)
        assert np.allclose(sx @ sy - sy @ sx, 1j * sz)
    assert np.allclose(np.linalg.eigvalsh(spin_matrices(Fraction(1, 2))[0]), [-0.5, 0.5])
    for bad in (0, Fraction(3, 2), 2):
        with pytest.raises(HamiltonianError):
            spin_matrices(bad)


def test_local_frame_rotation():
    for o in ORIENTATIONS:
        R = local_frame(o)
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-14)
        assert np.linalg.det(R) == pytest.approx(1.0)
        assert np.allclose(R[:, 2], o.axis, atol=1e-14)


def test_zero_field_spectrum():
    w = np.linalg.eigvalsh(single_nv_hamiltonian(Orientation.CHI, np.zeros(3), C, Isotope.NONE))
    assert np.allclose(w, [0, C.D, C.D])


@pytest.mark.parametrize("o", ORIENTATIONS)
def test_axial_zeeman(o):
    H = single_nv_hamiltonian(o, 1.0 * o.axis, C, Isotope.NONE)
    w = np.linalg.eigvalsh(H)
    assert np.allclose(np.sort(w[1:] - w[0]), [C.D - C.gamma_e, C.D + C.gamma_e], atol=1e-9)


def test_n15_axial_hyperfine_split_first_order():
    # first-order oracle: lines D +- gamma B +- A_par/2 for m_I = +-1/2, shifted only at
    # second order by A_perp^2 / D
    o = Orientation.LAMBDA
    H = single_nv_hamiltonian(o, 1.0 * o.axis, C, Isotope.N15)
    es = eigensystem(H, basis_labels(Isotope.N15))
    E = {lab: v for lab, v in zip(es.labels, es.values)}
    h = Fraction(1, 2)
    for ms in (1, -1):
        f_up = E[(ms, h)] - E[(0, h)]
        f_dn = E[(ms, -h)] - E[(0, -h)]
        assert abs(f_up - f_dn) == pytest.approx(abs(C.hf(Isotope.N15).A_par), abs=0.02)


@given(orients, vec, isos)
def test_hermitian_and_trace_field_independent(o, B, iso):
    H = single_nv_hamiltonian(o, np.array(B), C, iso)
    H0 = single_nv_hamiltonian(o, np.zeros(3), C, iso)
    assert is_hermitian(H)
    assert np.trace(H).real == pytest.approx(np.trace(H0).real, abs=1e-9)


@given(orients, vec, isos)
def test_field_reversal_transition_invariance(o, B, iso):
    B = np.array(B)
    a = transitions(single_nv_hamiltonian(o, B, C, iso))
    b = transitions(single_nv_hamiltonian(o, -B, C, iso))
    assert np.max(np.abs(a - b)) < 1e-6


@given(orients, vec, st.floats(0, 2 * math.pi))
def test_spectrum_azimuth_independent(o, B, phi):
    # an extra rotation about the NV axis must not change the spectrum
    B = np.array(B)
    n = o.axis
    K = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    Rz = np.eye(3) + math.sin(phi) * K + (1 - math.cos(phi)) * K @ K
    for iso in (Isotope.N14, Isotope.N15):
        w1 = np.linalg.eigvalsh(single_nv_hamiltonian(o, B, C, iso))
        w2 = np.linalg.eigvalsh(single_nv_hamiltonian(o, Rz @ B, C, iso))
        assert np.allclose(w1, w2, atol=1e-7)


def test_eigensystem_examples():
    es = eigensystem(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(es.values, [1, 2, 3])
    es = eigensystem(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(es.values, [-1, 1])
    v = es.vectors
    assert abs(abs(v[0, 0] * v[1, 0].conjugate()) - 0.5) < 1e-12
    assert abs(v[0, 0] + v[1, 0]) < 1e-12  # (1, -1)/sqrt2 up to phase
    with pytest.raises(HamiltonianError):
        eigensystem(np.array([[0.0, 1.0], [0.0, 0.0]]))
    # ties go to the lowest basis index
    es = eigensystem(np.array([[0.0, 1.0], [1.0, 0.0]]), labels=["a", "b"])
    assert es.labels == ["a", "a"]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_eigensystem_reconstruction_81(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(81, 81)) + 1j * rng.normal(size=(81, 81))
    H = (A + A.conj().T) / 2
    es = eigensystem(H)
    V, w = es.vectors, es.values
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs(V.conj().T @ V - np.eye(81))) < 1e-9
    scale = np.max(np.abs(H))
    assert np.max(np.abs(H - V @ np.diag(w) @ V.conj().T)) <= 1e-8 * 81 * scale
    assert abs(w.sum() - np.trace(H).real) <= 1e-6 * 81 * scale


def test_two_nv_decoupled_limit():
    c0 = PhysicalConstants(d_dd=0.0)
    B = np.array([0.3, -0.2, 0.5])
    n = np.array([0.0, 0.6, 0.8])
    for iso in (Isotope.NONE, Isotope.N15):
        H = two_nv_hamiltonian(Orientation.LAMBDA, Orientation.KAPPA, B, n, c0, iso)
        w1 = np.linalg.eigvalsh(single_nv_hamiltonian(Orientation.LAMBDA, B, c0, iso))
        w2 = np.linalg.eigvalsh(single_nv_hamiltonian(Orientation.KAPPA, B, c0, iso))
        assert np.allclose(np.linalg.eigvalsh(H), np.sort(np.add.outer(w1, w2).ravel()), atol=1e-8)


def test_dipolar_collinear_flipflop_elements():
    # S1.S2 and (S1.n)(S2.n) written out for n along the common NV axis:
    # H = d [2 Sz Sz - (S+S- + S-S+)/2]; |0,+1> <-> |+1,0> element is -d
    d = 0.37
    o = Orientation.LAMBDA
    H = dipolar_hamiltonian(o, o, o.axis, Isotope.NONE, d)
    idx = {(a, b): 3 * i + j for i, a in enumerate((1, 0, -1)) for j, b in enumerate((1, 0, -1))}
    assert H[idx[(0, 1)], idx[(1, 0)]] == pytest.approx(-d)
    assert H[idx[(0, -1)], idx[(-1, 0)]] == pytest.approx(-d)
    assert H[idx[(1, 1)], idx[(1, 1)]] == pytest.approx(2 * d)
    assert H[idx[(1, -1)], idx[(1, -1)]] == pytest.approx(-2 * d)
    assert is_hermitian(H)


def test_dipolar_rejects_non_unit():
    with pytest.raises(HamiltonianError):
        dipolar_hamiltonian(Orientation.LAMBDA, Orientation.PHI, [1.0, 1.0, 0.0], Isotope.NONE, 0.1)


def test_resonant_gap_linear_in_d_dd():
    # two lambda NVs in an axial field: |0,+1> and |+1,0> are degenerate; the
    # flip-flop element -d splits them by 2d (first-order degenerate perturbation)
    o = Orientation.LAMBDA
    B = 0.5 * o.axis
    gaps = []
    for d in (1e-4, 2e-4, 4e-4):
        H = two_nv_hamiltonian(o, o, B, o.axis, PhysicalConstants(d_dd=d), Isotope.NONE)
        w = np.linalg.eigvalsh(H)
        target = C.D + C.gamma_e * 0.5
        near = np.sort(w[np.abs(w - target) < 0.01])
        gaps.append(near[-1] - near[0])
    assert gaps == pytest.approx([2e-4, 4e-4, 8e-4], rel=1e-3)


def _axis_permutation(perm):
    """Proper rotation mapping axis(o) -> axis(perm[o]) for a tetrahedral permutation."""
    A = np.array([o.axis for o in ORIENTATIONS[:3]]).T
    B = np.array([perm[o].axis for o in ORIENTATIONS[:3]]).T
    R = B @ np.linalg.inv(A)
    return R


def test_rotational_consistency():
    rng = np.random.default_rng(3)
    L, P, Ch, K = ORIENTATIONS
    # even permutations of the four axes are proper rotations (point group T)
    perms = []
    for p in itertools.permutations(ORIENTATIONS):
        perm = dict(zip(ORIENTATIONS, p))
        R = _axis_permutation(perm)
        if np.allclose(R.T @ R, np.eye(3)) and np.linalg.det(R) > 0 and \
                np.allclose(R @ K.axis, perm[K].axis):
            perms.append((perm, R))
    assert len(perms) == 12
    for perm, R in perms[:6]:
        B = rng.normal(size=3)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        c = PhysicalConstants(d_dd=0.3)
        for o1, o2 in ((L, Ch), (P, P)):
            w1 = np.linalg.eigvalsh(two_nv_hamiltonian(o1, o2, B, n, c, Isotope.N15))
            w2 = np.linalg.eigvalsh(two_nv_hamiltonian(perm[o1], perm[o2], R @ B, R @ n, c, Isotope.N15))
            assert np.max(np.abs(w1 - w2)) < 1e-6


def test_constants_validation():
    with pytest.raises(HamiltonianError):
        PhysicalConstants(gamma_e=0)
    with pytest.raises(HamiltonianError):
        PhysicalConstants(D=-1)
    with pytest.raises(HamiltonianError):
        PhysicalConstants().with_hyperfine(Isotope.N15, Q=1.0)
    assert Isotope.N14.dim == 3 and Isotope.N15.dim == 2 and Isotope.NONE.dim == 1


def test_crystal_operators_commutation():
    for o in ORIENTATIONS:
        Sx, Sy, Sz = crystal_spin_operators(o, Isotope.NONE)
        assert np.allclose(Sx @ Sy - Sy @ Sx, 1j * Sz, atol=1e-12)
        assert np.allclose(Sx @ Sx + Sy @ Sy + Sz @ Sz, 2 * np.eye(3), atol=1e-12)
