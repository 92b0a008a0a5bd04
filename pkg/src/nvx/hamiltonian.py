"""NV ground-state spin Hamiltonians.

Energies are frequencies in MHz, fields in mT. Spin operators use the
|m> basis ordered m = +s ... -s; composite electron-nuclear spaces are ordered
electron-major, i.e. index = i_ms * (2I+1) + i_mI.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .geometry import Orientation


class HamiltonianError(ValueError):
    pass


class Isotope(enum.Enum):
    N14 = "N14"
    N15 = "N15"
    NONE = "none"

    @property
    def spin(self) -> Fraction:
        return {Isotope.N14: Fraction(1), Isotope.N15: Fraction(1, 2), Isotope.NONE: Fraction(0)}[self]

    @property
    def dim(self) -> int:
        return int(2 * self.spin + 1)

    @classmethod
    def parse(cls, name: str) -> "Isotope":
        key = str(name).strip().upper().replace("-", "").replace("_", "")
        aliases = {"N14": cls.N14, "14N": cls.N14, "N15": cls.N15, "15N": cls.N15,
                   "NONE": cls.NONE, "ELECTRON": cls.NONE, "": cls.NONE}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown isotope {name!r}") from None


@dataclass(frozen=True)
class HyperfineParams:
    A_par: float
    A_perp: float
    Q: float = 0.0


DEFAULT_HYPERFINE = {
    Isotope.N14: HyperfineParams(A_par=-2.14, A_perp=-2.70, Q=-4.96),
    Isotope.N15: HyperfineParams(A_par=3.03, A_perp=3.65, Q=0.0),
    Isotope.NONE: HyperfineParams(0.0, 0.0, 0.0),
}


@dataclass(frozen=True)
class PhysicalConstants:
    """Symbol table for the spin Hamiltonians; every entry can be overridden."""

    D: float = 2870.0
    gamma_e: float = 28.024
    d_dd: float = 0.1
    hyperfine: dict = field(default_factory=lambda: dict(DEFAULT_HYPERFINE))

    def __post_init__(self):
        if not self.gamma_e > 0:
            raise HamiltonianError("gamma_e must be positive")
        if not self.D > 0:
            raise HamiltonianError("D must be positive")
        if self.hyperfine[Isotope.N15].Q != 0.0:
            raise HamiltonianError("15N has no quadrupole moment (Q must be 0)")

    def hf(self, iso: Isotope) -> HyperfineParams:
        return self.hyperfine[iso]

    def with_hyperfine(self, iso: Isotope, **kw) -> "PhysicalConstants":
        table = dict(self.hyperfine)
        table[iso] = replace(table[iso], **kw)
        return replace(self, hyperfine=table)

    def __hash__(self):
        return hash((self.D, self.gamma_e, self.d_dd,
                     tuple(sorted((k.value, v) for k, v in self.hyperfine.items()))))


@lru_cache(maxsize=None)
def _spin_matrices(two_s: int):
    s = two_s / 2
    m = s - np.arange(two_s + 1)
    sz = np.diag(m).astype(complex)
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1)); row index of m+1 is one above m
    sp = np.zeros((two_s + 1, two_s + 1), dtype=complex)
    for j in range(1, two_s + 1):
        sp[j - 1, j] = math.sqrt(s * (s + 1) - m[j] * (m[j] + 1))
    sx = (sp + sp.conj().T) / 2
    sy = (sp - sp.conj().T) / 2j
    for a in (sx, sy, sz):
        a.setflags(write=False)
    return sx, sy, sz


def spin_matrices(s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Sx, Sy, Sz) for spin 1/2 or 1."""
    two_s = Fraction(s) * 2
    if two_s not in (1, 2):
        raise HamiltonianError(f"unsupported spin {s}; only 1/2 and 1 are implemented")
    return tuple(a.copy() for a in _spin_matrices(int(two_s)))


def _nuclear_ops(iso: Isotope):
    if iso is Isotope.NONE:
        one = np.ones((1, 1), dtype=complex)
        zero = np.zeros((1, 1), dtype=complex)
        return zero, zero, zero, one
    sx, sy, sz = _spin_matrices(int(2 * iso.spin))
    return sx, sy, sz, np.eye(iso.dim, dtype=complex)


@lru_cache(maxsize=None)
def local_frame(o: Orientation) -> np.ndarray:
    """Rotation R (columns = local x, y, z in crystal coordinates) taking z to axis(o).

    Rotation about z x axis(o) by the angle between them; identity when collinear.
    """
    n = o.axis
    z = np.array([0.0, 0.0, 1.0])
    c = float(z @ n)
    k = np.cross(z, n)
    s = float(np.linalg.norm(k))
    if s < 1e-15:
        R = np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    else:
        k = k / s
        K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        R = np.eye(3) + s * K + (1 - c) * K @ K
    R.setflags(write=False)
    return R


def _local_terms(o: Orientation, c: PhysicalConstants, iso: Isotope):
    """Field-independent part and the three local-frame electron spin operators."""
    Sx, Sy, Sz = _spin_matrices(2)
    Ix, Iy, Iz, In = _nuclear_ops(iso)
    E3 = np.eye(3, dtype=complex)
    hf = c.hf(iso)
    H0 = c.D * np.kron(Sz @ Sz, In)
    if iso is not Isotope.NONE:
        H0 = H0 + hf.A_par * np.kron(Sz, Iz) + hf.A_perp * (np.kron(Sx, Ix) + np.kron(Sy, Iy))
        H0 = H0 + hf.Q * np.kron(E3, Iz @ Iz)
    S_loc = np.stack([np.kron(Sx, In), np.kron(Sy, In), np.kron(Sz, In)])
    return H0, S_loc


def single_nv_hamiltonian(o: Orientation, B, c: PhysicalConstants, iso: Isotope) -> np.ndarray:
    """Ground-state Hamiltonian of one NV (dimension 3(2I+1)), in its local frame.

    D Sz^2 + gamma_e B.S + A_par Sz Iz + A_perp (Sx Ix + Sy Iy) + Q Iz^2.
    Nuclear Zeeman is neglected.
    """
    H0, S_loc = _local_terms(o, c, iso)
    b_loc = local_frame(o).T @ np.asarray(B, dtype=float)
    return H0 + c.gamma_e * np.tensordot(b_loc, S_loc, axes=1)


def crystal_spin_operators(o: Orientation, iso: Isotope) -> np.ndarray:
    """Electron spin vector operator of an NV expressed along crystal x, y, z."""
    Sx, Sy, Sz = _spin_matrices(2)
    In = _nuclear_ops(iso)[3]
    S_loc = np.stack([np.kron(Sx, In), np.kron(Sy, In), np.kron(Sz, In)])
    return np.tensordot(local_frame(o), S_loc, axes=1)


def dipolar_hamiltonian(o1, o2, n12, iso: Isotope, d_dd: float) -> np.ndarray:
    """d_dd [3 (S1.n)(S2.n) - S1.S2] on the product space of two NVs."""
    n12 = np.asarray(n12, dtype=float)
    if abs(np.linalg.norm(n12) - 1.0) > 1e-9:
        raise HamiltonianError("dipole direction n12 must be a unit vector")
    S1 = crystal_spin_operators(o1, iso)
    S2 = crystal_spin_operators(o2, iso)
    S1n = np.tensordot(n12, S1, axes=1)
    S2n = np.tensordot(n12, S2, axes=1)
    H = 3.0 * np.kron(S1n, S2n)
    for a in range(3):
        H -= np.kron(S1[a], S2[a])
    return d_dd * H


def two_nv_hamiltonian(o1, o2, B, n12, c: PhysicalConstants, iso: Isotope) -> np.ndarray:
    """H_gs(o1) x 1 + 1 x H_gs(o2) + H_int for a dipole pair sharing one field."""
    h1 = single_nv_hamiltonian(o1, B, c, iso)
    h2 = single_nv_hamiltonian(o2, B, c, iso)
    d = h1.shape[0]
    H = np.kron(h1, np.eye(d)) + np.kron(np.eye(d), h2)
    return H + dipolar_hamiltonian(o1, o2, n12, iso, c.d_dd)


def basis_labels(iso: Isotope) -> list[tuple[int, Fraction]]:
    """(m_s, m_I) for each basis index of the single-NV space."""
    mI = [iso.spin - k for k in range(iso.dim)]
    return [(ms, mi) for ms in (1, 0, -1) for mi in mI]


@dataclass
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray
    labels: list | None = None
    purity: np.ndarray | None = None  # largest |amplitude|^2 per level


def is_hermitian(H, rtol: float = 1e-10) -> bool:
    H = np.asarray(H)
    scale = max(float(np.max(np.abs(H))), 1e-300)
    return bool(np.max(np.abs(H - H.conj().T)) <= rtol * scale)


def eigensystem(H, labels: list | None = None) -> EigenSystem:
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.

    If ``labels`` (one per basis state) is given, each level is tagged with the
    label of its largest-weight basis state; ties go to the lowest index.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise HamiltonianError("eigensystem needs a square matrix")
    if not is_hermitian(H):
        raise HamiltonianError("matrix is not Hermitian")
    w, V = np.linalg.eigh(H)
    weights = np.abs(V) ** 2
    best = np.argmax(weights, axis=0)  # argmax returns the first maximum
    purity = weights[best, np.arange(len(w))]
    lab = [labels[i] for i in best] if labels is not None else list(best)
    return EigenSystem(w, V, lab, purity)
