"""AO-PL contrast from resonant dipolar mixing of NV pairs.

Each pair is treated as one optically polarized NV (its bright m_s = 0
manifold, projector P) next to an unpolarized partner, so the initial state
is rho0 = M / Tr M with M = P x 1. Under the coupled two-NV Hamiltonian the
retained bright population is averaged over time with an exponential reset
(optical repolarization) at rate 2 pi * linewidth:

    R = sum_jk |<j|M|k>|^2 / (1 + ((E_j - E_k) / linewidth)^2) / Tr M

For linewidth -> 0 this is the infinite-time average over degenerate groups.
Loss 1 - R is averaged over a deterministic set of dipole directions and
both role assignments. Ensemble contrast weights the ten orientation pairs by
their abundance for equal population of the four axes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .geometry import ORIENTATIONS, FieldPoint, Orientation, resolve_field
from .hamiltonian import (
    Isotope,
    PhysicalConstants,
    crystal_spin_operators,
    single_nv_hamiltonian,
)

DEGENERACY_TOL = 1e-6  # MHz

CONTRAST_SCALES = ("normalized", "absolute")


@dataclass(frozen=True)
class CrossRelaxConfig:
    iso: Isotope = Isotope.NONE
    d_dd: float = 0.1
    directions: int = 32
    direction_set: str = "fibonacci"
    contrast_scale: str = "normalized"
    kappa: float = 1.0
    linewidth: float = 0.3

    def __post_init__(self):
        if self.directions < 1:
            raise ValueError("need at least one dipole direction")
        if self.direction_set != "fibonacci":
            raise ValueError(f"unknown direction set {self.direction_set!r}")
        if self.contrast_scale not in CONTRAST_SCALES:
            raise ValueError(f"contrast_scale must be one of {CONTRAST_SCALES}")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if self.linewidth < 0:
            raise ValueError("linewidth must be non-negative")
        if self.d_dd < 0:
            raise ValueError("d_dd must be non-negative")


@lru_cache(maxsize=None)
def fibonacci_directions(k: int) -> np.ndarray:
    """``k`` quasi-uniform unit vectors on the sphere (spherical Fibonacci lattice)."""
    i = np.arange(k, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / k
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts.setflags(write=False)
    return pts


def pair_weights() -> list[tuple[Orientation, Orientation, float]]:
    """Unordered orientation pairs with their ensemble weight (sums to 1)."""
    out = []
    for o1, o2 in itertools.combinations_with_replacement(ORIENTATIONS, 2):
        out.append((o1, o2, (1.0 if o1 is o2 else 2.0) / 16.0))
    return out


@lru_cache(maxsize=None)
def _dipolar_blocks(o1: Orientation, o2: Orientation, iso: Isotope):
    """kron(S1_a, S2_b) for a, b in crystal x, y, z; shape (3, 3, n, n)."""
    S1 = crystal_spin_operators(o1, iso)
    S2 = crystal_spin_operators(o2, iso)
    T = np.empty((3, 3) + (S1.shape[1] ** 2,) * 2, dtype=complex)
    for a in range(3):
        for b in range(3):
            T[a, b] = np.kron(S1[a], S2[b])
    iso_part = T[0, 0] + T[1, 1] + T[2, 2]
    T.setflags(write=False)
    return T, iso_part


def dipolar_stack(o1, o2, iso: Isotope, dirs: np.ndarray, d_dd: float) -> np.ndarray:
    """Interaction Hamiltonians for each row of ``dirs``; shape (K, n, n)."""
    T, iso_part = _dipolar_blocks(o1, o2, iso)
    nn = np.einsum("ka,kb->kab", dirs, dirs)
    return d_dd * (3.0 * np.einsum("kab,abij->kij", nn, T) - iso_part[None])


def bright_projector(h: np.ndarray, iso: Isotope) -> np.ndarray:
    """Projector on the (2I+1) eigenstates of a single-NV Hamiltonian with most m_s=0 weight."""
    _, V = np.linalg.eigh(h)
    dI = iso.dim
    weight0 = np.sum(np.abs(V[dI:2 * dI, :]) ** 2, axis=0)
    # stable sort: ties resolved towards lower levels
    cols = np.sort(np.argsort(-weight0, kind="stable")[:dI])
    Vb = V[:, cols]
    return Vb @ Vb.conj().T


def grouped_survival(values: np.ndarray, vectors: np.ndarray, psi: np.ndarray,
                     tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Infinite-time survival sum_g ||Pi_g psi||^4 for each column of ``psi``.

    ``values`` must be ascending; levels closer than ``tol`` share a group.
    """
    w = np.abs(vectors.conj().T @ psi) ** 2
    starts = _group_starts(values, tol)
    g = np.add.reduceat(w, starts, axis=0)
    return np.sum(g * g, axis=0)


def grouped_retention(values: np.ndarray, vectors: np.ndarray, M: np.ndarray,
                      linewidth: float = 0.0, tol: float = DEGENERACY_TOL) -> float:
    """Time-averaged Tr[rho(t) M] for rho(0) = M / Tr M, with M a projector.

    With ``linewidth`` = 0 this is the infinite-time average
    sum_g Tr(Pi_g M Pi_g M) / Tr M over degenerate groups (levels closer than
    ``tol``). A positive ``linewidth`` (MHz) weights the evolution with an
    exponential reset at that rate, so the coherence between levels j, k
    enters with weight 1 / (1 + ((E_j - E_k) / linewidth)^2).
    """
    Mt = vectors.conj().T @ M @ vectors
    a = np.abs(Mt) ** 2
    if linewidth > 0.0:
        with np.errstate(over="ignore"):
            gap = np.abs(values[:, None] - values[None, :]) / linewidth
            weight = 1.0 / (1.0 + gap * gap)
        return float(np.sum(a * weight) / np.trace(M).real)
    starts = _group_starts(values, tol)
    blocks = np.add.reduceat(np.add.reduceat(a, starts, axis=0), starts, axis=1)
    return float(np.trace(blocks).real / np.trace(M).real)


def _group_starts(values, tol):
    return np.r_[0, np.flatnonzero(np.diff(values) > tol) + 1]


def _pair_loss_at(o1, o2, B, cfg: CrossRelaxConfig, c: PhysicalConstants) -> float:
    dirs = fibonacci_directions(cfg.directions)
    iso = cfg.iso
    h1 = single_nv_hamiltonian(o1, B, c, iso)
    h2 = single_nv_hamiltonian(o2, B, c, iso)
    d = h1.shape[0]
    eye = np.eye(d)
    h0 = np.kron(h1, eye) + np.kron(eye, h2)
    # either NV may be the polarized one; the partner is left unpolarized
    Ms = (np.kron(bright_projector(h1, iso), eye), np.kron(eye, bright_projector(h2, iso)))
    Hs = h0[None] + dipolar_stack(o1, o2, iso, dirs, cfg.d_dd)
    w, V = np.linalg.eigh(Hs)
    total = 0.0
    for k in range(len(dirs)):
        for M in Ms:
            total += 1.0 - grouped_retention(w[k], V[k], M, cfg.linewidth)
    return min(1.0, max(0.0, total / (2 * len(dirs))))


def pair_depolarization(o1: Orientation, o2: Orientation, fp: FieldPoint,
                        cfg: CrossRelaxConfig, c: PhysicalConstants | None = None) -> float:
    """Mean depolarization loss in [0, 1] of an NV pair at one field point."""
    c = _constants(cfg, c)
    return _pair_loss_at(o1, o2, resolve_field(fp), cfg, c)


def _constants(cfg, c):
    c = c or PhysicalConstants()
    if c.d_dd != cfg.d_dd:
        c = replace(c, d_dd=cfg.d_dd)
    return c


def raw_loss(fp: FieldPoint, cfg: CrossRelaxConfig, c: PhysicalConstants | None = None) -> float:
    """Abundance-weighted loss over all orientation pairs (unnormalized)."""
    c = _constants(cfg, c)
    B = resolve_field(fp)
    return sum(wt * _pair_loss_at(o1, o2, B, cfg, c) for o1, o2, wt in pair_weights())


def contrast_at(fp: FieldPoint, cfg: CrossRelaxConfig, c: PhysicalConstants | None = None) -> float:
    """Contrast at a single field point.

    In ``absolute`` mode the weighted loss is multiplied by ``kappa``. In
    ``normalized`` mode the reference is the maximum over a scan, so a single
    point returns the raw weighted loss; maps and line cuts divide afterwards.
    """
    value = raw_loss(fp, cfg, c)
    if cfg.contrast_scale == "absolute":
        return cfg.kappa * value
    return value


def _scale(values: np.ndarray, cfg: CrossRelaxConfig) -> np.ndarray:
    if cfg.contrast_scale == "absolute":
        return cfg.kappa * values
    peak = float(np.max(values)) if values.size else 0.0
    return values / peak if peak > 0 else values.copy()


def _check_grid(grid, name):
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError(f"{name} grid must be a non-empty 1-D sequence")
    if g.size > 1 and not np.all(np.diff(g) > 0):
        raise ValueError(f"{name} grid must be strictly increasing")
    return g


@dataclass
class ContrastMap:
    B_par: np.ndarray
    B_perp: np.ndarray
    values: np.ndarray  # shape (len(B_par), len(B_perp))
    raw: np.ndarray
    meta: dict = field(default_factory=dict)


def contrast_map(B_par_grid, B_perp_grid, cfg: CrossRelaxConfig, c: PhysicalConstants | None = None,
                 background=(0.0, 0.0, 0.0), workers: int = 1) -> ContrastMap:
    """Contrast on the (B_par, B_perp) grid; independent of ``workers``."""
    from .sweep import parallel_map

    bp = _check_grid(B_par_grid, "B_par")
    bq = _check_grid(B_perp_grid, "B_perp")
    c = _constants(cfg, c)
    points = [FieldPoint(float(a), float(b), tuple(background)) for a in bp for b in bq]
    raw = np.array(parallel_map(_RawLoss(cfg, c), points, workers)).reshape(len(bp), len(bq))
    return ContrastMap(bp, bq, _scale(raw, cfg), raw, {"config": cfg})


@dataclass
class LineCut:
    B_par: float
    B_perp: np.ndarray
    values: np.ndarray
    raw: np.ndarray


def linecut(B_par: float, B_perp_grid, cfg: CrossRelaxConfig, c: PhysicalConstants | None = None,
            background=(0.0, 0.0, 0.0), workers: int = 1) -> LineCut:
    """Contrast along B_perp at fixed B_par."""
    from .sweep import parallel_map

    bq = _check_grid(B_perp_grid, "B_perp")
    c = _constants(cfg, c)
    points = [FieldPoint(float(B_par), float(b), tuple(background)) for b in bq]
    raw = np.array(parallel_map(_RawLoss(cfg, c), points, workers))
    return LineCut(float(B_par), bq, _scale(raw, cfg), raw)


class _RawLoss:
    """Picklable callable used by the sweep engine."""

    def __init__(self, cfg, c):
        self.cfg = cfg
        self.c = c

    def __call__(self, fp: FieldPoint) -> float:
        return raw_loss(fp, self.cfg, self.c)


def find_peaks(x, y, min_prominence: float = 0.0, refine=None) -> list[tuple[float, float]]:
    """Local maxima of a sampled curve as (x, y) pairs.

    A plateau counts once. If ``refine`` (a callable x -> y) is given, each peak
    is polished with a golden-section search between its neighbouring samples.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = []
    n = len(y)
    i = 1
    while i < n - 1:
        if y[i] > y[i - 1]:
            j = i
            while j + 1 < n and y[j + 1] == y[i]:
                j += 1
            if j + 1 < n and y[j + 1] < y[i]:
                k = (i + j) // 2
                # descend to the adjacent valleys on both sides
                lo = i - 1
                while lo > 0 and y[lo - 1] <= y[lo]:
                    lo -= 1
                hi = j + 1
                while hi < n - 1 and y[hi + 1] <= y[hi]:
                    hi += 1
                prom = y[i] - max(y[lo], y[hi])
                if prom >= min_prominence:
                    if refine is not None:
                        out.append(_golden_max(refine, x[i - 1], x[j + 1]))
                    else:
                        out.append((float(x[k]), float(y[k])))
            i = j + 1
        else:
            i += 1
    return out


def _golden_max(f, a, b, tol=1e-6, max_iter=80):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c_ = b - g * (b - a)
    d_ = a + g * (b - a)
    fc, fd = f(c_), f(d_)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc >= fd:
            b, d_, fd = d_, c_, fc
            c_ = b - g * (b - a)
            fc = f(c_)
        else:
            a, c_, fc = c_, d_, fd
            d_ = a + g * (b - a)
            fd = f(d_)
    xm = (a + b) / 2.0
    return float(xm), float(f(xm))
