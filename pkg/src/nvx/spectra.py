"""CW-ODMR transition maps, line-crossing search and hyperfine field spacing."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import ORIENTATIONS, PERP_AXIS, FieldPoint, Orientation, resolve_field
from .hamiltonian import Isotope, PhysicalConstants, basis_labels, single_nv_hamiltonian

BRANCHES = ("plus", "minus")
MERGE_WINDOW = 0.005  # mT
BISECT_MAX_ITER = 60
BISECT_TOL = 1e-6  # mT


class SpectraError(ValueError):
    pass


@dataclass(frozen=True)
class TransitionLine:
    orientation: Orientation
    branch: str
    m_I: Fraction
    frequency: float
    field: FieldPoint
    ambiguous: bool = False

    @property
    def key(self) -> tuple:
        return (self.orientation, self.branch, self.m_I)


def _line_key_name(key) -> str:
    o, branch, mI = key
    return f"{o.value}:{branch}:{mI}"


def level_assignment(V: np.ndarray, iso: Isotope, reference: np.ndarray | None = None):
    """One-to-one (m_s, m_I) labels for the eigenvector columns of ``V``.

    Without ``reference`` the labels maximize the summed weight on the bare
    basis states. With ``reference`` (labelled eigenvectors at a nearby field,
    columns in basis-label order) they maximize the summed overlap instead,
    which continues each label adiabatically through avoided crossings.
    Returns (order, purity): ``order[k]`` is the column of V carrying label k,
    purity the largest bare-basis weight of that column.
    """
    w_basis = np.abs(V) ** 2
    w = w_basis if reference is None else np.abs(reference.conj().T @ V) ** 2
    rows, cols = linear_sum_assignment(-w)
    order = np.empty(V.shape[1], dtype=int)
    order[rows] = cols
    purity = w_basis.max(axis=0)[order]
    return order, purity


@dataclass
class LabeledLevels:
    values: np.ndarray   # energies in basis-label order
    vectors: np.ndarray  # matching eigenvector columns
    purity: np.ndarray


def labeled_levels(o: Orientation, fp: FieldPoint, c: PhysicalConstants, iso: Isotope,
                   reference: np.ndarray | None = None) -> LabeledLevels:
    h = single_nv_hamiltonian(o, resolve_field(fp), c, iso)
    values, V = np.linalg.eigh(h)
    order, purity = level_assignment(V, iso, reference)
    return LabeledLevels(values[order], V[:, order], purity)


def _lines_from_levels(o, fp, lv: LabeledLevels, iso) -> list[TransitionLine]:
    labels = basis_labels(iso)
    index = {lab: k for k, lab in enumerate(labels)}
    out = []
    for ms, branch in ((1, "plus"), (-1, "minus")):
        for mI in (iso.spin - k for k in range(iso.dim)):
            i, j = index[(ms, mI)], index[(0, mI)]
            out.append(TransitionLine(
                o, branch, mI, float(abs(lv.values[i] - lv.values[j])), fp,
                bool(lv.purity[i] < 0.5 or lv.purity[j] < 0.5),
            ))
    return out


def transition_lines(o: Orientation, fp: FieldPoint, c: PhysicalConstants,
                     iso: Isotope, reference: np.ndarray | None = None) -> list[TransitionLine]:
    """Allowed 0 <-> +-1 lines (same nuclear label) of one orientation class.

    Lines whose levels have no basis state above weight 0.5 are flagged
    ambiguous. See level_assignment for ``reference``.
    """
    return _lines_from_levels(o, fp, labeled_levels(o, fp, c, iso, reference), iso)


@dataclass
class OdmrMap:
    B_par: float
    B_perp: np.ndarray
    orientations: tuple[Orientation, ...]
    constants: PhysicalConstants
    iso: Isotope
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    lines: list[TransitionLine] = field(default_factory=list)
    frames: dict = field(default_factory=dict, repr=False)  # orientation -> labelled vectors per grid point

    def point(self, b_perp: float) -> FieldPoint:
        return FieldPoint(self.B_par, float(b_perp), self.background)

    def frequencies(self) -> dict[tuple, np.ndarray]:
        """Line key -> frequency along the grid (NaN where the line is absent)."""
        idx = {float(b): i for i, b in enumerate(self.B_perp)}
        out: dict[tuple, np.ndarray] = {}
        for ln in self.lines:
            arr = out.setdefault(ln.key, np.full(len(self.B_perp), np.nan))
            arr[idx[ln.field.B_perp]] = ln.frequency
        return out

    def evaluate(self, b_perp: float) -> dict[tuple, float]:
        """Line frequencies at an off-grid field, labels continued from the grid point below."""
        i = int(np.clip(np.searchsorted(self.B_perp, b_perp, side="right") - 1, 0, len(self.B_perp) - 1))
        fp = self.point(b_perp)
        out = {}
        for o in self.orientations:
            ref = self.frames[o][i] if o in self.frames else None
            for ln in transition_lines(o, fp, self.constants, self.iso, ref):
                out[ln.key] = ln.frequency
        return out


def _track(args):
    """Labelled levels of one orientation along the grid, each point referenced to the last."""
    o, B_par, grid, c, iso, background = args
    ref = None
    lines, frames = [], []
    for b in grid:
        fp = FieldPoint(B_par, float(b), background)
        lv = labeled_levels(o, fp, c, iso, ref)
        ref = lv.vectors
        frames.append(lv.vectors)
        lines.append(_lines_from_levels(o, fp, lv, iso))
    return lines, frames


def odmr_map(orientations, B_par: float, B_perp_grid, c: PhysicalConstants, iso: Isotope,
             background=(0.0, 0.0, 0.0), workers: int = 1) -> OdmrMap:
    """Transition frequencies over a B_perp scan; rows ordered (B_perp, orientation, branch, m_I).

    Labels start from the bare basis at the first grid point and are carried
    along the scan by eigenvector overlap, so each line is continuous.
    """
    from .sweep import parallel_map

    grid = np.asarray(B_perp_grid, dtype=float)
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise SpectraError("B_perp grid must be strictly increasing")
    orientations = tuple(sorted(orientations or ORIENTATIONS))
    background = tuple(float(x) for x in background)
    tracks = parallel_map(_track, [(o, B_par, grid, c, iso, background) for o in orientations], workers)
    lines = [ln for i in range(len(grid)) for lines_o, _ in tracks for ln in lines_o[i]]
    frames = {o: fr for o, (_, fr) in zip(orientations, tracks)}
    return OdmrMap(float(B_par), grid, orientations, c, iso, background, lines, frames)


@dataclass
class DegeneracyEvent:
    B_perp: float
    lines: tuple[tuple, ...]  # line keys taking part
    pairs: tuple[tuple[tuple, tuple], ...]
    min_gap: float
    multiplicity: int

    def participants(self) -> str:
        return " ".join(f"{_line_key_name(a)}={_line_key_name(b)}" for a, b in self.pairs)


@dataclass
class _Crossing:
    b: float
    a: tuple
    c: tuple
    gap: float


def _bisect(f, lo, hi, f_lo):
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (f_lo > 0):
            lo, f_lo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _golden_min(f, a, b, iters=BISECT_MAX_ITER):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if b - a <= BISECT_TOL:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def find_degeneracies(m: OdmrMap, gap_tolerance: float = 0.05) -> list[DegeneracyEvent]:
    """Field values where two transition lines cross or come within ``gap_tolerance`` MHz.

    Sign changes of a line-pair difference between grid points are refined by
    bisection on the full model; near-misses by a golden-section search of
    |difference|. Crossings within 5 uT of each other form one event.
    """
    freqs = m.frequencies()
    keys = sorted(freqs, key=lambda k: (ORIENTATIONS.index(k[0]), BRANCHES.index(k[1]), -k[2]))
    grid = m.B_perp
    cache: dict[float, dict] = {}

    def diff(b, k1, k2):
        if b not in cache:
            cache[b] = m.evaluate(b)
        v = cache[b]
        return v[k1] - v[k2]

    found: list[_Crossing] = []
    for k1, k2 in itertools.combinations(keys, 2):
        d = freqs[k1] - freqs[k2]
        for i in range(len(grid) - 1):
            d0, d1 = d[i], d[i + 1]
            if not (np.isfinite(d0) and np.isfinite(d1)):
                continue
            if d0 == 0.0:
                found.append(_Crossing(float(grid[i]), k1, k2, 0.0))
            elif (d0 > 0) != (d1 > 0) and d1 != 0.0:
                b = _bisect(lambda x: diff(x, k1, k2), float(grid[i]), float(grid[i + 1]), d0)
                found.append(_Crossing(b, k1, k2, abs(diff(b, k1, k2))))
        # near misses: local minima of |d| under tolerance without a sign change
        a = np.abs(d)
        for i in range(1, len(grid) - 1):
            if not np.all(np.isfinite(d[i - 1:i + 2])):
                continue
            same_sign = (d[i - 1] > 0) == (d[i] > 0) == (d[i + 1] > 0)
            if same_sign and a[i] <= a[i - 1] and a[i] < a[i + 1] and a[i] <= gap_tolerance:
                b = _golden_min(lambda x: abs(diff(x, k1, k2)), float(grid[i - 1]), float(grid[i + 1]))
                gap = abs(diff(b, k1, k2))
                if gap <= gap_tolerance:
                    found.append(_Crossing(b, k1, k2, gap))
    found = [f for f in found if f.gap <= gap_tolerance]
    found.sort(key=lambda f: f.b)

    clusters: list[list[_Crossing]] = []
    for f in found:
        if clusters and f.b - clusters[-1][-1].b <= MERGE_WINDOW:
            clusters[-1].append(f)
        else:
            clusters.append([f])

    events = []
    for cl in clusters:
        rep = cl[(len(cl) - 1) // 2]
        pairs = tuple((f.a, f.c) for f in cl)
        lines = tuple(sorted({k for p in pairs for k in p},
                             key=lambda k: (ORIENTATIONS.index(k[0]), BRANCHES.index(k[1]), -k[2])))
        events.append(DegeneracyEvent(rep.b, lines, pairs, min(f.gap for f in cl),
                                      _multiplicity(cl, cache, m)))
    return events


def _multiplicity(cluster, cache, m: OdmrMap) -> int:
    """Largest number of crossing line pairs for one orientation pair in one frequency band."""
    counts: dict[tuple, int] = {}
    D = m.constants.D
    for f in cluster:
        vals = cache.get(f.b) or m.evaluate(f.b)
        band = "upper" if vals[f.a] >= D else "lower"
        group = (tuple(sorted((f.a[0], f.c[0]))), band)
        counts[group] = counts.get(group, 0) + 1
    return max(counts.values()) if counts else 0


def nv_angle_to_perp(o: Orientation) -> float:
    """Angle in degrees between the B_perp direction and an NV axis (acute)."""
    return math.degrees(math.acos(min(1.0, abs(float(PERP_AXIS @ o.axis)))))


def hyperfine_spacing(A_N: float, alpha: float, c: PhysicalConstants) -> float:
    """Field spacing (mT) between hyperfine-shifted cross-relaxation lines, |A_N| / (gamma_e cos alpha)."""
    if abs(alpha) >= 90.0:
        raise SpectraError(f"grazing angle {alpha} deg: spacing diverges")
    return abs(A_N) / (c.gamma_e * math.cos(math.radians(alpha)))
