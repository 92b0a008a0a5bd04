"""Diamond crystal frame, NV orientation classes and field decomposition.

Fields live in the cubic crystal frame in mT. The applied field is split into
an on-axis part along [111] and an off-axis part along [-1,1,0]; the polar
angle theta is measured from the [111] direction inside that plane.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

SQRT3 = math.sqrt(3.0)
SQRT2 = math.sqrt(2.0)

PAR_AXIS = np.array([1.0, 1.0, 1.0]) / SQRT3
PERP_AXIS = np.array([-1.0, 1.0, 0.0]) / SQRT2


class Orientation(enum.Enum):
    """The four NV symmetry axes, with their Greek-letter labels."""

    LAMBDA = "lambda"
    PHI = "phi"
    CHI = "chi"
    KAPPA = "kappa"

    @property
    def axis(self) -> np.ndarray:
        return _AXES[self].copy()

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]

    @classmethod
    def parse(cls, name: str) -> "Orientation":
        key = name.strip().lower()
        for o in cls:
            if key in (o.value, o.symbol, o.name.lower()):
                return o
        raise ValueError(f"unknown NV orientation {name!r}")

    def __lt__(self, other: "Orientation") -> bool:
        return ORIENTATIONS.index(self) < ORIENTATIONS.index(other)


_AXES = {
    Orientation.LAMBDA: np.array([1.0, 1.0, 1.0]) / SQRT3,
    Orientation.PHI: np.array([-1.0, -1.0, 1.0]) / SQRT3,
    Orientation.CHI: np.array([1.0, -1.0, -1.0]) / SQRT3,
    Orientation.KAPPA: np.array([-1.0, 1.0, -1.0]) / SQRT3,
}
_SYMBOLS = {
    Orientation.LAMBDA: "λ",
    Orientation.PHI: "ϕ",
    Orientation.CHI: "χ",
    Orientation.KAPPA: "κ",
}

ORIENTATIONS = tuple(Orientation)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class FieldPoint:
    """Applied field in (B_par, B_perp) coordinates, mT, plus a crystal-frame offset."""

    B_par: float
    B_perp: float
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def vector(self) -> np.ndarray:
        return resolve_field(self)


def resolve_field(fp: FieldPoint) -> np.ndarray:
    """Crystal-frame field vector (mT) for a field point."""
    return fp.B_par * PAR_AXIS + fp.B_perp * PERP_AXIS + np.asarray(fp.background, dtype=float)


def axial_transverse_projection(B, o: Orientation) -> tuple[float, float]:
    """Signed component of ``B`` along the NV axis and the magnitude of the rest."""
    B = np.asarray(B, dtype=float)
    n = _AXES[o]
    b_ax = float(B @ n)
    b_tr = float(np.linalg.norm(B - b_ax * n))
    return b_ax, b_tr


def polar_angle(fp: FieldPoint) -> float:
    """Angle from the [111] axis in degrees, folded into [0, 180). Background is ignored."""
    if fp.B_par == 0.0 and fp.B_perp == 0.0:
        raise GeometryError("polar angle undefined at zero applied field")
    theta = math.degrees(math.atan2(fp.B_perp, fp.B_par)) % 360.0
    return theta % 180.0


def field_at_angle(theta_deg: float, magnitude: float = 1.0) -> FieldPoint:
    t = math.radians(theta_deg)
    return FieldPoint(magnitude * math.cos(t), magnitude * math.sin(t))


@dataclass(frozen=True)
class DegeneracyAngle:
    theta: float
    kind: str  # "triple-overlap" | "pair-overlap" | "transverse-axis"
    participants: frozenset[Orientation]
    pairs: tuple[tuple[Orientation, ...], ...] = field(default=())

    def label(self) -> str:
        if self.kind == "transverse-axis":
            return ",".join(o.value for o in sorted(self.participants))
        return ";".join("/".join(o.value for o in p) for p in self.pairs)


def _zero_angle(d: np.ndarray) -> float | None:
    """Angle in [0, 90] deg where (cos t * PAR + sin t * PERP) . d vanishes, if any."""
    a = float(PAR_AXIS @ d)
    b = float(PERP_AXIS @ d)
    if abs(a) < 1e-14 and abs(b) < 1e-14:
        return None  # identically zero: not an isolated angle
    # a cos t + b sin t = 0  ->  t = atan2(-a, b) (mod 180)
    t = math.degrees(math.atan2(-a, b)) % 180.0
    if t < 1e-9 or t > 180.0 - 1e-9:
        t = 0.0  # rounding residue of an exact 0
    if t <= 90.0 + 1e-12:
        return min(t, 90.0)
    return None


def degeneracy_angles(angle_tol: float = 1e-9) -> list[DegeneracyAngle]:
    """All in-plane angles in [0, 90] deg where NV axial projections coincide in magnitude.

    Computed from the axis geometry: a pair (i, j) has equal |B_axial| where the
    field is orthogonal to n_i - n_j or n_i + n_j; an axis is transverse where
    the field is orthogonal to it.
    """
    pair_hits: dict[float, set[tuple[Orientation, Orientation]]] = {}
    null_hits: dict[float, set[Orientation]] = {}

    def bucket(store, theta, item):
        for key in store:
            if abs(key - theta) < angle_tol:
                store[key].add(item)
                return
        store[theta] = {item}

    for o in ORIENTATIONS:
        t = _zero_angle(_AXES[o])
        if t is not None:
            bucket(null_hits, t, o)
    for o1, o2 in itertools.combinations(ORIENTATIONS, 2):
        for sign in (-1.0, 1.0):
            t = _zero_angle(_AXES[o1] + sign * _AXES[o2])
            if t is not None:
                bucket(pair_hits, t, (o1, o2))

    thetas = sorted(set(pair_hits) | set(null_hits))
    merged: list[float] = []
    for t in thetas:
        if not merged or abs(t - merged[-1]) > angle_tol:
            merged.append(t)

    out = []
    for t in merged:
        pairs = sorted(p for k, v in pair_hits.items() if abs(k - t) <= angle_tol for p in v)
        nulls = sorted(o for k, v in null_hits.items() if abs(k - t) <= angle_tol for o in v)
        # a pair whose members are both transverse is also "equal"; keep it as a pair
        members = frozenset(o for p in pairs for o in p)
        if pairs:
            # pairs sharing members collapse into a multi-way overlap
            groups = _connected(pairs)
            if any(len(g) >= 3 for g in groups):
                kind = "triple-overlap"
            else:
                kind = "pair-overlap"
            out.append(DegeneracyAngle(t, kind, members, tuple(tuple(g) for g in groups)))
        else:
            out.append(DegeneracyAngle(t, "transverse-axis", frozenset(nulls), ()))
    return out


def _connected(pairs):
    groups: list[set] = []
    for a, b in pairs:
        hit = [g for g in groups if a in g or b in g]
        new = {a, b}.union(*hit) if hit else {a, b}
        groups = [g for g in groups if g not in hit] + [new]
    return sorted((sorted(g) for g in groups), key=lambda g: ORIENTATIONS.index(g[0]))
