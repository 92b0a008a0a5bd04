"""Field-modulation lock-in readout of a contrast curve.

The modulation is applied to B_perp. Demodulation is the ideal single-period
quadrature, i.e. the noiseless limit of a lock-in amplifier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .crossrelax import CrossRelaxConfig, linecut
from .hamiltonian import PhysicalConstants


class LockinError(ValueError):
    pass


@dataclass(frozen=True)
class LockinConfig:
    mod_amplitude: float = 0.01  # mT
    phase_samples: int = 64
    harmonic: int = 1
    normalize: bool = True
    fine_step: float = 0.001  # mT, sampling of the underlying line cut

    def __post_init__(self):
        if not self.mod_amplitude > 0:
            raise LockinError("mod_amplitude must be positive")
        if self.phase_samples < 8:
            raise LockinError("phase_samples must be at least 8")
        if self.harmonic < 1:
            raise LockinError("harmonic must be a positive integer")
        if not self.fine_step > 0:
            raise LockinError("fine_step must be positive")


def demodulate(curve, B0: float, cfg: LockinConfig) -> float:
    """In-phase output X = (2/N) sum_j C(B0 + dB sin phi_j) sin(k phi_j).

    For even harmonics the quadrature reference cos(k phi) is used, which is
    where a symmetric response puts its signal.
    """
    N = cfg.phase_samples
    phi = 2.0 * np.pi * np.arange(N) / N
    c = np.asarray(curve(B0 + cfg.mod_amplitude * np.sin(phi)), dtype=float)
    k = cfg.harmonic
    ref = np.sin(k * phi) if k % 2 else np.cos(k * phi)
    return float(2.0 / N * np.sum(c * ref))


@dataclass
class LockinScan:
    B_par: float
    B_perp: np.ndarray
    X: np.ndarray
    X_raw: np.ndarray
    curve: CubicSpline


def curve_from_samples(B_perp, values) -> CubicSpline:
    return CubicSpline(np.asarray(B_perp, dtype=float), np.asarray(values, dtype=float))


def lia_scan(B_par: float, B_perp_grid, xcfg: CrossRelaxConfig, lcfg: LockinConfig,
             c: PhysicalConstants | None = None, background=(0.0, 0.0, 0.0),
             workers: int = 1) -> LockinScan:
    """Lock-in signal along B_perp, demodulating a spline through a fine line cut."""
    grid = np.asarray(B_perp_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise LockinError("B_perp grid must be a non-empty 1-D sequence")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise LockinError("B_perp grid must be strictly increasing")
    margin = lcfg.mod_amplitude + 2 * lcfg.fine_step
    lo, hi = grid[0] - margin, grid[-1] + margin
    n = int(np.ceil((hi - lo) / lcfg.fine_step)) + 1
    fine = np.round(lo + lcfg.fine_step * np.arange(n), 9)
    cut = linecut(B_par, fine, xcfg, c, background, workers)
    spline = curve_from_samples(fine, cut.raw)
    X = np.array([demodulate(spline, float(b), lcfg) for b in grid])
    peak = float(np.max(np.abs(X))) if X.size else 0.0
    Xn = X / peak if lcfg.normalize and peak > 0 else X.copy()
    return LockinScan(float(B_par), grid, Xn, X, spline)


def zero_crossings(x, X) -> list[tuple[float, float]]:
    """Falling zero crossings (peak centres of the underlying curve) with their swing.

    Swing is the local maximum before minus the local minimum after the
    crossing, a measure of feature prominence.
    """
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    out = []
    for i in range(len(X) - 1):
        if X[i] > 0 >= X[i + 1]:
            xc = x[i] + (x[i + 1] - x[i]) * X[i] / (X[i] - X[i + 1])
            lo = i
            while lo > 0 and X[lo - 1] >= X[lo]:
                lo -= 1
            hi = i + 1
            while hi < len(X) - 1 and X[hi + 1] <= X[hi]:
                hi += 1
            out.append((float(xc), float(X[lo] - X[hi])))
    return out
