"""Seven-level NV photodynamics and the AO-PL contrast versus laser power.

Levels are ordered g0, g+, g-, e0, e+, e-, s. Rates are in MHz (1/us) and
the generator G acts on column population vectors, dn/dt = G n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np

LEVELS = ("g0", "g+", "g-", "e0", "e+", "e-", "s")
G0, GP, GM, E0, EP, EM, S = range(7)
GROUND = (G0, GP, GM)
EXCITED = (E0, EP, EM)


class RateModelError(ValueError):
    pass


class SteadyStateError(ArithmeticError):
    """The generator has no unique, well-conditioned stationary state."""


class MonotoneCurveWarning(UserWarning):
    """The sampled curve has no interior maximum."""


@dataclass(frozen=True)
class RateModelParams:
    pump_per_mW: float = 0.1
    k_rad: float = 65.0
    k_isc_pm1: float = 80.0
    k_isc_0: float = 11.0
    k_s0: float = 3.3
    k_spm1: float = 1.1
    gamma_g_off: float = 2e-4
    gamma_e_off: float = 0.0
    c_dd_g: float = 0.1
    c_dd_e: float = 0.0
    nv_ppm: float = 3.8

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise RateModelError(f"{f.name} must be a finite non-negative rate, got {v}")
        if not self.k_isc_pm1 > self.k_isc_0:
            raise RateModelError("spin-selective ISC requires k_isc_pm1 > k_isc_0")

    def relaxation(self, on_resonance: bool) -> tuple[float, float]:
        """(Gamma_g, Gamma_e) with the concentration-dependent on-resonance term."""
        extra = self.nv_ppm if on_resonance else 0.0
        return self.gamma_g_off + self.c_dd_g * extra, self.gamma_e_off + self.c_dd_e * extra

    def with_(self, **kw) -> "RateModelParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class Populations:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (7,):
            raise RateModelError("populations need exactly 7 entries")
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-10:
            raise RateModelError("populations must be non-negative and sum to 1")
        object.__setattr__(self, "values", v)

    def __getitem__(self, name: str) -> float:
        return float(self.values[LEVELS.index(name)])

    @property
    def excited(self) -> float:
        return float(self.values[list(EXCITED)].sum())


def rate_matrix(p: RateModelParams, power_mW: float, on_resonance: bool) -> np.ndarray:
    """7x7 generator; column j holds the rates out of level j."""
    if not power_mW >= 0:
        raise RateModelError("power must be non-negative")
    W = np.zeros((7, 7))  # W[i, j]: rate j -> i
    pump = p.pump_per_mW * power_mW
    for g, e in zip(GROUND, EXCITED):
        W[e, g] = pump
        W[g, e] = p.k_rad
    W[S, E0] = p.k_isc_0
    W[S, EP] = W[S, EM] = p.k_isc_pm1
    W[G0, S] = p.k_s0
    W[GP, S] = W[GM, S] = p.k_spm1
    gg, ge = p.relaxation(on_resonance)
    for block, rate in ((GROUND, gg), (EXCITED, ge)):
        for i in block:
            for j in block:
                if i != j:
                    W[i, j] = rate
    return W - np.diag(W.sum(axis=0))


def steady_state(G: np.ndarray, residual_tol: float = 1e-9) -> Populations:
    """Normalized null vector of the generator.

    Raises SteadyStateError when the stationary state is not unique (the chain
    has disconnected closed classes) or the residual is too large.
    """
    G = np.asarray(G, dtype=float)
    if G.shape != (7, 7):
        raise RateModelError("generator must be 7x7")
    scale = max(float(np.max(np.abs(G))), 1e-300)
    if np.max(np.abs(G.sum(axis=0))) > 1e-12 * max(scale, 1.0):
        raise RateModelError("generator columns must sum to zero")
    _, sv, Vt = np.linalg.svd(G)
    if sv[-2] <= 1e-12 * scale:
        raise SteadyStateError("stationary state not unique: disconnected or closed level subsets")
    n = Vt[-1]
    n = n / n.sum()
    if np.min(n) < -1e-12:
        raise SteadyStateError("ill-conditioned generator: negative stationary population")
    n = np.clip(n, 0.0, None)
    n /= n.sum()
    if np.linalg.norm(G @ n) > residual_tol * max(scale, 1.0):
        raise SteadyStateError("steady-state residual above tolerance")
    return Populations(n)


def pl_rate(n: Populations, p: RateModelParams) -> float:
    return p.k_rad * n.excited


@dataclass
class PowerCurve:
    powers: np.ndarray
    contrast: np.ndarray
    pl_on: np.ndarray
    pl_off: np.ndarray
    params: RateModelParams


def _contrast_point(args):
    p, P = args
    on = pl_rate(steady_state(rate_matrix(p, P, True)), p)
    off = pl_rate(steady_state(rate_matrix(p, P, False)), p)
    return 1.0 - on / off, on, off


def contrast_vs_power(p: RateModelParams, powers, workers: int = 1) -> PowerCurve:
    """C(P) = 1 - PL_on / PL_off at each power (mW)."""
    from .sweep import parallel_map

    P = np.asarray(powers, dtype=float)
    if P.ndim != 1 or P.size == 0 or np.any(P <= 0):
        raise RateModelError("powers must be a non-empty list of positive values")
    rows = np.array(parallel_map(_contrast_point, [(p, float(x)) for x in P], workers))
    return PowerCurve(P, rows[:, 0], rows[:, 1], rows[:, 2], p)


def find_optimal_power(powers, contrast) -> tuple[float, float]:
    """(P*, C*) from the sampled argmax refined by a parabola through its neighbours.

    Ties go to the lowest power. A maximum on the boundary triggers a
    MonotoneCurveWarning and the boundary sample is returned.
    """
    x = np.asarray(powers, dtype=float)
    y = np.asarray(contrast, dtype=float)
    if x.size < 3 or x.shape != y.shape:
        raise RateModelError("need at least 3 matching samples")
    if not np.all(np.diff(x) > 0):
        raise RateModelError("powers must be strictly increasing")
    i = int(np.argmax(y))
    if i == 0 or i == x.size - 1:
        warnings.warn("contrast curve has no interior maximum", MonotoneCurveWarning, stacklevel=2)
        return float(x[i]), float(y[i])
    x0, x1, x2 = x[i - 1:i + 2]
    y0, y1, y2 = y[i - 1:i + 2]
    # vertex of the interpolating parabola (divided differences)
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    a = (d12 - d01) / (x2 - x0)
    if a >= 0:
        return float(x1), float(y1)
    b = d01 - a * (x0 + x1)
    xv = -b / (2 * a)
    yv = y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1)
    return float(xv), float(yv)
