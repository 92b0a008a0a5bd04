"""Deterministic parallel evaluation over pre-indexed work items."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "NVX_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def _run_chunk(fn, items):
    return [fn(x) for x in items]


def chunks(n_items: int, workers: int) -> list[range]:
    """Fixed contiguous partition of ``range(n_items)``; about 4 chunks per worker."""
    n_chunks = max(1, min(n_items, 4 * workers))
    bounds = [round(k * n_items / n_chunks) for k in range(n_chunks + 1)]
    return [range(bounds[k], bounds[k + 1]) for k in range(n_chunks) if bounds[k] < bounds[k + 1]]


def parallel_map(fn, items, workers: int = 1, progress=None) -> list:
    """``[fn(x) for x in items]`` spread over ``workers`` processes.

    Results are written into slots indexed by item position, so the output does
    not depend on worker count or completion order. ``progress`` (if given) is
    called with (done, total) as chunks finish.
    """
    items = list(items)
    total = len(items)
    if workers <= 1 or total <= 1:
        out = []
        for i, x in enumerate(items):
            out.append(fn(x))
            if progress is not None:
                progress(i + 1, total)
        return out
    slots: list = [None] * total
    parts = chunks(total, workers)
    done = 0
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_run_chunk, fn, [items[i] for i in r]): r for r in parts}
        for fut, r in futures.items():
            for i, value in zip(r, fut.result()):
                slots[i] = value
            done += len(r)
            if progress is not None:
                progress(done, total)
    return slots


COMMANDS = ("odmr-map", "degeneracies", "contrast-map", "linecut", "lia-scan",
            "power-sweep", "degeneracy-angles")


class SweepConfigError(ValueError):
    """The config lacks something the command needs."""


def _need_fixed(cfg, name):
    v = getattr(cfg.scan, name)
    if v is None or not isinstance(v, (int, float)):
        raise SweepConfigError(f"scan.{name} must be a fixed value for this command")
    return float(v)


def _need_grid(cfg, name):
    from .config import Grid

    v = getattr(cfg.scan, name)
    if not isinstance(v, Grid):
        raise SweepConfigError(f"scan.{name} must be a grid {{start, stop, step}} for this command")
    return v.values()


def run(cfg, command: str, progress=None):
    """Execute ``command`` for an ExperimentConfig and return a SweepResult.

    The payload depends only on the config (never on cfg.workers); ``progress``
    receives (done, total) on the caller's side channel.
    """
    from . import crossrelax, geometry, lockin, rates, spectra
    from .emit import SweepResult

    if command not in COMMANDS:
        raise SweepConfigError(f"unknown command {command!r} (choose from {', '.join(COMMANDS)})")
    w = cfg.workers
    c = cfg.constants
    iso = cfg.sample.iso
    bg = cfg.scan.background
    notes = {}

    if command == "degeneracy-angles":
        kind = "angles"
        columns = ("theta_deg", "kind", "participants")
        rows = [(a.theta, a.kind, a.label()) for a in geometry.degeneracy_angles()]

    elif command in ("odmr-map", "degeneracies"):
        B_par = _need_fixed(cfg, "B_par")
        grid = _need_grid(cfg, "B_perp")
        m = spectra.odmr_map(cfg.scan.orientations, B_par, grid, c, iso, bg, w)
        if command == "odmr-map":
            kind = "odmr"
            columns = ("B_par_mT", "B_perp_mT", "orientation", "branch", "mI", "freq_MHz", "ambiguous")
            rows = [(ln.field.B_par, ln.field.B_perp, ln.orientation.value, ln.branch, float(ln.m_I),
                     ln.frequency, ln.ambiguous) for ln in m.lines]
        else:
            kind = "degeneracies"
            columns = ("B_perp_mT", "participants", "min_gap_MHz", "multiplicity")
            rows = [(e.B_perp, e.participants(), e.min_gap, e.multiplicity)
                    for e in spectra.find_degeneracies(m, cfg.gap_tolerance)]
        notes["B_par_mT"] = repr(B_par)

    elif command == "contrast-map":
        kind = "map"
        bp = _need_grid(cfg, "B_par")
        bq = _need_grid(cfg, "B_perp")
        cm = crossrelax.contrast_map(bp, bq, cfg.crossrelax, c, bg, w)
        columns = ("B_par_mT", "B_perp_mT", "contrast")
        rows = [(float(a), float(b), float(cm.values[i, j]))
                for i, a in enumerate(cm.B_par) for j, b in enumerate(cm.B_perp)]
        notes["raw_max"] = repr(float(cm.raw.max()))

    elif command == "linecut":
        kind = "linecut"
        B_par = _need_fixed(cfg, "B_par")
        lc = crossrelax.linecut(B_par, _need_grid(cfg, "B_perp"), cfg.crossrelax, c, bg, w)
        columns = ("B_perp_mT", "contrast")
        rows = [(float(b), float(v)) for b, v in zip(lc.B_perp, lc.values)]
        notes["B_par_mT"] = repr(B_par)
        notes["raw_max"] = repr(float(lc.raw.max()))

    elif command == "lia-scan":
        kind = "lia"
        B_par = _need_fixed(cfg, "B_par")
        s = lockin.lia_scan(B_par, _need_grid(cfg, "B_perp"), cfg.crossrelax, cfg.lockin, c, bg, w)
        columns = ("B_perp_mT", "X_normalized")
        rows = [(float(b), float(x)) for b, x in zip(s.B_perp, s.X)]
        notes["B_par_mT"] = repr(B_par)

    else:  # power-sweep
        kind = "power-curve"
        if cfg.scan.powers is None:
            raise SweepConfigError("scan.powers is required for power-sweep")
        P = cfg.scan.powers.values()
        ppms = cfg.scan.nv_ppm or (cfg.rates.nv_ppm,)
        columns = ("nv_ppm", "power_mW", "contrast", "PL_on", "PL_off")
        rows = []
        for ppm in ppms:
            curve = rates.contrast_vs_power(cfg.rates.with_(nv_ppm=ppm), P, w)
            rows += [(ppm, float(p), float(cc), float(on), float(off))
                     for p, cc, on, off in zip(curve.powers, curve.contrast, curve.pl_on, curve.pl_off)]
            if len(P) >= 3 and 0 < int(curve.contrast.argmax()) < len(P) - 1:
                notes[f"optimum_{ppm:g}ppm"] = repr(rates.find_optimal_power(P, curve.contrast))

    notes["normalization"] = cfg.output.normalization
    if progress is not None:
        progress(1, 1)
    return SweepResult(kind, command, columns, rows, cfg.fingerprint(), _echo(cfg), notes)


def _echo(cfg) -> dict:
    data = cfg.canonical()
    data.pop("workers")
    data["output"].pop("dir")
    data["output"].pop("formats")
    return data
