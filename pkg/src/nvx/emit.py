"""CSV and SVG output for sweep results."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np


class EmitError(OSError):
    pass


@dataclass
class SweepResult:
    kind: str  # map | linecut | odmr | degeneracies | lia | power-curve | angles
    command: str
    columns: tuple[str, ...]
    rows: list[tuple]
    fingerprint: str
    config: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)  # derived values, echoed in the header


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse_cell(s: str):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def to_csv(result: SweepResult) -> str:
    """CSV text: '#' header block (command, fingerprint, config), column row, data rows."""
    buf = io.StringIO()
    buf.write(f"# command: {result.command}\n")
    buf.write(f"# kind: {result.kind}\n")
    buf.write(f"# fingerprint: {result.fingerprint}\n")
    for k in sorted(result.notes):
        buf.write(f"# {k}: {result.notes[k]}\n")
    buf.write("# config: " + json.dumps(result.config, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def parse_csv(text: str) -> tuple[dict, tuple[str, ...], list[tuple]]:
    """Inverse of to_csv: (header dict, columns, rows with numbers restored)."""
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            header[k] = json.loads(v) if k == "config" else v
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = tuple(next(reader))
    rows = [tuple(_parse_cell(c) for c in r) for r in reader]
    return header, columns, rows


def write_csv(result: SweepResult, path) -> str:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(to_csv(result))
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from exc
    return str(path)


_AXIS_LABELS = {
    "B_par_mT": "B$_\\parallel$ (mT)",
    "B_perp_mT": "B$_\\perp$ (mT)",
    "freq_MHz": "frequency (MHz)",
    "power_mW": "laser power (mW)",
}


def write_svg(result: SweepResult, path) -> str:
    """Self-contained SVG: heatmap for maps, polylines for curves."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "nvx"
    matplotlib.rcParams["svg.fonttype"] = "path"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    cols = {c: i for i, c in enumerate(result.columns)}
    data = result.rows

    def col(name):
        return np.array([r[cols[name]] for r in data], dtype=float)

    if result.kind == "map":
        bp, bq, z = col("B_par_mT"), col("B_perp_mT"), col("contrast")
        ux, uy = np.unique(bq), np.unique(bp)
        Z = z.reshape(len(uy), len(ux))
        mesh = ax.pcolormesh(ux, uy, Z, shading="nearest", cmap="viridis")
        label = "contrast (%)" if result.notes.get("normalization") == "absolute" else "contrast (normalized)"
        fig.colorbar(mesh, ax=ax, label=label)
        ax.set_xlabel(_AXIS_LABELS["B_perp_mT"])
        ax.set_ylabel(_AXIS_LABELS["B_par_mT"])
        ax.set_aspect("equal")
    elif result.kind in ("linecut", "lia"):
        y = "contrast" if result.kind == "linecut" else "X_normalized"
        ax.plot(col("B_perp_mT"), col(y), lw=1.0)
        ax.set_xlabel(_AXIS_LABELS["B_perp_mT"])
        ax.set_ylabel("contrast" if result.kind == "linecut" else "lock-in X")
    elif result.kind == "odmr":
        keys = sorted({(r[cols["orientation"]], r[cols["branch"]], str(r[cols["mI"]])) for r in data})
        for k in keys:
            sel = [r for r in data if (r[cols["orientation"]], r[cols["branch"]], str(r[cols["mI"]])) == k]
            ax.plot([r[cols["B_perp_mT"]] for r in sel], [r[cols["freq_MHz"]] for r in sel], lw=0.8)
        ax.set_xlabel(_AXIS_LABELS["B_perp_mT"])
        ax.set_ylabel(_AXIS_LABELS["freq_MHz"])
    elif result.kind == "degeneracies":
        x, m = col("B_perp_mT"), col("multiplicity")
        ax.vlines(x, 0, m)
        ax.plot(x, m, "o")
        ax.set_xlabel(_AXIS_LABELS["B_perp_mT"])
        ax.set_ylabel("multiplicity")
    elif result.kind == "power-curve":
        for ppm in sorted({r[cols["nv_ppm"]] for r in data}):
            sel = [r for r in data if r[cols["nv_ppm"]] == ppm]
            ax.plot([r[cols["power_mW"]] for r in sel], [100 * r[cols["contrast"]] for r in sel],
                    label=f"{ppm:g} ppm")
        ax.set_xscale("log")
        ax.set_xlabel(_AXIS_LABELS["power_mW"])
        ax.set_ylabel("contrast (%)")
        ax.legend()
    elif result.kind == "angles":
        th = col("theta_deg")
        ax.vlines(th, 0, 1)
        for t, r in zip(th, data):
            ax.annotate(str(r[cols["kind"]]), (t, 1.0), rotation=90, fontsize=7, va="top")
        ax.set_xlabel("θ (deg)")
        ax.set_yticks([])
    else:
        plt.close(fig)
        raise ValueError(f"no SVG layout for result kind {result.kind!r}")
    ax.set_title(result.command)
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return str(path)


def emit(result: SweepResult, fmt: str, out_dir) -> str:
    if fmt not in ("csv", "svg"):
        raise ValueError(f"unknown format {fmt!r}")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise EmitError(f"cannot create output directory {out_dir}: {exc}") from exc
    path = os.path.join(out_dir, f"{result.command}.{fmt}")
    return write_csv(result, path) if fmt == "csv" else write_svg(result, path)
