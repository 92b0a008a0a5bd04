"""Experiment configuration: TOML schema, strict validation and fingerprint.

Layout (every table and key is optional unless a command needs it)::

    workers = 1

    [sample]
    name = "S2-15N"          # a row of SAMPLES; fills iso and nv_ppm
    iso = "N15"              # N14 | N15 | none
    nv_ppm = 3.8

    [constants]              # D, gamma_e, d_dd
    d_dd = 0.1
    [constants.hyperfine.N14]
    A_par = -2.14

    [scan]
    B_par = 1.24                                   # fixed value or grid
    B_perp = {start = 0.3, stop = 1.3, step = 0.002}
    background = [0.0, 0.0, 0.0]
    orientations = ["lambda", "phi", "chi", "kappa"]
    powers = {start = 0.1, stop = 50.0, num = 200, spacing = "log"}
    nv_ppm = [3.8, 2.0]                            # power-sweep samples

    [model.crossrelax]       # directions, direction_set, linewidth, kappa
    [model.lockin]           # mod_amplitude, phase_samples, harmonic, fine_step
    [model.rates]            # RateModelParams fields except nv_ppm
    [model.spectra]          # gap_tolerance

    [output]
    dir = "out"
    formats = ["csv"]
    normalization = "normalized"   # or "absolute"

Grids include ``stop`` when it lies on the step lattice.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .crossrelax import CrossRelaxConfig
from .geometry import Orientation
from .hamiltonian import DEFAULT_HYPERFINE, Isotope, PhysicalConstants
from .lockin import LockinConfig
from .rates import RateModelParams


class ConfigError(ValueError):
    """Configuration problem; ``kind`` is "parse" or "validation"."""

    def __init__(self, message: str, kind: str = "validation", line: int | None = None,
                 col: int | None = None):
        self.kind = kind
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)


@dataclass(frozen=True)
class SampleRow:
    name: str
    iso: Isotope
    nv_ppm: float


SAMPLES = {
    "S1-14N": SampleRow("S1-14N", Isotope.N14, 3.8),
    "S2-15N": SampleRow("S2-15N", Isotope.N15, 3.8),
    "S3-14N": SampleRow("S3-14N", Isotope.N14, 3.8),
    "S4-14N": SampleRow("S4-14N", Isotope.N14, 2.0),
    "S5-14N": SampleRow("S5-14N", Isotope.N14, 0.3),
}


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    step: float

    def values(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return np.round(self.start + self.step * np.arange(n), 12)


@dataclass(frozen=True)
class PowerGrid:
    start: float
    stop: float
    num: int
    spacing: str = "log"

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.num)
        return np.linspace(self.start, self.stop, self.num)


@dataclass(frozen=True)
class Sample:
    name: str | None = None
    iso: Isotope = Isotope.NONE
    nv_ppm: float | None = None


@dataclass(frozen=True)
class ScanConfig:
    B_par: float | Grid | None = None
    B_perp: float | Grid | None = None
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientations: tuple[Orientation, ...] = tuple(Orientation)
    powers: PowerGrid | None = None
    nv_ppm: tuple[float, ...] = ()


@dataclass(frozen=True)
class OutputConfig:
    dir: str | None = None
    formats: tuple[str, ...] = ("csv",)
    normalization: str = "normalized"


@dataclass(frozen=True)
class ExperimentConfig:
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    sample: Sample = field(default_factory=Sample)
    scan: ScanConfig = field(default_factory=ScanConfig)
    crossrelax: CrossRelaxConfig = field(default_factory=CrossRelaxConfig)
    lockin: LockinConfig = field(default_factory=LockinConfig)
    rates: RateModelParams = field(default_factory=RateModelParams)
    gap_tolerance: float = 0.05
    output: OutputConfig = field(default_factory=OutputConfig)
    workers: int = 1

    def canonical(self) -> dict:
        """Default-expanded plain-data view, stable across runs."""
        return _plain({
            "constants": {
                "D": self.constants.D, "gamma_e": self.constants.gamma_e, "d_dd": self.constants.d_dd,
                "hyperfine": {k.value: asdict(v) for k, v in self.constants.hyperfine.items()
                              if k is not Isotope.NONE},
            },
            "sample": asdict(self.sample),
            "scan": asdict(self.scan),
            "model": {
                "crossrelax": asdict(self.crossrelax),
                "lockin": asdict(self.lockin),
                "rates": asdict(self.rates),
                "spectra": {"gap_tolerance": self.gap_tolerance},
            },
            "output": asdict(self.output),
            "workers": self.workers,
        })

    def fingerprint(self) -> str:
        """sha256 of the canonical config, ignoring worker count and output location."""
        data = self.canonical()
        data.pop("workers")
        data["output"].pop("dir")
        data["output"].pop("formats")
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (Isotope, Orientation)):
        return x.value
    if isinstance(x, np.generic):
        return x.item()
    return x


# schema helpers ----------------------------------------------------------

_HEADER = re.compile(r"^\s*\[\[?\s*([^\]]+?)\s*\]\]?")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-\"']+)\s*=")


def _locate(text: str, path: tuple[str, ...]) -> tuple[int | None, int | None]:
    """Best-effort (line, column) of a dotted key path in TOML source."""
    if not path:
        return None, None
    table: tuple[str, ...] = ()
    for ln, line in enumerate(text.splitlines(), 1):
        m = _HEADER.match(line)
        if m:
            table = tuple(p.strip().strip('"') for p in m.group(1).split("."))
            if table == path:
                return ln, m.start(1) + 1
            continue
        m = _KEY.match(line)
        if not m:
            continue
        key = m.group(1).strip('"\'')
        full = table + (key,)
        if full == path:
            return ln, m.start(1) + 1
        if full == path[:len(full)] and len(path) > len(full):
            # key inside an inline table on this line
            inner = re.search(r"\b" + re.escape(path[-1]) + r"\s*=", line)
            if inner:
                return ln, inner.start() + 1
    return None, None


class _Reader:
    def __init__(self, text: str):
        self.text = text

    def fail(self, path, message):
        line, col = _locate(self.text, tuple(path))
        raise ConfigError(f"{'.'.join(path)}: {message}" if path else message, "validation", line, col)

    def table(self, data, path, allowed):
        if not isinstance(data, dict):
            self.fail(path, "expected a table")
        for k in data:
            if k not in allowed:
                self.fail(tuple(path) + (k,), f"unknown key (allowed: {', '.join(sorted(allowed))})")
        return data

    def number(self, value, path, positive=False, non_negative=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(path, f"expected a finite number, got {value!r}")
        if positive and not value > 0:
            self.fail(path, f"must be > 0, got {value!r}")
        if non_negative and value < 0:
            self.fail(path, f"must be >= 0, got {value!r}")
        return float(value)

    def integer(self, value, path, minimum=1):
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, f"expected an integer, got {value!r}")
        if value < minimum:
            self.fail(path, f"must be >= {minimum}, got {value!r}")
        return int(value)

    def string(self, value, path, choices=None):
        if not isinstance(value, str):
            self.fail(path, f"expected a string, got {value!r}")
        if choices is not None and value not in choices:
            self.fail(path, f"must be one of {', '.join(choices)}, got {value!r}")
        return value

    def grid(self, value, path):
        if not isinstance(value, dict):
            return self.number(value, path)
        self.table(value, path, {"start", "stop", "step"})
        for k in ("start", "stop", "step"):
            if k not in value:
                self.fail(tuple(path) + (k,), "missing")
        start = self.number(value["start"], tuple(path) + ("start",))
        stop = self.number(value["stop"], tuple(path) + ("stop",))
        step = self.number(value["step"], tuple(path) + ("step",), positive=True)
        if not start < stop:
            self.fail(tuple(path) + ("stop",), "start must be < stop")
        return Grid(start, stop, step)


def parse_config(text: str) -> ExperimentConfig:
    """Validated ExperimentConfig from TOML text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        msg = re.sub(r"\s*\(at line \d+, column \d+\)", "", str(exc))
        raise ConfigError(f"TOML syntax error: {msg}", "parse", line, col) from None
    return from_dict(data, text)


def from_dict(data: dict, text: str = "") -> ExperimentConfig:
    r = _Reader(text)
    r.table(data, (), {"workers", "sample", "constants", "scan", "model", "output"})
    cfg = ExperimentConfig()

    workers = r.integer(data["workers"], ("workers",)) if "workers" in data else 1

    # sample
    sample = Sample()
    if "sample" in data:
        s = r.table(data["sample"], ("sample",), {"name", "iso", "nv_ppm"})
        name = r.string(s["name"], ("sample", "name"), tuple(SAMPLES)) if "name" in s else None
        row = SAMPLES.get(name)
        iso = row.iso if row else Isotope.NONE
        if "iso" in s:
            try:
                parsed = Isotope.parse(r.string(s["iso"], ("sample", "iso")))
            except ValueError as exc:
                r.fail(("sample", "iso"), str(exc))
            if row and parsed is not row.iso:
                r.fail(("sample", "iso"), f"conflicts with sample {name} ({row.iso.value})")
            iso = parsed
        ppm = row.nv_ppm if row else None
        if "nv_ppm" in s:
            ppm = r.number(s["nv_ppm"], ("sample", "nv_ppm"), positive=True)
        sample = Sample(name, iso, ppm)

    # constants
    constants = PhysicalConstants()
    if "constants" in data:
        c = r.table(data["constants"], ("constants",), {"D", "gamma_e", "d_dd", "hyperfine"})
        kw = {k: r.number(c[k], ("constants", k)) for k in ("D", "gamma_e", "d_dd") if k in c}
        if "d_dd" in kw and kw["d_dd"] < 0:
            r.fail(("constants", "d_dd"), "must be >= 0")
        hf = dict(DEFAULT_HYPERFINE)
        if "hyperfine" in c:
            h = r.table(c["hyperfine"], ("constants", "hyperfine"), {"N14", "N15"})
            for iso_name, block in h.items():
                path = ("constants", "hyperfine", iso_name)
                r.table(block, path, {"A_par", "A_perp", "Q"})
                iso = Isotope.parse(iso_name)
                vals = {k: r.number(v, path + (k,)) for k, v in block.items()}
                hf[iso] = replace(hf[iso], **vals)
        try:
            constants = PhysicalConstants(hyperfine=hf, **kw)
        except ValueError as exc:
            r.fail(("constants",), str(exc))

    # scan
    scan = ScanConfig()
    if "scan" in data:
        s = r.table(data["scan"], ("scan",),
                    {"B_par", "B_perp", "background", "orientations", "powers", "nv_ppm"})
        kw = {}
        for k in ("B_par", "B_perp"):
            if k in s:
                kw[k] = r.grid(s[k], ("scan", k))
        if "background" in s:
            bg = s["background"]
            if not isinstance(bg, list) or len(bg) != 3:
                r.fail(("scan", "background"), "expected a list of three numbers (mT)")
            kw["background"] = tuple(r.number(v, ("scan", "background")) for v in bg)
        if "orientations" in s:
            ol = s["orientations"]
            if not isinstance(ol, list) or not ol:
                r.fail(("scan", "orientations"), "expected a non-empty list")
            try:
                kw["orientations"] = tuple(sorted({Orientation.parse(r.string(v, ("scan", "orientations")))
                                                   for v in ol}))
            except ValueError as exc:
                r.fail(("scan", "orientations"), str(exc))
        if "powers" in s:
            p = r.table(s["powers"], ("scan", "powers"), {"start", "stop", "num", "spacing"})
            for k in ("start", "stop", "num"):
                if k not in p:
                    r.fail(("scan", "powers", k), "missing")
            start = r.number(p["start"], ("scan", "powers", "start"), positive=True)
            stop = r.number(p["stop"], ("scan", "powers", "stop"), positive=True)
            if not start < stop:
                r.fail(("scan", "powers", "stop"), "start must be < stop")
            num = r.integer(p["num"], ("scan", "powers", "num"), minimum=3)
            spacing = r.string(p.get("spacing", "log"), ("scan", "powers", "spacing"), ("log", "linear"))
            kw["powers"] = PowerGrid(start, stop, num, spacing)
        if "nv_ppm" in s:
            lst = s["nv_ppm"]
            if not isinstance(lst, list) or not lst:
                r.fail(("scan", "nv_ppm"), "expected a non-empty list")
            kw["nv_ppm"] = tuple(r.number(v, ("scan", "nv_ppm"), positive=True) for v in lst)
        scan = ScanConfig(**kw)

    # output
    output = OutputConfig()
    if "output" in data:
        o = r.table(data["output"], ("output",), {"dir", "formats", "normalization"})
        kw = {}
        if "dir" in o:
            kw["dir"] = r.string(o["dir"], ("output", "dir"))
        if "formats" in o:
            fl = o["formats"]
            if not isinstance(fl, list) or not fl:
                r.fail(("output", "formats"), "expected a non-empty list")
            kw["formats"] = tuple(r.string(v, ("output", "formats"), ("csv", "svg")) for v in fl)
        if "normalization" in o:
            kw["normalization"] = r.string(o["normalization"], ("output", "normalization"),
                                           ("normalized", "absolute"))
        output = OutputConfig(**kw)

    # model
    xr = {}
    lk = {}
    rt = {}
    gap = cfg.gap_tolerance
    if "model" in data:
        m = r.table(data["model"], ("model",), {"crossrelax", "lockin", "rates", "spectra"})
        if "crossrelax" in m:
            path = ("model", "crossrelax")
            b = r.table(m["crossrelax"], path, {"directions", "direction_set", "linewidth", "kappa"})
            if "directions" in b:
                xr["directions"] = r.integer(b["directions"], path + ("directions",))
            if "direction_set" in b:
                xr["direction_set"] = r.string(b["direction_set"], path + ("direction_set",), ("fibonacci",))
            if "linewidth" in b:
                xr["linewidth"] = r.number(b["linewidth"], path + ("linewidth",), non_negative=True)
            if "kappa" in b:
                xr["kappa"] = r.number(b["kappa"], path + ("kappa",), positive=True)
                if xr["kappa"] > 1:
                    r.fail(path + ("kappa",), "must lie in (0, 1]")
        if "lockin" in m:
            path = ("model", "lockin")
            b = r.table(m["lockin"], path, {"mod_amplitude", "phase_samples", "harmonic", "fine_step"})
            if "mod_amplitude" in b:
                lk["mod_amplitude"] = r.number(b["mod_amplitude"], path + ("mod_amplitude",), positive=True)
            if "phase_samples" in b:
                lk["phase_samples"] = r.integer(b["phase_samples"], path + ("phase_samples",), minimum=8)
            if "harmonic" in b:
                lk["harmonic"] = r.integer(b["harmonic"], path + ("harmonic",))
            if "fine_step" in b:
                lk["fine_step"] = r.number(b["fine_step"], path + ("fine_step",), positive=True)
        if "rates" in m:
            path = ("model", "rates")
            names = {f.name for f in fields(RateModelParams)} - {"nv_ppm"}
            b = r.table(m["rates"], path, names)
            rt = {k: r.number(v, path + (k,), non_negative=True) for k, v in b.items()}
        if "spectra" in m:
            path = ("model", "spectra")
            b = r.table(m["spectra"], path, {"gap_tolerance"})
            if "gap_tolerance" in b:
                gap = r.number(b["gap_tolerance"], path + ("gap_tolerance",), positive=True)

    crossrelax = CrossRelaxConfig(iso=sample.iso, d_dd=constants.d_dd,
                                  contrast_scale=output.normalization, **xr)
    lockin = LockinConfig(normalize=output.normalization == "normalized", **lk)
    if sample.nv_ppm is not None:
        rt["nv_ppm"] = sample.nv_ppm
    try:
        rates = RateModelParams(**rt)
    except ValueError as exc:
        r.fail(("model", "rates"), str(exc))

    return ExperimentConfig(constants, sample, scan, crossrelax, lockin, rates, gap, output, workers)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not UTF-8: {exc}", "parse") from None
    return parse_config(text)


PRESETS = ("fig2-map", "fig3b-14N", "fig3b-15N", "fig4-lia", "fig4c-odmr", "fig5-power")


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(PRESETS)})")
    return resources.files("nvx").joinpath("presets", f"{name}.toml").read_text(encoding="utf-8")


def load_preset(name: str) -> ExperimentConfig:
    return parse_config(preset_text(name))
