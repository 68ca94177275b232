"""Convergence-study harness: sweeps, error tables, and log-log slope fits.

A sweep walks a grid of numerical parameters (L, and sigma for smearing),
computes the observables for each cell, and emits one StudyRecord per
(observable, cell) with the error against the cached reference and, for
smearing, against the same-sigma largest-L value (the converged-tail proxy).
All sweeps are deterministic; records are sorted before serialization so a
parallel run produces byte-identical output.
"""

import csv
import math
import time
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError
from .interp import energy_interp, fit_spline, select_bands, solve_fermi_interp
from .parallel import ordered_map
from .quadrature import LevelSetQuadConfig, make_grid
from .reference import get_case
from .smearing import scheme_by_name
from .smeared import (band_energies, extrapolated_energy, smeared_energy,
                      smeared_entropy, solve_fermi)

OBSERVABLES = ("fermi", "energy", "energy_extrapolated")

# Bands whose minimum sample is above the reference Fermi level by more than
# this never enter the occupied region and are not interpolated.
BAND_SELECT_MARGIN = 1.0


@dataclass(frozen=True)
class StudyConfig:
    """One sweep specification; mirrors the config-file keys."""

    case_id: str
    method: str                      # "interp" | "smear"
    L_list: tuple
    p: int = None
    q: int = None
    scheme: str = None
    sigma_list: tuple = None
    observable: str = None           # None = all observables of the method
    abs_tol: float = 1e-6
    cold_a: float = None
    n_electrons: float = None

    def __post_init__(self):
        if self.method not in ("interp", "smear"):
            raise ConfigError(f"method must be 'interp' or 'smear', got {self.method!r}")
        if list(self.L_list) != sorted(set(self.L_list)):
            raise ConfigError("L_list must be strictly increasing")
        if self.method == "interp" and (self.p is None or self.q is None):
            raise ConfigError("interp sweeps need p and q")
        if self.method == "smear":
            if not self.scheme or not self.sigma_list:
                raise ConfigError("smear sweeps need scheme and sigma_list")
            sig = list(self.sigma_list)
            if sig != sorted(set(sig), reverse=True):
                raise ConfigError("sigma_list must be strictly decreasing")
        if self.observable is not None and self.observable not in OBSERVABLES:
            raise ConfigError(f"observable must be one of {OBSERVABLES}")


@dataclass
class StudyRecord:
    """One experiment outcome: config axes flattened plus value and errors."""

    case: str
    observable: str
    method: str
    scheme: str = None
    p: int = None
    q: int = None
    L: int = None
    sigma: float = None
    value: float = None
    abs_error: float = None
    self_error: float = None
    wall_ms: float = None


RECORD_COLUMNS = [f.name for f in fields(StudyRecord)]


def _sort_key(r):
    return (r.observable, r.sigma if r.sigma is not None else -1.0, r.L)


def run_interp_sweep(config, refs, threads=None):
    """Interpolation sweep: per L, fit splines of orders q and p, solve the
    Fermi level on the order-q family, compute E^{L,p,q}, record errors."""
    case = get_case(config.case_id)
    model = case.model()
    n_el = case.n_electrons if config.n_electrons is None else config.n_electrons
    ref = refs[config.case_id]
    cfg = LevelSetQuadConfig(abs_tol=config.abs_tol)

    def one(L):
        grid = make_grid(model.d, L)
        energies = band_energies(model, grid)
        bands = select_bands(energies, ref.fermi + BAND_SELECT_MARGIN)
        shaped = [energies[:, b].reshape((L,) * model.d) for b in bands]
        t0 = time.perf_counter()
        splines_q = [fit_spline(s, config.q, band=b) for s, b in zip(shaped, bands)]
        fermi = solve_fermi_interp(splines_q, n_el, cfg)
        t1 = time.perf_counter()
        if config.p == config.q:
            splines_p = splines_q
        else:
            splines_p = [fit_spline(s, config.p, band=b) for s, b in zip(shaped, bands)]
        energy = energy_interp(splines_p, splines_q, fermi, cfg)
        t2 = time.perf_counter()
        common = dict(case=config.case_id, method="interp", p=config.p, q=config.q, L=L)
        return [
            StudyRecord(observable="fermi", value=fermi,
                        abs_error=abs(fermi - ref.fermi),
                        wall_ms=1e3 * (t1 - t0), **common),
            StudyRecord(observable="energy", value=energy,
                        abs_error=abs(energy - ref.energy),
                        wall_ms=1e3 * (t2 - t1), **common),
        ]

    records = [r for recs in ordered_map(one, config.L_list, threads=threads) for r in recs]
    if config.observable:
        records = [r for r in records if r.observable == config.observable]
    records.sort(key=_sort_key)
    return records


def run_smearing_sweep(config, refs, threads=None):
    """Smearing sweep over (sigma, L): Fermi level, energy, entropy-corrected
    energy; errors vs the reference and vs the same-sigma largest-L value."""
    case = get_case(config.case_id)
    model = case.model()
    n_el = case.n_electrons if config.n_electrons is None else config.n_electrons
    ref = refs[config.case_id]
    scheme = scheme_by_name(config.scheme, cold_a=config.cold_a)
    order = scheme.declared_order

    def one(cell):
        sigma, L = cell
        grid = make_grid(model.d, L)
        t0 = time.perf_counter()
        energies = band_energies(model, grid)
        fermi = solve_fermi(model, scheme, grid, sigma, n_el, energies=energies)
        energy = smeared_energy(model, scheme, grid, sigma, fermi, energies=energies)
        entropy = smeared_entropy(model, scheme, grid, sigma, fermi, energies=energies)
        extrap = extrapolated_energy(energy, entropy, sigma, order)
        wall = 1e3 * (time.perf_counter() - t0)
        common = dict(case=config.case_id, method="smear", scheme=config.scheme,
                      L=L, sigma=sigma, wall_ms=wall)
        return [
            StudyRecord(observable="fermi", value=fermi,
                        abs_error=abs(fermi - ref.fermi), **common),
            StudyRecord(observable="energy", value=energy,
                        abs_error=abs(energy - ref.energy), **common),
            StudyRecord(observable="energy_extrapolated", value=extrap,
                        abs_error=abs(extrap - ref.energy), **common),
        ]

    cells = [(sigma, L) for sigma in config.sigma_list for L in config.L_list]
    records = [r for recs in ordered_map(one, cells, threads=threads) for r in recs]

    # Self-proxy: the same-sigma value at the largest L stands in for L = inf.
    l_max = max(config.L_list)
    anchor = {(r.observable, r.sigma): r.value for r in records if r.L == l_max}
    for r in records:
        r.self_error = abs(r.value - anchor[(r.observable, r.sigma)])
    if config.observable:
        records = [r for r in records if r.observable == config.observable]
    records.sort(key=_sort_key)
    return records


def run_sweep(config, refs, threads=None):
    if config.method == "interp":
        return run_interp_sweep(config, refs, threads=threads)
    return run_smearing_sweep(config, refs, threads=threads)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    n_used: int
    ok: bool


NOISE_FLOOR = 1e-12


def fit_slope(records, axis, window=None, error_field="abs_error"):
    """Least-squares slope of log(error) vs log(axis value) for one series.

    ``axis`` is "L" or "sigma"; ``window`` is an (start, stop) index range
    into the axis-sorted records, defaulting to the last four points. Errors
    at or below the noise floor are dropped; fewer than 3 surviving points
    yields a flagged not-fittable result.
    """
    if axis not in ("L", "sigma"):
        raise ValueError("axis must be 'L' or 'sigma'")
    pts = sorted(((getattr(r, axis), getattr(r, error_field)) for r in records),
                 key=lambda t: t[0])
    if window is None:
        window = (max(0, len(pts) - 4), len(pts))
    pts = pts[window[0]:window[1]]
    pts = [(x, e) for x, e in pts if e is not None and e > NOISE_FLOOR]
    if len(pts) < 3:
        return SlopeFit(slope=math.nan, n_used=len(pts), ok=False)
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope = float(np.polyfit(x, y, 1)[0])
    return SlopeFit(slope=slope, n_used=len(pts), ok=True)


def _format_field(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_records(records, path):
    """Serialize records as CSV, losslessly for all numeric fields."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow([_format_field(getattr(r, c)) for c in RECORD_COLUMNS])


_INT_COLS = {"p", "q", "L"}
_FLOAT_COLS = {"sigma", "value", "abs_error", "self_error", "wall_ms"}


def read_records(path):
    """Read back a records CSV written by write_records."""
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RECORD_COLUMNS:
            raise ConfigError(f"{path}: unexpected record header {header!r}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RECORD_COLUMNS):
                raise ConfigError(f"{path}:{lineno}: expected {len(RECORD_COLUMNS)} columns",
                                  line=lineno)
            kwargs = {}
            for col, raw in zip(RECORD_COLUMNS, row):
                if raw == "":
                    kwargs[col] = None
                elif col in _INT_COLS:
                    kwargs[col] = int(raw)
                elif col in _FLOAT_COLS:
                    kwargs[col] = float(raw)
                else:
                    kwargs[col] = raw
            out.append(StudyRecord(**kwargs))
    return out


_LIST_KEYS = {"L_list", "sigma_list"}
_INT_KEYS = {"p", "q"}
_FLOAT_KEYS = {"abs_tol", "cold_a", "n_electrons"}
_STR_KEYS = {"case_id", "method", "scheme", "observable"}
_ALL_KEYS = _LIST_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


def read_config(path):
    """Parse a key = value study config file into a StudyConfig.

    Unknown keys, malformed values and missing required keys raise ConfigError
    with the offending line number where one exists.
    """
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'", line=lineno)
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _ALL_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}", line=lineno)
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}", line=lineno)
            try:
                if key in _LIST_KEYS:
                    parts = [p for p in val.replace(",", " ").split() if p]
                    values[key] = tuple(int(p) for p in parts) if key == "L_list" \
                        else tuple(float(p) for p in parts)
                elif key in _INT_KEYS:
                    values[key] = int(val)
                elif key in _FLOAT_KEYS:
                    values[key] = float(val)
                else:
                    values[key] = val
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}",
                                  line=lineno) from exc
    for required in ("case_id", "method", "L_list"):
        if required not in values:
            raise ConfigError(f"{path}: missing required key {required!r}")
    return StudyConfig(**values)
