"""Finite-size power-law fits and the exponent table built from them."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import LmgError, NoCrossingError
from .protocols import magnetization_minimum, protocol1_critical_variances
from .qfi import qfi_eigenstate, qfi_energy_scan, qfi_field_sweep, require_width
from .spectrum import critical_field, default_level, solve_sector
from .spin_sector import SpinSector, build_sector

DEFAULT_SIZES = (200, 400, 600, 800, 1200, 1600)
DEFAULT_FRACTIONS = (0.1, 0.2, 0.3)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float
    points: tuple[tuple[float, float], ...]

    def predict(self, n):
        return self.prefactor * np.asarray(n, dtype=float) ** self.exponent


def fit_power_law(points) -> PowerLawFit:
    """Least-squares line through (ln N, ln y); slope is the exponent."""
    pts = [(float(a), float(b)) for a, b in points]
    if len(pts) < 3:
        raise ValueError("a power-law fit needs at least three points")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("power-law fits need positive, finite sizes and values")
    lx, ly = np.log(x), np.log(y)
    xm, ym = lx.mean(), ly.mean()
    sxx = np.sum((lx - xm) ** 2)
    if sxx == 0:
        raise ValueError("all sizes are equal")
    slope = float(np.sum((lx - xm) * (ly - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = ly - (intercept + slope * lx)
    stot = np.sum((ly - ym) ** 2)
    # constant data (up to rounding) is fitted exactly by a zero exponent
    r2 = 1.0 if stot <= 1e-24 * len(ly) else float(max(0.0, 1.0 - np.sum(resid ** 2) / stot))
    return PowerLawFit(slope, math.exp(intercept), r2, tuple(pts))


def critical_field_spacing(sector: SpinSector, k: int) -> float:
    """|h_c^(k+1) - h_c^k|."""
    if k + 1 >= sector.dim:
        raise NoCrossingError(f"level {k + 1} does not exist in {sector!r}")
    return abs(critical_field(sector, k + 1) - critical_field(sector, k))


def mean_squared_level_distance(sector: SpinSector, h: float) -> float:
    """Harmonic mean of (E_n - E_k)^2 over the QFI energy window of the peak level k."""
    scan = qfi_energy_scan(sector, h)
    require_width(scan)
    e = solve_sector(sector, h).energies
    k = int(np.argmax(scan.values))
    x = e / sector.n_spins
    inside = (x >= scan.left_crossing) & (x <= scan.right_crossing)
    inside[k] = False
    if not inside.any():
        raise LmgError("no other level inside the QFI window")
    d2 = (e[inside] - e[k]) ** 2
    return float(inside.sum() / np.sum(1.0 / d2))


# ---------------------------------------------------------------------------
# exponent suite


@dataclass
class SuiteConfig:
    sizes: tuple[int, ...] = DEFAULT_SIZES
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    width_fractions: tuple[float, ...] = (0.1, 0.2)
    energy_fields: tuple[float, ...] = (0.2, 0.4)
    field_points: int = 400
    field_window: tuple[float, float] = (0.0, 1.0)
    ground_window: tuple[float, float] = (0.5, 1.5)
    ground_points: int = 101
    approach_rule: str = "extremal"
    approach_offset: float = 1e-3
    parity: str = "even"
    jobs: int = 1
    quantities: tuple[str, ...] = ("field", "spacing", "energy", "magnetization", "ground")


def _field_task(n, frac, cfg):
    sec = build_sector(n, cfg.parity)
    k = default_level(n, frac)
    scan = qfi_field_sweep(sec, k, np.linspace(*cfg.field_window, cfg.field_points))
    return {"peak": scan.peak_value, "peak_location": scan.peak_location,
            "width": scan.half_width, "zero_field": scan.value_at_zero_field}


def _spacing_task(n, frac, cfg):
    sec = build_sector(n, cfg.parity)
    return {"spacing": critical_field_spacing(sec, default_level(n, frac))}


def _energy_task(n, h, cfg):
    sec = build_sector(n, cfg.parity)
    scan = qfi_energy_scan(sec, h)
    return {"peak": scan.peak_value, "width": require_width(scan), "peak_location": scan.peak_location,
            "level_distance": mean_squared_level_distance(sec, h)}


def _magnetization_task(n, frac, cfg):
    sec = build_sector(n, cfg.parity)
    k = default_level(n, frac)
    h_min, sz_min = magnetization_minimum(sec, k)
    app = protocol1_critical_variances(sec, k, rule=cfg.approach_rule, offset=cfg.approach_offset)
    return {"h_min": h_min, "sz_min": abs(sz_min), "var_plus": app.plus, "var_minus": app.minus,
            "h_plus": app.h_plus, "h_minus": app.h_minus}


def _ground_task(n, _, cfg):
    sec = build_sector(n, cfg.parity)
    grid = np.linspace(*cfg.ground_window, cfg.ground_points)

    def f(h):
        return qfi_eigenstate(solve_sector(sec, h), 0)

    vals = [f(h) for h in grid]
    i = int(np.argmax(vals))
    res = minimize_scalar(lambda h: -f(h), bounds=(grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]),
                          method="bounded", options={"xatol": 1e-12})
    peak = max(vals[i], -res.fun)
    return {"peak": float(peak), "peak_location": float(res.x if -res.fun >= vals[i] else grid[i])}


_TASKS = {"field": _field_task, "spacing": _spacing_task, "energy": _energy_task,
          "magnetization": _magnetization_task, "ground": _ground_task}


def _run_task(key):
    name, n, label, cfg = key
    try:
        return (name, n, label), _TASKS[name](n, label, cfg)
    except LmgError as exc:
        raise type(exc)(f"{name} task at N={n}, label={label}: {exc}") from exc


def _task_keys(cfg: SuiteConfig):
    keys = []
    for name in cfg.quantities:
        if name == "field":
            labels = sorted(set(cfg.fractions) | set(cfg.width_fractions))
        elif name == "spacing":
            labels = cfg.width_fractions
        elif name == "energy":
            labels = cfg.energy_fields
        elif name == "magnetization":
            labels = cfg.fractions
        elif name == "ground":
            labels = (None,)
        else:
            raise ValueError(f"unknown quantity {name!r}")
        keys += [(name, n, lab, cfg) for n in cfg.sizes for lab in labels]
    return keys


def collect(cfg: SuiteConfig) -> dict:
    """Raw per-(quantity, N, label) measurements, in a deterministic order."""
    keys = _task_keys(cfg)
    jobs = cfg.jobs if cfg.jobs and cfg.jobs > 0 else (os.cpu_count() or 1)
    if jobs == 1:
        results = [_run_task(k) for k in keys]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, keys))
    return dict(sorted(results, key=lambda r: (r[0][0], r[0][1], -1 if r[0][2] is None else r[0][2])))


@dataclass
class ExponentRow:
    name: str
    label: str
    fit: PowerLawFit

    def record(self) -> dict:
        return {"name": self.name, "label": self.label, "exponent": self.fit.exponent,
                "prefactor": self.fit.prefactor, "r_squared": self.fit.r_squared}


@dataclass
class ExponentTable:
    rows: list[ExponentRow]
    raw: dict = field(repr=False, default_factory=dict)
    config: dict = field(default_factory=dict)

    def get(self, name: str, label=None) -> float:
        for r in self.rows:
            if r.name == name and (label is None or r.label == _label(label)):
                return r.fit.exponent
        raise KeyError((name, label))

    def all(self, name: str) -> dict[str, float]:
        return {r.label: r.fit.exponent for r in self.rows if r.name == name}


def _label(x):
    return "" if x is None else repr(float(x))


def _series(raw, name, label, field_):
    return [(n, raw[(name, n, label)][field_]) for (q, n, lab) in raw if q == name and lab == label]


def exponent_suite(cfg: SuiteConfig | None = None) -> ExponentTable:
    """Measure every finite-size exponent over cfg.sizes and fit power laws.

    Names: gamma (QFI peak over h), delta (QFI at h=0), zeta (critical-field
    spacing), eta (FWHM over h), xi and mu (energy-scan peak and width), nu_measured
    (N^2 over the mean squared level distance), nu_derived = gamma-mu-1,
    kappa (|min <S_z>|), chi_plus / chi_minus (Protocol 1 variance), ground.
    """
    cfg = cfg or SuiteConfig()
    raw = collect(cfg)
    rows: list[ExponentRow] = []

    def add(name, label, pts):
        rows.append(ExponentRow(name, _label(label), fit_power_law(pts)))

    qs = set(cfg.quantities)
    if "field" in qs:
        for f in cfg.fractions:
            add("gamma", f, _series(raw, "field", f, "peak"))
            add("delta", f, _series(raw, "field", f, "zero_field"))
        for f in cfg.width_fractions:
            add("eta", f, _series(raw, "field", f, "width"))
    if "spacing" in qs:
        for f in cfg.width_fractions:
            add("zeta", f, _series(raw, "spacing", f, "spacing"))
    if "energy" in qs:
        for h in cfg.energy_fields:
            add("xi", h, _series(raw, "energy", h, "peak"))
            add("mu", h, _series(raw, "energy", h, "width"))
            add("nu_measured", h, [(n, n ** 2 / d) for n, d in _series(raw, "energy", h, "level_distance")])
    if "magnetization" in qs:
        for f in cfg.fractions:
            add("kappa", f, _series(raw, "magnetization", f, "sz_min"))
            add("chi_plus", f, _series(raw, "magnetization", f, "var_plus"))
            add("chi_minus", f, _series(raw, "magnetization", f, "var_minus"))
    if "ground" in qs:
        add("ground", None, _series(raw, "ground", None, "peak"))

    table = ExponentTable(rows, raw, {k: v for k, v in asdict(cfg).items()})
    if "field" in qs and "energy" in qs:
        gamma = float(np.mean([table.get("gamma", f) for f in cfg.fractions]))
        for h in cfg.energy_fields:
            nu = gamma - table.get("mu", h) - 1
            rows.append(ExponentRow("nu_derived", _label(h),
                                    PowerLawFit(nu, float("nan"), float("nan"), ())))
    return table
