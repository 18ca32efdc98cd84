"""Quantum Fisher information of LMG eigenstates, mixtures and superpositions.

All formulas work inside one parity sector: S_z preserves parity, so
cross-sector matrix elements vanish identically and are never formed.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DegeneracyError, NumericalError, UndefinedWidthError
from .spectrum import EigenSystem, critical_energy, solve_sector
from .spin_sector import SpinSector

DENOMINATOR_GUARD = 1e-12
FIDELITY_STEP = 1e-4
DEFAULT_GRID_POINTS = 400


class ScanAxis(enum.Enum):
    FIELD = "h"
    ENERGY = "E/N"


@dataclass
class QfiScan:
    axis: ScanAxis
    grid: np.ndarray
    values: np.ndarray
    peak_value: float
    peak_location: float
    half_width: float | None  # FWHM; None when a flank never crosses half maximum
    left_crossing: float | None = None
    right_crossing: float | None = None
    value_at_zero_field: float | None = None
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EigenstateDerivative:
    """Expansion coefficients of d|E_k>/dh on the other eigenstates of the sector."""

    index: int
    coefficients: np.ndarray  # entry n: <E_n|S_z|E_k>/(E_k - E_n); entry k is 0 by construction

    def others(self) -> np.ndarray:
        return np.delete(self.coefficients, self.index)


def _gaps(eig: EigenSystem, k: int) -> np.ndarray:
    de = eig.energies - eig.energies[k]
    de = np.array(de)
    de[k] = np.inf
    if np.min(np.abs(de)) < DENOMINATOR_GUARD:
        raise DegeneracyError(f"level {k} is degenerate within its sector (gap < {DENOMINATOR_GUARD})")
    return de


def eigenstate_derivative(eig: EigenSystem, k: int) -> EigenstateDerivative:
    de = _gaps(eig, k)
    coeff = -eig.sz_column(k) / de  # (E_k - E_n) = -de
    coeff[k] = 0.0
    return EigenstateDerivative(k, coeff)


def derivative_matrix(eig: EigenSystem) -> np.ndarray:
    """D[n, l] = <E_n| d/dh |E_l> = <E_n|S_z|E_l>/(E_l - E_n), zero diagonal."""
    e = eig.energies
    de = e[None, :] - e[:, None]
    np.fill_diagonal(de, np.inf)
    if np.min(np.abs(de)) < DENOMINATOR_GUARD:
        raise DegeneracyError("degenerate levels within a sector")
    return eig.sz_eigenbasis() / de


def qfi_eigenstate(eig: EigenSystem, k: int) -> float:
    """4 sum_{n != k} |<E_n|S_z|E_k>|^2 / (E_n - E_k)^2."""
    if not 0 <= k < eig.dim:
        raise IndexError(f"level {k} out of range for dim {eig.dim}")
    de = _gaps(eig, k)
    col = eig.sz_column(k)
    return float(4.0 * np.sum((col / de) ** 2))


def qfi_all_levels(eig: EigenSystem) -> np.ndarray:
    """QFI of every eigenstate of the sector (one O(dim^3) product)."""
    d = derivative_matrix(eig)
    return 4.0 * np.sum(d * d, axis=0)


def _aligned_state(sector: SpinSector, k: int, h: float) -> np.ndarray:
    v = np.array(solve_sector(sector, h).vectors[:, k])
    i = np.argmax(np.abs(v))
    return v if v[i] > 0 else -v


def _fidelity_estimate(sector, k, h, eps):
    a = _aligned_state(sector, k, h - eps / 2)
    b = _aligned_state(sector, k, h + eps / 2)
    overlap = float(np.dot(a, b))
    if overlap < 0.9:
        raise NumericalError(f"eigenvector tracking ambiguous (overlap {overlap:.3f})")
    # 1 - <a|b> = |a - b|^2 / 2 for real unit vectors; avoids cancellation
    diff = a - b
    return 8.0 * (0.5 * float(np.dot(diff, diff))) / eps ** 2


def qfi_fidelity_oracle(sector: SpinSector, k: int, h: float, eps: float = FIDELITY_STEP,
                        richardson: bool = True) -> float:
    """QFI from the overlap of eigenvectors at h -/+ eps/2 (Bures-metric route).

    The symmetric placement makes the raw estimate second-order accurate; one
    Richardson step removes the eps^2 term.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    coarse = _fidelity_estimate(sector, k, h, eps)
    if not richardson:
        return coarse
    fine = _fidelity_estimate(sector, k, h, eps / 2)
    return (4.0 * fine - coarse) / 3.0


# ---------------------------------------------------------------------------
# peak / width extraction


def half_max_crossings(x, y, peak_value=None, peak_index=None):
    """Linear-interpolated half-maximum crossings on both sides of the peak.

    Returns (left, right); an entry is None when that flank stays above half
    maximum up to the end of the data.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y)) if peak_index is None else int(peak_index)
    peak = float(y[i]) if peak_value is None else float(peak_value)
    half = peak / 2
    left = right = None
    j = i
    while j > 0 and y[j - 1] > half:
        j -= 1
    if j > 0:
        a, b = j - 1, j
        left = x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a])
    j = i
    while j < len(y) - 1 and y[j + 1] > half:
        j += 1
    if j < len(y) - 1:
        a, b = j, j + 1
        right = x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a])
    return left, right


def qfi_field_sweep(sector: SpinSector, k: int, h_grid, refine: bool = True) -> QfiScan:
    """QFI of level k over a field grid, with peak and FWHM.

    With ``refine`` the grid maximum is polished by a bounded scalar search and
    each half-maximum crossing by root finding inside its grid bracket; without
    it both come from the grid samples and linear interpolation.
    """
    grid = np.asarray(h_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("field grid needs at least three points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("field grid must be strictly increasing")

    def f(h):
        return qfi_eigenstate(solve_sector(sector, h), k)

    values = np.array([f(h) for h in grid])
    i = int(np.argmax(values))
    peak, loc = float(values[i]), float(grid[i])
    if refine and 0 < i < grid.size - 1:
        res = minimize_scalar(lambda h: -f(h), bounds=(grid[i - 1], grid[i + 1]),
                              method="bounded", options={"xatol": 1e-12})
        if -res.fun > peak:
            peak, loc = float(-res.fun), float(res.x)

    left, right = half_max_crossings(grid, values, peak_value=peak, peak_index=i)
    if refine:
        half = peak / 2

        def g(h):
            return f(h) - half

        if left is not None:
            j = int(np.searchsorted(grid, left)) - 1
            hi = min(grid[j + 1], loc)
            if g(grid[j]) < 0 < g(hi):
                left = float(brentq(g, grid[j], hi, xtol=1e-12))
        if right is not None:
            j = int(np.searchsorted(grid, right))
            lo = max(grid[j - 1], loc)
            if g(grid[j]) < 0 < g(lo):
                right = float(brentq(g, lo, grid[j], xtol=1e-12))

    width = (right - left) if (left is not None and right is not None) else None
    zero = None
    hit = np.flatnonzero(grid == 0.0)
    if hit.size:
        zero = float(values[hit[0]])
    return QfiScan(ScanAxis.FIELD, grid, values, peak, loc, width, left, right, zero,
                   metadata={"level": k, "n_spins": sector.n_spins, "parity": sector.parity.name,
                             "refined": refine, "width_baseline": "zero"})


def qfi_energy_scan(sector: SpinSector, h: float) -> QfiScan:
    """QFI of every level at fixed h against E_k / N."""
    eig = solve_sector(sector, h)
    x = eig.energies / sector.n_spins
    values = qfi_all_levels(eig)
    i = int(np.argmax(values))
    left, right = half_max_crossings(x, values)
    width = (right - left) if (left is not None and right is not None) else None
    return QfiScan(ScanAxis.ENERGY, np.array(x), values, float(values[i]), float(x[i]), width,
                   left, right, None,
                   metadata={"h": h, "n_spins": sector.n_spins, "parity": sector.parity.name,
                             "critical_energy_rescaled": critical_energy(1, h)})


def require_width(scan: QfiScan) -> float:
    if scan.half_width is None:
        raise UndefinedWidthError("a flank of the QFI peak never drops below half maximum")
    return scan.half_width


# ---------------------------------------------------------------------------
# mixtures and superpositions


def _check_distribution(p, tol=1e-10):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def qfi_mixed(eigs, p, dp=None) -> float:
    """QFI of sigma = sum_k p_k |E_k><E_k| (eigenbasis-diagonal mixture).

    ``eigs`` is one EigenSystem or a sequence of them (e.g. both parity
    sectors); ``p`` and ``dp`` are concatenated in the same order.
    """
    if isinstance(eigs, EigenSystem):
        eigs = [eigs]
    p = _check_distribution(p)
    dp = np.zeros_like(p) if dp is None else np.asarray(dp, dtype=float)
    if dp.shape != p.shape or p.size != sum(e.dim for e in eigs):
        raise ValueError("p/dp do not match the number of eigenstates")

    zero = p == 0
    if np.any(zero & (dp != 0)):
        raise ValueError("zero-probability state with nonzero derivative")
    classical = float(np.sum(dp[~zero] ** 2 / p[~zero]))

    quantum = 0.0
    start = 0
    for eig in eigs:
        q = p[start:start + eig.dim]
        start += eig.dim
        if np.count_nonzero(q) == 0:
            continue
        s = q[:, None] + q[None, :]
        num = (q[:, None] - q[None, :]) ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(s > 0, num / s, 0.0)
        d = derivative_matrix(eig)
        quantum += 2.0 * float(np.sum(w * d * d))
    return classical + quantum


def qfi_superposition(eig: EigenSystem, c, dc=None, tol: float = 1e-10) -> float:
    """QFI of the pure state sum_k c_k |E_k> with h-dependent amplitudes.

    Evaluated as the four-term expansion: amplitude derivatives, eigenvector
    derivatives, their cross terms, and the squared Berry-connection term.
    """
    c = np.asarray(c, dtype=complex)
    dc = np.zeros_like(c) if dc is None else np.asarray(dc, dtype=complex)
    if c.shape != (eig.dim,) or dc.shape != c.shape:
        raise ValueError("amplitudes must have one entry per eigenstate")
    if abs(np.vdot(c, c).real - 1.0) > tol:
        raise ValueError("state is not normalized")
    if abs(np.vdot(c, dc).real) > 1e-8 * max(1.0, np.linalg.norm(dc)):
        raise ValueError("amplitude derivative does not preserve normalization")
    d = derivative_matrix(eig)  # real antisymmetric
    dvec = d @ c  # sum_l c_l d|E_l> in the eigenbasis
    amp = 4.0 * np.vdot(dc, dc).real
    vec = 4.0 * np.vdot(dvec, dvec).real
    cross = 4.0 * 2.0 * np.vdot(dc, dvec).real
    berry = np.vdot(c, dc) + np.vdot(c, dvec)
    last = -4.0 * abs(berry) ** 2
    return float(amp + vec + cross + last)


def average_qfi(p, qfi_values) -> float:
    p = _check_distribution(p)
    f = np.asarray(qfi_values, dtype=float)
    if f.shape != p.shape:
        raise ValueError("p and QFI arrays differ in length")
    return float(np.dot(p, f))
