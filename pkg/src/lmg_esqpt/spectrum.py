"""Sector Hamiltonian H = h S_z - S_x^2 / N, its diagonalization and spectral observables."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import ConvergenceError, NoCrossingError, NumericalError
from .spin_sector import Parity, SpinSector, apply_sx2, build_sector, operator_elements
from .tridiag import tridiagonal_ql

CRITICAL_FIELD_BRACKET = (1e-6, 1 - 1e-6)
CRITICAL_FIELD_TOL = 1e-10
DERIVATIVE_STEP = 1e-5


@dataclass(frozen=True)
class TridiagonalSymmetric:
    diag: np.ndarray
    offdiag: np.ndarray
    sector: SpinSector | None = None
    field: float | None = None

    @property
    def dim(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out


@dataclass(frozen=True, eq=False)
class EigenSystem:
    field: float
    sector: SpinSector
    energies: np.ndarray
    vectors: np.ndarray  # column k <-> energies[k]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.energies)

    def sz_eigenbasis(self) -> np.ndarray:
        """Matrix <E_n|S_z|E_k> over the sector."""
        if "sz" not in self._cache:
            m = self.sector.m_values
            self._cache["sz"] = self.vectors.T @ (m[:, None] * self.vectors)
        return self._cache["sz"]

    def sz_column(self, k: int) -> np.ndarray:
        """<E_n|S_z|E_k> for all n (cheaper than the full matrix)."""
        if "sz" in self._cache:
            return self._cache["sz"][:, k]
        return self.vectors.T @ (self.sector.m_values * self.vectors[:, k])


@dataclass(frozen=True)
class DosHistogram:
    h: float
    bin_edges: np.ndarray
    counts: np.ndarray
    rescaled: bool
    n_spins: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def density(self) -> np.ndarray:
        """Eigenvalues per unit energy (not per unit E/N)."""
        widths = np.diff(self.bin_edges)
        if self.rescaled:
            widths = widths * self.n_spins
        return self.counts / widths

    def peak_bin(self) -> tuple[float, float]:
        i = int(np.argmax(self.counts))
        return float(self.bin_edges[i]), float(self.bin_edges[i + 1])


def build_hamiltonian(sector: SpinSector, h: float) -> TridiagonalSymmetric:
    if not math.isfinite(h):
        raise ValueError(f"field must be finite, got {h!r}")
    el = operator_elements(sector)
    n = sector.n_spins
    diag = h * el.sz_diag - el.sx2_diag / n
    off = -el.sx2_offdiag / n
    return TridiagonalSymmetric(diag, off, sector, float(h))


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # canonical gauge: largest-magnitude component of every eigenvector positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _solve(tri: TridiagonalSymmetric, method: str, vectors: bool):
    if tri.dim < 1:
        raise ValueError("cannot diagonalize an empty matrix")
    if tri.dim == 1:
        return np.array(tri.diag, dtype=float), (np.ones((1, 1)) if vectors else None)
    if method == "lapack":
        try:
            if vectors:
                return eigh_tridiagonal(tri.diag, tri.offdiag, lapack_driver="stemr")
            return eigh_tridiagonal(tri.diag, tri.offdiag, eigvals_only=True, lapack_driver="stemr"), None
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(str(exc)) from exc
    if method == "ql":
        return tridiagonal_ql(tri.diag, tri.offdiag, vectors=vectors)
    raise ValueError(f"unknown eigensolver {method!r}")


def diagonalize(tri: TridiagonalSymmetric, method: str = "lapack") -> EigenSystem:
    energies, vecs = _solve(tri, method, True)
    vecs = _fix_signs(vecs)
    energies.setflags(write=False)
    vecs.setflags(write=False)
    return EigenSystem(tri.field, tri.sector, energies, vecs)


def solve_sector(sector: SpinSector, h: float, method: str = "lapack") -> EigenSystem:
    return diagonalize(build_hamiltonian(sector, h), method=method)


def sector_energies(sector: SpinSector, h: float, method: str = "lapack") -> np.ndarray:
    """Eigenvalues only; cheap enough for N ~ 10^4."""
    return _solve(build_hamiltonian(sector, h), method, False)[0]


def sector_energy(sector: SpinSector, h: float, k: int) -> float:
    tri = build_hamiltonian(sector, h)
    if tri.dim == 1:
        return float(tri.diag[0])
    return float(eigh_tridiagonal(tri.diag, tri.offdiag, eigvals_only=True,
                                  select="i", select_range=(k, k))[0])


def spinflip_partner(sector: SpinSector) -> SpinSector:
    """Sector reached by m -> -m: the same one for even N, the other one for odd N."""
    if sector.n_spins % 2 == 0:
        return sector
    return build_sector(sector.n_spins, Parity.ODD if sector.parity is Parity.EVEN else Parity.EVEN)


def spinflip_check(eig_plus: EigenSystem, eig_minus: EigenSystem) -> float:
    """Largest |E_k(h) - E_k'(-h)| between a sector and its spin-flipped partner."""
    if eig_minus.sector != spinflip_partner(eig_plus.sector):
        raise ValueError("spin-flip check needs a sector and its spin-flip partner")
    if not math.isclose(eig_plus.field, -eig_minus.field, rel_tol=0, abs_tol=1e-15):
        raise ValueError("fields are not opposite")
    return float(np.max(np.abs(eig_plus.energies - eig_minus.energies)))


def adjacent_gap(eig: EigenSystem, k: int) -> float:
    if not 0 <= k < eig.dim - 1:
        raise IndexError(f"gap index {k} out of range for dim {eig.dim}")
    return float(eig.energies[k + 1] - eig.energies[k])


def critical_energy(n: int, h: float) -> float:
    return -h * n / 2


def critical_field(sector: SpinSector, k: int, tol: float = CRITICAL_FIELD_TOL,
                   bracket: tuple[float, float] = CRITICAL_FIELD_BRACKET) -> float:
    """Field h* at which E_k(h*) = -h* N / 2."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 <= k < sector.dim:
        raise IndexError(f"level {k} out of range for dim {sector.dim}")
    n = sector.n_spins

    def g(h):
        return sector_energy(sector, h, k) + h * n / 2

    lo, hi = bracket
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise NoCrossingError(f"level {k} of {sector!r} never meets E_c on {bracket}")
    h_star = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(g(h_star)) > tol:
        raise ConvergenceError(f"critical field residual {g(h_star):.3e} above tolerance")
    return float(h_star)


def density_of_states(spectra, n_bins: int = 100, rescale: bool = True,
                      h: float | None = None, n_spins: int | None = None,
                      pad: float = 1e-9) -> DosHistogram:
    """Histogram of eigenvalues from one or several sectors.

    ``spectra`` may be an EigenSystem, an array of energies, or a sequence of
    either.  Bins span [min - pad, max + pad] uniformly.
    """
    if n_bins < 2:
        raise ValueError("need at least two bins")
    if isinstance(spectra, (EigenSystem, np.ndarray)):
        spectra = [spectra]
    parts = []
    for sp in spectra:
        if isinstance(sp, EigenSystem):
            h = sp.field if h is None else h
            n_spins = sp.sector.n_spins if n_spins is None else n_spins
            parts.append(np.asarray(sp.energies))
        else:
            parts.append(np.asarray(sp, dtype=float))
    if n_spins is None:
        raise ValueError("n_spins is required when passing bare energies")
    energies = np.concatenate(parts)
    x = energies / n_spins if rescale else energies
    lo, hi = x.min() - pad, x.max() + pad
    counts, edges = np.histogram(x, bins=n_bins, range=(lo, hi))
    return DosHistogram(h=float("nan") if h is None else float(h), bin_edges=edges,
                        counts=counts, rescaled=rescale, n_spins=int(n_spins))


def analytic_dos(energy, h: float, n: int):
    """Leading logarithmic density of states near the critical energy, per parity sector."""
    if not 0 < h < 1:
        raise ValueError("the closed-form density holds only for 0 < h < 1")
    energy = np.asarray(energy, dtype=float)
    dist = np.abs(energy - critical_energy(n, h))
    if np.any(dist == 0):
        raise ValueError("density diverges at E = E_c")
    out = -np.log(2 * dist / n) / (2 * np.pi * math.sqrt(h * (1 - h)))
    return out if out.ndim else float(out)


def magnetization(eig: EigenSystem, k: int) -> float:
    v = eig.vectors[:, k]
    return float(np.dot(eig.sector.m_values, v * v))


def sz_moments(eig: EigenSystem, k: int) -> tuple[float, float]:
    v = eig.vectors[:, k]
    w = v * v
    m = eig.sector.m_values
    return float(np.dot(m, w)), float(np.dot(m * m, w))


def sx4_expectation(eig: EigenSystem, k: int) -> float:
    """<E_k|S_x^4|E_k> = ||S_x^2 |E_k>||^2 (S_x^2 never leaves the sector)."""
    u = apply_sx2(eig.sector, np.array(eig.vectors[:, k]))
    return float(np.dot(u, u))


def curvature(eig: EigenSystem, k: int) -> float:
    """d^2 E_k / dh^2 = d<S_z>_k/dh from second-order perturbation theory."""
    col = eig.sz_column(k)
    de = eig.energies[k] - eig.energies
    de[k] = np.inf
    return float(2.0 * np.sum(col * col / de))


def dh_derivative(quantity: Callable[[float], float], h: float, step: float = DERIVATIVE_STEP) -> float:
    """Central difference with one Richardson refinement (error O(step^4))."""
    if step <= 0:
        raise ValueError("step must be positive")
    coarse = (quantity(h + step) - quantity(h - step)) / (2 * step)
    fine = (quantity(h + step / 2) - quantity(h - step / 2)) / step
    return (4 * fine - coarse) / 3


def parity_splitting(even: EigenSystem, odd: EigenSystem, k: int) -> tuple[float, float]:
    """(|E_k - E~_k|, |<S_z>_k - <S_z>~_k|) for the k-th levels of both sectors."""
    if even.sector.n_spins != odd.sector.n_spins or even.field != odd.field:
        raise ValueError("sectors must belong to the same N and h")
    return (abs(float(even.energies[k] - odd.energies[k])),
            abs(magnetization(even, k) - magnetization(odd, k)))


def default_level(n: int, fraction: float) -> int:
    """Level index floor(fraction * N) used for 'k = 0.1 N' style labels."""
    return int(math.floor(fraction * n + 1e-12))


def check_eigensystem(eig: EigenSystem, tri: TridiagonalSymmetric | None = None) -> tuple[float, float]:
    """(max scaled residual, max orthonormality defect)."""
    tri = tri or build_hamiltonian(eig.sector, eig.field)
    v = eig.vectors
    hv = tri.diag[:, None] * v
    hv[:-1] += tri.offdiag[:, None] * v[1:]
    hv[1:] += tri.offdiag[:, None] * v[:-1]
    res = np.abs(hv - v * eig.energies).max(axis=0) / np.maximum(1.0, np.abs(eig.energies))
    ortho = np.abs(v.T @ v - np.eye(eig.dim)).max()
    if not np.all(np.isfinite(res)):
        raise NumericalError("non-finite residual")
    return float(res.max()), float(ortho)
