"""Fixed-parity bases of the maximal-spin (s = N/2) sector.

Basis states are Dicke states |s, m> ordered by increasing m.  Spins are kept
as the integer ``two_s = N`` and magnetic numbers as ``two_m`` so that odd N
(half-integer s) never suffers from floating point drift.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class Parity(enum.Enum):
    """Eigenvalue of (-1)^(s + S_z): EVEN for +1, ODD for -1."""

    EVEN = 0
    ODD = 1

    @classmethod
    def parse(cls, value: "Parity | str | int") -> "Parity":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown parity {value!r}") from None
        return cls(int(value))


@dataclass(frozen=True, eq=False)
class SpinSector:
    n_spins: int
    parity: Parity
    two_m: np.ndarray  # integer 2m, strictly increasing in steps of 4

    @property
    def total_spin(self) -> Fraction:
        return Fraction(self.n_spins, 2)

    @property
    def s(self) -> float:
        return self.n_spins / 2

    @property
    def casimir(self) -> float:
        """s(s+1)."""
        return self.n_spins * (self.n_spins + 2) / 4

    @property
    def m_values(self) -> np.ndarray:
        return self.two_m / 2.0

    @property
    def dim(self) -> int:
        return len(self.two_m)

    def full_indices(self) -> np.ndarray:
        """Positions of the sector states inside the (N+1)-dim basis m = -s..s."""
        return (self.two_m + self.n_spins) // 2

    def __eq__(self, other):
        if not isinstance(other, SpinSector):
            return NotImplemented
        return self.n_spins == other.n_spins and self.parity is other.parity

    def __hash__(self):
        return hash((self.n_spins, self.parity))

    def __repr__(self):
        return f"SpinSector(N={self.n_spins}, {self.parity.name}, dim={self.dim})"


@dataclass(frozen=True)
class OperatorElements:
    sz_diag: np.ndarray
    sx2_diag: np.ndarray
    sx2_offdiag: np.ndarray  # <m+2|S_x^2|m>


def build_sector(n: int, parity: Parity | str | int = Parity.EVEN) -> SpinSector:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"number of spins must be a positive integer, got {n!r}")
    n = int(n)
    parity = Parity.parse(parity)
    # s + m = (N + 2m)/2 = j for j = 0..N; parity is j mod 2
    j = np.arange(parity.value, n + 1, 2, dtype=np.int64)
    two_m = 2 * j - n
    two_m.setflags(write=False)
    return SpinSector(n, parity, two_m)


def both_sectors(n: int) -> tuple[SpinSector, SpinSector]:
    return build_sector(n, Parity.EVEN), build_sector(n, Parity.ODD)


def _ladder_sq(casimir: float, m: np.ndarray) -> np.ndarray:
    # |<m+1|S_+|m>|^2 = s(s+1) - m(m+1)
    return casimir - m * (m + 1.0)


def operator_elements(sector: SpinSector) -> OperatorElements:
    m = sector.m_values
    c = sector.casimir
    sx2_diag = 0.5 * (c - m * m)
    mm = m[:-1]
    # clip tiny negative round-off before the square root
    prod = np.clip(_ladder_sq(c, mm) * _ladder_sq(c, mm + 1.0), 0.0, None)
    sx2_off = 0.25 * np.sqrt(prod)
    for a in (m, sx2_diag, sx2_off):
        a.setflags(write=False)
    return OperatorElements(sz_diag=m, sx2_diag=sx2_diag, sx2_offdiag=sx2_off)


def sector_matrices(sector: SpinSector) -> tuple[np.ndarray, np.ndarray]:
    """Dense (S_z, S_x^2) restricted to the sector."""
    el = operator_elements(sector)
    sz = np.diag(el.sz_diag)
    sx2 = np.diag(el.sx2_diag) + np.diag(el.sx2_offdiag, 1) + np.diag(el.sx2_offdiag, -1)
    return sz, sx2


def apply_sx2(sector: SpinSector, vec: np.ndarray) -> np.ndarray:
    """S_x^2 @ vec within the sector (vec may be 1-d or have columns)."""
    el = operator_elements(sector)
    vec = np.asarray(vec)
    out = el.sx2_diag.reshape((-1,) + (1,) * (vec.ndim - 1)) * vec
    off = el.sx2_offdiag.reshape((-1,) + (1,) * (vec.ndim - 1))
    out[:-1] += off * vec[1:]
    out[1:] += off * vec[:-1]
    return out


# ---------------------------------------------------------------------------
# full s = N/2 space, basis m = -s, ..., s


def full_m_values(n: int) -> np.ndarray:
    return (2 * np.arange(n + 1) - n) / 2.0


def full_operators(n: int) -> dict[str, np.ndarray]:
    """Dense S_z, S_x, S_x^2 over the whole (N+1)-dimensional s = N/2 space."""
    m = full_m_values(n)
    c = n * (n + 2) / 4
    sz = np.diag(m)
    up = 0.5 * np.sqrt(np.clip(_ladder_sq(c, m[:-1]), 0.0, None))
    sx = np.diag(up, 1) + np.diag(up, -1)
    return {"sz": sz, "sx": sx, "sx2": sx @ sx}


def embed(sector: SpinSector, vec: np.ndarray) -> np.ndarray:
    """Lift sector coordinates into the full (N+1)-dim basis."""
    vec = np.asarray(vec)
    out = np.zeros((sector.n_spins + 1,) + vec.shape[1:], dtype=vec.dtype)
    out[sector.full_indices()] = vec
    return out
