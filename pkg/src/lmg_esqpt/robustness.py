"""Noise robustness: noisy-probe QFI, the noise-exponent calculator, and
first-order effects of Hamiltonian perturbations on the phase protocol."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import LmgError, NumericalError
from .qfi import qfi_mixed, qfi_superposition
from .spectrum import EigenSystem, build_hamiltonian, critical_energy, magnetization, solve_sector
from .spin_sector import Parity, SpinSector, build_sector, full_operators

DERIVATIVE_GUARD = 1e-12


# ---------------------------------------------------------------------------
# incoherent noise


class ProfileError(LmgError, ValueError):
    """A noise profile violates one of its consistency relations."""


@dataclass(frozen=True)
class NoiseProfile:
    """Exponents of a probe distribution concentrated around E_c.

    plateau: inside-window probability ~ N^-plateau; window: half-width ~ N^window;
    background: outside probability ~ N^-background; contrast: spread of the
    inside-window probabilities ~ N^-contrast.
    """

    plateau: float
    window: float
    background: float
    contrast: float

    def violations(self) -> list[str]:
        out = []
        if self.plateau < 0:
            out.append("plateau exponent must be non-negative")
        if not self.background > self.plateau:
            out.append("background exponent must exceed the plateau exponent")
        if self.window > self.plateau:
            out.append("window exponent cannot exceed the plateau exponent")
        if self.contrast < self.plateau + self.window:
            out.append("contrast exponent must be at least plateau + window")
        return out

    def validate(self) -> "NoiseProfile":
        bad = self.violations()
        if bad:
            raise ProfileError("; ".join(bad))
        return self


@dataclass(frozen=True)
class NoiseExponent:
    dominant: float
    subdominant: float
    superextensive: bool
    wide_window: bool  # window reaches beyond the QFI energy width


def noise_exponent(profile: NoiseProfile, gamma: float, mu: float, nu: float) -> NoiseExponent:
    """Leading N-exponent of the QFI of a noisy probe with the given profile.

    For a window narrower than the QFI energy width (window < 1 + mu) the two
    competing contributions are gamma - plateau + window and
    nu + plateau + 2 window - 2 contrast.  Otherwise only the wide-window
    estimate nu + plateau + 2 mu + 2 - 2 contrast remains.
    """
    profile.validate()
    v, w, c = profile.plateau, profile.window, profile.contrast
    if w >= 1 + mu:
        e = nu + v + 2 * mu + 2 - 2 * c
        return NoiseExponent(e, e, e > 1, True)
    dom = gamma - v + w
    sub = nu + v + 2 * w - 2 * c
    if sub > dom:
        raise NumericalError(f"subdominant exponent {sub} exceeds dominant {dom}; inconsistent gamma, mu, nu")
    return NoiseExponent(dom, sub, dom > 1, False)


def realize_profile(profile: NoiseProfile, energies, n: int, h: float,
                    plateau_scale: float = 1.0, window_scale: float = 1.0) -> np.ndarray:
    """Concrete p(E_k) for one system size.

    Inside |E - E_c| <= window_scale N^window the weight is
    N^-plateau + N^-contrast (E - E_c)/Delta (a linear ramp); outside it is
    N^-background.  The result is normalized.
    """
    profile.validate()
    e = np.asarray(energies, dtype=float)
    delta = window_scale * n ** profile.window
    dist = e - critical_energy(n, h)
    inside = np.abs(dist) <= delta
    p = np.full(e.shape, float(n) ** -profile.background)
    p[inside] = plateau_scale * n ** -profile.plateau + n ** -profile.contrast * dist[inside] / delta
    if np.any(p <= 0):
        raise ProfileError("profile realization has non-positive weights")
    return p / p.sum()


def noisy_qfi_exact(eig: EigenSystem, p, dp=None) -> float:
    return qfi_mixed(eig, p, dp)


def noisy_profile_qfi(profile: NoiseProfile, sector: SpinSector, h: float,
                      derivative: str = "zero", step: float = 1e-5) -> float:
    """Exact mixed-state QFI of the realized profile; dp either zero or by central difference."""
    eig = solve_sector(sector, h)
    n = sector.n_spins
    p = realize_profile(profile, eig.energies, n, h)
    if derivative == "zero":
        dp = None
    elif derivative == "finite-difference":
        up = realize_profile(profile, solve_sector(sector, h + step).energies, n, h + step)
        down = realize_profile(profile, solve_sector(sector, h - step).energies, n, h - step)
        dp = (up - down) / (2 * step)
    else:
        raise ValueError(f"unknown derivative rule {derivative!r}")
    return qfi_mixed(eig, p, dp)


# ---------------------------------------------------------------------------
# coherent noise


def coherent_noise_qfi(eig: EigenSystem, c, dc=None) -> float:
    return qfi_superposition(eig, c, dc)


def localized_amplitudes(dim: int, center: int, center_weight: float, seed: int = 0,
                         rest: np.ndarray | None = None) -> np.ndarray:
    """Amplitudes with |c_center|^2 = center_weight and the remainder spread
    over the other states with random phases (or with relative weights ``rest``)."""
    if not 0 < center_weight <= 1:
        raise ValueError("center weight must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    w = np.ones(dim) if rest is None else np.asarray(rest, dtype=float).copy()
    w[center] = 0.0
    if w.sum() > 0:
        w *= (1 - center_weight) / w.sum()
    w[center] = center_weight
    phases = np.exp(2j * np.pi * rng.random(dim))
    phases[center] = 1.0
    return np.sqrt(w) * phases


# ---------------------------------------------------------------------------
# Hamiltonian perturbations


def power_law_mean_coupling(alpha: float, n: int) -> float:
    """Mean of |i-j|^-alpha - 1 over ordered pairs i != j of an open chain."""
    if n < 2:
        return 0.0
    dist = np.arange(1, n)
    mult = 2 * (n - dist)
    return float(np.sum(mult * (dist ** -float(alpha) - 1.0)) / (n * (n - 1)))


def collective_operator(name: str, n: int, alpha: float = 1.0) -> np.ndarray:
    """Dense perturbation over the s = N/2 space (basis m = -s..s)."""
    ops = full_operators(n)
    if name == "identity":
        return np.eye(n + 1)
    if name == "sz":
        return ops["sz"]
    if name == "sx":
        return ops["sx"]
    if name == "sx2":
        return ops["sx2"] / n
    if name == "power-law":
        # projection of sum_{i != j} (|i-j|^-alpha - 1) s^x_i s^x_j / N onto the symmetric space
        return power_law_mean_coupling(alpha, n) * (4 * ops["sx2"] - n * np.eye(n + 1)) / n
    raise ValueError(f"unknown perturbation {name!r}")


PERTURBATIONS = ("identity", "sz", "sx", "sx2", "power-law")


@dataclass(frozen=True)
class PerturbationSpec:
    """g * H_pert, with H_pert built per system size."""

    strength: float
    builder: Callable[[int], np.ndarray]
    name: str = "custom"

    @classmethod
    def named(cls, name: str, strength: float, alpha: float = 1.0) -> "PerturbationSpec":
        if name not in PERTURBATIONS:
            raise ValueError(f"unknown perturbation {name!r}; choose from {PERTURBATIONS}")
        return cls(float(strength), lambda n: collective_operator(name, n, alpha), name)

    @classmethod
    def from_matrices(cls, matrices: Mapping[int, np.ndarray], strength: float) -> "PerturbationSpec":
        mats = {int(k): np.asarray(v, dtype=float) for k, v in matrices.items()}

        def build(n):
            if n not in mats:
                raise ValueError(f"no perturbation matrix supplied for N={n}")
            return mats[n]

        return cls(float(strength), build, "matrix")

    def matrix(self, n: int) -> np.ndarray:
        m = np.asarray(self.builder(n), dtype=float)
        if m.shape != (n + 1, n + 1):
            raise ValueError(f"perturbation for N={n} must be {(n + 1, n + 1)}, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("perturbation has non-finite entries")
        if not np.allclose(m, m.T, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise ValueError("perturbation must be Hermitian (real symmetric)")
        return m


def _sector_block(matrix: np.ndarray, sector: SpinSector) -> np.ndarray:
    idx = sector.full_indices()
    return matrix[np.ix_(idx, idx)]


def preserves_parity(matrix: np.ndarray, n: int, tol: float = 1e-12) -> bool:
    even, odd = build_sector(n, Parity.EVEN).full_indices(), build_sector(n, Parity.ODD).full_indices()
    return bool(np.abs(matrix[np.ix_(even, odd)]).max(initial=0.0) <= tol * max(1.0, np.abs(matrix).max()))


def first_order_term(eig: EigenSystem, k: int, matrix: np.ndarray) -> float:
    """Re <E_k| H_pert d_h|E_k> with d_h|E_k> from the perturbation sum.

    Only same-sector states enter d_h|E_k> (S_z keeps parity), so any
    parity-mixing part of H_pert drops out at this order.
    """
    block = _sector_block(matrix, eig.sector)
    v = eig.vectors
    pk = v.T @ (block @ v[:, k])  # <E_n|H_pert|E_k>
    szk = eig.sz_column(k)
    de = eig.energies[k] - eig.energies
    de = np.array(de)
    de[k] = np.inf
    return float(np.sum(pk * szk / de))


def perturbation_bound(eig: EigenSystem, k: int, matrix: np.ndarray) -> float:
    """Cauchy-Schwarz bound sqrt(<E_k|A A^dag|E_k> <E_k|S_z^2|E_k>) on the first-order term.

    A = H_pert sum_{n != k} |E_n><E_n|/(E_k - E_n); the first factor equals
    F_g/4, the eigenstate QFI with respect to the perturbation strength.
    """
    block = _sector_block(matrix, eig.sector)
    v = eig.vectors
    pk = v.T @ (block @ v[:, k])
    de = eig.energies[k] - eig.energies
    de = np.array(de)
    de[k] = np.inf
    aa = float(np.sum(pk * pk / de ** 2))
    sz2 = float(np.dot(eig.sector.m_values ** 2, v[:, k] ** 2))
    return math.sqrt(aa * sz2)


def perturbed_phase_derivative_ratio(n: int, k: int, h: float, dt: float, pert: PerturbationSpec,
                                     parity: Parity | str = Parity.EVEN) -> float:
    """First-order ratio of the perturbed to unperturbed d(Delta phi_k)/dh."""
    terms, slopes = [], []
    for size in (n, n + 1):
        eig = solve_sector(build_sector(size, parity), h)
        terms.append(first_order_term(eig, k, pert.matrix(size)))
        slopes.append(magnetization(eig, k))
    base = (slopes[0] - slopes[1]) * dt
    if abs(base) < DERIVATIVE_GUARD:
        raise NumericalError("unperturbed phase derivative vanishes")
    return 1.0 + 2 * pert.strength * dt / base * (terms[0] - terms[1])


def _perturbed_magnetization(n, k, h, g, matrix, parity):
    sector = build_sector(n, parity)
    tri = build_hamiltonian(sector, h)
    full = np.diag(tri.diag) + np.diag(tri.offdiag, 1) + np.diag(tri.offdiag, -1)
    full = full + g * _sector_block(matrix, sector)
    _, vec = np.linalg.eigh(full)
    v = vec[:, k]
    return float(np.dot(sector.m_values, v * v))


def exact_phase_derivative_ratio(n: int, k: int, h: float, pert: PerturbationSpec,
                                 parity: Parity | str = Parity.EVEN) -> float:
    """Ratio by re-diagonalizing H + g H_pert (parity-preserving perturbations only)."""
    mats = [pert.matrix(size) for size in (n, n + 1)]
    for size, m in zip((n, n + 1), mats):
        if not preserves_parity(m, size):
            raise ValueError("exact re-diagonalization oracle needs a parity-preserving perturbation")
    num = [_perturbed_magnetization(size, k, h, pert.strength, m, parity) for size, m in zip((n, n + 1), mats)]
    den = [_perturbed_magnetization(size, k, h, 0.0, m, parity) for size, m in zip((n, n + 1), mats)]
    return (num[0] - num[1]) / (den[0] - den[1])


def first_order_slope_oracle(n: int, k: int, h: float, pert: PerturbationSpec,
                             step: float = 1e-6, parity: Parity | str = Parity.EVEN) -> float:
    """d(ratio)/dg at g = 0 from exact ratios at g = +/- step."""
    up = exact_phase_derivative_ratio(n, k, h, PerturbationSpec(step, pert.builder, pert.name), parity)
    down = exact_phase_derivative_ratio(n, k, h, PerturbationSpec(-step, pert.builder, pert.name), parity)
    return (up - down) / (2 * step)
