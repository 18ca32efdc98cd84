"""Magnetometric protocols: magnetization readout and phase-difference estimation.

Protocol 1 reads <S_z> of a (near) critical eigenstate and propagates its
variance.  Protocol 2 measures eigenphases at sizes N and N+1 with a
semiclassical phase-estimation model: an eigenstate is sampled from the probe
weights and its phase E*dt mod 2pi is rounded to a d-bit lattice.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NumericalError, SelectionError
from .spectrum import (EigenSystem, critical_energy, critical_field, curvature, dh_derivative,
                       magnetization, solve_sector, sz_moments)
from .spin_sector import Parity, SpinSector, build_sector

TWO_PI = 2.0 * math.pi
CRITICAL_OFFSET = 1e-3
MAGNETIZATION_WINDOW = (0.03, 0.01)  # search below / above h_c^k for the <S_z> minimum
APPROACH_WINDOW = 0.02
APPROACH_GRID = 60


# ---------------------------------------------------------------------------
# Protocol 1


def _sz_slope(sector: SpinSector, k: int, h: float, derivative: str) -> float:
    if derivative == "finite-difference":
        return dh_derivative(lambda x: magnetization(solve_sector(sector, x), k), h)
    if derivative == "perturbative":
        return curvature(solve_sector(sector, h), k)
    raise ValueError(f"unknown derivative rule {derivative!r}")


def protocol1_variance(sector: SpinSector, k: int, h: float,
                       derivative: str = "finite-difference") -> float:
    """Error-propagated variance Var(S_z) / (d<S_z>/dh)^2 for probe |E_k>."""
    mean, second = sz_moments(solve_sector(sector, h), k)
    slope = _sz_slope(sector, k, h, derivative)
    if abs(slope) < 1e-12:
        raise NumericalError(f"d<S_z>/dh vanishes at h={h!r}; point is unestimable")
    return (second - mean * mean) / slope ** 2


def magnetization_minimum(sector: SpinSector, k: int, h_center: float | None = None,
                          window: tuple[float, float] = MAGNETIZATION_WINDOW,
                          points: int = 41) -> tuple[float, float]:
    """(h, <S_z>) at the minimum of <E_k|S_z|E_k> near the critical field of level k."""
    if h_center is None:
        h_center = critical_field(sector, k)
    lo, hi = h_center - window[0], h_center + window[1]
    grid = np.linspace(lo, hi, points)
    vals = np.array([magnetization(solve_sector(sector, h), k) for h in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    res = minimize_scalar(lambda h: magnetization(solve_sector(sector, h), k), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-12})
    if res.fun < vals[i]:
        return float(res.x), float(res.fun)
    return float(grid[i]), float(vals[i])


def _best_variance(sector, k, lo, hi, points):
    def f(h):
        return protocol1_variance(sector, k, h, derivative="perturbative")

    grid = np.linspace(lo, hi, points)
    vals = np.array([f(h) for h in grid])
    i = int(np.argmin(vals))
    res = minimize_scalar(f, bounds=(grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]),
                          method="bounded", options={"xatol": 1e-12})
    if res.fun < vals[i]:
        return float(res.fun), float(res.x)
    return float(vals[i]), float(grid[i])


@dataclass(frozen=True)
class CriticalApproach:
    """Protocol 1 variances on both sides of the critical point of level k."""

    plus: float
    minus: float
    h_plus: float
    h_minus: float
    reference_field: float
    rule: str


def protocol1_critical_variances(sector: SpinSector, k: int, rule: str = "extremal",
                                 offset: float = CRITICAL_OFFSET, window: float = APPROACH_WINDOW,
                                 points: int = APPROACH_GRID) -> CriticalApproach:
    """Variance as h approaches the critical point of level k from above and below.

    ``rule="fixed"`` evaluates at h_c^k +/- offset.  ``rule="extremal"`` takes the
    magnetization minimum as the critical point and returns the smallest
    variance reached inside ``window`` on each side of it.
    """
    if rule == "fixed":
        hc = critical_field(sector, k)
        return CriticalApproach(protocol1_variance(sector, k, hc + offset),
                                protocol1_variance(sector, k, hc - offset),
                                hc + offset, hc - offset, hc, rule)
    if rule == "extremal":
        h_min, _ = magnetization_minimum(sector, k)
        gap = 1e-9
        plus, hp = _best_variance(sector, k, h_min + gap, h_min + window, points)
        minus, hm = _best_variance(sector, k, h_min - window, h_min - gap, points)
        return CriticalApproach(plus, minus, hp, hm, h_min, rule)
    raise ValueError(f"unknown approach rule {rule!r}")


def protocol1_mixed_variance(even: SpinSector, odd: SpinSector, k: int, h: float,
                             derivative: str = "finite-difference") -> float:
    """Variance for the parity mixture (|E_k><E_k| + |E~_k><E~_k|)/2.

    Only meaningful in the degenerate regime h <= h_c^k.
    """
    if even.n_spins != odd.n_spins or even.parity is odd.parity:
        raise ValueError("need the two parity sectors of one system")
    hc = critical_field(even, k)
    if h > hc:
        raise ValueError(f"h={h!r} lies above the critical field {hc!r}; sectors are not degenerate")
    means, seconds, slopes = [], [], []
    for sec in (even, odd):
        m1, m2 = sz_moments(solve_sector(sec, h), k)
        means.append(m1)
        seconds.append(m2)
        slopes.append(_sz_slope(sec, k, h, derivative))
    var = 0.5 * (seconds[0] + seconds[1]) - 0.25 * (means[0] + means[1]) ** 2
    slope_sq = 0.25 * (slopes[0] + slopes[1]) ** 2
    if slope_sq < 1e-24:
        raise NumericalError("mixture magnetization is flat; point is unestimable")
    return var / slope_sq


# ---------------------------------------------------------------------------
# probe preparation and phase estimation


class ProbeSource(enum.Enum):
    ALL_DOWN = "all-down"
    GIBBS = "gibbs"


@dataclass(frozen=True)
class ProbePreparation:
    source: ProbeSource
    weights: np.ndarray  # one entry per prepared eigenstate, summing to 1
    energies: np.ndarray
    parities: tuple[Parity, ...]  # sector of each entry
    levels: np.ndarray  # level index inside its sector
    beta: float | None = None

    def label(self, i: int) -> tuple[Parity, int]:
        return self.parities[i], int(self.levels[i])


def _make_prep(source, blocks, beta=None):
    weights = np.concatenate([b[1] for b in blocks])
    energies = np.concatenate([b[2] for b in blocks])
    levels = np.concatenate([np.arange(len(b[1])) for b in blocks])
    parities = tuple(par for par, w, _ in blocks for _ in range(len(w)))
    return ProbePreparation(source, weights, energies, parities, levels, beta)


def all_down_preparation(n: int, h: float) -> ProbePreparation:
    """Weights |<E_k|m=-s>|^2; the fully polarized state lies in the even sector."""
    eig = solve_sector(build_sector(n, Parity.EVEN), h)
    w = np.array(eig.vectors[0, :]) ** 2
    w /= w.sum()
    return _make_prep(ProbeSource.ALL_DOWN, [(Parity.EVEN, w, np.array(eig.energies))])


def gibbs_preparation(n: int, h: float, beta: float | None = None) -> ProbePreparation:
    """Canonical weights over both parity sectors with a shared partition function."""
    beta = 0.1 / n if beta is None else float(beta)
    blocks = []
    for par in (Parity.EVEN, Parity.ODD):
        sec = build_sector(n, par)
        if sec.dim == 0:
            continue
        e = np.array(solve_sector(sec, h).energies)
        blocks.append((par, e))
    emin = min(e.min() for _, e in blocks)
    z = sum(np.exp(-beta * (e - emin)).sum() for _, e in blocks)
    return _make_prep(ProbeSource.GIBBS,
                      [(par, np.exp(-beta * (e - emin)) / z, e) for par, e in blocks], beta)


def sample_probe(prep: ProbePreparation, seed: int, shots: int) -> np.ndarray:
    """Counts per prepared eigenstate from a seeded multinomial draw."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    rng = np.random.default_rng(seed)
    p = prep.weights / prep.weights.sum()
    return rng.multinomial(shots, p)


@dataclass(frozen=True)
class PhaseRecord:
    true_energy: float
    true_phase: float
    measured_phase: float
    register_bits: int
    time_step: float
    multiplicity: int = 1

    @property
    def lattice_index(self) -> int:
        return int(round(self.measured_phase * 2 ** self.register_bits / TWO_PI)) % 2 ** self.register_bits

    @property
    def accuracy(self) -> float:
        return math.pi / 2 ** self.register_bits


def circular_distance(a: float, b: float) -> float:
    d = (a - b) % TWO_PI
    return min(d, TWO_PI - d)


def quantize_phase(energy: float, dt: float, bits: int, multiplicity: int = 1) -> PhaseRecord:
    """Round (E dt mod 2pi) to the nearest point of the 2^d lattice; ties go down."""
    if bits < 1 or int(bits) != bits:
        raise ValueError("register needs a positive integer number of bits")
    if not dt > 0:
        raise ValueError("time step must be positive")
    phase = math.fmod(energy * dt, TWO_PI)
    if phase < 0:
        phase += TWO_PI
    size = 2 ** int(bits)
    x = phase * size / TWO_PI
    j = math.ceil(x - 0.5)  # nearest integer, exact halves rounded down
    measured = (j % size) * TWO_PI / size
    return PhaseRecord(float(energy), phase, measured, int(bits), float(dt), int(multiplicity))


@dataclass(frozen=True)
class Collision:
    first: tuple[Parity, int]
    second: tuple[Parity, int]
    winding: int


def wraparound_collisions(eigs, dt: float, bits: int, include_unwrapped: bool = False) -> list[Collision]:
    """Eigenstate pairs whose phases the d-bit register cannot tell apart.

    A pair collides when |(E_k - E_l) dt - 2 pi m| <= pi / 2^d for an integer m.
    By default only genuine wrap-arounds (m != 0) are listed; near-degenerate
    pairs (m = 0) are added with ``include_unwrapped``.
    """
    if isinstance(eigs, EigenSystem):
        eigs = [eigs]
    labels, energies = [], []
    for e in eigs:
        labels += [(e.sector.parity, i) for i in range(e.dim)]
        energies.append(np.asarray(e.energies))
    energy = np.concatenate(energies)
    eps = math.pi / 2 ** bits
    diff = (energy[None, :] - energy[:, None]) * dt
    wind = np.rint(diff / TWO_PI)
    hit = np.abs(diff - TWO_PI * wind) <= eps
    hit &= np.triu(np.ones_like(hit, dtype=bool), 1)
    if not include_unwrapped:
        hit &= wind != 0
    i, j = np.nonzero(hit)
    return [Collision(labels[a], labels[b], int(wind[a, b])) for a, b in zip(i, j)]


def safe_time_step(eigs) -> float:
    """Largest dt for which no phase can wrap around: 2 pi / spectral range."""
    if isinstance(eigs, EigenSystem):
        eigs = [eigs]
    e = np.concatenate([np.asarray(x.energies) for x in eigs])
    return TWO_PI / float(e.max() - e.min())


def select_critical_phase(records: list[PhaseRecord]) -> float:
    """Measured phase of the most populated lattice bin.

    Ties go to the bin whose +/-1 neighbourhood carries more counts, then to
    the lower phase.
    """
    if not records:
        raise SelectionError("no phase records to select from")
    bits = records[0].register_bits
    if any(r.register_bits != bits for r in records):
        raise SelectionError("records come from registers of different size")
    size = 2 ** bits
    mass: dict[int, int] = {}
    for r in records:
        mass[r.lattice_index] = mass.get(r.lattice_index, 0) + r.multiplicity

    def key(j):
        around = mass.get((j - 1) % size, 0) + mass.get((j + 1) % size, 0)
        return (-mass[j], -around, j)

    best = min(mass, key=key)
    return best * TWO_PI / size


def protocol2_disambiguate(delta_phi: float, dt: float) -> float:
    """Field estimate from the measured phase difference phi(N) - phi(N+1)."""
    if not dt > 0:
        raise ValueError("time step must be positive")
    half = math.pi / 2
    if abs(delta_phi) <= half:
        return 2.0 * delta_phi / dt
    if -TWO_PI < delta_phi < -3 * half:
        return 2.0 * (delta_phi + TWO_PI) / dt
    if 3 * half < delta_phi < TWO_PI:
        return 2.0 * (delta_phi - TWO_PI) / dt
    raise SelectionError(f"phase difference {delta_phi!r} falls between the admissible intervals")


def protocol2_variance(bits: int, dt: float) -> float:
    if bits < 1 or not dt > 0:
        raise ValueError("need bits >= 1 and dt > 0")
    return math.pi ** 2 / (4.0 ** (bits - 2) * dt ** 2)


def protocol2_runtime(bits: int, dt: float) -> float:
    """Total controlled-evolution time for the two phase measurements."""
    if bits < 1 or not dt > 0:
        raise ValueError("need bits >= 1 and dt > 0")
    return 2.0 ** (bits + 1) * dt


def comparison_thresholds(n: int, dt: float) -> tuple[int, int, int]:
    """Register sizes beyond which the phase protocol beats 1/(Theta N), 1/N^2 and 1/(Theta N^2)."""
    if n < 1 or not dt > 0:
        raise ValueError("need n >= 1 and dt > 0")
    pi = math.pi
    return (math.ceil(math.log2(32 * n * pi ** 2 / dt)),
            math.ceil(math.log2(4 * n * pi / dt)),
            math.ceil(math.log2(32 * n ** 2 * pi ** 2 / dt)))


def protocol2_phase_derivative(n: int, k: int, h: float, dt: float,
                               parity: Parity | str = Parity.EVEN) -> float:
    """d(Delta phi_k)/dh = (<S_z>_k(N) - <S_z>_k(N+1)) dt via Hellmann-Feynman."""
    a = magnetization(solve_sector(build_sector(n, parity), h), k)
    b = magnetization(solve_sector(build_sector(n + 1, parity), h), k)
    return (a - b) * dt


def protocol2_phase_difference(n: int, k: int, h: float, dt: float,
                               parity: Parity | str = Parity.EVEN) -> float:
    """Exact (unquantized, unwrapped) (E_k(N) - E_k(N+1)) dt."""
    a = solve_sector(build_sector(n, parity), h).energies[k]
    b = solve_sector(build_sector(n + 1, parity), h).energies[k]
    return float(a - b) * dt


class Protocol(enum.Enum):
    MAGNETIZATION = 1
    PHASE_DIFFERENCE = 2


@dataclass
class EstimationResult:
    protocol: Protocol
    h_estimate: float
    variance: float
    n_spins: int
    repetitions: int
    register_bits: int | None
    time_step: float | None
    runtime: float | None
    diagnostics: dict = field(default_factory=dict)


def _records(prep: ProbePreparation, counts, dt, bits):
    out = []
    for i in np.flatnonzero(counts):
        out.append(quantize_phase(float(prep.energies[i]), dt, bits, int(counts[i])))
    return out


def _prep(kind, n, h, beta):
    if kind in (ProbeSource.ALL_DOWN, "all-down", "alldown"):
        return all_down_preparation(n, h)
    if kind in (ProbeSource.GIBBS, "gibbs"):
        return gibbs_preparation(n, h, beta)
    raise ValueError(f"unknown probe preparation {kind!r}")


def _phase(e, dt):
    return (e * dt) % TWO_PI


def run_protocol2(n: int, h_true: float, bits: int, dt: float, shots: int, seed: int,
                  prep: ProbeSource | str = ProbeSource.ALL_DOWN, beta: float | None = None,
                  mode: str = "quantized") -> EstimationResult:
    """Simulate the phase-difference protocol end to end.

    ``mode``: "quantized" samples eigenstates and rounds their phases to the
    d-bit lattice; "exact" samples eigenstates but keeps their exact phases;
    "ideal" skips sampling and uses the phases of E_c at N and N+1 directly.

    Selection is flagged correct when each selected phase belongs to the
    largest-weight eigenstate of its preparation, the reference critical state.
    """
    if abs(h_true) > 1 or not 0 < dt <= math.pi:
        raise ValueError("need |h| <= 1 and 0 < dt <= pi")
    eps = math.pi / 2 ** bits
    diag: dict = {"mode": mode, "seed": seed, "shots": shots, "bound": 4 * eps / dt}
    if mode == "ideal":
        phases = [_phase(critical_energy(m, h_true), dt) for m in (n, n + 1)]
        correct = True
    else:
        phases, correct = [], True
        rng = np.random.SeedSequence(seed)
        seeds = rng.generate_state(2)
        for size, sub_seed in zip((n, n + 1), seeds):
            pr = _prep(prep, size, h_true, beta)
            counts = sample_probe(pr, int(sub_seed), shots)
            ref = int(np.argmax(pr.weights))
            ref_phase = _phase(pr.energies[ref], dt)
            if mode == "exact":
                i = int(np.argmax(counts))
                phi = _phase(pr.energies[i], dt)
                ok = i == ref
            elif mode == "quantized":
                phi = select_critical_phase(_records(pr, counts, dt, bits))
                ok = circular_distance(phi, ref_phase) <= eps
            else:
                raise ValueError(f"unknown mode {mode!r}")
            correct &= ok
            phases.append(phi)
            diag[f"reference_level_{size}"] = int(pr.levels[ref])
            diag[f"reference_energy_{size}"] = float(pr.energies[ref])
            diag[f"selected_phase_{size}"] = phi
        e_ref = (diag[f"reference_energy_{n}"], diag[f"reference_energy_{n + 1}"])
        diag["finite_size_bias"] = 2 * (e_ref[0] - e_ref[1]) - h_true
    delta = phases[0] - phases[1]
    diag["delta_phi"] = delta
    diag["selection_correct"] = bool(correct)
    try:
        h_est = protocol2_disambiguate(delta, dt)
    except SelectionError as exc:
        # inconsistent phases; surfaced through diagnostics instead of aborting a batch
        h_est = float("nan")
        diag["disambiguation_error"] = str(exc)
    diag["abs_error"] = abs(h_est - h_true)
    return EstimationResult(Protocol.PHASE_DIFFERENCE, h_est, protocol2_variance(bits, dt), n,
                            shots, bits, dt, protocol2_runtime(bits, dt), diag)


def success_probability(p_single: float, repetitions: int) -> float:
    """pi_M = 1 - (1 - pi)^M."""
    if not 0 <= p_single <= 1:
        raise ValueError("single-shot probability must lie in [0, 1]")
    if repetitions < 1:
        raise ValueError("need at least one repetition")
    return 1.0 - (1.0 - p_single) ** repetitions


def scaling_pi(n: float, plateau: float, width: float) -> float:
    """N^(1 + mu - upsilon) ln N, the probability of landing in the critical window."""
    return n ** (1 + width - plateau) * math.log(n)


def window_weight(prep: ProbePreparation, n: int, h: float, half_width: float) -> float:
    """Total preparation weight within |E - E_c| <= half_width (energy units)."""
    mask = np.abs(prep.energies - critical_energy(n, h)) <= half_width
    return float(prep.weights[mask].sum())
