import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmg_esqpt.errors import DegeneracyError, NumericalError, UndefinedWidthError
from lmg_esqpt.qfi import (ScanAxis, average_qfi, derivative_matrix, eigenstate_derivative,
                           half_max_crossings, qfi_all_levels, qfi_eigenstate, qfi_energy_scan,
                           qfi_field_sweep, qfi_fidelity_oracle, qfi_mixed, qfi_superposition,
                           require_width)
from lmg_esqpt.spectrum import EigenSystem, critical_field, default_level, solve_sector
from lmg_esqpt.spin_sector import Parity, both_sectors, build_sector


def _dense_state(sector, k, h):
    return np.array(solve_sector(sector, h).vectors[:, k])


@pytest.mark.parametrize("h", [0.0, 0.25, 0.5, 1.3])
@pytest.mark.parametrize("k", [0, 1])
def test_two_spin_closed_form(h, k):
    # both even levels of N=2 have F = (1/16) / (h^2 + 1/16)^2
    r2 = h * h + 1 / 16
    f = qfi_eigenstate(solve_sector(build_sector(2), h), k)
    assert f == pytest.approx((1 / 16) / r2 ** 2, rel=1e-12)


def test_odd_sector_of_two_spins_is_one_dimensional():
    eig = solve_sector(build_sector(2, Parity.ODD), 0.4)
    assert eig.dim == 1
    # no other level to couple to
    assert qfi_eigenstate(eig, 0) == 0.0


@pytest.mark.parametrize("n", [10, 31, 60, 100])
@pytest.mark.parametrize("h", [0.2, 0.5, 0.8])
def test_perturbation_sum_matches_fidelity_oracle(n, h):
    sec = build_sector(n)
    eig = solve_sector(sec, h)
    for k in sorted({0, default_level(n, 0.1)}):
        exact = qfi_eigenstate(eig, k)
        oracle = qfi_fidelity_oracle(sec, k, h)
        assert abs(exact - oracle) / exact <= 1e-6


def test_fidelity_oracle_rejects_bad_step_and_lost_tracking():
    sec = build_sector(20)
    with pytest.raises(ValueError):
        qfi_fidelity_oracle(sec, 0, 0.3, eps=0.0)
    # a huge step loses the eigenvector; the oracle must refuse rather than guess
    with pytest.raises(NumericalError):
        qfi_fidelity_oracle(sec, 4, 0.3, eps=2.0, richardson=False)


def test_all_levels_matches_single_level():
    eig = solve_sector(build_sector(40, Parity.ODD), 0.35)
    everything = qfi_all_levels(eig)
    single = [qfi_eigenstate(eig, k) for k in range(eig.dim)]
    assert np.allclose(everything, single, rtol=1e-10)


def test_eigenstate_derivative_matches_finite_difference():
    sec = build_sector(24)
    h, k, eps = 0.4, 3, 1e-6
    der = eigenstate_derivative(solve_sector(sec, h), k)
    eig = solve_sector(sec, h)
    fd = (_dense_state(sec, k, h + eps) - _dense_state(sec, k, h - eps)) / (2 * eps)
    assert np.allclose(eig.vectors @ der.coefficients, fd, atol=1e-6)
    assert der.coefficients[k] == 0.0 and der.others().size == eig.dim - 1


def test_derivative_matrix_is_antisymmetric():
    d = derivative_matrix(solve_sector(build_sector(30), 0.6))
    assert np.allclose(d, -d.T, atol=1e-12)
    assert np.all(np.diag(d) == 0)


def test_degenerate_levels_raise():
    fake = EigenSystem(0.0, build_sector(2), np.array([0.0, 0.0]), np.eye(2))
    with pytest.raises(DegeneracyError):
        qfi_eigenstate(fake, 0)
    with pytest.raises(DegeneracyError):
        derivative_matrix(fake)


def test_level_index_checked():
    eig = solve_sector(build_sector(6), 0.3)
    with pytest.raises(IndexError):
        qfi_eigenstate(eig, eig.dim)


@given(st.integers(2, 40), st.floats(0.0, 1.5), st.data())
@settings(max_examples=40, deadline=None)
def test_qfi_is_nonnegative(n, h, data):
    eig = solve_sector(build_sector(n), h)
    k = data.draw(st.integers(0, eig.dim - 1))
    assert qfi_eigenstate(eig, k) >= 0


# --- mixtures -------------------------------------------------------------


def _dense_mixed_qfi(sector, h, p_of_h, eps=1e-5):
    """2 sum |<i|d rho|j>|^2 / (l_i + l_j) with d rho by central differences."""
    def rho(x):
        v = solve_sector(sector, x).vectors
        return (v * p_of_h(x)) @ v.T

    drho = (rho(h + eps) - rho(h - eps)) / (2 * eps)
    lam, u = np.linalg.eigh(rho(h))
    m = u.T @ drho @ u
    s = lam[:, None] + lam[None, :]
    keep = s > 1e-12
    return float(2 * np.sum(m[keep] ** 2 / s[keep]))


def test_mixed_pure_state_reduces_to_eigenstate_qfi():
    eig = solve_sector(build_sector(20), 0.3)
    p = np.zeros(eig.dim)
    p[2] = 1.0
    assert qfi_mixed(eig, p) == pytest.approx(qfi_eigenstate(eig, 2), rel=1e-12)


def test_uniform_mixture_has_zero_qfi():
    eig = solve_sector(build_sector(20), 0.3)
    p = np.full(eig.dim, 1 / eig.dim)
    assert qfi_mixed(eig, p) == pytest.approx(0.0, abs=1e-12)


def test_mixed_qfi_matches_dense_oracle_with_moving_weights():
    sec = build_sector(16)
    h = 0.45
    dim = sec.dim

    def p_of_h(x):
        w = np.exp(-3.0 * x * np.arange(dim)) * (1 + np.arange(dim)) ** 0.5
        return w / w.sum()

    eps = 1e-6
    dp = (p_of_h(h + eps) - p_of_h(h - eps)) / (2 * eps)
    got = qfi_mixed(solve_sector(sec, h), p_of_h(h), dp)
    assert got == pytest.approx(_dense_mixed_qfi(sec, h, p_of_h), rel=1e-5)


def test_mixed_over_both_sectors_adds_blockwise():
    even, odd = both_sectors(11)
    ee, eo = solve_sector(even, 0.2), solve_sector(odd, 0.2)
    pe = np.linspace(1, 2, ee.dim)
    po = np.linspace(2, 1, eo.dim)
    tot = pe.sum() + po.sum()
    joint = qfi_mixed([ee, eo], np.concatenate([pe, po]) / tot)
    separate = (pe.sum() / tot) * qfi_mixed(ee, pe / pe.sum()) + (po.sum() / tot) * qfi_mixed(eo, po / po.sum())
    assert joint == pytest.approx(separate, rel=1e-10)


@given(st.integers(0, 2 ** 31))
@settings(max_examples=25, deadline=None)
def test_mixed_qfi_is_convex(seed):
    rng = np.random.default_rng(seed)
    eig = solve_sector(build_sector(14), float(rng.uniform(0, 1.2)))
    p = rng.dirichlet(np.ones(eig.dim))
    assert qfi_mixed(eig, p) <= average_qfi(p, qfi_all_levels(eig)) * (1 + 1e-10) + 1e-12


def test_mixed_input_validation():
    eig = solve_sector(build_sector(6), 0.3)
    with pytest.raises(ValueError):
        qfi_mixed(eig, np.full(eig.dim, 0.5))
    with pytest.raises(ValueError):
        qfi_mixed(eig, np.r_[1.5, -0.5, np.zeros(eig.dim - 2)])
    p = np.r_[1.0, np.zeros(eig.dim - 1)]
    with pytest.raises(ValueError):
        qfi_mixed(eig, p, np.r_[0.0, 0.1, np.zeros(eig.dim - 2)])
    with pytest.raises(ValueError):
        qfi_mixed(eig, p[:-1])
    with pytest.raises(ValueError):
        average_qfi(p, np.ones(eig.dim + 1))


# --- superpositions -------------------------------------------------------


def test_superposition_of_single_level_is_eigenstate_qfi():
    eig = solve_sector(build_sector(30), 0.5)
    c = np.zeros(eig.dim)
    c[5] = 1.0
    assert qfi_superposition(eig, c) == pytest.approx(qfi_eigenstate(eig, 5), rel=1e-12)


def test_superposition_matches_pure_state_finite_difference():
    sec = build_sector(12)
    rng = np.random.default_rng(3)
    a = rng.normal(size=sec.dim) + 1j * rng.normal(size=sec.dim)
    b = rng.normal(size=sec.dim) + 1j * rng.normal(size=sec.dim)

    def amplitudes(x):
        c = a + x * b
        return c / np.linalg.norm(c)

    def psi(x):
        return solve_sector(sec, x).vectors @ amplitudes(x)

    h, eps = 0.37, 1e-5
    dc = (amplitudes(h + eps) - amplitudes(h - eps)) / (2 * eps)
    dpsi = (psi(h + eps) - psi(h - eps)) / (2 * eps)
    s = psi(h)
    expected = 4 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(s, dpsi)) ** 2)
    got = qfi_superposition(solve_sector(sec, h), amplitudes(h), dc)
    assert got == pytest.approx(expected, rel=1e-6)


@given(st.floats(0, 2 * math.pi), st.integers(0, 2 ** 31))
@settings(max_examples=30, deadline=None)
def test_superposition_is_global_phase_invariant(phase, seed):
    eig = solve_sector(build_sector(10), 0.6)
    rng = np.random.default_rng(seed)
    c = rng.normal(size=eig.dim) + 1j * rng.normal(size=eig.dim)
    c /= np.linalg.norm(c)
    ref = qfi_superposition(eig, c)
    assert qfi_superposition(eig, np.exp(1j * phase) * c) == pytest.approx(ref, rel=1e-9, abs=1e-12)
    assert ref >= -1e-12


def test_superposition_input_validation():
    eig = solve_sector(build_sector(6), 0.3)
    c = np.r_[1.0, np.zeros(eig.dim - 1)]
    with pytest.raises(ValueError):
        qfi_superposition(eig, 2 * c)
    with pytest.raises(ValueError):
        qfi_superposition(eig, c[:-1])
    with pytest.raises(ValueError):
        qfi_superposition(eig, c, c)  # derivative not orthogonal to the state


# --- scans ----------------------------------------------------------------


def test_half_max_crossings_on_triangle():
    x = np.linspace(-1, 1, 201)
    y = 1 - np.abs(x)
    left, right = half_max_crossings(x, y)
    assert left == pytest.approx(-0.5) and right == pytest.approx(0.5)
    left, right = half_max_crossings(x[100:], y[100:])
    assert left is None and right == pytest.approx(0.5)


def test_field_sweep_grid_validation():
    sec = build_sector(10)
    with pytest.raises(ValueError):
        qfi_field_sweep(sec, 1, [0.1, 0.2])
    with pytest.raises(ValueError):
        qfi_field_sweep(sec, 1, [0.3, 0.2, 0.1])


def test_field_sweep_peak_sits_at_critical_field():
    n = 200
    sec = build_sector(n)
    k = default_level(n, 0.1)
    scan = qfi_field_sweep(sec, k, np.linspace(0, 1, 201))
    assert scan.axis is ScanAxis.FIELD
    assert abs(scan.peak_location - critical_field(sec, k)) < 0.02
    assert scan.peak_value >= scan.values.max()
    assert scan.value_at_zero_field == pytest.approx(scan.values[0])
    assert scan.left_crossing < scan.peak_location < scan.right_crossing
    assert require_width(scan) == pytest.approx(scan.right_crossing - scan.left_crossing)


def test_refined_and_coarse_sweeps_agree():
    sec = build_sector(120)
    k = 12
    fine = qfi_field_sweep(sec, k, np.linspace(0, 1, 161), refine=True)
    coarse = qfi_field_sweep(sec, k, np.linspace(0, 1, 161), refine=False)
    assert fine.peak_value == pytest.approx(coarse.peak_value, rel=0.05)
    assert fine.half_width == pytest.approx(coarse.half_width, rel=0.05)


def test_even_and_odd_peaks_coincide_at_large_n():
    n = 400
    even, odd = both_sectors(n)
    k = default_level(n, 0.1)
    grid = np.linspace(0.3, 0.8, 101)
    pe = qfi_field_sweep(even, k, grid).peak_location
    po = qfi_field_sweep(odd, k, grid).peak_location
    assert abs(pe - po) < 5e-3


def test_energy_scan_peak_near_critical_energy():
    n, h = 400, 0.4
    scan = qfi_energy_scan(build_sector(n), h)
    assert scan.axis is ScanAxis.ENERGY
    assert abs(scan.peak_location + h / 2) < 0.02
    assert require_width(scan) > 0
    assert scan.metadata["critical_energy_rescaled"] == pytest.approx(-h / 2)


def test_width_missing_flank_raises():
    sec = build_sector(60)
    scan = qfi_field_sweep(sec, 6, np.linspace(0.0, 0.2, 5), refine=False)
    assert scan.half_width is None
    with pytest.raises(UndefinedWidthError):
        require_width(scan)


def test_average_qfi_of_probe_distributions_is_superextensive():
    from lmg_esqpt.protocols import all_down_preparation
    from lmg_esqpt.scaling import fit_power_law

    h = 0.5
    polarized, uniform = [], []
    for n in (200, 400, 800):
        eig = solve_sector(build_sector(n), h)
        f = qfi_all_levels(eig)
        polarized.append((n, average_qfi(all_down_preparation(n, h).weights, f)))
        uniform.append((n, average_qfi(np.full(eig.dim, 1 / eig.dim), f)))
    # all-down probe: close to gamma - 0.06 = 2.01
    assert fit_power_law(polarized).exponent == pytest.approx(2.01, abs=0.15)
    assert fit_power_law(uniform).exponent > 1


def test_point_mass_average_is_single_value():
    f = np.array([1.0, 7.0, 3.0])
    assert average_qfi([0.0, 1.0, 0.0], f) == 7.0
