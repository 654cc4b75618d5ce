import dataclasses

import numpy as np
import pytest

from nhthermo import hatano_nelson as hn
from nhthermo.errors import ResolutionError, UsageError, ValidationError
from nhthermo.features import stable_derivative_peak


def oracle_information(p: hn.HnParams) -> float:
    """Direct grand-canonical summation: relative entropy between the tilted
    ensemble and the reciprocal Gibbs ensemble, assembled from mode entropies
    and energies (a route independent of the closed-form three-term sum)."""
    s = hn.build_spectra(p)
    beta = p.beta
    occ = hn.bose_occupations(s.levels_T, beta, s.mu)
    sites = np.arange(1, p.L + 1, dtype=float)
    w = sites @ (np.abs(s.vectors_T) ** 2)
    entropy = np.sum((1 + occ) * np.log1p(occ) - occ * np.log(occ))
    energy = np.sum(occ * s.levels_T) - (p.g * p.T / p.L) * np.sum(w * occ)
    ln_xi0 = -np.sum(np.log1p(-np.exp(-beta * (s.levels_0 - s.mu0))))
    return float(-entropy + beta * energy - beta * s.mu0 * p.N_B + ln_xi0)


# ---------------------------------------------------------------------------
# types and spectra


def test_params_validation():
    with pytest.raises(ValidationError):
        hn.HnParams(L=1)
    with pytest.raises(ValidationError):
        hn.HnParams(L=10, J=-1.0)
    with pytest.raises(ValidationError):
        hn.HnParams(L=10, T=0.0)
    p = hn.HnParams(L=7)
    assert p.N_B == 7 and p.tilt == 0.0


def test_spectra_g_zero_degenerate():
    s = hn.build_spectra(hn.HnParams(L=50, T=1.0, g=0.0))
    assert np.max(np.abs(s.levels_T - s.levels_0)) < 1e-12
    assert abs(s.mu - s.mu0) < 1e-12


def test_two_site_levels():
    s = hn.build_spectra(hn.HnParams(L=2, J=1.0, g=0.0, T=1.0))
    assert np.allclose(s.levels_0, [-1.0, 1.0], atol=1e-14)


def test_band_and_density_of_states():
    L, J = 2000, 1.0
    s = hn.build_spectra(hn.HnParams(L=L, J=J, T=1.0, g=0.0), vectors=False)
    lev = s.levels_0
    assert np.max(np.abs(lev)) <= 2 * J + 1e-12
    # open-boundary tridiagonal closed form, exact up to roundoff
    k = np.arange(1, L + 1)
    exact = 2 * J * np.cos(np.pi * k / (L + 1))
    assert np.max(np.abs(np.sort(lev) - np.sort(exact))) < 1e-10
    # cumulative density of states agrees with the ring dispersion
    # 2J cos(2 pi k / L) up to O(1/L) near the band edges
    for e in (-1.9 * J, -1.5 * J, 1.5 * J, 1.9 * J):
        f_num = np.mean(lev <= e)
        f_ring = 1.0 - np.arccos(e / (2 * J)) / np.pi
        assert abs(f_num - f_ring) < 5.0 / L


def test_reciprocal_levels_do_not_depend_on_g():
    ref = None
    for g in (0.0, 0.5, 2.0):
        s = hn.build_spectra(hn.HnParams(L=64, g=g, T=1.0), vectors=False)
        if ref is None:
            ref = s.levels_0
        else:
            assert np.array_equal(ref, s.levels_0) or np.max(np.abs(ref - s.levels_0)) < 1e-14


# ---------------------------------------------------------------------------
# chemical potential and occupations


def test_single_level_closed_form():
    T = 0.7
    mu = hn.chemical_potential(np.array([2.0]), 1.0 / T, 1)
    assert mu == pytest.approx(2.0 - T * np.log(2.0), abs=1e-10)


def test_ground_state_saturation_at_low_temperature():
    p = hn.HnParams(L=100, J=1.0, g=0.5, T=1e-3)
    s = hn.build_spectra(p, vectors=False)
    occ = hn.bose_occupations(s.levels_T, p.beta, s.mu)
    assert occ[0] / p.N_B > 0.999


def test_chemical_potential_against_dense_scan():
    p = hn.HnParams(L=1000, J=1.0, g=0.0, T=1.0)
    s = hn.build_spectra(p, vectors=False)
    # oracle: dense scan of the monotone constraint function, then local
    # secant polish between the bracketing grid points
    e0 = s.levels_0[0]
    grid = np.linspace(e0 - 5.0, e0 - 1e-12, 400001)
    vals = np.array([hn.bose_occupations(s.levels_0, p.beta, m).sum() for m in grid[:: 4000]])
    rough = grid[::4000]
    j = int(np.searchsorted(vals, p.N_B))
    a, b = rough[j - 1], rough[j]
    for _ in range(200):
        m = 0.5 * (a + b)
        if hn.bose_occupations(s.levels_0, p.beta, m).sum() > p.N_B:
            b = m
        else:
            a = m
    assert abs(0.5 * (a + b) - s.mu0) < 1e-8


def test_occupations_validate():
    s = hn.build_spectra(hn.HnParams(L=20, T=1.0, g=0.3))
    occ = hn.bose_occupations(s.levels_T, 1.0, s.mu)
    assert np.all(occ > 0)
    assert abs(occ.sum() - 20) < 1e-8 * 20
    with pytest.raises(UsageError):
        hn.bose_occupations(s.levels_T, 1.0, s.levels_T[0] + 1.0)


# ---------------------------------------------------------------------------
# condensate fraction


def test_condensate_limits():
    s = hn.build_spectra(hn.HnParams(L=100, g=0.5, T=1e-3))
    assert hn.condensate_fraction(s) > 0.999
    s = hn.build_spectra(hn.HnParams(L=2000, g=0.0, T=1.0))
    assert hn.condensate_fraction(s) < 10.0 / 2000
    s = hn.build_spectra(hn.HnParams(L=2000, g=1.0, T=0.1))
    assert hn.condensate_fraction(s) > 0.1


# ---------------------------------------------------------------------------
# information content


def test_information_zero_at_reciprocal_point():
    assert hn.hn_information(hn.HnParams(L=300, g=0.0, T=1.0)) == 0.0


def test_information_matches_direct_summation_oracle():
    p = hn.HnParams(L=200, J=1.0, g=0.5, T=1.0)
    assert abs(hn.hn_information(p) - oracle_information(p)) < 1e-8


def test_information_increases_with_g():
    vals = hn.information_sweep(800, 1.0, [0.2, 0.6, 1.2, 2.0])
    assert np.all(np.diff(vals) > 0)
    assert np.all(vals >= -1e-9)


def test_information_gauge_invariant(rng=np.random.default_rng(5)):
    # all outputs depend on |<j|n>|^2 only: random orbital re-phasing is inert
    p = hn.HnParams(L=60, g=0.7, T=1.0)
    s = hn.build_spectra(p)
    base = hn.hn_information(p, s)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=60))
    s2 = dataclasses.replace(s, vectors_T=s.vectors_T.astype(complex) * phases)
    assert abs(hn.hn_information(p, s2) - base) < 1e-12


# ---------------------------------------------------------------------------
# transition estimators


def test_third_derivative_negative_control():
    grid = np.linspace(0.0, 1.5, 151)
    cubic = 0.3 * grid**3 - 0.2 * grid**2 + grid
    with pytest.raises(ResolutionError):
        stable_derivative_peak(grid, cubic, order=3)


def test_third_derivative_synthetic_kink():
    # curvature kink (second-derivative jump) gives a delta-like third
    # derivative localized at the kink point
    grid = np.linspace(0.0, 1.0, 501)
    c = grid[250]
    vals = np.where(grid < c, 0.0, (grid - c) ** 2) + 0.1 * grid
    loc = hn.third_derivative_kink(200, 1.0, grid, values=vals)
    assert abs(loc - c) <= 2 * 0.002 + 1e-12


def test_kink_grid_too_coarse():
    grid = np.linspace(0.0, 1.0, 21)
    with pytest.raises(ResolutionError):
        hn.third_derivative_kink(100, 1.0, grid, values=np.sin(grid))


def test_kink_and_onset_agree_moderate_size():
    g_on = hn.onset_g(1200, 1.0)
    g_kink = hn.kink_g(1200, 1.0, center=g_on)
    assert abs(g_kink - g_on) / g_on < 0.10


def test_kink_sharpens_with_system_size():
    peaks = []
    for L in (600, 1200, 2400):
        center = hn.onset_g(L, 1.0)
        step = min(0.002, center / 40)
        grid = np.arange(center * 0.9 - 4 * step, center * 1.1 + 4.5 * step, step)
        vals = hn.information_sweep(L, 1.0, grid) / L  # intensive curve
        from nhthermo.features import third_derivative

        d3 = third_derivative(vals, step)
        peaks.append(np.nanmax(np.abs(d3)))
    assert peaks[0] < peaks[1] < peaks[2]


def test_critical_line_single_row_no_fit():
    rows = hn.critical_line([1.0], L=400, with_kink=False)
    assert len(rows) == 1
    with pytest.raises(UsageError):
        hn.fit_low_T_exponent(rows)


def test_low_T_scaling_small():
    rows = hn.critical_line([0.05, 0.1, 0.2], L=1000, with_kink=False)
    _, p = hn.fit_low_T_exponent(rows)
    assert abs(p - 1.0) < 0.15


def test_high_T_scaling_small():
    rows = hn.critical_line([5.0, 15.0, 50.0], L=1000, with_kink=False)
    _, resid = hn.fit_high_T_offset(rows)
    assert resid < 0.10
