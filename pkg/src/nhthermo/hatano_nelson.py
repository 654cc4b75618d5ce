"""Finite-temperature bosonic Hatano-Nelson chain with open boundaries.

The nonreciprocal chain J(e^{-g/2L} a+_{j+1} a_j + e^{g/2L} a+_j a_{j+1}) is
similarity-equivalent to the reciprocal chain, so its real single-particle
spectrum is that of the plain tridiagonal hopping matrix, while the thermal
Hamiltonian acquires a linear potential V (j/L) with V = g T. All
thermodynamics follows from the two single-particle spectra with
Bose-Einstein statistics in the grand-canonical ensemble at fixed mean
particle number (N_B = L by default).

The nonreciprocity leaves the spectrum untouched; its entire imprint is the
tilt of the thermal Hamiltonian, which drives a finite-temperature
condensation transition onto the tilted chain's ground orbital.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal

from .errors import ResolutionError, UsageError, ValidationError
from .features import stable_derivative_peak

#: Fraction tolerance for the condensate-onset bisection.
ONSET_GTOL = 1e-3


@dataclass(frozen=True)
class HnParams:
    """Chain geometry, hopping, skin strength, temperature and filling."""

    L: int
    J: float = 1.0
    g: float = 0.0
    T: float = 1.0
    N_B: int = None

    def __post_init__(self):
        if self.L < 2:
            raise ValidationError("L must be at least 2")
        if not self.J > 0:
            raise ValidationError("J must be positive")
        if not self.T > 0:
            raise ValidationError("T must be positive")
        if self.N_B is None:
            object.__setattr__(self, "N_B", self.L)
        if self.N_B < 1:
            raise ValidationError("N_B must be at least 1")

    @property
    def beta(self) -> float:
        return 1.0 / self.T

    @property
    def tilt(self) -> float:
        """Linear-potential strength V = g T of the thermal Hamiltonian."""
        return self.g * self.T


@dataclass(frozen=True)
class HnSpectrum:
    """Single-particle data: tilted (thermal) levels and orbitals, reciprocal
    levels, and the chemical potentials fixing <N> = N_B for each."""

    params: HnParams
    levels_T: np.ndarray
    vectors_T: np.ndarray
    levels_0: np.ndarray
    mu: float
    mu0: float

    def __post_init__(self):
        if not (self.mu < self.levels_T[0] and self.mu0 < self.levels_0[0]):
            raise ValidationError("chemical potentials must lie strictly below the bands")
        occ = bose_occupations(self.levels_T, self.params.beta, self.mu)
        if abs(occ.sum() - self.params.N_B) > 1e-8 * self.params.N_B:
            raise ValidationError("occupations do not sum to N_B")


def bose_occupations(levels, beta: float, mu: float) -> np.ndarray:
    """1/(e^{beta(e - mu)} - 1) for each level; expm1 keeps small gaps exact."""
    x = beta * (np.asarray(levels, dtype=float) - mu)
    if np.any(x <= 0):
        raise UsageError("occupations need mu strictly below every level")
    return 1.0 / np.expm1(np.minimum(x, 700.0))


def chemical_potential(levels, beta: float, N_B: float, rtol: float = 1e-13) -> float:
    """Bisection for mu with sum of Bose occupations equal to N_B.

    The constraint is monotone in mu and diverges at the lowest level, so a
    strict solution below the band always exists at finite size; bisection is
    unconditionally safe against the singular endpoint.
    """
    levels = np.asarray(levels, dtype=float)
    if not np.all(np.isfinite(levels)):
        raise UsageError("levels must be finite")
    e0 = float(levels.min())
    T = 1.0 / beta
    lo = e0 - 50.0 * max(T, (levels.max() - e0) or T)
    hi = e0

    def excess(mu):
        return bose_occupations(levels, beta, mu).sum() - N_B

    if excess(lo) > 0:
        raise UsageError("bracket failure: occupation already exceeds N_B at the far bound")
    mu = lo
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f = excess(mid)
        if f > 0:
            hi = mid
        else:
            lo = mid
            mu = mid
            if -f <= rtol * N_B:
                break
    if not mu < e0:
        raise UsageError("bisection failed to place mu below the band")
    return float(mu)


def build_spectra(p: HnParams, vectors: bool = True, reciprocal=None) -> HnSpectrum:
    """Diagonalize the reciprocal and tilted tridiagonal chains and solve both
    chemical potentials.

    reciprocal: optional (levels_0, mu0) pair reused across a g sweep (the
    reciprocal data does not depend on g).
    """
    off = np.full(p.L - 1, p.J)
    diagT = p.tilt * (np.arange(1, p.L + 1) / p.L)
    if reciprocal is None:
        levels_0 = eigvalsh_tridiagonal(np.zeros(p.L), off)
        mu0 = chemical_potential(levels_0, p.beta, p.N_B)
    else:
        levels_0, mu0 = reciprocal
    if vectors:
        levels_T, vectors_T = eigh_tridiagonal(diagT, off)
    else:
        levels_T = eigvalsh_tridiagonal(diagT, off)
        vectors_T = None
    mu = chemical_potential(levels_T, p.beta, p.N_B)
    return HnSpectrum(params=p, levels_T=levels_T, vectors_T=vectors_T,
                      levels_0=levels_0, mu=mu, mu0=mu0)


def condensate_fraction(s: HnSpectrum) -> float:
    """phi0 = n0 / N_B: occupation fraction of the tilted ground orbital."""
    n0 = bose_occupations(s.levels_T[:1], s.params.beta, s.mu)[0]
    return float(n0 / s.params.N_B)


def _log_expm1(x: np.ndarray) -> np.ndarray:
    """ln(e^x - 1) for x > 0, stable for both small and large x."""
    x = np.asarray(x, dtype=float)
    return x + np.log1p(-np.exp(-x))


def hn_information(p: HnParams, spectrum: HnSpectrum | None = None) -> float:
    """Information content of the chain's steady state in nats.

    Three terms: the tilt energy of the occupied orbitals, the ratio of the
    Bose partition logs, and the chemical-potential offset beta L (mu - mu0);
    equals the relative entropy between the tilted-ensemble steady state and
    the reciprocal Gibbs ensemble, and vanishes term by term at g = 0.
    """
    s = spectrum if spectrum is not None else build_spectra(p)
    if s.vectors_T is None:
        raise UsageError("hn_information needs the tilted eigenvectors")
    if p.g == 0.0:
        return 0.0  # all three terms vanish term by term
    beta = p.beta
    occ = bose_occupations(s.levels_T, beta, s.mu)
    sites = np.arange(1, p.L + 1, dtype=float)
    weights = sites @ (np.abs(s.vectors_T) ** 2)  # sum_j j |<j|n>|^2 per orbital
    term1 = float(-(p.g / p.L) * (weights @ occ))
    xT = beta * (s.levels_T - s.mu)
    x0 = beta * (s.levels_0 - s.mu0)
    term2 = float(np.sum(np.log1p(-np.exp(-xT)) - np.log1p(-np.exp(-x0))))
    term3 = float(beta * p.L * (s.mu - s.mu0))
    return term1 + term2 + term3


def information_sweep(L: int, T: float, g_values, J: float = 1.0) -> np.ndarray:
    beta = 1.0 / T
    levels_0 = eigvalsh_tridiagonal(np.zeros(L), np.full(L - 1, J))
    mu0 = chemical_potential(levels_0, beta, L)
    out = []
    for g in g_values:
        p = HnParams(L=L, J=J, g=float(g), T=T)
        s = build_spectra(p, reciprocal=(levels_0, mu0))
        out.append(hn_information(p, s))
    return np.array(out)


def excited_capacity(L: int, T: float, g: float, J: float = 1.0) -> float:
    """Bosons the excited orbitals hold with mu pinned at the band bottom."""
    p = HnParams(L=L, J=J, g=g, T=T)
    off = np.full(L - 1, J)
    lev = eigvalsh_tridiagonal(p.tilt * (np.arange(1, L + 1) / L), off)
    return float(bose_occupations(lev[1:], p.beta, lev[0]).sum())


def onset_g(L: int, T: float, J: float = 1.0, tol: float = ONSET_GTOL) -> float:
    """Condensation-onset estimate: the tilt where the excited orbitals
    saturate at exactly N_B = L bosons with the chemical potential at the
    band bottom. This is the particle-number transition criterion evaluated
    at finite size; it is parameter-free and monotone in g (eigenvalues
    only, no orbitals needed)."""

    def excess(g):
        return excited_capacity(L, T, g, J) - L

    lo = min(0.25 * T / J, 0.25)
    hi = max(4.0 * T / J, 4.0 * np.log1p(T / J), 1.0)
    for _ in range(60):
        if excess(hi) < 0:
            break
        hi *= 2.0
        if hi > 1e4:
            raise UsageError("no condensation onset found below g = 1e4")
    for _ in range(60):
        if excess(lo) > 0:
            break
        lo *= 0.5
        if lo < 1e-8:
            raise UsageError("chain is condensed at arbitrarily small g; no onset")
    while hi - lo > tol * hi:
        mid = np.sqrt(lo * hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def third_derivative_kink(L: int, T: float, g_grid, J: float = 1.0, values=None) -> float:
    """Location of the strongest third-derivative feature of the information
    content over a uniform g grid, with a step-halving stability check."""
    grid = np.asarray(g_grid, dtype=float)
    steps = np.diff(grid)
    if len(grid) < 9 or np.any(steps <= 0):
        raise UsageError("need an ascending g grid with at least 9 points")
    h = float(steps.mean())
    if h > 0.002 + 1e-12:
        raise ResolutionError(f"g grid step {h:.4g} too coarse (need <= 0.002)")
    if values is None:
        values = information_sweep(L, T, grid, J)
    return stable_derivative_peak(grid, values, order=3)


def kink_g(L: int, T: float, J: float = 1.0, window: float = 0.08, step: float = None,
           center: float = None) -> float:
    """Third-derivative feature location, bracketed by the cheap onset
    estimate and refined on a fine local grid."""
    if center is None:
        center = onset_g(L, T, J)
    if step is None:
        step = min(0.002, center / 40.0)
    lo = max(center * (1 - window) - 4 * step, step)
    n = max(int(np.ceil((center * (1 + window) + 4 * step - lo) / step)) + 1, 13)
    grid = lo + step * np.arange(n)
    return third_derivative_kink(L, T, grid, J)


def critical_line(T_values, L: int, J: float = 1.0, with_kink: bool = True):
    """(T, g_c_kink, g_c_onset, flag) rows; flag marks >10% disagreement.

    With a single temperature no scaling fit is attempted by callers; the
    kink pass can be disabled for cheap onset-only scans (kink column nan).
    """
    rows = []
    for T in np.atleast_1d(np.asarray(T_values, dtype=float)):
        g_on = onset_g(L, float(T), J)
        if with_kink:
            try:
                g_kink = kink_g(L, float(T), J)
            except ResolutionError:
                g_kink = np.nan
        else:
            g_kink = np.nan
        flag = int(np.isfinite(g_kink) and abs(g_kink - g_on) > 0.10 * g_on)
        rows.append((float(T), float(g_kink), float(g_on), flag))
    return rows


def fit_low_T_exponent(rows) -> tuple[float, float]:
    """Power-law fit g_c = a T^p on onset estimates; returns (a, p)."""
    T = np.array([r[0] for r in rows])
    g = np.array([r[2] for r in rows])
    if len(T) < 2:
        raise UsageError("need at least two temperatures for a scaling fit")
    p, loga = np.polyfit(np.log(T), np.log(g), 1)
    return float(np.exp(loga)), float(p)


def fit_high_T_offset(rows, J: float = 1.0) -> tuple[float, float]:
    """Fit g_c = b + ln(T/J); returns (b, max relative residual)."""
    T = np.array([r[0] for r in rows])
    g = np.array([r[2] for r in rows])
    b = float(np.mean(g - np.log(T / J)))
    resid = np.max(np.abs(g - (b + np.log(T / J))) / np.abs(g))
    return b, float(resid)
