"""Acceptance criteria for the library, each at its stated tolerance.

Each check returns a CriterionResult; run_acceptance executes all of them
(reusing expensive cycle runs across checks) and is the engine behind both
tests/test_acceptance.py and the CLI selftest.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import engine, hatano_nelson as hn, thermo
from .dynamics import (
    BathSpec,
    NonHermitianSystem,
    build_generator,
    evolve,
    steady_state,
)
from .operators import (
    HermitianOperator,
    frechet_dlog,
    gibbs_state,
    hermitian_part,
    relative_entropy,
    unitary_log_derivative,
)

SX = engine.SX
SY = engine.SY
ZERO2 = engine.ZERO2


@dataclass
class CriterionResult:
    name: str
    passed: bool
    details: str
    runtime_s: float
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.details} ({self.runtime_s:.1f}s)"


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _rand_hermitian(rng, d, scale=1.0):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    A = hermitian_part(A)
    return scale * A / max(np.linalg.norm(A, 2), 1e-12)


def _rand_density(rng, d, floor=1e-3):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = X @ X.conj().T
    r = r / np.trace(r).real
    return hermitian_part((1 - floor * d) * r + floor * np.eye(d))


def _rand_real_spectrum_system(rng, d, skew):
    """Random PT-unbroken pair: H + i Gamma similar to a Hermitian matrix."""
    Ht = _rand_hermitian(rng, d)
    X = _rand_hermitian(rng, d, scale=skew)
    w, Q = np.linalg.eigh(X)
    S = (Q * np.exp(w)) @ Q.conj().T
    S_inv = (Q * np.exp(-w)) @ Q.conj().T
    HNH = S @ Ht @ S_inv
    H = hermitian_part(HNH)
    G = hermitian_part((HNH - HNH.conj().T) / 2j)
    return NonHermitianSystem(HermitianOperator(H), HermitianOperator(G))


# ---------------------------------------------------------------------------
# criteria


def check_high_T_closed_form(cache=None) -> CriterionResult:
    """Steady-state information content vs the high-temperature closed form."""

    def body():
        T, kappa = 100.0, 0.005
        rows = []
        ok = True
        for g in (0.1, 0.25, 0.5, 0.75, 1.0, 1.25):
            val = engine.steady_information(T, g, kappa)
            ref = engine.high_T_closed_form(g)
            if g == 0.1:
                good = abs(val - ref) < 0.01
            else:
                good = abs(val - ref) / ref < 0.05
            ok &= good
            rows.append((g, val, ref))
        return ok, rows

    (ok, rows), dt = _timed(body)
    ok = ok and dt < 60.0
    worst = max(abs(v - r) / max(r, 0.01) for _, v, r in rows)
    return CriterionResult(
        "high-T closed form", ok,
        f"worst relative deviation {worst:.3%} over 6 gammas, runtime budget 60s",
        dt, {"rows": rows},
    )


def _cycle(cache, T, gamma):
    key = ("cycle", T, gamma)
    if cache is not None and key in cache:
        return cache[key]
    rep = engine.run_cycle(engine.CycleSpec(T=T, gamma=gamma, kappa=0.005))
    if cache is not None:
        cache[key] = rep
    return rep


def check_work_information_equality(cache=None) -> CriterionResult:
    def body():
        rows = []
        ok = True
        for T in (10.0, 100.0):
            for g in (0.5, 1.0):
                rep = _cycle(cache, T, g)
                tinh = T * rep.I_NH_end_stage1
                gap = abs(rep.W_total - tinh) / tinh
                ok &= gap < 0.02 and rep.closure_error < 1e-5
                rows.append((T, g, rep.W_total, tinh, gap, rep.closure_error))
        return ok, rows

    (ok, rows), dt = _timed(body)
    worst = max(r[4] for r in rows)
    return CriterionResult(
        "work-information equality", ok,
        f"worst |W - T I_NH|/T I_NH = {worst:.3%}, all closures < 1e-5",
        dt, {"rows": rows},
    )


def check_kelvin_planck_violation(cache=None) -> CriterionResult:
    def body():
        rep = _cycle(cache, 100.0, 1.0)
        q_net = sum(s.Q for s in rep.stages)
        return rep.W_total > 0 and q_net > 0, (rep.W_total, q_net)

    (ok, (w, q)), dt = _timed(body)
    return CriterionResult(
        "single-bath work extraction", ok,
        f"W_total = {w:.4f} > 0 with net heat absorbed {q:.4f} > 0 (gamma=1, T=100)",
        dt, {"W_total": w, "Q_net": q},
    )


def check_negative_entropy_production(cache=None) -> CriterionResult:
    def body():
        rep = _cycle(cache, 10.0, 1.0)
        led = rep.ledger
        m = led.stage == 1
        return float(led.Sigma_rate[m].min())

    mn, dt = _timed(body)
    return CriterionResult(
        "negative entropy production", mn < 0,
        f"min entropy production rate during stage 1 at T=10: {mn:.3e} < 0",
        dt, {"min_sigma_rate": mn},
    )


def check_master_inequality_sweep(cache=None, n_instances: int = 1000) -> CriterionResult:
    def body():
        rng = np.random.default_rng(20240817)
        worst = np.inf
        worst_eq = 0.0
        for _ in range(n_instances):
            d = int(rng.integers(2, 5))
            sys = _rand_real_spectrum_system(rng, d, skew=rng.uniform(0.05, 0.8))
            bath = BathSpec(
                beta=10 ** rng.uniform(np.log10(0.01), 1.0),
                kappa=10 ** rng.uniform(-3, -1),
            )
            model = build_generator(sys, bath)
            sigma = steady_state(sys, bath, model=model)
            rho = _rand_density(rng, d)
            _, _, slack = thermo.check_master_inequality(sys, bath, rho, sigma=sigma.matrix, model=model)
            worst = min(worst, slack)
            _, _, s0 = thermo.check_master_inequality(sys, bath, sigma.matrix, sigma=sigma.matrix, model=model)
            worst_eq = max(worst_eq, abs(s0))
        return worst, worst_eq

    (worst, worst_eq), dt = _timed(body)
    ok = worst >= -1e-8 and worst_eq <= 1e-8 and dt < 300.0
    return CriterionResult(
        "entropy-production bound sweep", ok,
        f"{n_instances} instances: worst slack {worst:.3e} >= -1e-8, "
        f"equality at sigma within {worst_eq:.3e}, runtime budget 300s",
        dt, {"worst_slack": worst, "worst_equality": worst_eq},
    )


def check_hermitian_limit(cache=None, n_traj: int = 50) -> CriterionResult:
    def body():
        rng = np.random.default_rng(7011)
        worst_J = 0.0
        worst_V = 0.0
        worst_sigma_rate = np.inf
        for _ in range(n_traj):
            d = int(rng.integers(2, 5))
            H = _rand_hermitian(rng, d)
            sys = NonHermitianSystem(HermitianOperator(H), HermitianOperator(np.zeros((d, d))))
            beta = float(rng.choice([0.3, 1.0, 1.5]))
            bath = BathSpec(beta=beta, kappa=0.02)
            rho0 = _rand_density(rng, d)
            traj = evolve(sys, bath, rho0, 400.0, samples=41)
            sigma_exact = gibbs_state(H, beta)
            dec = thermo.thermal_decomposition(sys, bath)
            worst_V = max(worst_V, float(np.linalg.norm(dec.V_NH.matrix)))
            model = build_generator(sys, bath)
            for i in range(0, len(traj.times), 8):
                rho = traj.rho(i)
                worst_J = max(worst_J, abs(thermo.information_flow(sys, bath, rho, sigma_exact, model=model)))
                worst_sigma_rate = min(
                    worst_sigma_rate, thermo.entropy_production_rate(sys, bath, rho, model=model)
                )
        return worst_J, worst_V, worst_sigma_rate

    (wj, wv, ws), dt = _timed(body)
    ok = wj < 1e-10 and wv < 1e-8 and ws >= -1e-9
    return CriterionResult(
        "Hermitian limit", ok,
        f"max |J_S| {wj:.2e} < 1e-10, max |V_NH| {wv:.2e} < 1e-8, "
        f"min entropy production {ws:.2e} >= -1e-9 over {n_traj} relaxations",
        dt, {"worst_J": wj, "worst_V": wv, "min_sigma_rate": ws},
    )


def check_steady_information_positivity(cache=None, n_sys: int = 200) -> CriterionResult:
    def body():
        rng = np.random.default_rng(90210)
        worst_pos = np.inf
        worst_id = 0.0
        for _ in range(n_sys):
            d = int(rng.integers(2, 5))
            sys = _rand_real_spectrum_system(rng, d, skew=rng.uniform(0.05, 0.8))
            beta = 10 ** rng.uniform(-2, 0.5)
            bath = BathSpec(beta=beta, kappa=10 ** rng.uniform(-2.5, -1.5))
            sigma = steady_state(sys, bath)
            dec = thermo.thermal_decomposition(sys, bath, sigma=sigma)
            inh = thermo.nh_information(sigma.matrix, dec)
            worst_pos = min(worst_pos, inh)
            ref = relative_entropy(sigma.matrix, gibbs_state(sys.h, beta))
            worst_id = max(worst_id, abs(inh - ref))
        return worst_pos, worst_id

    (wp, wi), dt = _timed(body)
    ok = wp >= -1e-10 and wi < 1e-8
    return CriterionResult(
        "steady-state information positivity", ok,
        f"min I_NH(sigma) {wp:.3e} >= -1e-10; worst |I_NH - D(sigma||Gibbs)| {wi:.2e} < 1e-8",
        dt, {"min_inh": wp, "worst_identity": wi},
    )


def check_ep_kink(cache=None) -> CriterionResult:
    def body():
        grid = np.arange(0.0, 1.5 + 1e-12, 0.01)
        loc = engine.ep_kink_scan(100.0, grid, kappa=0.005)
        return loc

    loc, dt = _timed(body)
    ok = abs(loc - 1.0) <= 0.05
    return CriterionResult(
        "exceptional-point kink", ok,
        f"curvature peak of I_NH(gamma) at {loc:.3f} (target 1.00 +- 0.05)",
        dt, {"location": loc},
    )


def check_hn_low_T_scaling(cache=None) -> CriterionResult:
    def body():
        T_grid = np.linspace(0.05, 0.2, 8)
        rows = hn.critical_line(T_grid, L=2000, with_kink=False)
        a, p = hn.fit_low_T_exponent(rows)
        return rows, a, p

    (rows, a, p), dt = _timed(body)
    ok = abs(p - 1.0) <= 0.1 and dt < 600.0
    return CriterionResult(
        "HN low-T scaling", ok,
        f"g_c = a T^p fit: p = {p:.3f} (target 1.0 +- 0.1), runtime budget 600s",
        dt, {"exponent": p, "prefactor": a, "rows": rows},
    )


def check_hn_high_T_scaling(cache=None) -> CriterionResult:
    def body():
        T_grid = np.array([5.0, 8.0, 13.0, 20.0, 32.0, 50.0])
        rows = hn.critical_line(T_grid, L=2000, with_kink=False)
        b, resid = hn.fit_high_T_offset(rows)
        return rows, b, resid

    (rows, b, resid), dt = _timed(body)
    ok = resid < 0.10
    return CriterionResult(
        "HN high-T scaling", ok,
        f"g_c = b + ln(T/J) fit: offset {b:.3f}, max relative residual {resid:.3%} < 10%",
        dt, {"offset": b, "residual": resid, "rows": rows},
    )


def _hn_direct_summation(p: hn.HnParams) -> float:
    s = hn.build_spectra(p)
    beta = p.beta
    occ = hn.bose_occupations(s.levels_T, beta, s.mu)
    sites = np.arange(1, p.L + 1, dtype=float)
    w = sites @ (np.abs(s.vectors_T) ** 2)
    entropy = np.sum((1 + occ) * np.log1p(occ) - occ * np.log(occ))
    energy = np.sum(occ * s.levels_T) - (p.g * p.T / p.L) * np.sum(w * occ)
    ln_xi0 = -np.sum(np.log1p(-np.exp(-beta * (s.levels_0 - s.mu0))))
    return float(-entropy + beta * energy - beta * s.mu0 * p.N_B + ln_xi0)


def check_hn_kink_onset_agreement(cache=None) -> CriterionResult:
    def body():
        p200 = hn.HnParams(L=200, g=0.5, T=1.0)
        oracle_gap = abs(hn.hn_information(p200) - _hn_direct_summation(p200))

        t0 = time.perf_counter()
        hn.hn_information(hn.HnParams(L=5000, g=0.5, T=1.0))
        point_time = time.perf_counter() - t0

        g_on = hn.onset_g(5000, 1.0)
        g_kink = hn.kink_g(5000, 1.0, center=g_on)
        return oracle_gap, point_time, g_on, g_kink

    (gap, pt, g_on, g_kink), dt = _timed(body)
    agree = abs(g_kink - g_on) / g_on
    ok = agree < 0.05 and gap < 1e-8 and pt < 120.0
    return CriterionResult(
        "HN kink/onset agreement", ok,
        f"kink {g_kink:.4f} vs onset {g_on:.4f} ({agree:.2%} < 5%); "
        f"closed form vs direct summation {gap:.2e} < 1e-8; L=5000 point {pt:.1f}s < 120s",
        dt, {"g_kink": g_kink, "g_onset": g_on, "oracle_gap": gap, "point_time": pt},
    )


def check_numerical_kernels(cache=None) -> CriterionResult:
    def body():
        from scipy.linalg import logm

        rng = np.random.default_rng(5150)
        worst_fd = 0.0
        h = 1e-6
        for _ in range(200):
            d = int(rng.integers(2, 5))
            sigma = _rand_density(rng, d, floor=0.02)
            X = _rand_hermitian(rng, d)
            out, _ = frechet_dlog(sigma, X)
            fd = (logm(sigma + h * X) - logm(sigma - h * X)) / (2 * h)
            worst_fd = max(worst_fd, np.linalg.norm(out - fd) / np.linalg.norm(fd))

        worst_trace = 0.0
        for _ in range(10):
            d = int(rng.integers(2, 4))
            sys = _rand_real_spectrum_system(rng, d, skew=0.4)
            bath = BathSpec(beta=1.0, kappa=0.02)
            traj = evolve(sys, bath, np.eye(d) / d, 300.0, samples=31)
            for i in range(len(traj.times)):
                worst_trace = max(worst_trace, abs(np.trace(traj.rho(i)).real - 1.0))

        worst_ortho = 0.0
        for _ in range(1000):
            d = int(rng.integers(2, 5))
            sigma = _rand_density(rng, d, floor=1e-4)
            H = _rand_hermitian(rng, d)
            delta = unitary_log_derivative(sigma, H)
            worst_ortho = max(worst_ortho, abs(np.trace(sigma @ delta).real))
        return worst_fd, worst_trace, worst_ortho

    (fd, tr, ortho), dt = _timed(body)
    ok = fd < 1e-6 and tr < 1e-10 and ortho < 1e-9
    return CriterionResult(
        "numerical kernels", ok,
        f"log-derivative vs finite differences {fd:.2e} < 1e-6 (200 draws); "
        f"trace drift {tr:.2e} < 1e-10; rotation-derivative orthogonality {ortho:.2e} < 1e-9 (1000 draws)",
        dt, {"frechet_fd": fd, "trace_drift": tr, "orthogonality": ortho},
    )


ALL_CRITERIA = (
    ("high-T closed form", check_high_T_closed_form),
    ("work-information equality", check_work_information_equality),
    ("single-bath work extraction", check_kelvin_planck_violation),
    ("negative entropy production", check_negative_entropy_production),
    ("entropy-production bound sweep", check_master_inequality_sweep),
    ("Hermitian limit", check_hermitian_limit),
    ("steady-state information positivity", check_steady_information_positivity),
    ("exceptional-point kink", check_ep_kink),
    ("HN low-T scaling", check_hn_low_T_scaling),
    ("HN high-T scaling", check_hn_high_T_scaling),
    ("HN kink/onset agreement", check_hn_kink_onset_agreement),
    ("numerical kernels", check_numerical_kernels),
)


def run_acceptance(names=None, verbose: bool = True):
    """Run all (or the named) criteria; returns the list of results."""
    cache = {}
    results = []
    for name, fn in ALL_CRITERIA:
        if names is not None and name not in names:
            continue
        res = fn(cache=cache)
        results.append(res)
        if verbose:
            print(res.line(), flush=True)
    return results
