"""Thermodynamic and information-theoretic accounting: internal energy, heat
and work rates, the thermal decomposition (thermal Hamiltonian and
non-Hermitian potential), information flow, entropy production and the
entropy-production lower bound, plus protocol-integrated information flows.

Definitions (hbar = k_B = 1, entropies in nats):

    U      = tr(H rho)
    dQ     = tr(H drho),  dW = tr(dH rho)
    S      = -tr(rho ln rho)
    Sigma. = S. - beta Q.
    H_T    = -(1/beta)(ln sigma + ln tr e^{-beta H})
    V_NH   = beta (H_T - H)
    I_NH   = -<V_NH>
    J_S    = tr(V_NH rho.) + Re<2(ln sigma - ln rho)(Gamma - <Gamma>) + Delta>
    Delta  = d/dtau ln(e^{iH tau} sigma e^{-iH tau}) at tau = 0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    BathSpec,
    GeneratorModel,
    NonHermitianSystem,
    Trajectory,
    build_generator,
    steady_state,
)
from .errors import ResolutionError, UsageError
from .operators import (
    DEFAULT_CLAMP,
    DensityMatrix,
    HermitianOperator,
    frob,
    hermitian_part,
    log_partition,
    log_psd,
    unitary_log_derivative,
)


def _mat(x):
    if isinstance(x, (HermitianOperator, DensityMatrix)):
        return x.matrix
    return np.asarray(x, dtype=np.complex128)


def internal_energy(sys: NonHermitianSystem, rho) -> float:
    """tr(H rho): the Hermitian part alone carries the energy."""
    r = _mat(rho)
    if r.shape[0] != sys.dim:
        raise UsageError("dimension mismatch")
    return float(np.trace(sys.h @ r).real)


def entropy_rate(rho, rho_dot, clamp: float = DEFAULT_CLAMP) -> float:
    """dS/dt = -tr(rho_dot ln rho) (the tr(rho_dot) term vanishes)."""
    return float(-np.trace(_mat(rho_dot) @ log_psd(_mat(rho), clamp)).real)


@dataclass(frozen=True)
class ThermalDecomposition:
    """Thermal Hamiltonian H_T, non-Hermitian potential V_NH and the state
    they were derived from; beta(H_T - H) = V_NH holds by construction."""

    H_T: HermitianOperator
    V_NH: HermitianOperator
    beta: float
    sigma: DensityMatrix


def nh_potential(sigma, H, beta: float, clamp: float = DEFAULT_CLAMP) -> np.ndarray:
    """V_NH = -ln(sigma) - beta H - ln tr e^{-beta H}."""
    s = _mat(sigma)
    Hm = _mat(H)
    return hermitian_part(-log_psd(s, clamp) - beta * Hm - log_partition(Hm, beta) * np.eye(len(Hm)))


def thermal_decomposition(sys: NonHermitianSystem, bath: BathSpec, sigma=None,
                          clamp: float = DEFAULT_CLAMP) -> ThermalDecomposition:
    """Decompose the steady state into H_T and V_NH.

    sigma may be passed to reuse a precomputed steady state; otherwise it is
    solved for.
    """
    if sigma is None:
        sigma = steady_state(sys, bath)
    s = _mat(sigma)
    V = nh_potential(s, sys.h, bath.beta, clamp)
    H_T = sys.h + V / bath.beta
    return ThermalDecomposition(
        H_T=HermitianOperator(hermitian_part(H_T)),
        V_NH=HermitianOperator(V),
        beta=bath.beta,
        sigma=sigma if isinstance(sigma, DensityMatrix) else DensityMatrix(s),
    )


def nh_information(rho, decomposition: ThermalDecomposition) -> float:
    """I_NH = -tr(V_NH rho); equals D(sigma || Gibbs(H)) when rho = sigma."""
    r = _mat(rho)
    V = decomposition.V_NH.matrix
    if r.shape != V.shape:
        raise UsageError("dimension mismatch")
    return float(-np.trace(V @ r).real)


def _flow_expectation(rho, sigma, H, Gamma, clamp: float) -> float:
    """Re<2(ln sigma - ln rho)(Gamma - <Gamma>) + Delta> under rho."""
    r, s = _mat(rho), _mat(sigma)
    X = log_psd(s, clamp) - log_psd(r, clamp)
    g = _mat(Gamma)
    gbar = float(np.trace(g @ r).real)
    Delta = unitary_log_derivative(s, H, clamp)
    val = np.trace(r @ (2.0 * X @ (g - gbar * np.eye(len(g))) + Delta))
    return float(val.real)


def information_flow(sys: NonHermitianSystem, bath: BathSpec, rho, sigma,
                     model: GeneratorModel | None = None, clamp: float = DEFAULT_CLAMP) -> float:
    """J_S: the lower bound on entropy production caused by non-Hermiticity.

    Vanishes identically in the Hermitian limit and at rho = sigma;
    sign-indefinite in general.
    """
    if model is None:
        model = build_generator(sys, bath)
    r = _mat(rho)
    rho_dot = model.apply(r)
    V = nh_potential(sigma, sys.h, bath.beta, clamp)
    reversible = float(np.trace(V @ rho_dot).real)
    return reversible + _flow_expectation(r, sigma, sys.h, sys.gamma, clamp)


def entropy_production_rate(sys: NonHermitianSystem, bath: BathSpec, rho,
                            model: GeneratorModel | None = None,
                            clamp: float = DEFAULT_CLAMP) -> float:
    """Sigma. = S. - beta Q. with rho. = D rho evaluated in place."""
    if model is None:
        model = build_generator(sys, bath)
    r = _mat(rho)
    rho_dot = model.apply(r)
    q_rate = float(np.trace(sys.h @ rho_dot).real)
    return entropy_rate(r, rho_dot, clamp) - bath.beta * q_rate


def check_master_inequality(sys: NonHermitianSystem, bath: BathSpec, rho, sigma=None,
                            model: GeneratorModel | None = None,
                            clamp: float = DEFAULT_CLAMP):
    """Evaluate both sides of the entropy-production bound.

    Returns (lhs, rhs, slack): lhs = tr[(ln sigma - ln rho) D rho],
    rhs = Re<2(ln sigma - ln rho)(Gamma - <Gamma>) + Delta>, slack = lhs - rhs.
    A violation is reported through the sign of slack, never raised.
    """
    if model is None:
        model = build_generator(sys, bath)
    if sigma is None:
        sigma = steady_state(sys, bath, model=model)
    r, s = _mat(rho), _mat(sigma)
    rho_dot = model.apply(r)
    X = log_psd(s, clamp) - log_psd(r, clamp)
    lhs = float(np.trace(X @ rho_dot).real)
    rhs = _flow_expectation(r, s, sys.h, sys.gamma, clamp)
    return lhs, rhs, lhs - rhs


# ---------------------------------------------------------------------------
# trajectory-level accounting


@dataclass
class ThermoLedger:
    """Per-sample thermodynamic record along a protocol."""

    t: np.ndarray
    U: np.ndarray
    S: np.ndarray
    Q_rate: np.ndarray
    W_rate: np.ndarray
    Sigma_rate: np.ndarray
    J_S: np.ndarray
    I_NH: np.ndarray
    stage: np.ndarray = None  # optional integer stage labels

    COLUMNS = ("t", "U", "S", "Q_rate", "W_rate", "Sigma_rate", "J_S", "I_NH")

    def to_csv(self, path, stage_column: bool = False):
        cols = list(self.COLUMNS) + (["stage"] if stage_column else [])
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(len(self.t)):
                row = [
                    self.t[i], self.U[i], self.S[i], self.Q_rate[i],
                    self.W_rate[i], self.Sigma_rate[i], self.J_S[i], self.I_NH[i],
                ]
                line = ",".join(f"{v:.12e}" for v in row)
                if stage_column:
                    line += f",{int(self.stage[i])}"
                fh.write(line + "\n")


def instantaneous_steady_states(traj: Trajectory, tol: float = 1e-11):
    """Steady state of the frozen generator at each sample time.

    Each solve is seeded from the trajectory's own state at that time, which
    keeps the solution on the branch the state actually follows when the
    protocol crosses an exceptional point into a bistable (symmetry-broken)
    regime; the previous sample's solution and the balanced thermal state are
    fallback seeds. A Hermitian frozen generator short-circuits to Gibbs.
    """
    from .dynamics import _newton_steady
    from .operators import gibbs_state

    bath = traj.bath
    out = []
    prev = None
    for i, t in enumerate(traj.times):
        H, G = traj.schedule.operators_at(t)
        if frob(G) < 1e-14 * max(1.0, frob(H)):
            out.append(gibbs_state(H, bath.beta))
            prev = out[-1]
            continue
        sys_t = NonHermitianSystem(HermitianOperator(hermitian_part(H)), HermitianOperator(hermitian_part(G)))
        model_t = build_generator(sys_t, bath)
        sig, res = _newton_steady(model_t, traj.rho(i), tol)
        if res > tol and prev is not None:
            sig, res = _newton_steady(model_t, prev, tol)
        if res > tol:
            sig, res = _newton_steady(model_t, model_t.phi, tol)
        out.append(sig)
        prev = sig
    return out


def build_ledger(traj: Trajectory, sigmas=None, clamp: float = DEFAULT_CLAMP,
                 stage: int | None = None) -> ThermoLedger:
    """Thermodynamic time series for a trajectory.

    sigmas: precomputed instantaneous steady states (else solved here).
    """
    bath = traj.bath
    if sigmas is None:
        sigmas = instantaneous_steady_states(traj)
    n = len(traj.times)
    U = np.empty(n)
    S = np.empty(n)
    Q = np.empty(n)
    W = np.empty(n)
    Sig = np.empty(n)
    J = np.empty(n)
    Inh = np.empty(n)
    for i, t in enumerate(traj.times):
        H, G = traj.schedule.operators_at(t)
        Hd = traj.schedule.h_dot(t)
        rho = traj.rho(i)
        rho_dot = traj.generator_matrix(i)
        U[i] = float(np.trace(H @ rho).real)
        w = np.linalg.eigvalsh(rho)
        w = w[w > clamp]
        S[i] = float(-(w * np.log(w)).sum())
        Q[i] = float(np.trace(H @ rho_dot).real)
        W[i] = float(np.trace(Hd @ rho).real)
        Sig[i] = entropy_rate(rho, rho_dot, clamp) - bath.beta * Q[i]
        sig = sigmas[i]
        if frob(G) < 1e-14 * max(1.0, frob(H)):
            J[i] = 0.0
            Inh[i] = 0.0
        else:
            V = nh_potential(sig, H, bath.beta, clamp)
            J[i] = float(np.trace(V @ rho_dot).real) + _flow_expectation(rho, sig, H, G, clamp)
            Inh[i] = float(-np.trace(V @ rho).real)
    st = None if stage is None else np.full(n, stage, dtype=int)
    return ThermoLedger(t=traj.times.copy(), U=U, S=S, Q_rate=Q, W_rate=W,
                        Sigma_rate=Sig, J_S=J, I_NH=Inh, stage=st)


def heat_work_rates(traj: Trajectory):
    """(Q_rate, W_rate) time series: tr(H rho.) and tr(H. rho)."""
    n = len(traj.times)
    Q = np.empty(n)
    W = np.empty(n)
    for i, t in enumerate(traj.times):
        H, _ = traj.schedule.operators_at(t)
        Hd = traj.schedule.h_dot(t)
        Q[i] = float(np.trace(H @ traj.generator_matrix(i)).real)
        W[i] = float(np.trace(Hd @ traj.rho(i)).real)
    return Q, W


def _trapz_with_residual(y, x, rtol_budget: float):
    full = float(np.trapezoid(y, x))
    if len(x) >= 5:
        half = float(np.trapezoid(y[::2], x[::2]))
        residual = abs(full - half) / 3.0
    else:
        residual = np.inf
    scale = max(1.0, abs(full))
    if residual > rtol_budget * scale:
        raise ResolutionError(
            f"quadrature residual estimate {residual:.3e} exceeds budget {rtol_budget:.1e} x {scale:.3g}; "
            "sample the trajectory more finely"
        )
    return full


def total_information_flow(traj: Trajectory, sigmas=None, clamp: float = DEFAULT_CLAMP,
                           quad_tol: float = 1e-6):
    """Integrated flows over a protocol segment.

    Returns (I_S, I_NH_delta, I_diss) with I_S = -int J_S dt by trapezoid on
    the sample grid, I_NH_delta the endpoint difference of -<V_NH>, and
    I_diss the integral of <2(ln sigma - ln rho)(Gamma - <Gamma>) + Delta -
    V_NH-dot>; the three satisfy I_S = I_NH_delta - I_diss up to quadrature
    error, which is estimated by grid halving.
    """
    bath = traj.bath
    if sigmas is None:
        sigmas = instantaneous_steady_states(traj)
    n = len(traj.times)
    Js = np.empty(n)
    Inh = np.empty(n)
    flow_term = np.empty(n)
    Vs = []
    hermitian_like = True
    for i, t in enumerate(traj.times):
        H, G = traj.schedule.operators_at(t)
        rho = traj.rho(i)
        if frob(G) < 1e-14 * max(1.0, frob(H)):
            V = np.zeros_like(rho)
            Js[i] = 0.0
            flow_term[i] = 0.0
        else:
            hermitian_like = False
            V = nh_potential(sigmas[i], H, bath.beta, clamp)
            rho_dot = traj.generator_matrix(i)
            flow_term[i] = _flow_expectation(rho, sigmas[i], H, G, clamp)
            Js[i] = float(np.trace(V @ rho_dot).real) + flow_term[i]
        Vs.append(V)
        Inh[i] = float(-np.trace(V @ rho).real)
    if hermitian_like:
        return 0.0, 0.0, 0.0
    # d V_NH / dt by central differences on the sample grid
    ts = traj.times
    vdot_exp = np.empty(n)
    for i in range(n):
        if i == 0:
            dV = (Vs[1] - Vs[0]) / (ts[1] - ts[0])
        elif i == n - 1:
            dV = (Vs[-1] - Vs[-2]) / (ts[-1] - ts[-2])
        else:
            dV = (Vs[i + 1] - Vs[i - 1]) / (ts[i + 1] - ts[i - 1])
        vdot_exp[i] = float(np.trace(dV @ traj.rho(i)).real)
    I_S = -_trapz_with_residual(Js, ts, quad_tol)
    I_diss = _trapz_with_residual(flow_term - vdot_exp, ts, quad_tol)
    return I_S, Inh[-1] - Inh[0], I_diss
