"""Nonlinear trace-preserving evolution of a non-Hermitian system coupled to
an effective thermal bath, plus the steady-state solver.

The generator is

    D rho = -i[H, rho] + {Gamma, rho} - 2 tr(Gamma rho) rho + L_bath(rho)

where L_bath is a Davies-type GKLS dissipator with KMS rates
gamma(omega) = kappa / (1 + exp(-beta omega)), built from the Bohr-frequency
components of the coupling operators in the eigenbasis of an anchor
Hamiltonian. The anchor is -T ln(Phi), with Phi the thermal state of the
balanced (similarity-equivalent Hermitian) form of H + i Gamma; for
Gamma = 0 this reduces exactly to the textbook Davies generator on the
eigenbasis of H, whose fixed point is the Gibbs state. For real-spectrum
(PT-unbroken) H + i Gamma, Phi is simultaneously stationary under the pure
non-Hermitian flow and under the dissipator, making it the steady state of
the full generator at every coupling strength.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    AmbiguousSteadyStateError,
    ConvergenceError,
    PositivityError,
    StiffnessError,
    UsageError,
    ValidationError,
)
from .operators import (
    DEFAULT_CLAMP,
    DensityMatrix,
    HermitianOperator,
    eig_hermitian,
    frob,
    gibbs_state,
    hermitian_part,
    log_psd,
    project_to_density,
)

# ---------------------------------------------------------------------------
# domain types


def _matrix_of(op) -> np.ndarray:
    if isinstance(op, (HermitianOperator, DensityMatrix)):
        return op.matrix
    return np.asarray(op, dtype=np.complex128)


@dataclass(frozen=True)
class NonHermitianSystem:
    """H + i Gamma with Hermitian H (energy) and Hermitian Gamma (gain/loss)."""

    H: HermitianOperator
    Gamma: HermitianOperator
    dim: int = field(init=False)

    def __post_init__(self):
        H = self.H if isinstance(self.H, HermitianOperator) else HermitianOperator(self.H)
        G = self.Gamma if isinstance(self.Gamma, HermitianOperator) else HermitianOperator(self.Gamma)
        if H.dim != G.dim:
            raise ValidationError(f"H and Gamma dimensions differ: {H.dim} vs {G.dim}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "Gamma", G)
        object.__setattr__(self, "dim", H.dim)

    @property
    def h(self) -> np.ndarray:
        return self.H.matrix

    @property
    def gamma(self) -> np.ndarray:
        return self.Gamma.matrix

    @property
    def h_nh(self) -> np.ndarray:
        return self.h + 1j * self.gamma


def site_projectors(dim: int) -> list[np.ndarray]:
    """Default coupling set {|j><j|}: one projector per basis site."""
    return [np.diag((np.arange(dim) == j).astype(np.complex128)) for j in range(dim)]


@dataclass(frozen=True)
class BathSpec:
    """Inverse temperature, overall dissipator rate and coupling operators.

    An empty coupling tuple means "use the site projectors of the system";
    the nonempty-when-dissipative invariant is enforced once the system
    dimension is known (with_default_couplings / build_generator).
    """

    beta: float
    kappa: float = 0.005
    couplings: tuple = ()

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")
        if self.kappa < 0:
            raise ValidationError(f"kappa must be non-negative, got {self.kappa}")
        coups = tuple(np.asarray(_matrix_of(c), dtype=np.complex128) for c in self.couplings)
        object.__setattr__(self, "couplings", coups)

    @property
    def temperature(self) -> float:
        return 1.0 / self.beta

    def with_default_couplings(self, dim: int) -> "BathSpec":
        if self.couplings:
            if self.couplings[0].shape[0] != dim:
                raise ValidationError("coupling operator dimension does not match the system")
            return self
        out = BathSpec(beta=self.beta, kappa=self.kappa, couplings=tuple(site_projectors(dim)))
        if out.kappa > 0 and not out.couplings:
            raise ValidationError("couplings must be nonempty when kappa > 0")
        return out


# ---------------------------------------------------------------------------
# balanced frame and bath construction

_FRAME_CLIP = 1e-8  # eigenvalue floor (relative) for the metric V_R V_R^dag


def balanced_frame(H: np.ndarray, Gamma: np.ndarray):
    """Positive similarity factor S and the balanced form of H + i Gamma.

    Returns (S, S_inv, H_tilde_h, spectrum) with H_tilde_h the Hermitian part
    of S^-1 (H + i Gamma) S. Right eigenvectors are rescaled to the balanced
    gauge |R_n| = |L_n| before the metric is formed; at an exceptional point
    the metric is floored, which degrades smoothly to the attractor-projector
    frame.
    """
    H = _matrix_of(H)
    Gamma = _matrix_of(Gamma)
    d = H.shape[0]
    if frob(Gamma) < 1e-14 * max(1.0, frob(H)):
        E = np.linalg.eigvalsh(hermitian_part(H)).astype(np.complex128)
        I = np.eye(d)
        return I, I, hermitian_part(H), E
    HNH = H + 1j * Gamma
    E, VR = np.linalg.eig(HNH)
    VR = VR / np.linalg.norm(VR, axis=0)
    with np.errstate(over="ignore", invalid="ignore"):
        VL = np.linalg.inv(VR).conj().T
        ratio = np.linalg.norm(VL, axis=0) / np.linalg.norm(VR, axis=0)
    # near a defective point left norms blow up; cap the gauge factor (the
    # metric floor below bounds the frame conditioning anyway)
    ratio = np.where(np.isfinite(ratio), np.clip(ratio, 1e-8, 1e8), 1e8)
    scale = np.sqrt(ratio)
    VRb = VR * scale
    W = hermitian_part(VRb @ VRb.conj().T)
    lam, Q = np.linalg.eigh(W)
    lam = np.maximum(lam, _FRAME_CLIP * lam.max())
    S = (Q * np.sqrt(lam)) @ Q.conj().T
    S_inv = (Q / np.sqrt(lam)) @ Q.conj().T
    Ht = S_inv @ HNH @ S
    return S, S_inv, hermitian_part(Ht), E


def thermal_state_estimate(sys: NonHermitianSystem, beta: float) -> np.ndarray:
    """Phi = S Gibbs(H_tilde_h) S^dag / tr: the balanced-frame thermal state.

    Equals the steady state exactly when H + i Gamma has a real spectrum.
    """
    S, _, HtH, _ = balanced_frame(sys.h, sys.gamma)
    Phi = S @ gibbs_state(HtH, beta) @ S.conj().T
    Phi = hermitian_part(Phi)
    return Phi / np.trace(Phi).real


def anchor_hamiltonian(Phi: np.ndarray, beta: float, clamp: float = DEFAULT_CLAMP) -> np.ndarray:
    """-T ln(Phi): the Hamiltonian whose Gibbs state is Phi."""
    return -log_psd(Phi, clamp) / beta


def kms_rate(omega, beta: float, kappa: float):
    """kappa / (1 + exp(-beta omega)), overflow-safe; pair rates sum to kappa."""
    return kappa * 0.5 * (1.0 + np.tanh(0.5 * beta * np.asarray(omega, dtype=float)))


def davies_jumps(H_anchor: np.ndarray, couplings, beta: float, kappa: float):
    """Bohr-frequency jump operators of the couplings in the anchor eigenbasis.

    Returns (ops, rates): ops stacked (n, d, d), rates (n,). Gaps closer than
    1e-8 x spectral spread are merged into one frequency cluster.
    """
    es = eig_hermitian(H_anchor)
    w, V = es.values, es.vectors
    d = len(w)
    spread = float(w.max() - w.min())
    tol = 1e-8 * max(1.0, spread)
    gaps = w[None, :] - w[:, None]  # omega at (m, n) is w_n - w_m
    flat = np.sort(gaps.reshape(-1))
    clusters = []
    start = flat[0]
    prev = flat[0]
    for v in flat[1:]:
        if v - prev > tol:
            clusters.append((start, prev))
            start = v
        prev = v
    clusters.append((start, prev))
    ops, rates = [], []
    for A in couplings:
        At = V.conj().T @ _matrix_of(A) @ V
        for lo, hi in clusters:
            mask = (gaps >= lo - tol / 2) & (gaps <= hi + tol / 2)
            M = np.where(mask, At, 0.0)
            nrm2 = float(np.abs(M) ** 2).real if np.isscalar(np.abs(M) ** 2) else float((np.abs(M) ** 2).sum())
            if nrm2 < 1e-24:
                continue
            omega = 0.5 * (lo + hi)
            ops.append(V @ M @ V.conj().T)
            rates.append(float(kms_rate(omega, beta, kappa)))
    if not ops:
        return np.zeros((0, d, d), dtype=np.complex128), np.zeros(0)
    return np.stack(ops), np.asarray(rates)


@dataclass
class GeneratorModel:
    """Precomputed generator for one (system, bath) pair.

    M is the linear superoperator (row-major vec) of
    -i[H, .] + {Gamma, .} + L_bath; c is the linear functional with
    tr(Gamma rho) = c . vec(rho) / 2, so D rho = unvec(M x) - (c . x) unvec(x).
    """

    sys: NonHermitianSystem
    bath: BathSpec
    jump_ops: np.ndarray
    jump_rates: np.ndarray
    M: np.ndarray
    c: np.ndarray
    phi: np.ndarray
    anchor: np.ndarray
    spectrum: np.ndarray

    @property
    def dim(self) -> int:
        return self.sys.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        x = np.asarray(rho, dtype=np.complex128).reshape(-1)
        out = self.M @ x - (self.c @ x) * x
        return out.reshape(rho.shape)

    def residual(self, rho: np.ndarray) -> float:
        return frob(self.apply(rho))


def _dissipator_superop(jump_ops, jump_rates, d):
    I = np.eye(d)
    G = np.zeros((d * d, d * d), dtype=np.complex128)
    for rate, J in zip(jump_rates, jump_ops):
        JdJ = J.conj().T @ J
        G += rate * (np.kron(J, J.conj()) - 0.5 * (np.kron(JdJ, I) + np.kron(I, JdJ.T)))
    return G


def _nh_superop(H, Gamma):
    d = H.shape[0]
    I = np.eye(d)
    return -1j * (np.kron(H, I) - np.kron(I, H.T)) + (np.kron(Gamma, I) + np.kron(I, Gamma.T))


def build_generator(sys: NonHermitianSystem, bath: BathSpec) -> GeneratorModel:
    """Assemble the full generator for a static (system, bath) pair."""
    bath = bath.with_default_couplings(sys.dim)
    S, S_inv, HtH, E = balanced_frame(sys.h, sys.gamma)
    Phi = S @ gibbs_state(HtH, bath.beta) @ S.conj().T
    Phi = hermitian_part(Phi)
    Phi = Phi / np.trace(Phi).real
    if bath.kappa > 0:
        anchor = anchor_hamiltonian(Phi, bath.beta)
        ops, rates = davies_jumps(anchor, bath.couplings, bath.beta, bath.kappa)
    else:
        anchor = hermitian_part(sys.h)
        ops = np.zeros((0, sys.dim, sys.dim), dtype=np.complex128)
        rates = np.zeros(0)
    M = _nh_superop(sys.h, sys.gamma) + _dissipator_superop(ops, rates, sys.dim)
    c = 2.0 * sys.gamma.T.reshape(-1)
    return GeneratorModel(
        sys=sys, bath=bath, jump_ops=ops, jump_rates=rates, M=M, c=c, phi=Phi,
        anchor=anchor, spectrum=E,
    )


# ---------------------------------------------------------------------------
# spec operations: generator pieces


def nh_generator(sys: NonHermitianSystem, rho) -> np.ndarray:
    """-i[H, rho] + {Gamma, rho} - 2 <Gamma> rho: traceless and Hermitian."""
    r = _matrix_of(rho)
    if r.shape[0] != sys.dim:
        raise UsageError(f"state dimension {r.shape[0]} != system dimension {sys.dim}")
    H, G = sys.h, sys.gamma
    comm = H @ r - r @ H
    anti = G @ r + r @ G
    return -1j * comm + anti - 2.0 * np.trace(G @ r).real * r


def davies_dissipator(sys: NonHermitianSystem, bath: BathSpec, rho) -> np.ndarray:
    """Thermal GKLS dissipator applied to rho (zero when kappa = 0)."""
    r = _matrix_of(rho)
    if bath.kappa == 0:
        return np.zeros_like(r)
    model = build_generator(sys, bath)
    out = np.zeros_like(r)
    for rate, J in zip(model.jump_rates, model.jump_ops):
        JdJ = J.conj().T @ J
        out += rate * (J @ r @ J.conj().T - 0.5 * (JdJ @ r + r @ JdJ))
    return out


def generator_apply(sys: NonHermitianSystem, bath: BathSpec, rho, model: GeneratorModel | None = None) -> np.ndarray:
    """Full D rho = nh_generator + davies_dissipator."""
    if model is not None:
        return model.apply(_matrix_of(rho))
    return nh_generator(sys, rho) + davies_dissipator(sys, bath, rho)


# ---------------------------------------------------------------------------
# schedules


class StaticSchedule:
    """Constant (H, Gamma)."""

    def __init__(self, sys: NonHermitianSystem):
        self.sys = sys
        self.breakpoints = ()

    def operators_at(self, t: float):
        return self.sys.h, self.sys.gamma

    def h_dot(self, t: float) -> np.ndarray:
        return np.zeros((self.sys.dim, self.sys.dim), dtype=np.complex128)


class LinearRamp:
    """Linear operator interpolation between two (H, Gamma) endpoints."""

    def __init__(self, t0, t1, H0, H1, G0, G1):
        if not t1 > t0:
            raise UsageError("ramp needs t1 > t0")
        self.t0, self.t1 = float(t0), float(t1)
        self.H0, self.H1 = _matrix_of(H0), _matrix_of(H1)
        self.G0, self.G1 = _matrix_of(G0), _matrix_of(G1)
        self.breakpoints = (self.t0, self.t1)

    def operators_at(self, t: float):
        s = np.clip((t - self.t0) / (self.t1 - self.t0), 0.0, 1.0)
        return (1 - s) * self.H0 + s * self.H1, (1 - s) * self.G0 + s * self.G1

    def h_dot(self, t: float) -> np.ndarray:
        return (self.H1 - self.H0) / (self.t1 - self.t0)


class CallbackSchedule:
    """Adapter for a plain callable t -> (H, Gamma); the Hamiltonian's time
    derivative falls back to central differences."""

    def __init__(self, fn, t_scale: float = 1.0, breakpoints=()):
        self.fn = fn
        self.h = 1e-6 * max(t_scale, 1e-6)
        self.breakpoints = tuple(breakpoints)

    def operators_at(self, t: float):
        H, G = self.fn(t)
        return _matrix_of(H), _matrix_of(G)

    def h_dot(self, t: float) -> np.ndarray:
        Hp, _ = self.fn(t + self.h)
        Hm, _ = self.fn(t - self.h)
        return (_matrix_of(Hp) - _matrix_of(Hm)) / (2 * self.h)


class PiecewiseLinearSchedule:
    """Operators given at knot times, linearly interpolated between knots."""

    def __init__(self, times, Hs, Gs):
        self.times = np.asarray(times, dtype=float)
        if len(self.times) < 2 or np.any(np.diff(self.times) <= 0):
            raise UsageError("knot times must be strictly increasing, length >= 2")
        self.Hs = [_matrix_of(H) for H in Hs]
        self.Gs = [_matrix_of(G) for G in Gs]
        if not (len(self.Hs) == len(self.Gs) == len(self.times)):
            raise UsageError("times, Hs, Gs must have equal length")
        self.breakpoints = tuple(self.times)

    def _locate(self, t):
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        j = min(max(j, 0), len(self.times) - 2)
        w = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        return j, float(np.clip(w, 0.0, 1.0))

    def operators_at(self, t: float):
        j, w = self._locate(t)
        return (1 - w) * self.Hs[j] + w * self.Hs[j + 1], (1 - w) * self.Gs[j] + w * self.Gs[j + 1]

    def h_dot(self, t: float) -> np.ndarray:
        j, _ = self._locate(t)
        return (self.Hs[j + 1] - self.Hs[j]) / (self.times[j + 1] - self.times[j])


def _assemble_nodes(schedule, bath: BathSpec, t0: float, t1: float, dim: int,
                    base_nodes: int = 33, refine_tol: float = 1e-3, max_nodes: int = 16384):
    """Piecewise-linear superoperator nodes over [t0, t1], curvature-refined.

    The non-Hermitian part is linear in t for linear ramps and interpolates
    exactly; refinement targets the dissipator's variation.
    """
    bath = bath.with_default_couplings(dim)

    def build(t):
        H, G = schedule.operators_at(t)
        sys_t = NonHermitianSystem(HermitianOperator(H), HermitianOperator(G))
        model = build_generator(sys_t, bath)
        M_dis = model.M - _nh_superop(H, G)
        return model.M, model.c, M_dis

    ts = set(np.linspace(t0, t1, base_nodes))
    for b in getattr(schedule, "breakpoints", ()):
        if t0 <= b <= t1:
            ts.add(float(b))
    ts = sorted(ts)
    cache = {t: build(t) for t in ts}
    scale = max(bath.kappa, 1e-12)

    work = list(zip(ts[:-1], ts[1:]))
    while work and len(cache) < max_nodes:
        a, b = work.pop()
        mid = 0.5 * (a + b)
        if b - a < 1e-9 * max(1.0, t1 - t0):
            continue
        Ma, _, Da = cache[a]
        Mb, _, Db = cache[b]
        Mm, cm, Dm = build(mid)
        err = frob(Dm - 0.5 * (Da + Db)) / max(frob(Dm), scale)
        cache[mid] = (Mm, cm, Dm)
        if err > refine_tol:
            work.append((a, mid))
            work.append((mid, b))
    ts = np.array(sorted(cache))
    Mn = np.stack([cache[t][0] for t in ts])
    cn = np.stack([cache[t][1] for t in ts])
    return ts, Mn, cn


# ---------------------------------------------------------------------------
# trajectories and evolve


@dataclass
class Trajectory:
    """Sampled states along a propagation, with generator norms per sample."""

    times: np.ndarray
    states: list
    generator_norms: np.ndarray
    schedule: object = None
    bath: BathSpec = None
    nodes: tuple = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")

    def rho(self, i: int) -> np.ndarray:
        return self.states[i].matrix

    def generator_matrix(self, i: int) -> np.ndarray:
        """D rho at sample i, from the stored generator nodes."""
        node_t, Mn, cn = self.nodes
        x = self.rho(i).reshape(-1)
        d = self.states[i].dim
        return kernels.generator_apply(x, self.times[i], node_t, Mn, cn).reshape(d, d)

    def to_csv(self, path):
        d = self.states[0].dim
        cols = ["t"]
        for i in range(d):
            for j in range(d):
                cols += [f"rho{i}{j}_re", f"rho{i}{j}_im"]
        cols.append("generator_norm")
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for k, t in enumerate(self.times):
                x = self.rho(k).reshape(-1)
                row = [t]
                for v in x:
                    row += [v.real, v.imag]
                row.append(self.generator_norms[k])
                fh.write(",".join(f"{v:.12e}" for v in row) + "\n")


def evolve(sys: NonHermitianSystem, bath: BathSpec, rho0, t_final: float,
           schedule=None, samples: int | np.ndarray = 201, rtol: float = 1e-9,
           atol: float = 1e-12, max_steps: int = 200_000_000) -> Trajectory:
    """Integrate d rho/dt = D rho from 0 to t_final with adaptive stepping.

    Every accepted step is re-Hermitized and trace-renormalized in the kernel;
    sampled states additionally get negative eigenvalues (>-1e-6, else error)
    clipped before validation.
    """
    if not t_final > 0:
        raise UsageError("t_final must be positive")
    rho0 = rho0 if isinstance(rho0, DensityMatrix) else DensityMatrix(_matrix_of(rho0))
    if rho0.dim != sys.dim:
        raise UsageError("initial state dimension mismatch")
    if schedule is None:
        schedule = StaticSchedule(sys)
    elif callable(schedule) and not hasattr(schedule, "operators_at"):
        schedule = CallbackSchedule(schedule, t_scale=t_final)

    if isinstance(schedule, StaticSchedule):
        model = build_generator(sys, bath)
        node_t = np.array([0.0])
        Mn = model.M[None, :, :]
        cn = model.c[None, :]
    else:
        node_t, Mn, cn = _assemble_nodes(schedule, bath, 0.0, t_final, sys.dim)

    if np.isscalar(samples):
        ts = np.linspace(0.0, float(t_final), int(samples))
    else:
        ts = np.asarray(samples, dtype=float)
        if ts[0] != 0.0 or abs(ts[-1] - t_final) > 1e-12 * max(1.0, t_final):
            raise UsageError("sample times must start at 0 and end at t_final")

    d = sys.dim
    x = rho0.matrix.reshape(-1).copy()
    states, norms = [], []
    h = 0.0

    def record(t, x):
        rho = hermitian_part(x.reshape(d, d))
        wmin = float(np.linalg.eigvalsh(rho).min())
        if wmin < -1e-6:
            raise PositivityError(
                f"state eigenvalue {wmin:.3e} below -1e-6 at t={t:.6g}: invalid dissipator regime"
            )
        if wmin < 0:
            rho = project_to_density(rho)
        states.append(DensityMatrix(rho / np.trace(rho).real))
        norms.append(frob(kernels.generator_apply(rho.reshape(-1), t, node_t, Mn, cn)))

    record(ts[0], x)
    for t_prev, t_next in zip(ts[:-1], ts[1:]):
        x, h, nst, status = kernels.integrate_window(
            x, t_prev, t_next, node_t, Mn, cn, rtol=rtol, atol=atol, h0=h, max_steps=max_steps
        )
        if status == kernels.STATUS_STEP_UNDERFLOW:
            raise StiffnessError(f"step size underflow at t={t_prev:.6g}", t=t_prev)
        if status == kernels.STATUS_MAX_STEPS:
            raise ConvergenceError(f"step budget exhausted in [{t_prev:.6g}, {t_next:.6g}]")
        record(t_next, x)

    return Trajectory(
        times=ts, states=states, generator_norms=np.array(norms),
        schedule=schedule, bath=bath.with_default_couplings(sys.dim), nodes=(node_t, Mn, cn),
    )


# ---------------------------------------------------------------------------
# steady state


def _newton_steady(model: GeneratorModel, rho0: np.ndarray, tol: float, max_iter: int = 60):
    """Trace-constrained Newton on the vectorized fixed-point equation."""
    d = model.dim
    m = d * d
    trace_row = np.eye(d).reshape(1, -1).astype(np.complex128)
    x = hermitian_part(rho0).reshape(-1).astype(np.complex128)
    best = None
    for _ in range(max_iter):
        F = model.M @ x - (model.c @ x) * x
        res = float(np.linalg.norm(F))
        tr_err = complex(np.trace(x.reshape(d, d))) - 1.0
        if best is None or res < best[1]:
            best = (x.copy(), res)
        if res < tol and abs(tr_err) < 1e-12:
            break
        J = model.M - (model.c @ x) * np.eye(m) - np.outer(x, model.c)
        A = np.vstack([J, trace_row])
        b = np.concatenate([-F, [-tr_err]])
        dx, *_ = np.linalg.lstsq(A, b, rcond=None)
        step = 1.0
        for _ in range(8):
            xn = x + step * dx
            xn = hermitian_part(xn.reshape(d, d)).reshape(-1)
            Fn = model.M @ xn - (model.c @ xn) * xn
            if np.linalg.norm(Fn) < max(res * (1 - 0.25 * step), tol):
                x = xn
                break
            step *= 0.5
        else:
            break
    x, res = (x, float(np.linalg.norm(model.M @ x - (model.c @ x) * x)))
    if best[1] < res:
        x, res = best
    return hermitian_part(x.reshape(d, d)), res


def _is_stable_fixed_point(model: GeneratorModel, sigma: np.ndarray, tol_scale: float = 1e-7) -> bool:
    """All linearization eigenvalues on the traceless subspace have Re <= tol."""
    d = model.dim
    m = d * d
    x = sigma.reshape(-1)
    J = model.M - (model.c @ x) * np.eye(m) - np.outer(x, model.c)
    c0 = np.eye(d).reshape(-1, 1).astype(np.complex128)
    A = np.hstack([c0 / np.linalg.norm(c0), np.eye(m, dtype=np.complex128)])
    Q, _ = np.linalg.qr(A)
    N = Q[:, 1:m]
    lams = np.linalg.eigvals(N.conj().T @ J @ N)
    scale = max(1.0, float(np.abs(model.M).max()))
    return bool(lams.real.max() <= tol_scale * scale)


def _propagate_to_basin(model: GeneratorModel, rho0: np.ndarray, budget: float, target: float):
    """Propagate windows until the residual enters the Newton basin."""
    d = model.dim
    node_t = np.array([0.0])
    Mn = model.M[None, :, :]
    cn = model.c[None, :]
    x = rho0.reshape(-1).copy()
    t = 0.0
    window = min(max(2.0 / max(model.bath.kappa, 1e-3), 10.0), budget / 4)
    h = 0.0
    while t < budget:
        x, h, _, status = kernels.integrate_window(x, t, t + window, node_t, Mn, cn, rtol=1e-8, atol=1e-12, h0=h)
        if status != kernels.STATUS_OK:
            break
        t += window
        rho = hermitian_part(x.reshape(d, d))
        if model.residual(rho) < target:
            break
    return hermitian_part(x.reshape(d, d))


def steady_state(sys: NonHermitianSystem, bath: BathSpec, tol: float = 1e-10,
                 n_seeds: int = 3, rng_seed: int = 0, agreement: float = 1e-6,
                 model: GeneratorModel | None = None, return_info: bool = False,
                 seeds=None):
    """Solve D sigma = 0 with |D sigma|_F < tol.

    Seeds: the balanced-frame thermal state (exact in the PT-unbroken phase),
    the dominant-eigenvector mixture (broken phase) and random states, each
    pushed into the Newton basin by short propagation when needed, then
    Newton-polished; an explicit seed list overrides them. Candidates failing
    positivity or the linear-stability filter are rejected. Distinct
    surviving fixed points raise an ambiguity error. The bath is required:
    kappa > 0.
    """
    bath = bath.with_default_couplings(sys.dim)
    if not bath.kappa > 0:
        raise UsageError("steady_state requires kappa > 0 (the bath selects the steady state)")
    if model is None:
        model = build_generator(sys, bath)
    d = sys.dim
    rng = np.random.default_rng(rng_seed)

    if seeds is not None:
        seeds = [hermitian_part(_matrix_of(s)) for s in seeds]
        n_seeds = len(seeds) - 1
    else:
        seeds = [model.phi]
        E, VR = np.linalg.eig(sys.h_nh)
        v = VR[:, int(np.argmax(E.imag))]
        attractor = np.outer(v, v.conj())
        attractor /= np.trace(attractor).real
        seeds.append(hermitian_part(0.9 * attractor + 0.1 * model.phi))
        while len(seeds) < max(n_seeds, 2) + 1:
            X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            r = X @ X.conj().T
            seeds.append(hermitian_part(r / np.trace(r).real))

    budget = 50.0 / max(bath.kappa, 1e-3)
    found = []
    best_res = np.inf
    # polish far below tol: near marginal stability (exceptional points) the
    # position error is residual / |Re lambda_min|, so meeting the seed
    # agreement threshold needs a much smaller residual than tol itself
    polish = max(min(tol * 1e-3, 1e-13), 2e-14)
    for s in seeds[: n_seeds + 1]:
        cand, res = _newton_steady(model, s, polish)
        if res > tol:
            cand = _propagate_to_basin(model, s, budget, target=1e-4)
            cand, res = _newton_steady(model, cand, polish)
        best_res = min(best_res, res)
        if res > tol:
            continue
        wmin = float(np.linalg.eigvalsh(cand).min())
        if wmin < -1e-10:
            continue
        if not _is_stable_fixed_point(model, cand):
            continue
        found.append(cand)

    if not found:
        raise ConvergenceError(
            f"steady state solve failed: best residual {best_res:.3e} > tol {tol:.1e}",
            residual=best_res,
        )
    for a in found[1:]:
        if frob(a - found[0]) > agreement:
            raise AmbiguousSteadyStateError(
                f"distinct fixed points found: separation {frob(a - found[0]):.3e} > {agreement:.1e}"
            )
    sigma = project_to_density(found[0])
    out = DensityMatrix(sigma)
    if return_info:
        return out, {"residual": model.residual(sigma), "candidates": len(found)}
    return out
