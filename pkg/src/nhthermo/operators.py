"""Dense complex-operator algebra: Hermitian eigendecompositions, matrix
functions, the Daleckii-Krein derivative of the matrix logarithm, entropies
and expectation values.

All operators are dense complex128 arrays in dimensionless energy units
(hbar = k_B = 1). Values are immutable after construction and safe to share
between tasks; every function here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EigenSolverError, UsageError, ValidationError

#: Default eigenvalue floor for all logarithms. Pure and near-pure states
#: occur throughout (broken-PT steady states); the floor keeps every log
#: total while perturbing entropies far below test tolerances.
DEFAULT_CLAMP = 1e-12

#: Divided differences switch to the derivative 1/p below this gap.
DEGENERACY_TOL = 1e-12


def hermitian_part(A: np.ndarray) -> np.ndarray:
    """Return (A + A^dag)/2."""
    return (A + A.conj().T) / 2


def antihermitian_part(A: np.ndarray) -> np.ndarray:
    """Return the Hermitian operator G with A - A^dag = 2i G."""
    return (A - A.conj().T) / (2j)


def frob(A: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(A))


def _as_complex_matrix(entries) -> np.ndarray:
    M = np.asarray(entries, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValidationError(f"expected a square matrix, got shape {M.shape}")
    return M


@dataclass(frozen=True)
class HermitianOperator:
    """A dim x dim Hermitian matrix, symmetrized at construction.

    Construction rejects inputs whose anti-Hermitian defect exceeds 1e-12
    relative to scale; smaller defects are removed by symmetrization.
    """

    entries: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        M = _as_complex_matrix(self.entries)
        scale = max(1.0, float(np.abs(M).max()))
        defect = frob(M - M.conj().T) / 2
        if defect > 1e-12 * scale:
            raise ValidationError(
                f"matrix is not Hermitian: anti-Hermitian defect {defect:.3e}"
            )
        M = hermitian_part(M)
        M.setflags(write=False)
        object.__setattr__(self, "entries", M)
        object.__setattr__(self, "dim", M.shape[0])

    @property
    def matrix(self) -> np.ndarray:
        return self.entries


@dataclass(frozen=True)
class DensityMatrix:
    """Unit-trace Hermitian positive-semidefinite operator."""

    entries: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        M = _as_complex_matrix(self.entries)
        if frob(M - M.conj().T) / 2 > 1e-12 * max(1.0, float(np.abs(M).max())):
            raise ValidationError("density matrix is not Hermitian within 1e-12")
        M = hermitian_part(M)
        tr = float(np.trace(M).real)
        if abs(tr - 1.0) > 1e-10:
            raise ValidationError(f"density matrix trace {tr!r} is not 1 within 1e-10")
        wmin = float(np.linalg.eigvalsh(M).min())
        if wmin < -1e-10:
            raise ValidationError(f"density matrix minimum eigenvalue {wmin:.3e} < -1e-10")
        M.setflags(write=False)
        object.__setattr__(self, "entries", M)
        object.__setattr__(self, "dim", M.shape[0])

    @property
    def matrix(self) -> np.ndarray:
        return self.entries


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues and the unitary of column eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray


def _matrix_of(op) -> np.ndarray:
    if isinstance(op, (HermitianOperator, DensityMatrix)):
        return op.matrix
    return np.asarray(op, dtype=np.complex128)


def eig_hermitian(M) -> EigenSystem:
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending.

    Raises EigenSolverError (with the reconstruction residual) if LAPACK
    fails to converge or the decomposition does not reproduce M.
    """
    A = hermitian_part(_matrix_of(M))
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigh failed to converge: {exc}") from exc
    scale = max(frob(A), 1e-300)
    residual = frob(A - (V * w) @ V.conj().T) / scale
    if residual > 1e-10:
        raise EigenSolverError(
            f"eigendecomposition residual {residual:.3e} exceeds 1e-10", residual=residual
        )
    return EigenSystem(values=w, vectors=V)


def matrix_function(M, fn) -> np.ndarray:
    """Apply a scalar function to a Hermitian operator through its spectrum."""
    es = eig_hermitian(M)
    return (es.vectors * fn(es.values)) @ es.vectors.conj().T


def log_psd(rho, clamp: float = DEFAULT_CLAMP) -> np.ndarray:
    """Matrix log of a PSD operator with eigenvalues floored at `clamp`.

    Exact when all eigenvalues exceed the floor; total otherwise.
    """
    if not (0.0 < clamp <= 1e-6):
        raise UsageError(f"clamp must lie in (0, 1e-6], got {clamp}")
    return matrix_function(rho, lambda w: np.log(np.maximum(w, clamp)))


def expm_hermitian(H) -> np.ndarray:
    """exp(H) for Hermitian H via the spectrum."""
    return matrix_function(H, np.exp)


def log_partition(H, beta: float) -> float:
    """ln tr exp(-beta H), evaluated with a max-shift to avoid overflow."""
    w = np.linalg.eigvalsh(hermitian_part(_matrix_of(H)))
    x = -beta * w
    m = float(x.max())
    return m + float(np.log(np.exp(x - m).sum()))


def gibbs_state(H, beta: float) -> np.ndarray:
    """exp(-beta H)/tr exp(-beta H), stable at large beta."""
    es = eig_hermitian(H)
    x = -beta * es.values
    p = np.exp(x - x.max())
    p /= p.sum()
    return (es.vectors * p) @ es.vectors.conj().T


def frechet_dlog(sigma, X, clamp: float = DEFAULT_CLAMP):
    """Daleckii-Krein directional derivative of the matrix log at sigma.

    In sigma's eigenbasis the result has entries X_mn (ln p_m - ln p_n)/(p_m - p_n),
    with the divided difference replaced by 1/p_m when |p_m - p_n| < 1e-12.
    Eigenvalues below `clamp` are floored; the returned flag reports whether
    flooring occurred.

    Returns (derivative, clamped_flag).
    """
    es = eig_hermitian(sigma)
    p = np.maximum(es.values, clamp)
    clamped = bool(es.values.min() < clamp)
    V = es.vectors
    Xt = V.conj().T @ _matrix_of(X) @ V
    lp = np.log(p)
    dp = p[:, None] - p[None, :]
    dl = lp[:, None] - lp[None, :]
    near = np.abs(dp) < DEGENERACY_TOL
    kernel = np.where(near, 1.0 / p[:, None], dl / np.where(near, 1.0, dp))
    out = V @ (kernel * Xt) @ V.conj().T
    return out, clamped


def unitary_log_derivative(sigma, H, clamp: float = DEFAULT_CLAMP) -> np.ndarray:
    """d/dtau ln(e^{iH tau} sigma e^{-iH tau}) at tau = 0.

    Computed as the Daleckii-Krein derivative of the log at sigma in the
    direction i[H, sigma]; satisfies tr(sigma * result) = 0.
    """
    s = _matrix_of(sigma)
    Hm = _matrix_of(H)
    direction = 1j * (Hm @ s - s @ Hm)
    out, _ = frechet_dlog(s, direction, clamp=clamp)
    return hermitian_part(out)


def von_neumann_entropy(rho, clamp: float = DEFAULT_CLAMP) -> float:
    """-tr rho ln rho in nats, from eigenvalues above the floor."""
    w = np.linalg.eigvalsh(hermitian_part(_matrix_of(rho)))
    w = w[w > clamp]
    return float(-(w * np.log(w)).sum())


def relative_entropy(rho, sigma, clamp: float = DEFAULT_CLAMP) -> float:
    """D(rho || sigma) = tr rho (ln rho - ln sigma) >= 0."""
    r = _matrix_of(rho)
    out = np.trace(r @ (log_psd(r, clamp) - log_psd(sigma, clamp)))
    return float(out.real)


def expectation(A, rho) -> complex:
    """tr(A rho); real up to roundoff when A is Hermitian."""
    Am = _matrix_of(A)
    rm = _matrix_of(rho)
    if Am.shape != rm.shape:
        raise UsageError(f"dimension mismatch: {Am.shape} vs {rm.shape}")
    return complex(np.trace(Am @ rm))


def trace_distance(a, b) -> float:
    """Half the trace norm of a - b."""
    w = np.linalg.eigvalsh(hermitian_part(_matrix_of(a) - _matrix_of(b)))
    return 0.5 * float(np.abs(w).sum())


def project_to_density(M, floor: float = 0.0) -> np.ndarray:
    """Clip negative eigenvalues and renormalize the trace to 1."""
    es = eig_hermitian(hermitian_part(_matrix_of(M)))
    w = np.maximum(es.values, floor)
    tr = w.sum()
    if tr <= 0:
        raise ValidationError("state has non-positive trace after projection")
    return (es.vectors * (w / tr)) @ es.vectors.conj().T
