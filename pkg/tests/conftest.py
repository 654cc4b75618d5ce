import numpy as np
import pytest


def rand_hermitian(rng, d, scale=1.0):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    A = (A + A.conj().T) / 2
    return scale * A / max(np.linalg.norm(A, 2), 1e-12)


def rand_density(rng, d, floor=0.0):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = X @ X.conj().T
    r = r / np.trace(r).real
    if floor:
        r = (1 - floor * d) * r + floor * np.eye(d)
    return (r + r.conj().T) / 2


def rand_unbroken_pair(rng, d, skew=0.5):
    """(H, Gamma) with H + i Gamma similar to a Hermitian matrix (real spectrum)."""
    Ht = rand_hermitian(rng, d)
    X = rand_hermitian(rng, d, scale=skew)
    w, Q = np.linalg.eigh(X)
    S = (Q * np.exp(w)) @ Q.conj().T
    S_inv = (Q * np.exp(-w)) @ Q.conj().T
    HNH = S @ Ht @ S_inv
    H = (HNH + HNH.conj().T) / 2
    G = (HNH - HNH.conj().T) / 2j
    return (H + H.conj().T) / 2, (G + G.conj().T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.diag([1.0 + 0j, -1.0 + 0j])
