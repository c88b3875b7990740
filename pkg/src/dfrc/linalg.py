"""Dense complex factorizations with fixed ordering and phase conventions.

Every solver in the package goes through these wrappers so that repeated
calls on the same input give bit-identical factors. Singular and
eigenvalues are always returned in descending order, and each singular /
eigen vector is rotated so that its largest-magnitude entry is real and
non-negative.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotPositiveDefiniteError

HERMITIAN_RTOL = 1e-8


@dataclass(frozen=True)
class SvdResult:
    """Full SVD ``A = U @ diag(S) @ V^H`` (``U`` is m x m, ``V`` is n x n)."""
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        m, n = self.U.shape[0], self.V.shape[0]
        r = self.S.size
        return (self.U[:, :r] * self.S) @ self.V[:, :r].conj().T if r else np.zeros((m, n), complex)


@dataclass(frozen=True)
class HermEigResult:
    """Eigendecomposition ``A = vectors @ diag(values) @ vectors^H``."""
    values: np.ndarray
    vectors: np.ndarray


def _as_finite_matrix(A, name="A"):
    A = np.asarray(A)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A.astype(complex, copy=False)


def column_phases(X):
    """Unit-modulus factors that make each column's dominant entry real >= 0.

    The dominant entry is the first one (lowest row index) attaining the
    column's maximum magnitude. Zero columns get a factor of one.
    """
    if X.shape[1] == 0:
        return np.ones(0, dtype=complex)
    idx = np.argmax(np.abs(X), axis=0)
    pivot = X[idx, np.arange(X.shape[1])]
    mag = np.abs(pivot)
    ph = np.ones(X.shape[1], dtype=complex)
    nz = mag > 0
    ph[nz] = pivot[nz].conj() / mag[nz]
    return ph


def hermitian_part(A):
    return 0.5 * (A + A.conj().T)


def check_hermitian(A, rtol=HERMITIAN_RTOL, name="A"):
    scale = max(np.linalg.norm(A), 1.0)
    asym = np.linalg.norm(A - A.conj().T)
    if asym > rtol * scale:
        raise InvalidInputError(
            f"{name} is not Hermitian: |A - A^H|_F = {asym:.3e} "
            f"(tolerance {rtol * scale:.3e})")


def svd_desc(A):
    """Full SVD with descending singular values and fixed column phases.

    Parameters
    ----------
    A : array_like, shape (m, n)

    Returns
    -------
    SvdResult
        ``U`` (m x m) and ``V`` (n x n) unitary, ``S`` of length min(m, n).
        For the leading min(m, n) pairs the phase of ``V[:, i]`` is fixed
        and ``U[:, i]`` follows it; the remaining null-space columns of
        either factor are phase-fixed on their own.
    """
    A = _as_finite_matrix(A)
    m, n = A.shape
    U, S, Vh = np.linalg.svd(A, full_matrices=True)
    V = Vh.conj().T
    r = S.size
    # numpy already sorts descending; an explicit stable sort guards backends that do not
    order = np.argsort(-S, kind="stable")
    if not np.array_equal(order, np.arange(r)):
        S = S[order]
        U = np.concatenate([U[:, order], U[:, r:]], axis=1)
        V = np.concatenate([V[:, order], V[:, r:]], axis=1)
    ph_v = column_phases(V)
    V = V * ph_v
    ph_u = column_phases(U)
    ph_u[:r] = ph_v[:r]
    U = U * ph_u
    return SvdResult(U=U, S=S, V=V)


def eig_herm_desc(A):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    A = _as_finite_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"A must be square, got shape {A.shape}")
    check_hermitian(A)
    w, V = np.linalg.eigh(hermitian_part(A))
    w = w[::-1].copy()
    V = V[:, ::-1]
    V = V * column_phases(V)
    return HermEigResult(values=w, vectors=V)


def cholesky_lower(R, ridge=0.0):
    """Lower Cholesky factor ``L`` with ``L L^H = R + ridge I``.

    Raises
    ------
    NotPositiveDefiniteError
        If the smallest eigenvalue of ``R + ridge I`` is not positive.
    """
    R = _as_finite_matrix(R, "R")
    if R.shape[0] != R.shape[1]:
        raise InvalidInputError(f"R must be square, got shape {R.shape}")
    if ridge < 0:
        raise InvalidInputError(f"ridge must be >= 0, got {ridge}")
    check_hermitian(R, name="R")
    Rr = hermitian_part(R) + ridge * np.eye(R.shape[0])
    lam_min = np.linalg.eigvalsh(Rr)[0]
    if lam_min <= 0:
        raise NotPositiveDefiniteError(lam_min)
    try:
        L = np.linalg.cholesky(Rr)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(lam_min) from None
    return np.tril(L)
