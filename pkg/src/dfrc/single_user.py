"""Closed-form optimal single-user design, MMSE receiver and rate metric.

With ``R_des = L L^H`` the covariance constraint becomes ``F~ F~^H = I`` for
``F~ = L^{-1} F``. The globally optimal ``F~`` is the right singular matrix
``V`` of the whitened channel ``H L``: its first ``d`` columns carry data
and the remaining ``n_tx - d`` (the weakest eigen-directions) become the
radar beams.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalConsistencyError
from .linalg import eig_herm_desc, hermitian_part, svd_desc

LOG2E = 1.0 / np.log(2.0)


@dataclass(frozen=True)
class SingleUserSolution:
    F: np.ndarray
    F_c: np.ndarray
    F_r: np.ndarray
    G: np.ndarray
    rate: float
    He_eigenvalues: np.ndarray
    identity_rate: float
    V: np.ndarray


def _logdet_hpd(A):
    sign, val = np.linalg.slogdet(A)
    if sign.real <= 0:
        raise NumericalConsistencyError("matrix expected positive definite has det <= 0")
    return float(val)


def mmse_receiver(H_k, R_des, F_k, noise_var):
    """``G_k = (H_k R H_k^H + noise_var I)^{-1} H_k F_k``."""
    if not noise_var > 0:
        raise InvalidInputError(f"noise_var must be > 0, got {noise_var}")
    H_k = np.atleast_2d(np.asarray(H_k, dtype=complex))
    R_des = np.atleast_2d(np.asarray(R_des, dtype=complex))
    F_k = np.asarray(F_k, dtype=complex)
    if F_k.ndim < 2:
        F_k = F_k.reshape(H_k.shape[1], -1)
    C = H_k @ R_des @ H_k.conj().T + noise_var * np.eye(H_k.shape[0])
    return np.linalg.solve(hermitian_part(C), H_k @ F_k)


def interference_covariance(H_k, blocks, noise_var):
    """``noise_var I + sum_j H_k B_j B_j^H H_k^H`` over the given blocks."""
    Q = noise_var * np.eye(H_k.shape[0], dtype=complex)
    for B in blocks:
        B = np.asarray(B, dtype=complex)
        if B.size == 0:
            continue
        HB = H_k @ B
        Q = Q + HB @ HB.conj().T
    return hermitian_part(Q)


def achievable_rate(F_c_k, interference_blocks, H_k, noise_var):
    """Gaussian-signalling rate of one user in bits/s/Hz.

    ``log2 det(I + F^H H^H Q^{-1} H F)`` with ``Q`` the noise plus the
    covariance received from every block in ``interference_blocks``
    (other users' beamformers and the radar block).
    """
    if not noise_var > 0:
        raise InvalidInputError(f"noise_var must be > 0, got {noise_var}")
    H_k = np.atleast_2d(np.asarray(H_k, dtype=complex))
    F = np.asarray(F_c_k, dtype=complex)
    if F.ndim < 2:
        F = F.reshape(H_k.shape[1], -1)
    if F.size == 0:
        return 0.0
    Q = interference_covariance(H_k, interference_blocks, noise_var)
    try:
        C = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        lam = np.linalg.eigvalsh(Q)[0]
        raise NumericalConsistencyError(
            f"interference covariance not positive definite (min eigenvalue {lam:.3e})") from None
    X = np.linalg.solve(C, H_k @ F)
    Gm = hermitian_part(np.eye(F.shape[1]) + X.conj().T @ X)
    rate = _logdet_hpd(Gm) * LOG2E
    if rate < -1e-12:
        raise NumericalConsistencyError(f"negative rate {rate:.3e}")
    return max(rate, 0.0)


def optimal_value_identity(H_tilde, noise_var, d):
    """Rate of the closed-form optimum from eigenvalues alone.

    ``log2 det(s I + H~H~^H) - sum_{m <= n_tx-d} log2 lambda_m(H_e)
    - (n_rx - n_tx + d) log2 s`` where ``H_e = s I + H~^H H~``, ``s`` the
    noise variance and ``lambda_m`` the ascending eigenvalues. The last
    term comes from moving the radar-block determinant between its
    ``n_rx``- and ``(n_tx - d)``-dimensional forms; it vanishes at unit
    noise variance.

    Returns
    -------
    rate : float
    He_eigenvalues : ndarray
        Eigenvalues of ``H_e``, descending.
    """
    H_tilde = np.asarray(H_tilde, dtype=complex)
    n_rx, n_tx = H_tilde.shape
    He = noise_var * np.eye(n_tx) + H_tilde.conj().T @ H_tilde
    lam = eig_herm_desc(hermitian_part(He)).values
    weakest = lam[::-1][: n_tx - d]
    full = _logdet_hpd(noise_var * np.eye(n_rx) + H_tilde @ H_tilde.conj().T)
    rate = (full - np.sum(np.log(weakest)) - (n_rx - n_tx + d) * np.log(noise_var)) * LOG2E
    return float(rate), lam


def solve_single_user(H, spec, noise_var, d):
    """Globally optimal transmit beamformer ``F = L V`` and its MMSE receiver.

    Parameters
    ----------
    H : ndarray, shape (n_rx, n_tx)
    spec : CovarianceSpec
    noise_var : float
    d : int
        Number of data streams.

    Returns
    -------
    SingleUserSolution
    """
    H = np.asarray(H, dtype=complex)
    n_rx, n_tx = H.shape
    if spec.n_tx != n_tx:
        raise InvalidInputError(f"channel has {n_tx} columns but R_des is {spec.n_tx}x{spec.n_tx}")
    if not 1 <= d <= min(n_tx, n_rx):
        raise InvalidInputError(f"d = {d} must lie in [1, min(n_tx, n_rx)] = [1, {min(n_tx, n_rx)}]")
    if not noise_var > 0:
        raise InvalidInputError(f"noise_var must be > 0, got {noise_var}")
    H_tilde = H @ spec.L
    V = svd_desc(H_tilde).V
    F = spec.L @ V
    F_c, F_r = F[:, :d], F[:, d:]
    G = mmse_receiver(H, spec.R_eff, F_c, noise_var)
    rate = achievable_rate(F_c, [F_r], H, noise_var)
    identity_rate, lam = optimal_value_identity(H_tilde, noise_var, d)
    return SingleUserSolution(F=F, F_c=F_c, F_r=F_r, G=G, rate=rate,
                             He_eigenvalues=lam, identity_rate=identity_rate, V=V)
