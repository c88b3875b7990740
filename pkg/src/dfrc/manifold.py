"""Riemannian steepest-ascent baseline on the unitary group.

Maximizes the weighted sum-rate over ``F~`` with ``F~ F~^H = I`` using the
closed-form Euclidean conjugate gradient, projection onto the tangent
space, a polar retraction and Armijo backtracking.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import svd_desc
from .single_user import LOG2E
from .wmmse import BeamformerSolution, BcdState, TraceRow, _H, _as_stack, _herm, weighted_sum_rate


@dataclass(frozen=True)
class ManifoldOptions:
    max_iters: int = 500
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 30

    def __post_init__(self):
        if min(self.max_iters, self.grad_tol, self.armijo_c, self.initial_step,
               self.max_backtracks) <= 0:
            raise InvalidInputError("manifold options must all be positive")
        if not 0 < self.backtrack_factor < 1:
            raise InvalidInputError("backtrack_factor must lie in (0, 1)")


def selection_matrix(k, K, d, n_tx):
    """0/1 matrix ``S_k`` with ``F~ S_k`` = every column except user ``k``'s block.

    ``k`` is one-based.
    """
    if not 1 <= k <= K:
        raise InvalidInputError(f"user index {k} outside 1..{K}")
    if d * K > n_tx:
        raise InvalidInputError(f"d*K = {d * K} exceeds n_tx = {n_tx}")
    keep = np.r_[0:(k - 1) * d, k * d:n_tx]
    S = np.zeros((n_tx, n_tx - d))
    S[keep, np.arange(keep.size)] = 1.0
    return S


def _masks(K, d, n_tx):
    """Diagonal of ``S_k S_k^H`` for every user, shape ``(K, n_tx)``."""
    m = np.ones((K, n_tx))
    for k in range(K):
        m[k, k * d:(k + 1) * d] = 0.0
    return m


def _interference(Ft, Ht, masks, noise_var):
    FS = Ft[None, :, :] * masks[:, None, :]
    HFS = Ht @ FS
    Q = _herm(noise_var * np.eye(Ht.shape[1]) + HFS @ _H(HFS))
    return Q, HFS


def rate_part(Ft, Ht, weights, noise_var, d):
    """``sum_k w_k f_k`` with ``f_k = -ln det(s I + H~_k F~ S_k S_k^H F~^H H~_k^H)``."""
    Ht = np.asarray(Ht, dtype=complex)
    masks = _masks(Ht.shape[0], d, Ht.shape[2])
    Q, _ = _interference(Ft, Ht, masks, noise_var)
    return float(-np.dot(weights, np.linalg.slogdet(Q)[1]))


def euclidean_conj_gradient(F_tilde, channels_tilde, weights, noise_var, d):
    """Conjugate gradient ``d f / d conj(F~)`` of ``f = sum_k w_k f_k``.

    ``-sum_k w_k H~_k^H (s I + H~_k F~ S_k S_k^H F~^H H~_k^H)^{-1} H~_k F~ S_k S_k^H``.
    """
    Ht = _as_stack(channels_tilde)
    K, n_rx, n_tx = Ht.shape
    w = np.asarray(weights, dtype=float)
    masks = _masks(K, d, n_tx)
    Q, HFS = _interference(np.asarray(F_tilde, dtype=complex), Ht, masks, noise_var)
    X = _H(Ht) @ np.linalg.solve(Q, HFS)
    X = X * masks[:, None, :]
    return -np.einsum("k,kij->ij", w, X)


def riemannian_project(F_tilde, euclidean_grad):
    """Tangent projection ``G - F~ herm(F~^H G)`` on the unitary group."""
    X = np.asarray(F_tilde, dtype=complex)
    G = np.asarray(euclidean_grad, dtype=complex)
    return G - X @ _herm(X.conj().T @ G)


def retract(F_tilde, tangent_step):
    """Polar retraction: unitary factor of ``F~ + step``."""
    s = svd_desc(np.asarray(F_tilde, dtype=complex) + tangent_step)
    return s.U @ s.V.conj().T


def run_manifold_descent(channels, spec, cfg, opts=None, noise_var=None):
    """Riemannian steepest ascent of the weighted sum-rate from ``F = L``."""
    opts = opts or ManifoldOptions()
    s2 = cfg.noise_var if noise_var is None else noise_var
    if not s2 > 0:
        raise InvalidInputError(f"noise_var must be > 0, got {s2}")
    H = _as_stack(channels)
    Ht = H @ spec.L
    K, n_rx, n_tx = Ht.shape
    d = cfg.streams_per_user
    w = np.asarray(cfg.weights, dtype=float)
    # F~-independent part of each rate: ln det(s I + H~ H~^H)
    base = float(np.dot(w, np.linalg.slogdet(_herm(s2 * np.eye(n_rx) + Ht @ _H(Ht)))[1]))
    sum_w_d = float(np.sum(w) * d)
    L, R_eff, nrm = spec.L, spec.R_eff, np.linalg.norm(spec.R_des)

    def f(X):
        return rate_part(X, Ht, w, s2, d)

    def row(it, X, fx):
        F = L @ X
        res = float(np.linalg.norm(F @ F.conj().T - R_eff) / nrm)
        wsr_nats = base + fx
        return TraceRow(it, wsr_nats * LOG2E, sum_w_d - wsr_nats, res)

    X = np.eye(n_tx, dtype=complex)
    fx = f(X)
    trace = [row(0, X, fx)]
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        # real-inner-product gradient is twice the conjugate gradient
        egrad = 2.0 * euclidean_conj_gradient(X, Ht, w, s2, d)
        rgrad = riemannian_project(X, egrad)
        gnorm2 = float(np.vdot(rgrad, rgrad).real)
        if np.sqrt(gnorm2) < opts.grad_tol:
            converged = True
            it -= 1
            break
        t = opts.initial_step
        accepted = False
        for _ in range(opts.max_backtracks):
            Xn = retract(X, t * rgrad)
            fn = f(Xn)
            if fn >= fx + opts.armijo_c * t * gnorm2:
                accepted = True
                break
            t *= opts.backtrack_factor
        if not accepted:
            it -= 1
            break
        X, fx = Xn, fn
        trace.append(row(it, X, fx))
    F = L @ X
    total, rates = weighted_sum_rate(F, channels, cfg, s2)
    state = BcdState(F_tilde=X, G=None, W=None, iteration=it,
                     wsr_trace=[r.wsr for r in trace], wmmse_trace=[r.wmmse for r in trace])
    return BeamformerSolution(F=F, F_tilde=X, per_user_rates=rates, weighted_sum_rate=total,
                              iterations_used=it, converged=converged, scheme="manopt",
                              trace=trace, state=state)
