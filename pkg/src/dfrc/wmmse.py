"""Multi-user weighted-MMSE block coordinate descent.

Weighted sum-rate maximization under ``F F^H = R_des`` is traded for the
matrix-weighted sum-MSE problem

    min_{F, G, W}  sum_k w_k (Tr(W_k E_k) - log det W_k)

and solved by cycling three exact block updates: MMSE receivers ``G``,
weights ``W = E^{-1}``, and the transmit block. With ``R_des = L L^H`` the
transmit step is an orthogonal Procrustes problem in ``F~ = L^{-1} F``
whose maximizer is ``U_M[:, :D] V_M^H`` from the SVD of the stacked matrix
``M = [w_1 H~_1^H G_1 W_1^H, ...]``. The radar block is the orthogonal
complement ``U_M[:, D:]``, which keeps ``F~`` unitary at every iterate.

All internal computations run in the whitened domain ``H~_k = H_k L``, so
``H_k R H_k^H = H~_k H~_k^H`` with ``R = L L^H = R_des + ridge I``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedWeightError, InvalidInputError
from .linalg import hermitian_part, svd_desc
from .single_user import LOG2E, achievable_rate, mmse_receiver


@dataclass(frozen=True)
class BcdOptions:
    """Stopping rule for :func:`run_bcd` and the MMSE-filter baseline.

    Iteration stops once ``|dWSR| / max(1, WSR) < tol`` or after
    ``max_iters`` transmit updates.
    """
    tol: float = 1e-8
    max_iters: int = 5000

    def __post_init__(self):
        if not self.tol > 0 or self.max_iters < 1:
            raise InvalidInputError("tol must be > 0 and max_iters >= 1")


@dataclass(frozen=True)
class TraceRow:
    """One iterate: WSR (bits/s/Hz), WMMSE objective (nats) and covariance residual."""
    iteration: int
    wsr: float
    wmmse: float
    residual: float


@dataclass
class BcdState:
    """Working state of one BCD run (whitened domain)."""
    F_tilde: np.ndarray
    G: np.ndarray
    W: np.ndarray
    M: np.ndarray = None
    iteration: int = 0
    wsr_trace: list = field(default_factory=list)
    wmmse_trace: list = field(default_factory=list)
    # objective after the transmit, receiver and weight updates of each iteration
    substep_objectives: list = field(default_factory=list)


@dataclass
class BeamformerSolution:
    F: np.ndarray
    F_tilde: np.ndarray
    per_user_rates: np.ndarray
    weighted_sum_rate: float
    iterations_used: int
    converged: bool
    scheme: str = "bcd"
    trace: list = field(default_factory=list)
    state: BcdState = None

    @property
    def max_residual(self):
        return max((row.residual for row in self.trace), default=float("nan"))


@dataclass(frozen=True)
class KktCertificate:
    """Dual matrix ``Q = F~_c^H M`` of the SDP relaxation and its validity."""
    Q: np.ndarray
    valid: bool
    max_asymmetry: float
    min_eigenvalue: float


# --------------------------------------------------------------------------
# block helpers
# --------------------------------------------------------------------------

def user_blocks(F, d, K):
    """Split the first ``d*K`` columns of ``F`` into ``(K, n, d)`` user blocks."""
    n = F.shape[0]
    return F[:, : d * K].reshape(n, K, d).transpose(1, 0, 2)


def _H(X):
    return np.conj(np.swapaxes(X, -1, -2))


def _herm(X):
    return 0.5 * (X + _H(X))


def _as_stack(channels):
    if hasattr(channels, "stacked"):
        return channels.stacked()
    return np.stack([np.asarray(H, dtype=complex) for H in channels])


# --------------------------------------------------------------------------
# per-block updates (public, original-domain signatures)
# --------------------------------------------------------------------------

def mse_matrix(G_k, F_k, H_k, R_des, noise_var):
    """MSE matrix ``I - G^H H F - F^H H^H G + G^H (H R H^H + s I) G``.

    Valid whenever ``F F^H = R_des``, which folds the interference from all
    other blocks into ``H R H^H``.
    """
    G_k = np.atleast_2d(np.asarray(G_k, dtype=complex))
    H_k = np.atleast_2d(np.asarray(H_k, dtype=complex))
    F_k = np.asarray(F_k, dtype=complex).reshape(H_k.shape[1], -1)
    R = np.atleast_2d(np.asarray(R_des, dtype=complex))
    d = F_k.shape[1]
    if G_k.shape != (H_k.shape[0], d):
        raise InvalidInputError(f"G_k has shape {G_k.shape}, expected {(H_k.shape[0], d)}")
    cross = G_k.conj().T @ H_k @ F_k
    C = H_k @ R @ H_k.conj().T + noise_var * np.eye(H_k.shape[0])
    E = np.eye(d) - cross - cross.conj().T + G_k.conj().T @ C @ G_k
    return hermitian_part(E)


def mmse_error_matrix(F_k, H_k, R_des, noise_var):
    """MSE at the MMSE receiver: ``I - F^H H^H (H R H^H + s I)^{-1} H F``."""
    H_k = np.atleast_2d(np.asarray(H_k, dtype=complex))
    F_k = np.asarray(F_k, dtype=complex).reshape(H_k.shape[1], -1)
    G = mmse_receiver(H_k, R_des, F_k, noise_var)
    return hermitian_part(np.eye(F_k.shape[1]) - F_k.conj().T @ H_k.conj().T @ G)


def update_receivers(F, channels, spec, noise_var, d):
    """MMSE receivers ``G_k`` for every user given the full beamformer ``F``."""
    if not noise_var > 0:
        raise InvalidInputError(f"noise_var must be > 0, got {noise_var}")
    R = spec.R_eff if hasattr(spec, "R_eff") else np.asarray(spec)
    return [mmse_receiver(H, R, F[:, k * d:(k + 1) * d], noise_var)
            for k, H in enumerate(channels)]


def update_weights(E_list, cond_limit=1e12):
    """``W_k = E_k^{-1}``, Hermitian-symmetrized.

    Raises
    ------
    IllConditionedWeightError
        If some ``E_k`` has a non-positive eigenvalue or condition number
        above ``cond_limit``.
    """
    out = []
    for k, E in enumerate(E_list):
        E = hermitian_part(np.atleast_2d(np.asarray(E, dtype=complex)))
        lam = np.linalg.eigvalsh(E)
        if lam[0] <= 0 or lam[-1] > cond_limit * lam[0]:
            raise IllConditionedWeightError(
                f"E_{k} is singular or ill-conditioned (eigenvalues {lam[0]:.3e} .. {lam[-1]:.3e})")
        out.append(hermitian_part(np.linalg.inv(E)))
    return out


def assemble_M(channels_tilde, G, W, weights):
    """Stack ``w_k H~_k^H G_k W_k^H`` column-wise into an ``n_tx x D`` matrix."""
    blocks = [w * np.asarray(Ht).conj().T @ np.asarray(Gk) @ np.asarray(Wk).conj().T
              for Ht, Gk, Wk, w in zip(channels_tilde, G, W, weights)]
    return np.concatenate(blocks, axis=1)


def solve_opp(M):
    """Maximizer of ``Re Tr(M^H X)`` over ``X`` with orthonormal columns.

    Returns ``U[:, :D] V^H`` from :func:`svd_desc`. For rank-deficient ``M``
    the maximizer is not unique and the convention-fixed SVD picks one.
    """
    M = np.asarray(M, dtype=complex)
    n, D = M.shape
    if D > n:
        raise InvalidInputError(f"M has more columns ({D}) than rows ({n})")
    s = svd_desc(M)
    return s.U[:, :D] @ s.V.conj().T


def complete_radar(U_M, D):
    """Radar block: the trailing ``n_tx - D`` columns of the unitary ``U_M``."""
    U_M = np.asarray(U_M, dtype=complex)
    return U_M[:, D:].copy()


def opp_kkt_certificate(M, F_c_tilde, tol=1e-8):
    """Check that ``F~_c`` also solves the relaxation ``X^H X <= I``.

    Stationarity forces the dual matrix to equal ``Q = F~_c^H M``; the
    point is optimal for the relaxed problem iff ``Q`` is Hermitian PSD.
    """
    M = np.asarray(M, dtype=complex)
    F = np.asarray(F_c_tilde, dtype=complex)
    Q = F.conj().T @ M
    scale = max(np.linalg.norm(M, 2), np.finfo(float).tiny)
    asym = float(np.linalg.norm(Q - Q.conj().T, 2))
    lam_min = float(np.linalg.eigvalsh(hermitian_part(Q))[0])
    valid = asym <= tol * max(scale, 1.0) and lam_min >= -tol * scale
    return KktCertificate(Q=Q, valid=bool(valid), max_asymmetry=asym, min_eigenvalue=lam_min)


def weighted_sum_rate(F, channels, cfg, noise_var=None):
    """Weighted sum-rate and per-user rates (bits/s/Hz) of beamformer ``F``.

    The first ``d*K`` columns of ``F`` are the user blocks in order; any
    remaining columns form the radar block and count as interference.
    """
    s2 = cfg.noise_var if noise_var is None else noise_var
    d, K = cfg.streams_per_user, cfg.n_users
    blocks = [F[:, k * d:(k + 1) * d] for k in range(K)]
    radar = F[:, d * K:]
    rates = np.empty(K)
    for k, H in enumerate(channels):
        others = [blocks[i] for i in range(K) if i != k] + [radar]
        rates[k] = achievable_rate(blocks[k], others, H, s2)
    return float(np.dot(cfg.weights, rates)), rates


def wmmse_objective(F, G, W, channels, spec, cfg, noise_var=None):
    """``sum_k w_k (Tr(W_k E_k) - ln det W_k)`` in nats."""
    s2 = cfg.noise_var if noise_var is None else noise_var
    d = cfg.streams_per_user
    R = spec.R_eff if hasattr(spec, "R_eff") else np.asarray(spec)
    total = 0.0
    for k, H in enumerate(channels):
        E = mse_matrix(G[k], F[:, k * d:(k + 1) * d], H, R, s2)
        Wk = np.atleast_2d(np.asarray(W[k], dtype=complex))
        logdet = np.linalg.slogdet(hermitian_part(Wk))[1]
        total += cfg.weights[k] * (np.trace(Wk @ E).real - logdet)
    return float(total)


# --------------------------------------------------------------------------
# the BCD loop
# --------------------------------------------------------------------------

class _Whitened:
    """Channel-dependent constants of the BCD iteration."""

    def __init__(self, channels, spec, cfg, noise_var):
        self.H = _as_stack(channels)
        self.Ht = self.H @ spec.L
        self.K, self.n_rx, self.n_tx = self.Ht.shape
        self.d = cfg.streams_per_user
        self.D = self.d * self.K
        self.s2 = noise_var
        self.w = np.asarray(cfg.weights, dtype=float)
        C = self.Ht @ _H(self.Ht) + noise_var * np.eye(self.n_rx)
        self.C = _herm(C)
        # (H~ H~^H + s I)^{-1} H~ is fixed for the whole run
        self.CiHt = np.linalg.solve(self.C, self.Ht)

    def receivers_and_errors(self, Ft):
        blocks = user_blocks(Ft, self.d, self.K)
        HF = self.Ht @ blocks
        G = self.CiHt @ blocks
        E = _herm(np.eye(self.d) - _H(HF) @ G)
        return G, E, HF

    def objective(self, Ft, G, W):
        """Weighted sum-MSE of ``(F~, G, W)`` in nats."""
        blocks = user_blocks(Ft, self.d, self.K)
        cross = _H(G) @ self.Ht @ blocks
        E = np.eye(self.d) - cross - _H(cross) + _H(G) @ self.C @ G
        tr = np.einsum("kij,kji->k", W, E).real
        logdet = np.linalg.slogdet(_herm(W))[1]
        return float(np.dot(self.w, tr - logdet))

    def transmit_update(self, G, W):
        M = np.concatenate(list(self.w[:, None, None] * (_H(self.Ht) @ G @ _H(W))), axis=1)
        s = svd_desc(M)
        Fc = s.U[:, : self.D] @ s.V.conj().T
        Fr = complete_radar(s.U, self.D)
        return np.concatenate([Fc, Fr], axis=1), M


def _wsr_from_errors(E, w):
    logdet = np.linalg.slogdet(E)[1]
    return float(-np.dot(w, logdet) * LOG2E)


def _weights_from_errors(E):
    lam = np.linalg.eigvalsh(E)
    if np.any(lam[:, 0] <= 0):
        raise IllConditionedWeightError(f"MMSE error matrix not positive definite "
                                        f"(min eigenvalue {lam[:, 0].min():.3e})")
    return _herm(np.linalg.inv(E))


def bcd_iterations(channels, spec, cfg, opts=None, freeze_weights=False, noise_var=None):
    """Run the BCD loop and return its final :class:`BcdState` and trace rows.

    With ``freeze_weights`` the weight update is skipped (``W = I``), giving
    plain sum-MSE alternating minimization.
    """
    opts = opts or BcdOptions()
    s2 = cfg.noise_var if noise_var is None else noise_var
    if not s2 > 0:
        raise InvalidInputError(f"noise_var must be > 0, got {s2}")
    if len(channels) != cfg.n_users:
        raise InvalidInputError(f"expected {cfg.n_users} channels, got {len(channels)}")
    ws = _Whitened(channels, spec, cfg, s2)
    if ws.n_tx != spec.n_tx or ws.n_rx != cfg.n_rx:
        raise InvalidInputError("channel dimensions do not match the configuration")
    L = spec.L
    R_eff = spec.R_eff
    nrm = np.linalg.norm(spec.R_des)

    def residual(Ft):
        F = L @ Ft
        return float(np.linalg.norm(F @ F.conj().T - R_eff) / nrm)

    eye_w = np.broadcast_to(np.eye(ws.d, dtype=complex), (ws.K, ws.d, ws.d)).copy()
    Ft = np.eye(ws.n_tx, dtype=complex)
    G, E, _ = ws.receivers_and_errors(Ft)
    W = eye_w if freeze_weights else _weights_from_errors(E)
    wsr = _wsr_from_errors(E, ws.w)
    obj = ws.objective(Ft, G, W)
    state = BcdState(F_tilde=Ft, G=G, W=W)
    state.wsr_trace.append(wsr)
    state.wmmse_trace.append(obj)
    trace = [TraceRow(0, wsr, obj, residual(Ft))]
    converged = False
    for it in range(1, opts.max_iters + 1):
        Ft, M = ws.transmit_update(G, W)
        after_tx = ws.objective(Ft, G, W)
        G, E, _ = ws.receivers_and_errors(Ft)
        after_rx = ws.objective(Ft, G, W)
        if not freeze_weights:
            W = _weights_from_errors(E)
        obj = ws.objective(Ft, G, W)
        new_wsr = _wsr_from_errors(E, ws.w)
        state.substep_objectives.append((after_tx, after_rx, obj))
        state.wsr_trace.append(new_wsr)
        state.wmmse_trace.append(obj)
        trace.append(TraceRow(it, new_wsr, obj, residual(Ft)))
        change = abs(new_wsr - wsr) / max(1.0, abs(new_wsr))
        wsr = new_wsr
        if change < opts.tol:
            converged = True
            break
    state.F_tilde, state.G, state.W, state.M, state.iteration = Ft, G, W, M, it
    return state, trace, converged


def _finish(state, trace, converged, channels, spec, cfg, noise_var, scheme):
    F = spec.L @ state.F_tilde
    total, rates = weighted_sum_rate(F, channels, cfg, noise_var)
    return BeamformerSolution(F=F, F_tilde=state.F_tilde, per_user_rates=rates,
                              weighted_sum_rate=total, iterations_used=state.iteration,
                              converged=converged, scheme=scheme, trace=trace, state=state)


def run_bcd(channels, spec, cfg, opts=None, noise_var=None):
    """Weighted sum-rate beamforming by WMMSE block coordinate descent.

    Parameters
    ----------
    channels : ChannelSet or sequence of (n_rx, n_tx) arrays
    spec : CovarianceSpec
    cfg : SystemConfig
    opts : BcdOptions, optional
    noise_var : float, optional
        Overrides ``cfg.noise_var``.

    Returns
    -------
    BeamformerSolution
        Starts from ``F = L``; ``trace`` has one row per iterate including
        the initial point. ``converged`` is False when the iteration cap
        was hit.
    """
    s2 = cfg.noise_var if noise_var is None else noise_var
    state, trace, converged = bcd_iterations(channels, spec, cfg, opts, noise_var=s2)
    return _finish(state, trace, converged, channels, spec, cfg, s2, "bcd")
