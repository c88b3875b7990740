"""Reference schemes: the plain Cholesky beamformer and sum-MSE alternation."""
import numpy as np

from .wmmse import BcdState, BeamformerSolution, TraceRow, _finish, bcd_iterations, weighted_sum_rate


def cholesky_beamformer(spec, channels=None, cfg=None, noise_var=None):
    """``F = L``, the starting point of the BCD iteration.

    Rates are filled in when ``channels`` and ``cfg`` are given, otherwise
    they are NaN.
    """
    n = spec.n_tx
    F = spec.L.copy()
    Ft = np.eye(n, dtype=complex)
    res = spec.residual(F)
    if channels is None or cfg is None:
        return BeamformerSolution(F=F, F_tilde=Ft, per_user_rates=np.array([np.nan]),
                                  weighted_sum_rate=float("nan"), iterations_used=0,
                                  converged=True, scheme="cholesky",
                                  trace=[TraceRow(0, float("nan"), float("nan"), res)])
    total, rates = weighted_sum_rate(F, channels, cfg, noise_var)
    state = BcdState(F_tilde=Ft, G=None, W=None, wsr_trace=[total])
    return BeamformerSolution(F=F, F_tilde=Ft, per_user_rates=rates, weighted_sum_rate=total,
                              iterations_used=0, converged=True, scheme="cholesky",
                              trace=[TraceRow(0, total, float("nan"), res)], state=state)


def run_mmse_filter(channels, spec, cfg, opts=None, noise_var=None):
    """Alternating sum-MSE minimization: the BCD loop with ``W_k = I`` fixed.

    The ``wmmse`` column of the trace is then the (weighted) sum-MSE,
    which is non-increasing.
    """
    s2 = cfg.noise_var if noise_var is None else noise_var
    state, trace, converged = bcd_iterations(channels, spec, cfg, opts,
                                             freeze_weights=True, noise_var=s2)
    return _finish(state, trace, converged, channels, spec, cfg, s2, "mmse_filter")
