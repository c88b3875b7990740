"""Radar beampattern targets and transmit-covariance synthesis.

The desired covariance ``R_des`` solves the least-squares beampattern
matching problem

    min_{R, alpha}  sum_theta |alpha * p(theta) - a(theta)^H R a(theta)|^2
    s.t.            R >= 0,  diag(R) = P / n_tx

over an angle grid, where ``p`` is the 0/1 ideal pattern. Eliminating
``alpha`` in closed form leaves a smooth convex problem in ``R`` which is
solved by monotone accelerated projected gradient; the projection onto the
constraint set (PSD cone intersected with the fixed-diagonal affine set) is
computed with Dykstra's alternating projections.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidAngleError, InvalidInputError, NumericalConsistencyError
from .linalg import check_hermitian, cholesky_lower, hermitian_part
from .scenario import steering_matrix, steering_vector

# closed-interval membership is decided with this slack (degrees) to absorb float noise
_ANGLE_EPS = 1e-9


def default_grid():
    return np.linspace(-90.0, 90.0, 181)


@dataclass(frozen=True)
class BeampatternSpec:
    """Ideal multi-beam pattern: unit gain within ``beam_width/2`` of each target."""
    target_angles: tuple = (-60.0, 0.0, 60.0)
    beam_width: float = 9.0
    grid: np.ndarray = field(default_factory=default_grid)

    def __post_init__(self):
        t = tuple(float(x) for x in np.atleast_1d(self.target_angles))
        if any(not -90 <= x <= 90 for x in t):
            raise InvalidAngleError(f"target angles must lie in [-90, 90], got {t}")
        if not self.beam_width > 0:
            raise InvalidInputError(f"beam_width must be > 0, got {self.beam_width}")
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
            raise InvalidInputError("grid must be a strictly increasing 1-D array")
        if g[0] < -90 or g[-1] > 90:
            raise InvalidAngleError("grid must lie within [-90, 90]")
        g.setflags(write=False)
        object.__setattr__(self, "target_angles", t)
        object.__setattr__(self, "grid", g)

    @classmethod
    def flat(cls, grid=None):
        """Pattern equal to one on the whole grid (omnidirectional search mode)."""
        return cls(target_angles=(0.0,), beam_width=360.0,
                   grid=default_grid() if grid is None else grid)


@dataclass(frozen=True)
class CovarianceSpec:
    """Desired covariance, its Cholesky factor and the ridge used to form it.

    ``L @ L^H == R_des + ridge * I``; every beamformer built on this spec
    reproduces that effective covariance exactly.
    """
    R_des: np.ndarray
    L: np.ndarray
    power: float
    ridge: float = 0.0

    @property
    def n_tx(self):
        return self.R_des.shape[0]

    @property
    def R_eff(self):
        return self.R_des + self.ridge * np.eye(self.n_tx)

    def residual(self, F):
        """``|F F^H - (R_des + ridge I)|_F / |R_des|_F``."""
        return float(np.linalg.norm(F @ F.conj().T - self.R_eff) / np.linalg.norm(self.R_des))


@dataclass
class CovarianceDesign:
    """Output of :func:`design_covariance`."""
    R: np.ndarray
    alpha: float
    objective_trace: list
    iterations: int
    converged: bool
    baseline_objective: float
    warning: str = None

    @property
    def objective(self):
        return self.objective_trace[-1]


def ideal_pattern(spec, theta):
    """1 if ``theta`` lies in a closed mainlobe interval, else 0."""
    th = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(th)) or np.any(th < -90) or np.any(th > 90):
        raise InvalidAngleError(f"theta must lie in [-90, 90], got {theta}")
    half = spec.beam_width / 2.0
    t = np.asarray(spec.target_angles)[:, None]
    inside = np.any(np.abs(np.atleast_1d(th)[None, :] - t) <= half + _ANGLE_EPS, axis=0)
    out = inside.astype(float)
    return float(out[0]) if th.ndim == 0 else out


def evaluate_beampattern(R, theta):
    """Transmit power ``a(theta)^H R a(theta)`` toward ``theta`` (degrees).

    Accepts a scalar angle or an array of angles.
    """
    R = np.asarray(R, dtype=complex)
    th = np.asarray(theta, dtype=float)
    A = steering_matrix(R.shape[0], np.atleast_1d(th))
    vals = np.real(np.einsum("ig,ij,jg->g", A.conj(), R, A))
    floor = -1e-10 * max(abs(np.trace(R).real), np.finfo(float).tiny)
    if np.any(vals < floor):
        raise NumericalConsistencyError(
            f"negative beampattern value {vals.min():.3e}; R is not PSD")
    vals = np.maximum(vals, 0.0)
    return float(vals[0]) if th.ndim == 0 else vals


def _psd_part(X):
    w, V = np.linalg.eigh(hermitian_part(X))
    return (V * np.clip(w, 0.0, None)) @ V.conj().T


def _project_feasible(X, diag_value, max_iters=500, tol=1e-12):
    """Project a Hermitian matrix onto ``{R >= 0, diag(R) = diag_value}``."""
    Y = hermitian_part(X)
    p = np.zeros_like(Y)
    q = np.zeros_like(Y)
    scale = max(np.linalg.norm(Y), diag_value)
    for _ in range(max_iters):
        Z = Y + p
        Xp = _psd_part(Z)
        p = Z - Xp
        Z = Xp + q
        Yn = Z.copy()
        np.fill_diagonal(Yn, diag_value)
        q = Z - Yn
        done = np.linalg.norm(Yn - Y) <= tol * scale
        Y = Yn
        if done:
            break
    # exact feasibility: clip then congruence-scale the diagonal (keeps PSD)
    Y = _psd_part(Y)
    dg = np.sqrt(np.clip(np.real(np.diag(Y)), np.finfo(float).tiny, None))
    Y = Y / np.outer(dg, dg) * diag_value
    return hermitian_part(Y)


def design_covariance(spec, n_tx, power, max_iters=2000, tol=1e-8):
    """Least-squares beampattern matching under uniform elemental power.

    Parameters
    ----------
    spec : BeampatternSpec
    n_tx : int
    power : float
        Total power; each antenna gets ``power / n_tx``.
    max_iters : int
    tol : float
        Stop once an accepted step changes the objective by less than
        ``tol`` relative.

    Returns
    -------
    CovarianceDesign
        ``R`` is Hermitian PSD with ``diag(R) = power / n_tx``. The
        iteration starts from the omnidirectional ``(P/n_tx) I`` and the
        objective sequence is non-increasing.
    """
    if not power > 0:
        raise InvalidInputError(f"power must be > 0, got {power}")
    grid = spec.grid
    A = steering_matrix(n_tx, grid)
    target = ideal_pattern(spec, grid)
    tt = float(target @ target)
    diag_value = power / n_tx

    def pattern(R):
        return np.real(np.einsum("ig,ij,jg->g", A.conj(), R, A))

    def evaluate(R):
        b = pattern(R)
        alpha = float(target @ b / tt) if tt > 0 else 0.0
        r = alpha * target - b
        return float(r @ r), alpha, r

    # Lipschitz constant of the gradient: 2 * |A|^2 for the map R -> a^H R a
    gram = np.abs(A.conj().T @ A) ** 2
    step = 1.0 / (2.0 * np.linalg.eigvalsh(gram)[-1])

    R = diag_value * np.eye(n_tx, dtype=complex)
    J, alpha, _ = evaluate(R)
    baseline = J
    trace = [J]
    Y = R.copy()
    t_k = 1.0
    converged = J == 0.0
    it = 0
    while not converged and it < max_iters:
        it += 1
        _, _, rY = evaluate(Y)
        grad = -2.0 * (A * rY) @ A.conj().T
        Z = _project_feasible(Y - step * grad, diag_value)
        Jz, alpha_z, _ = evaluate(Z)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        accepted = Jz <= J
        R_next, J_next = (Z, Jz) if accepted else (R, J)
        Y = R_next + (t_k / t_next) * (Z - R_next) + ((t_k - 1.0) / t_next) * (R_next - R)
        rel = (J - J_next) / J if J > 0 else 0.0
        if accepted:
            alpha = alpha_z
        R, J, t_k = R_next, J_next, t_next
        trace.append(J)
        if accepted and (rel < tol or J == 0.0):
            converged = True

    warning = None
    if baseline > 0 and not J < baseline:
        warning = (f"beampattern design did not improve on the omnidirectional "
                   f"baseline after {it} iterations (objective {J:.6g})")
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return CovarianceDesign(R=hermitian_part(R), alpha=alpha, objective_trace=trace,
                            iterations=it, converged=converged,
                            baseline_objective=baseline, warning=warning)


def make_covariance_spec(R_des, power=None, ridge=None):
    """Factor ``R_des`` for the solvers, adding a ridge if it is singular.

    The ridge ``1e-8 * P / n_tx`` is applied when the smallest eigenvalue
    of ``R_des`` does not exceed it. Pass ``ridge`` to force a value.
    """
    R_des = np.asarray(R_des, dtype=complex)
    if R_des.ndim != 2 or R_des.shape[0] != R_des.shape[1]:
        raise InvalidInputError(f"R_des must be square, got shape {R_des.shape}")
    check_hermitian(R_des, name="R_des")
    R_des = hermitian_part(R_des)
    n = R_des.shape[0]
    tr = float(np.trace(R_des).real)
    if power is None:
        power = tr
    if not power > 0:
        raise InvalidInputError(f"power must be > 0, got {power}")
    if abs(tr - power) > 1e-6 * power:
        raise InvalidInputError(f"trace(R_des) = {tr:.9g} does not match power {power:.9g}")
    lam_min = np.linalg.eigvalsh(R_des)[0]
    if lam_min < -1e-10 * power:
        raise InvalidInputError(f"R_des is not PSD: smallest eigenvalue {lam_min:.3e}")
    if ridge is None:
        level = 1e-8 * power / n
        ridge = level if lam_min <= level else 0.0
    L = cholesky_lower(R_des, ridge)
    return CovarianceSpec(R_des=R_des, L=L, power=float(power), ridge=float(ridge))


def omnidirectional(n_tx, power):
    return (power / n_tx) * np.eye(n_tx, dtype=complex)


def write_matrix(path, R):
    """Write a complex matrix as text: one row per line, entries ``re+imj``."""
    R = np.asarray(R, dtype=complex)
    with open(path, "w") as fh:
        fh.write(f"# complex matrix {R.shape[0]}x{R.shape[1]}, row-major, entries re+imj\n")
        for row in R:
            fh.write(" ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row))
            fh.write("\n")


def read_matrix(path):
    """Inverse of :func:`write_matrix`; lines starting with ``#`` are ignored."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([complex(tok) for tok in line.split()])
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidInputError(f"{path}: rows are empty or of unequal length")
    return np.array(rows, dtype=complex)


def mainlobe_power(R, spec):
    """Sum of the achieved pattern over grid points inside the mainlobes."""
    mask = ideal_pattern(spec, spec.grid) > 0
    return float(evaluate_beampattern(R, spec.grid[mask]).sum())


__all__ = [
    "BeampatternSpec", "CovarianceSpec", "CovarianceDesign", "ideal_pattern",
    "evaluate_beampattern", "design_covariance", "make_covariance_spec",
    "omnidirectional", "write_matrix", "read_matrix", "mainlobe_power",
    "steering_vector",
]
