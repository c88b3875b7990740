import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import crandn, random_unitary, three_beam_spec
from dfrc.beampattern import make_covariance_spec
from dfrc.errors import InvalidInputError
from dfrc.manifold import (ManifoldOptions, euclidean_conj_gradient, rate_part, retract,
                           riemannian_project, run_manifold_descent, selection_matrix)
from dfrc.scenario import SystemConfig, sample_channels
from dfrc.single_user import solve_single_user


def herm(X):
    return (X + X.conj().T) / 2


def fd_conj_gradient(f, X, h=1e-5):
    """Central differences: d f / d conj(x) = (df/dRe + i df/dIm) / 2."""
    G = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        E = np.zeros_like(X)
        E[idx] = h
        dre = (f(X + E) - f(X - E)) / (2 * h)
        dim = (f(X + 1j * E) - f(X - 1j * E)) / (2 * h)
        G[idx] = 0.5 * (dre + 1j * dim)
    return G


def test_selection_examples():
    np.testing.assert_array_equal(selection_matrix(1, 2, 1, 3), np.eye(3)[:, 1:])
    np.testing.assert_array_equal(selection_matrix(1, 1, 1, 2), np.eye(2)[:, 1:])
    np.testing.assert_array_equal(selection_matrix(2, 3, 2, 8),
                                  np.eye(8)[:, [0, 1, 4, 5, 6, 7]])


@given(K=st.integers(1, 4), d=st.integers(1, 3), extra=st.integers(0, 3), data=st.data())
def test_selection_properties(K, d, extra, data):
    n = K * d + extra
    k = data.draw(st.integers(1, K))
    S = selection_matrix(k, K, d, n)
    assert S.shape == (n, n - d)
    assert np.all(S.sum(axis=0) == 1)
    np.testing.assert_array_equal(S.T @ S, np.eye(n - d))
    X = np.arange(n * n).reshape(n, n)
    keep = [j for j in range(n) if not (k - 1) * d <= j < k * d]
    np.testing.assert_array_equal(X @ S, X[:, keep])


@pytest.mark.parametrize("k, K, d, n", [(0, 2, 1, 4), (3, 2, 1, 4), (1, 3, 2, 5)])
def test_selection_rejects(k, K, d, n):
    with pytest.raises(InvalidInputError):
        selection_matrix(k, K, d, n)


def test_gradient_zero_channels(rng):
    G = euclidean_conj_gradient(random_unitary(rng, 4), np.zeros((2, 2, 4)), [1, 1], 1.0, 1)
    assert np.all(G == 0)


def test_gradient_single_user_form(rng):
    n, d, s2 = 5, 2, 0.3
    X, H = random_unitary(rng, n), crandn(rng, 3, n)
    Fr = X[:, d:]
    expect = -H.conj().T @ np.linalg.solve(s2 * np.eye(3) + H @ Fr @ Fr.conj().T @ H.conj().T, H @ Fr)
    G = euclidean_conj_gradient(X, H[None], [1.0], s2, d)
    np.testing.assert_allclose(G[:, :d], 0, atol=1e-14)
    np.testing.assert_allclose(G[:, d:], expect, atol=1e-12)


def test_gradient_matches_selection_definition(rng):
    K, d, n, s2 = 3, 1, 5, 0.5
    X, Hs, w = random_unitary(rng, n), crandn(rng, K, 2, n), np.array([1.0, 0.4, 2.0])
    expect = np.zeros((n, n), complex)
    for k in range(K):
        S = selection_matrix(k + 1, K, d, n)
        FS = X @ S @ S.T
        expect -= w[k] * Hs[k].conj().T @ np.linalg.solve(
            s2 * np.eye(2) + Hs[k] @ FS @ FS.conj().T @ Hs[k].conj().T, Hs[k] @ FS)
    np.testing.assert_allclose(euclidean_conj_gradient(X, Hs, w, s2, d), expect, atol=1e-12)


def test_gradient_finite_differences_6x6(rng):
    n, K, d, s2 = 6, 2, 2, 0.4
    X, Hs, w = random_unitary(rng, n), crandn(rng, K, 3, n), np.array([1.0, 1.5])
    num = fd_conj_gradient(lambda Y: rate_part(Y, Hs, w, s2, d), X)
    G = euclidean_conj_gradient(X, Hs, w, s2, d)
    assert np.linalg.norm(G - num) / np.linalg.norm(G) < 1e-5


def test_projection_examples(rng):
    X = random_unitary(rng, 4)
    np.testing.assert_allclose(riemannian_project(X, X), 0, atol=1e-14)
    B = crandn(rng, 4, 4)
    T = X @ (B - B.conj().T)
    np.testing.assert_allclose(riemannian_project(X, T), T, atol=1e-13)


@given(n=st.integers(1, 7), seed=st.integers(0, 2**32 - 1))
def test_projection_is_tangent(n, seed):
    rng = np.random.default_rng(seed)
    X = random_unitary(rng, n)
    P = riemannian_project(X, crandn(rng, n, n))
    assert np.linalg.norm(herm(X.conj().T @ P)) < 1e-10
    np.testing.assert_allclose(riemannian_project(X, P), P, atol=1e-12)


def test_retract_zero_step(rng):
    X = random_unitary(rng, 5)
    np.testing.assert_allclose(retract(X, np.zeros((5, 5))), X, atol=1e-13)


@given(n=st.integers(1, 7), seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 10.0))
def test_retract_unitary(n, seed, scale):
    rng = np.random.default_rng(seed)
    X = random_unitary(rng, n)
    Y = retract(X, scale * riemannian_project(X, crandn(rng, n, n)))
    assert np.linalg.norm(Y.conj().T @ Y - np.eye(n)) < 1e-10


def test_retract_second_order(rng):
    X = random_unitary(rng, 5)
    T = riemannian_project(X, crandn(rng, 5, 5))
    T /= np.linalg.norm(T)
    errs = [np.linalg.norm(retract(X, e * T) - (X + e * T)) for e in (1e-2, 1e-3)]
    assert errs[1] < errs[0] / 50
    assert errs[0] < 1e-3


def test_options_validation():
    with pytest.raises(InvalidInputError):
        ManifoldOptions(backtrack_factor=1.0)
    with pytest.raises(InvalidInputError):
        ManifoldOptions(grad_tol=0.0)


def test_descent_single_user_bounded_by_closed_form():
    cfg = SystemConfig(4, 2, 1, 1).with_snr_db(10)
    R = 0.2 * np.eye(4) + 0.05 * np.ones((4, 4))
    spec = make_covariance_spec(R, 1.0)
    for seed in range(5):
        H = sample_channels(cfg, seed)
        sol = run_manifold_descent(H, spec, cfg)
        ref = solve_single_user(H[0], spec, cfg.noise_var, 1).rate
        assert sol.weighted_sum_rate <= ref + 1e-6
        assert sol.weighted_sum_rate > 0.99 * ref


@pytest.mark.parametrize("seed", range(3))
def test_descent_ascends_and_stays_feasible(seed):
    cfg = SystemConfig(8, 2, 2, 2).with_snr_db(15)
    spec = three_beam_spec(8)
    sol = run_manifold_descent(sample_channels(cfg, seed), spec, cfg, ManifoldOptions(max_iters=100))
    wsr = [r.wsr for r in sol.trace]
    assert np.all(np.diff(wsr) >= 0)
    assert max(r.residual for r in sol.trace) < 1e-9
    assert np.linalg.norm(sol.F_tilde.conj().T @ sol.F_tilde - np.eye(8)) < 1e-9
    assert sol.scheme == "manopt"
    assert sol.trace[-1].wsr == pytest.approx(sol.weighted_sum_rate, abs=1e-8)


def test_descent_stops_on_gradient(rng):
    # a zero channel has zero gradient: immediate convergence at F = L
    cfg = SystemConfig(4, 2, 1, 1)
    spec = make_covariance_spec(np.eye(4) / 4, 1.0)
    sol = run_manifold_descent([np.zeros((2, 4))], spec, cfg)
    assert sol.converged and sol.iterations_used == 0
    np.testing.assert_allclose(sol.F, spec.L)


def test_descent_line_search_exhaustion():
    cfg = SystemConfig(8, 2, 2, 2).with_snr_db(15)
    opts = ManifoldOptions(initial_step=1e6, max_backtracks=1, backtrack_factor=0.5)
    sol = run_manifold_descent(sample_channels(cfg, 0), three_beam_spec(8), cfg, opts)
    assert not sol.converged and sol.iterations_used == 0
