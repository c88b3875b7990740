import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import crandn, random_unitary, three_beam_spec
from dfrc.beampattern import make_covariance_spec
from dfrc.errors import InvalidInputError
from dfrc.linalg import eig_herm_desc
from dfrc.single_user import (achievable_rate, mmse_receiver, optimal_value_identity,
                              solve_single_user)

LOG2 = np.log2


def oracle_identity(Ht, s2, d):
    """Independent evaluation of the optimal value from the eigenvalues of H_e."""
    n_rx, n_tx = Ht.shape
    lam = np.sort(eig_herm_desc(s2 * np.eye(n_tx) + Ht.conj().T @ Ht).values)
    full = np.linalg.slogdet(s2 * np.eye(n_rx) + Ht @ Ht.conj().T)[1] / np.log(2)
    return full - LOG2(lam[: n_tx - d]).sum() - (n_rx - n_tx + d) * LOG2(s2)


def test_diag_example():
    spec = make_covariance_spec(np.eye(2), 2.0)
    sol = solve_single_user(np.diag([2.0, 1.0]), spec, 1.0, 1)
    np.testing.assert_allclose(sol.F_c[:, 0], [1, 0], atol=1e-15)
    np.testing.assert_allclose(sol.F_r[:, 0], [0, 1], atol=1e-15)
    assert sol.rate == pytest.approx(LOG2(5.0), abs=1e-12)
    np.testing.assert_allclose(sol.He_eigenvalues, [5.0, 2.0])


def test_zero_channel():
    spec = three_beam_spec(8)
    sol = solve_single_user(np.zeros((4, 8)), spec, 0.1, 2)
    assert sol.rate == 0.0
    assert spec.residual(sol.F) < 1e-10


def test_random_matches_identity(rng):
    spec = three_beam_spec(8)
    H = crandn(rng, 4, 8)
    sol = solve_single_user(H, spec, 0.01, 2)
    assert sol.rate == pytest.approx(oracle_identity(H @ spec.L, 0.01, 2), abs=1e-8)
    assert sol.identity_rate == pytest.approx(sol.rate, abs=1e-8)


def test_identity_without_noise_term_only_holds_at_unit_noise(rng):
    H = crandn(rng, 4, 8)
    for s2, holds in [(1.0, True), (0.01, False)]:
        lam = np.sort(np.linalg.eigvalsh(s2 * np.eye(8) + H.conj().T @ H))
        literal = np.linalg.slogdet(s2 * np.eye(4) + H @ H.conj().T)[1] / np.log(2) \
            - LOG2(lam[:6]).sum()
        true = optimal_value_identity(H, s2, 2)[0]
        assert bool(abs(literal - true) < 1e-8) is holds


@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 4), s2=st.floats(1e-3, 10.0))
def test_solution_invariants(seed, d, s2):
    rng = np.random.default_rng(seed)
    spec = three_beam_spec(8)
    H = crandn(rng, 4, 8)
    sol = solve_single_user(H, spec, s2, d)
    assert spec.residual(sol.F) < 1e-9
    Vt = np.linalg.solve(spec.L, sol.F)
    assert np.linalg.norm(Vt.conj().T @ Vt - np.eye(8)) < 1e-9
    assert np.linalg.norm(Vt[:, :d].conj().T @ Vt[:, d:]) < 1e-9
    assert sol.rate == pytest.approx(oracle_identity(H @ spec.L, s2, d), abs=1e-8)
    assert np.all(np.diff(sol.He_eigenvalues) <= 0)


def test_global_optimality_sampled(rng):
    spec = three_beam_spec(8)
    H = crandn(rng, 4, 8)
    s2, d = 0.05, 2
    best = solve_single_user(H, spec, s2, d).rate
    for _ in range(200):
        F = spec.L @ random_unitary(rng, 8)
        assert achievable_rate(F[:, :d], [F[:, d:]], H, s2) <= best + 1e-9


def test_rate_phase_invariant(rng):
    spec = three_beam_spec(8)
    H = crandn(rng, 4, 8)
    sol = solve_single_user(H, spec, 0.1, 3)
    D = np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, 3)))
    assert achievable_rate(sol.F_c @ D, [sol.F_r], H, 0.1) == pytest.approx(sol.rate, abs=1e-10)


def test_rate_grows_with_receive_antennas():
    spec = three_beam_spec(8)
    means = []
    for n_rx in (2, 3, 4):
        rates = []
        for t in range(200):
            Hfull = crandn(np.random.default_rng(t), 4, 8)
            rates.append(solve_single_user(Hfull[:n_rx], spec, 0.01, 2).rate)
        means.append(np.mean(rates))
    assert means[0] <= means[1] <= means[2]


def test_full_stream_degenerate():
    spec = make_covariance_spec(np.eye(4) / 4, 1.0)
    H = crandn(np.random.default_rng(3), 4, 4)
    sol = solve_single_user(H, spec, 0.1, 4)
    assert sol.F_r.shape == (4, 0)
    cap = np.linalg.slogdet(np.eye(4) + H @ H.conj().T / 4 / 0.1)[1] / np.log(2)
    assert sol.rate == pytest.approx(cap, abs=1e-10)


@pytest.mark.parametrize("kw", [dict(d=0), dict(d=5), dict(noise_var=0.0)])
def test_solve_rejects(kw):
    args = dict(d=2, noise_var=1.0) | kw
    with pytest.raises(InvalidInputError):
        solve_single_user(np.ones((4, 8)), three_beam_spec(8), args["noise_var"], args["d"])


def test_mmse_scalar():
    assert mmse_receiver(1.0, 1.0, 1.0, 1.0)[0, 0] == pytest.approx(0.5)


def test_mmse_zero_beamformer():
    np.testing.assert_array_equal(mmse_receiver(np.eye(3), np.eye(3), np.zeros((3, 2)), 1.0), 0)


def test_mmse_identity_case():
    np.testing.assert_allclose(mmse_receiver(np.eye(3), np.eye(3), np.eye(3)[:, :1], 1.0)[:, 0],
                               [0.5, 0, 0])


def test_mmse_rejects_noise():
    with pytest.raises(InvalidInputError):
        mmse_receiver(1.0, 1.0, 1.0, 0.0)


def test_rate_scalar():
    assert achievable_rate(1.0, [], 1.0, 1.0) == pytest.approx(1.0)


def test_rate_zero_signal():
    assert achievable_rate(np.zeros((3, 1)), [np.eye(3)], np.eye(3), 1.0) == 0.0


def test_rate_diag_example():
    assert achievable_rate(np.array([[1.0], [0.0]]), [np.array([[0.0], [1.0]])],
                           np.diag([2.0, 1.0]), 1.0) == pytest.approx(LOG2(5.0))


def test_rate_against_definition(rng):
    H, Fk, Fi = crandn(rng, 3, 5), crandn(rng, 5, 2), crandn(rng, 5, 3)
    s2 = 0.3
    Q = s2 * np.eye(3) + H @ Fi @ Fi.conj().T @ H.conj().T
    S = H @ Fk
    ref = np.log2(np.linalg.det(np.eye(2) + S.conj().T @ np.linalg.inv(Q) @ S).real)
    assert achievable_rate(Fk, [Fi], H, s2) == pytest.approx(ref, rel=1e-12)
