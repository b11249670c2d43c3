import numpy as np
import pytest

from cellfree_jrc.errors import InvalidConfigError, NumericalError
from cellfree_jrc.estimation import (
    assign_pilots,
    mmse_estimate,
    pilot_correlation,
)


def random_psd(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (a @ a.conj().T) / n + 1e-3 * np.eye(n)


def test_assign_pilots_forced_distinct():
    pilots = assign_pilots(3, 3, seed=0, force_distinct=True)
    for k in range(3):
        np.testing.assert_array_equal(pilots.sharing_set(k), [k])


def test_assign_pilots_ranges_and_coverage():
    pilots = assign_pilots(50, 10, seed=1)
    assert ((pilots.pilot_of >= 1) & (pilots.pilot_of <= 10)).all()
    covered = set()
    for k in range(50):
        sharing = pilots.sharing_set(k)
        assert k in sharing
        covered.update(int(i) for i in sharing)
    assert covered == set(range(50))


def test_assign_pilots_sharing_consistency():
    pilots = assign_pilots(6, 2, seed=2)
    for k in range(6):
        for i in pilots.sharing_set(k):
            np.testing.assert_array_equal(pilots.sharing_set(int(i)), pilots.sharing_set(k))


def test_pilot_correlation_single_ue_identity():
    phi = pilot_correlation([np.eye(3, dtype=complex)], tau_p=10, powers=[1.0], sigma2=1.0)
    np.testing.assert_allclose(phi, 11.0 * np.eye(3))


def test_pilot_correlation_noiseless_single_term():
    rng = np.random.default_rng(3)
    r = random_psd(rng, 4)
    phi = pilot_correlation([r], tau_p=5, powers=[0.2], sigma2=0.0)
    np.testing.assert_allclose(phi, 1.0 * r)


def test_pilot_correlation_dominates_noise_floor():
    rng = np.random.default_rng(4)
    mats = [random_psd(rng, 3) for _ in range(3)]
    phi = pilot_correlation(mats, tau_p=8, powers=[0.1, 0.2, 0.3], sigma2=0.7)
    evals = np.linalg.eigvalsh(phi)
    assert evals.min() >= 0.7 - 1e-12


def test_pilot_correlation_dimension_mismatch():
    with pytest.raises(InvalidConfigError):
        pilot_correlation([np.eye(2), np.eye(3)], tau_p=4, powers=[1.0, 1.0], sigma2=1.0)


def test_mmse_noiseless_single_ue_recovers_truth():
    rng = np.random.default_rng(5)
    r = random_psd(rng, 4)
    tau_p, p = 10, 0.1
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    y = np.sqrt(tau_p * p) * h
    phi = pilot_correlation([r], tau_p, [p], sigma2=0.0)
    stats = mmse_estimate(y, r, phi, tau_p, p)
    np.testing.assert_allclose(stats.h_hat, h, atol=1e-9)


def test_mmse_covariance_identity_on_random_instances():
    rng = np.random.default_rng(6)
    for _ in range(100):
        n = int(rng.integers(2, 5))
        r = random_psd(rng, n)
        others = [random_psd(rng, n) for _ in range(int(rng.integers(0, 3)))]
        tau_p = int(rng.integers(1, 12))
        p = float(rng.uniform(0.01, 1.0))
        phi = pilot_correlation(
            [r] + others, tau_p, [p] + [0.1] * len(others), sigma2=float(rng.uniform(0.1, 2.0))
        )
        y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        stats = mmse_estimate(y, r, phi, tau_p, p)
        np.testing.assert_allclose(
            stats.estimate_cov + stats.error_cov, r, atol=1e-10 * np.abs(r).max()
        )
        for mat in (stats.estimate_cov, stats.error_cov):
            np.testing.assert_allclose(mat, mat.conj().T, atol=1e-12)
            assert np.linalg.eigvalsh(mat).min() > -1e-9 * np.abs(mat).max()


def test_mmse_singular_phi_raises():
    r = np.diag([1.0, 0.0]).astype(complex)
    phi = pilot_correlation([r], tau_p=4, powers=[1.0], sigma2=0.0)
    with pytest.raises(NumericalError):
        mmse_estimate(np.array([1.0, 1.0 + 0j]), r, phi, 4, 1.0)


def _simulate_estimates(rng, r, tau_p, p, sigma2, draws):
    """Independent oracle: vectorized pilot observations through the formula."""
    n = r.shape[0]
    evals, evecs = np.linalg.eigh(r)
    factor = evecs * np.sqrt(np.clip(evals, 0, None))
    z = (rng.standard_normal((draws, n)) + 1j * rng.standard_normal((draws, n))) / np.sqrt(2)
    h = z @ factor.T
    noise = (rng.standard_normal((draws, n)) + 1j * rng.standard_normal((draws, n))) * np.sqrt(
        sigma2 / 2
    )
    y = np.sqrt(tau_p * p) * h + noise
    phi = pilot_correlation([r], tau_p, [p], sigma2)
    op = np.sqrt(tau_p * p) * r @ np.linalg.inv(phi)
    return h, y @ op.T


def test_mmse_estimate_covariance_matches_b():
    rng = np.random.default_rng(7)
    r = random_psd(rng, 3)
    tau_p, p, sigma2 = 10, 0.1, 0.5
    h, h_hat = _simulate_estimates(rng, r, tau_p, p, sigma2, draws=100_000)
    phi = pilot_correlation([r], tau_p, [p], sigma2)
    stats = mmse_estimate(np.zeros(3, dtype=complex), r, phi, tau_p, p)
    emp_cov = np.einsum("ti,tj->ij", h_hat, h_hat.conj()) / h_hat.shape[0]
    assert np.linalg.norm(emp_cov - stats.estimate_cov, "fro") < 0.02


def test_mmse_orthogonality_of_estimate_and_error():
    rng = np.random.default_rng(8)
    r = random_psd(rng, 3)
    tau_p, p, sigma2 = 8, 0.2, 1.0
    h, h_hat = _simulate_estimates(rng, r, tau_p, p, sigma2, draws=100_000)
    err = h - h_hat
    cross = np.einsum("ti,tj->ij", h_hat, err.conj()) / h.shape[0]
    assert np.linalg.norm(cross, "fro") < 0.02 * np.linalg.norm(r, "fro")


def test_estimate_energy_bounded_by_channel_energy():
    rng = np.random.default_rng(9)
    r = random_psd(rng, 4)
    tau_p, p = 6, 0.3
    # Noisy: strict inequality.
    phi = pilot_correlation([r], tau_p, [p], sigma2=0.5)
    noisy = mmse_estimate(np.zeros(4, dtype=complex), r, phi, tau_p, p)
    assert np.trace(noisy.estimate_cov).real < np.trace(r).real
    # Noiseless, no sharing: equality.
    phi0 = pilot_correlation([r], tau_p, [p], sigma2=0.0)
    clean = mmse_estimate(np.zeros(4, dtype=complex), r, phi0, tau_p, p)
    assert np.trace(clean.estimate_cov).real == pytest.approx(np.trace(r).real, rel=1e-9)


def test_pilot_sharing_increases_error():
    rng = np.random.default_rng(10)
    for _ in range(20):
        n = int(rng.integers(2, 5))
        r = random_psd(rng, n)
        sharer = random_psd(rng, n)
        tau_p, p, sigma2 = 10, 0.1, 0.3
        alone = mmse_estimate(
            np.zeros(n, dtype=complex), r, pilot_correlation([r], tau_p, [p], sigma2), tau_p, p
        )
        shared = mmse_estimate(
            np.zeros(n, dtype=complex),
            r,
            pilot_correlation([r, sharer], tau_p, [p, 0.2], sigma2),
            tau_p,
            p,
        )
        assert np.trace(shared.error_cov).real > np.trace(alone.error_cov).real
