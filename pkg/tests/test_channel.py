import numpy as np
import pytest

from cellfree_jrc.channel import (
    ChannelSet,
    LsfcParams,
    array_response,
    build_channel_set,
    correlation_matrix,
    db_to_linear,
    lsfc_db,
    noise_power_w,
    sample_channel,
)
from cellfree_jrc.errors import DecompositionError, InvalidConfigError
from cellfree_jrc.topology import Rect, generate_layout

PARAMS = LsfcParams(upsilon_db=-148.1, alpha=3.76, d_ref_m=1000.0, sigma_sh_db=10.0)


def test_lsfc_reference_point():
    assert lsfc_db(PARAMS, 1000.0, 0.0) == pytest.approx(-148.1)


def test_lsfc_at_100m():
    # -148.1 - 37.6 * log10(0.1) = -148.1 + 37.6 = -110.5 dB
    assert lsfc_db(PARAMS, 100.0, 0.0) == pytest.approx(-110.5, abs=1e-9)


def test_lsfc_monotone_in_distance():
    d = np.linspace(10.0, 1000.0, 50)
    values = lsfc_db(PARAMS, d, 0.0)
    assert (np.diff(values) < 0).all()


def test_lsfc_rejects_nonpositive_distance():
    with pytest.raises(InvalidConfigError):
        lsfc_db(PARAMS, 0.0)


def test_correlation_matrix_uncorrelated():
    r = correlation_matrix(2.0, 4, model="uncorrelated")
    np.testing.assert_allclose(r, 2.0 * np.eye(4))


def test_correlation_matrix_local_scattering_trace_and_psd():
    for beta in (0.5, 3.0):
        r = correlation_matrix(beta, 4, model="local-scattering", nominal_angle=0.4)
        assert abs(np.trace(r).real / 4 - beta) < 1e-10 * beta
        evals = np.linalg.eigvalsh(r)
        assert evals.min() > -1e-12
        # genuinely correlated: off-diagonal mass present
        assert np.abs(r - np.diag(np.diag(r))).max() > 1e-3


def test_correlation_matrix_single_antenna():
    np.testing.assert_allclose(correlation_matrix(0.7, 1), [[0.7]])


def test_sample_channel_zero_covariance():
    h = sample_channel(np.zeros((3, 3)), seed=0)
    np.testing.assert_array_equal(h, np.zeros(3))


def test_sample_channel_identity_covariance():
    draws = sample_channel(np.eye(2, dtype=complex), seed=1, size=100_000)
    cov = np.einsum("ti,tj->ij", draws, draws.conj()) / draws.shape[0]
    assert np.linalg.norm(cov - np.eye(2), "fro") < 0.02


def test_sample_channel_null_direction():
    draws = sample_channel(np.diag([4.0, 0.0]).astype(complex), seed=2, size=1000)
    np.testing.assert_allclose(draws[:, 1], 0.0, atol=1e-12)


def test_sample_channel_rejects_indefinite():
    with pytest.raises(DecompositionError):
        sample_channel(np.diag([1.0, -1.0]).astype(complex), seed=0)


def test_array_response_boresight_is_ones():
    np.testing.assert_allclose(array_response(0.0, 0.7, 4), np.ones(4))


def test_array_response_norm():
    for phi, theta, n in [(0.3, 0.1, 4), (1.2, -0.4, 7)]:
        assert np.linalg.norm(array_response(phi, theta, n)) == pytest.approx(np.sqrt(n))


def test_array_response_endfire_two_elements():
    np.testing.assert_allclose(
        array_response(np.pi / 2, 0.0, 2), [1.0, np.exp(1j * np.pi)], atol=1e-12
    )


def test_array_response_conjugate_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(10):
        phi, theta = rng.uniform(-np.pi / 2, np.pi / 2, size=2)
        np.testing.assert_allclose(
            array_response(-phi, theta, 5), array_response(phi, theta, 5).conj(), atol=1e-12
        )


def test_build_channel_set_trace_invariant():
    layout = generate_layout(5, 3, Rect(0, 0, 200, 200), seed=9)
    channels = build_channel_set(layout, PARAMS, 4, seed=10)
    traces = np.einsum("klnn->kl", channels.corr).real / 4
    np.testing.assert_allclose(traces, channels.beta, rtol=1e-10)


def test_cross_ap_independence():
    # Empirical cross-covariance between the channels of one UE at two APs
    # stays below 0.02 * sqrt(beta_1 beta_2) * N over 1e5 draws.
    beta = np.array([[2.0, 0.5]])
    corr = np.stack(
        [np.stack([2.0 * np.eye(2, dtype=complex), 0.5 * np.eye(2, dtype=complex)])]
    )
    cs = ChannelSet(corr=corr, beta=beta)
    draws = cs.sample(seed=11, size=100_000)
    h1, h2 = draws[:, 0, 0], draws[:, 0, 1]
    cross = np.einsum("ti,tj->ij", h1, h2.conj()) / draws.shape[0]
    assert np.linalg.norm(cross, "fro") < 0.02 * np.sqrt(2.0 * 0.5) * 2


def test_noise_power_default():
    # -174 dBm/Hz + 10 log10(20 MHz) + 7 dB = -93.99 dBm
    assert 10 * np.log10(noise_power_w(20e6) * 1000) == pytest.approx(-93.99, abs=0.01)


def test_db_round_trip():
    values = np.array([0.25, 1.0, 7.5])
    np.testing.assert_allclose(db_to_linear(10 * np.log10(values)), values)
