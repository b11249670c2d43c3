"""Large-scale fading, spatial correlation, and correlated Rayleigh channels.

The large-scale fading coefficient between an AP and a UE in dB is

    beta_dB = upsilon - 10 * alpha * log10(d / d_ref) + shadowing,

and the per-link spatial correlation matrix R satisfies trace(R) / N = beta
in linear scale.  Channel vectors are zero-mean circularly symmetric complex
Gaussian with covariance R, drawn independently across APs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DecompositionError, InvalidConfigError
from .rng import as_rng


@dataclass(frozen=True)
class LsfcParams:
    """Distance-based path loss plus log-normal shadowing, all in dB."""

    upsilon_db: float = -148.1  # path loss at the reference distance
    alpha: float = 3.76  # path loss exponent
    d_ref_m: float = 1000.0
    sigma_sh_db: float = 10.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise InvalidConfigError("path loss exponent must be positive")
        if self.d_ref_m <= 0:
            raise InvalidConfigError("reference distance must be positive")
        if self.sigma_sh_db < 0:
            raise InvalidConfigError("shadowing std must be nonnegative")


def lsfc_db(params: LsfcParams, distance_m, shadow_db=0.0):
    """Large-scale fading coefficient in dB at the given distance."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise InvalidConfigError("distance must be positive")
    return params.upsilon_db - 10.0 * params.alpha * np.log10(d / params.d_ref_m) + shadow_db


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def noise_power_w(bandwidth_hz: float, noise_figure_db: float = 7.0) -> float:
    """Thermal noise power: -174 dBm/Hz + 10 log10(B) + noise figure."""
    noise_dbm = -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return 10.0 ** ((noise_dbm - 30.0) / 10.0)


def array_response(phi: float, theta: float, num_antennas: int) -> np.ndarray:
    """Uniform linear array response with half-wavelength spacing.

    Entry n is exp(j * n * pi * sin(phi) * cos(theta)) for azimuth phi and
    elevation theta; all entries have unit modulus.
    """
    if num_antennas < 1:
        raise InvalidConfigError("array needs at least one antenna")
    n = np.arange(num_antennas)
    return np.exp(1j * n * np.pi * np.sin(phi) * np.cos(theta))


def correlation_matrix(
    beta_linear: float,
    num_antennas: int,
    model: str = "uncorrelated",
    nominal_angle: float = 0.0,
    angular_std: float = math.radians(15.0),
) -> np.ndarray:
    """Spatial correlation matrix with trace(R)/N = beta_linear.

    ``"uncorrelated"`` returns beta * I.  ``"local-scattering"`` averages
    rank-one steering outer products over a Gaussian azimuth spread around
    ``nominal_angle``, which is Hermitian PSD by construction and keeps the
    normalized trace exact because steering entries have unit modulus.
    """
    if beta_linear <= 0:
        raise InvalidConfigError("beta must be positive")
    if num_antennas < 1:
        raise InvalidConfigError("num_antennas must be >= 1")
    if model == "uncorrelated":
        return beta_linear * np.eye(num_antennas, dtype=complex)
    if model == "local-scattering":
        nodes, weights = np.polynomial.legendre.leggauss(64)
        span = 5.0 * angular_std
        phis = nominal_angle + span * nodes
        w = np.exp(-0.5 * (span * nodes / angular_std) ** 2) * weights
        w = w / w.sum()
        steer = np.exp(
            1j * np.arange(num_antennas)[:, None] * np.pi * np.sin(phis)[None, :]
        )  # (N, nodes)
        r = (steer * w[None, :]) @ steer.conj().T
        return beta_linear * r
    raise InvalidConfigError(f"unknown correlation model {model!r}")


def covariance_factor(corr: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Factor A with A @ A^H = R for a Hermitian PSD matrix R.

    Uses an eigendecomposition so that rank-deficient matrices are handled;
    raises ``DecompositionError`` when R has a meaningfully negative
    eigenvalue.
    """
    corr = np.asarray(corr, dtype=complex)
    evals, evecs = np.linalg.eigh(corr)
    scale = max(evals.max(initial=0.0), 1.0)
    if evals.min(initial=0.0) < -tol * scale:
        raise DecompositionError("correlation matrix is not positive semidefinite")
    evals = np.clip(evals, 0.0, None)
    return evecs * np.sqrt(evals)[None, :]


def sample_channel(corr: np.ndarray, seed, size: int = None) -> np.ndarray:
    """Draw channel vector(s) from a circularly symmetric Gaussian with covariance R.

    Returns shape (N,) for ``size=None`` and (size, N) otherwise.
    """
    factor = covariance_factor(corr)
    rng = as_rng(seed)
    n = factor.shape[0]
    draws = 1 if size is None else int(size)
    z = (rng.standard_normal((draws, n)) + 1j * rng.standard_normal((draws, n))) / math.sqrt(2.0)
    h = z @ factor.T
    return h[0] if size is None else h


@dataclass
class ChannelSet:
    """Per-link spatial statistics for every (UE, AP) pair.

    ``corr`` has shape (K, L, N, N), ``beta`` is the matching (K, L) matrix
    of linear-scale large-scale fading coefficients.
    """

    corr: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.corr = np.asarray(self.corr, dtype=complex)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.corr.ndim != 4 or self.corr.shape[:2] != self.beta.shape:
            raise InvalidConfigError("corr must be (K, L, N, N) matching beta (K, L)")

    @property
    def num_ues(self) -> int:
        return self.corr.shape[0]

    @property
    def num_aps(self) -> int:
        return self.corr.shape[1]

    @property
    def num_antennas(self) -> int:
        return self.corr.shape[2]

    def factors(self) -> np.ndarray:
        """(K, L, N, N) factors A with A A^H = R, for fast batched sampling."""
        k, l, n, _ = self.corr.shape
        out = np.empty_like(self.corr)
        for i in range(k):
            for j in range(l):
                out[i, j] = covariance_factor(self.corr[i, j])
        return out

    def sample(self, seed, size: int = 1, factors: np.ndarray = None) -> np.ndarray:
        """Draw (size, K, L, N) channel realizations, independent across APs."""
        rng = as_rng(seed)
        if factors is None:
            factors = self.factors()
        k, l, n, _ = self.corr.shape
        z = (
            rng.standard_normal((size, k, l, n)) + 1j * rng.standard_normal((size, k, l, n))
        ) / math.sqrt(2.0)
        return np.einsum("klmn,tkln->tklm", factors, z)


def build_channel_set(
    layout,
    params: LsfcParams,
    num_antennas: int,
    seed,
    model: str = "uncorrelated",
) -> ChannelSet:
    """LSFCs with i.i.d. shadowing per link, then correlation matrices."""
    rng = as_rng(seed)
    dist = layout.distances()
    shadow = rng.normal(0.0, params.sigma_sh_db, size=dist.shape)
    beta = db_to_linear(lsfc_db(params, dist, shadow))
    k, l = beta.shape
    corr = np.empty((k, l, num_antennas, num_antennas), dtype=complex)
    for i in range(k):
        for j in range(l):
            angle = rng.uniform(0.0, 2.0 * math.pi) if model == "local-scattering" else 0.0
            corr[i, j] = correlation_matrix(
                beta[i, j], num_antennas, model=model, nominal_angle=angle
            )
    return ChannelSet(corr=corr, beta=beta)
