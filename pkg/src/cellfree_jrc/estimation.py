"""Pilot assignment and MMSE channel estimation with error statistics.

UEs transmit pilots from a fixed orthogonal set of size tau_p; UEs sharing
a pilot contaminate each other's estimates.  For the pilot-matched signal

    y = sum_{i in V} sqrt(tau_p * p_i) h_il + noise,

the MMSE estimate of h_kl is h_hat = sqrt(tau_p * p_k) R_kl Phi^{-1} y with
Phi = sum_{i in V} tau_p p_i R_il + sigma^2 I.  The estimate covariance is
B = tau_p p_k R Phi^{-1} R and the error covariance is C = R - B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidConfigError, NumericalError
from .rng import as_rng


@dataclass
class PilotAssignment:
    """Pilot indices (1-based, in {1..tau_p}) and per-UE pilot powers."""

    pilot_of: np.ndarray  # (K,) ints in 1..tau_p
    tau_p: int
    pilot_power: np.ndarray  # (K,) watts

    def __post_init__(self):
        self.pilot_of = np.asarray(self.pilot_of, dtype=int)
        self.pilot_power = np.broadcast_to(
            np.asarray(self.pilot_power, dtype=float), self.pilot_of.shape
        ).copy()
        if self.tau_p < 1:
            raise InvalidConfigError("tau_p must be >= 1")
        if ((self.pilot_of < 1) | (self.pilot_of > self.tau_p)).any():
            raise InvalidConfigError("pilot indices must lie in 1..tau_p")

    @property
    def num_ues(self) -> int:
        return self.pilot_of.size

    def sharing_set(self, k: int) -> np.ndarray:
        """Indices of UEs using the same pilot as UE k (including k)."""
        return np.flatnonzero(self.pilot_of == self.pilot_of[k])


def assign_pilots(
    num_ues: int,
    tau_p: int,
    seed,
    pilot_power_w: float = 0.1,
    force_distinct: bool = False,
) -> PilotAssignment:
    """Assign pilots uniformly at random (or as a permutation if distinct)."""
    if tau_p < 1:
        raise InvalidConfigError("tau_p must be >= 1")
    rng = as_rng(seed)
    if force_distinct:
        if tau_p < num_ues:
            raise InvalidConfigError("distinct pilots need tau_p >= num_ues")
        pilots = rng.permutation(tau_p)[:num_ues] + 1
    else:
        pilots = rng.integers(1, tau_p + 1, size=num_ues)
    return PilotAssignment(pilot_of=pilots, tau_p=tau_p, pilot_power=pilot_power_w)


@dataclass
class EstimateStats:
    """MMSE estimate of one channel together with its second-order statistics."""

    h_hat: np.ndarray  # (N,) complex
    estimate_cov: np.ndarray  # B, (N, N)
    error_cov: np.ndarray  # C = R - B, (N, N)


def pilot_correlation(sharing_corr, tau_p: int, powers, sigma2: float) -> np.ndarray:
    """Correlation matrix of the pilot-matched signal at one AP.

    Phi = sum_i tau_p * p_i * R_i + sigma^2 * I over the pilot-sharing set.
    """
    mats = [np.asarray(r, dtype=complex) for r in sharing_corr]
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (len(mats),))
    n = mats[0].shape[0]
    for r in mats:
        if r.shape != (n, n):
            raise InvalidConfigError("correlation matrices must share one dimension")
    phi = sigma2 * np.eye(n, dtype=complex)
    for p_i, r in zip(powers, mats):
        phi = phi + tau_p * p_i * r
    return phi


def mmse_estimate(y_pilot, corr, phi, tau_p: int, p_k: float) -> EstimateStats:
    """MMSE channel estimate from one pilot observation.

    Uses Hermitian solves rather than explicit inverses; a singular Phi
    raises ``NumericalError``.
    """
    corr = np.asarray(corr, dtype=complex)
    y = np.asarray(y_pilot, dtype=complex)
    scale = np.sqrt(tau_p * p_k)
    try:
        phi_inv_y = scipy.linalg.solve(phi, y, assume_a="her")
        phi_inv_r = scipy.linalg.solve(phi, corr, assume_a="her")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"pilot correlation matrix is singular: {exc}") from exc
    h_hat = scale * corr @ phi_inv_y
    b = tau_p * p_k * corr @ phi_inv_r
    b = 0.5 * (b + b.conj().T)
    c = corr - b
    c = 0.5 * (c + c.conj().T)
    return EstimateStats(h_hat=h_hat, estimate_cov=b, error_cov=c)


def estimation_matrices(channel_set, pilots: PilotAssignment, sigma2: float):
    """Precompute per-link estimation operators for batched simulation.

    Returns ``(mmse_op, b, c)`` where ``mmse_op[k, l]`` maps the pilot
    observation at AP l to the estimate of h_kl, and ``b``/``c`` are the
    (K, L, N, N) estimate and error covariances.
    """
    k_num, l_num, n, _ = channel_set.corr.shape
    mmse_op = np.empty((k_num, l_num, n, n), dtype=complex)
    b = np.empty_like(mmse_op)
    c = np.empty_like(mmse_op)
    tau_p = pilots.tau_p
    for l in range(l_num):
        phi_cache = {}
        for k in range(k_num):
            t = pilots.pilot_of[k]
            if t not in phi_cache:
                sharers = np.flatnonzero(pilots.pilot_of == t)
                phi_cache[t] = pilot_correlation(
                    [channel_set.corr[i, l] for i in sharers],
                    tau_p,
                    pilots.pilot_power[sharers],
                    sigma2,
                )
            phi = phi_cache[t]
            corr = channel_set.corr[k, l]
            scale = np.sqrt(tau_p * pilots.pilot_power[k])
            phi_inv_r = scipy.linalg.solve(phi, corr, assume_a="her")
            mmse_op[k, l] = scale * (phi_inv_r.conj().T)
            bk = tau_p * pilots.pilot_power[k] * corr @ phi_inv_r
            b[k, l] = 0.5 * (bk + bk.conj().T)
            c[k, l] = corr - b[k, l]
    return mmse_op, b, c


def simulate_pilot_estimates(h, pilots: PilotAssignment, mmse_op, sigma2: float, seed):
    """Estimated channels for batched true channels h of shape (T, K, L, N).

    UEs sharing a pilot see the same pilot observation per AP, so their
    estimates are built from a common noisy sum.
    """
    rng = as_rng(seed)
    t_num, k_num, l_num, n = h.shape
    amp = np.sqrt(pilots.tau_p * pilots.pilot_power)  # (K,)
    h_hat = np.empty_like(h)
    for t in np.unique(pilots.pilot_of):
        sharers = np.flatnonzero(pilots.pilot_of == t)
        y = np.einsum("i,tiln->tln", amp[sharers], h[:, sharers])
        noise = (
            rng.standard_normal((t_num, l_num, n)) + 1j * rng.standard_normal((t_num, l_num, n))
        ) * np.sqrt(sigma2 / 2.0)
        y = y + noise
        for k in sharers:
            h_hat[:, k] = np.einsum("lnm,tlm->tln", mmse_op[k], y)
    return h_hat
