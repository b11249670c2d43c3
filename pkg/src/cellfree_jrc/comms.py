"""Downlink precoding, uplink combining, CPU fusion, and spectral efficiency.

Each serving AP combines its local observation with a_kl and forwards the
scalar estimate to the CPU, which fuses the per-AP estimates with weights
w_kl.  The effective uplink SINR of UE k is

    SINR_k = p_k |w^H v|^2 / (w^H (sum_i p_i L1_ki - p_k v v^H + sigma^2 L2_k) w)

where v[l] = E{a_kl^H h_kl}, L1_ki[l, j] = E{a_kl^H h_il h_ij^H a_kj}, and
L2_k = diag(E{||a_kl||^2}), with all quantities masked to the serving set.
Expectations are estimated by Monte Carlo over channel and pilot-noise
realizations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, NumericalDegeneracyError, NumericalError
from .estimation import estimation_matrices, simulate_pilot_estimates
from .rng import as_rng


def mr_precoder(h_hat: np.ndarray, power: float, mean_energy: float) -> np.ndarray:
    """Maximum-ratio precoder sqrt(p) * h_hat / sqrt(E{||h_hat||^2}).

    ``mean_energy`` is the statistical estimate energy (trace of the
    estimate covariance), so E{||w||^2} = power.
    """
    if mean_energy <= 0:
        raise NumericalDegeneracyError("estimate energy must be positive for MR precoding")
    return np.sqrt(power / mean_energy) * np.asarray(h_hat, dtype=complex)


def normalize_ap_power(precoders: np.ndarray) -> np.ndarray:
    """Scale a stack of per-UE precoders so their total energy is at most 1.

    Enforces the per-AP budget sum_k ||w_kl||^2 <= 1 by common scaling, which
    leaves per-UE beam directions untouched.
    """
    w = np.asarray(precoders, dtype=complex)
    total = float(np.sum(np.abs(w) ** 2))
    if total > 1.0:
        w = w / np.sqrt(total)
    return w


def lp_mmse_combiner(k, l, served, estimates, error_covs, powers, sigma2) -> np.ndarray:
    """Local partial MMSE combining vector for UE k at AP l.

    a = p_k (sum_{i in served} p_i (h_hat_i h_hat_i^H + C_i) + sigma^2 I)^{-1} h_hat_k
    where the sum runs over the UEs served by AP l.  Requires k in served.
    """
    served = list(served)
    if k not in served:
        raise InvalidConfigError(f"UE {k} is not served by AP {l}")
    h_k = np.asarray(estimates[k], dtype=complex)
    n = h_k.size
    a_mat = sigma2 * np.eye(n, dtype=complex)
    for i in served:
        h_i = np.asarray(estimates[i], dtype=complex)
        a_mat = a_mat + powers[i] * (np.outer(h_i, h_i.conj()) + np.asarray(error_covs[i]))
    try:
        return powers[k] * np.linalg.solve(a_mat, h_k)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"LP-MMSE system is singular: {exc}") from exc


@dataclass
class SinrTerms:
    """Monte Carlo estimates of the fusion-level SINR building blocks."""

    v: np.ndarray  # (K, L) complex, expected effective gains
    lambda1: np.ndarray  # (K, K, L, L) complex, Hermitian in the last two axes
    lambda2: np.ndarray  # (K, L) real, expected combiner energies
    powers: np.ndarray  # (K,) uplink transmit powers
    sigma2: float
    serving: np.ndarray  # (K, L) bool mask of the serving sets

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=complex)
        self.lambda1 = np.asarray(self.lambda1, dtype=complex)
        self.lambda2 = np.asarray(self.lambda2, dtype=float)
        self.powers = np.asarray(self.powers, dtype=float)
        self.serving = np.asarray(self.serving, dtype=bool)


def combining_vectors(h_hat, error_cov, serving, powers, sigma2, scheme="lp-mmse"):
    """Batched combining vectors, zero outside each AP's served set.

    ``h_hat`` has shape (T, K, L, N); the result matches it.
    """
    t_num, k_num, l_num, n = h_hat.shape
    a = np.zeros_like(h_hat)
    for l in range(l_num):
        served = np.flatnonzero(serving[:, l])
        if served.size == 0:
            continue
        if scheme == "mr":
            a[:, served, l] = h_hat[:, served, l]
            continue
        if scheme != "lp-mmse":
            raise InvalidConfigError(f"unknown combining scheme {scheme!r}")
        const = sigma2 * np.eye(n, dtype=complex)
        for i in served:
            const = const + powers[i] * error_cov[i, l]
        hs = h_hat[:, served, l]  # (T, S, N)
        gram = np.einsum("i,tin,tim->tnm", powers[served], hs, hs.conj())
        rhs = hs.transpose(0, 2, 1)  # (T, N, S)
        sol = np.linalg.solve(gram + const[None], rhs)  # (T, N, S)
        a[:, served, l] = (sol * powers[served][None, None, :]).transpose(0, 2, 1)
    return a


def sinr_terms_from_draws(h, a, serving, powers, sigma2) -> SinrTerms:
    """SINR terms averaged over explicitly supplied channel/combiner draws."""
    t_num, k_num, l_num, n = h.shape
    g = np.einsum("tkln,tiln->tkil", a.conj(), h)
    v = g[:, np.arange(k_num), np.arange(k_num), :].mean(axis=0)
    lambda1 = np.einsum("tkil,tkij->kilj", g, g.conj()) / t_num
    lambda2 = np.einsum("tkln,tkln->kl", a, a.conj()).real / t_num
    return SinrTerms(
        v=v,
        lambda1=lambda1,
        lambda2=lambda2,
        powers=powers,
        sigma2=sigma2,
        serving=serving,
    )


def estimate_sinr_terms(
    channel_set,
    assoc,
    pilots,
    powers,
    sigma2: float,
    scheme: str = "lp-mmse",
    n_mc: int = 1000,
    seed=0,
    chunk: int = 128,
) -> SinrTerms:
    """Monte Carlo estimates of the SINR terms over n_mc realizations.

    Each trial draws fresh channels, pilot noise, MMSE estimates, and
    combining vectors.  Accumulation is chunked; numpy's pairwise summation
    keeps the result reproducible for a fixed chunk size.
    """
    if n_mc < 1:
        raise InvalidConfigError("n_mc must be >= 1")
    k_num, l_num = channel_set.beta.shape
    n = channel_set.num_antennas
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (k_num,)).copy()
    serving = np.asarray(assoc.s, dtype=bool)
    factors = channel_set.factors()
    mmse_op, _, error_cov = estimation_matrices(channel_set, pilots, sigma2)

    sum_v = np.zeros((k_num, l_num), dtype=complex)
    sum_l1 = np.zeros((k_num, k_num, l_num, l_num), dtype=complex)
    sum_l2 = np.zeros((k_num, l_num))
    rng = as_rng(seed)
    done = 0
    while done < n_mc:
        size = min(chunk, n_mc - done)
        h = channel_set.sample(rng, size=size, factors=factors)
        h_hat = simulate_pilot_estimates(h, pilots, mmse_op, sigma2, rng)
        a = combining_vectors(h_hat, error_cov, serving, powers, sigma2, scheme)
        g = np.einsum("tkln,tiln->tkil", a.conj(), h)
        sum_v += g[:, np.arange(k_num), np.arange(k_num), :].sum(axis=0)
        sum_l1 += np.einsum("tkil,tkij->kilj", g, g.conj())
        sum_l2 += np.einsum("tkln,tkln->kl", a, a.conj()).real
        done += size
    return SinrTerms(
        v=sum_v / n_mc,
        lambda1=sum_l1 / n_mc,
        lambda2=sum_l2 / n_mc,
        powers=powers,
        sigma2=sigma2,
        serving=serving,
    )


def sinr(terms: SinrTerms, k: int, weights: np.ndarray = None) -> float:
    """Effective fusion SINR of UE k for given (or equal) CPU weights."""
    p_k = terms.powers[k]
    if p_k == 0:
        return 0.0
    if weights is None:
        w = terms.serving[k].astype(complex)
    else:
        weights = np.asarray(weights)
        w = (weights[k] if weights.ndim == 2 else weights).astype(complex)
    v = terms.v[k]
    num = p_k * abs(np.vdot(w, v)) ** 2
    denom_mat = (
        np.einsum("i,ilj->lj", terms.powers, terms.lambda1[k])
        - p_k * np.outer(v, v.conj())
        + terms.sigma2 * np.diag(terms.lambda2[k])
    )
    den = float(np.real(np.vdot(w, denom_mat @ w)))
    if den <= 0:
        raise NumericalDegeneracyError(f"nonpositive SINR denominator for UE {k}: {den}")
    return num / den


def spectral_efficiency(sinr_value: float, tau_p: int, tau_c: int) -> float:
    """Achievable spectral efficiency (1 - tau_p/tau_c) log2(1 + SINR)."""
    if not 0 < tau_p < tau_c:
        raise InvalidConfigError("need 0 < tau_p < tau_c")
    return (1.0 - tau_p / tau_c) * np.log2(1.0 + sinr_value)


def cpu_weights(scheme: str, terms: SinrTerms) -> np.ndarray:
    """(K, L) CPU fusion weights.

    ``"equal"`` puts unit weight on every serving AP.  ``"opt"`` solves the
    generalized Rayleigh-quotient maximizer of the fusion SINR on the
    serving subset, which can only improve on equal weights.
    """
    k_num, l_num = terms.v.shape
    w = np.zeros((k_num, l_num), dtype=complex)
    if scheme == "equal":
        w[terms.serving] = 1.0
        return w
    if scheme != "opt":
        raise InvalidConfigError(f"unknown CPU weight scheme {scheme!r}")
    for k in range(k_num):
        idx = np.flatnonzero(terms.serving[k])
        if idx.size == 0:
            continue
        v = terms.v[k, idx]
        p_k = terms.powers[k]
        denom = (
            np.einsum("i,ilj->lj", terms.powers, terms.lambda1[k])[np.ix_(idx, idx)]
            - p_k * np.outer(v, v.conj())
            + terms.sigma2 * np.diag(terms.lambda2[k, idx])
        )
        try:
            w[k, idx] = np.linalg.solve(denom, v)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular weight system for UE {k}: {exc}") from exc
    return w


def uplink_se(
    channel_set,
    assoc,
    pilots,
    powers,
    sigma2: float,
    tau_c: int,
    scheme: str = "lp-mmse",
    weight_scheme: str = "equal",
    n_mc: int = 1000,
    seed=0,
) -> np.ndarray:
    """Per-UE uplink spectral efficiency of one network snapshot."""
    terms = estimate_sinr_terms(
        channel_set, assoc, pilots, powers, sigma2, scheme=scheme, n_mc=n_mc, seed=seed
    )
    weights = cpu_weights(weight_scheme, terms)
    out = np.empty(channel_set.num_ues)
    for k in range(channel_set.num_ues):
        out[k] = spectral_efficiency(sinr(terms, k, weights), pilots.tau_p, tau_c)
    return out


def write_se_csv(path, se_values):
    """Per-UE SE samples as (ue_id, se_bits_per_hz)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ue_id", "se_bits_per_hz"])
        for k, se in enumerate(np.asarray(se_values, dtype=float)):
            writer.writerow([k, f"{se:.12g}"])
