"""Signal-to-clutter-plus-noise ratio and detection-coverage probability.

A target at range r returns power Z * upsilon_t / r^(2q); discrete clutter
scatterers inside the same range-resolution cell form a Poisson point
process of intensity rho and return Z * G(theta_c) * upsilon_c * g_c /
r_c^(2q) each.  Detection coverage is the probability that the resulting
SCNR meets a threshold gamma.  With an exponentially fluctuating target
cross-section, the probability generating functional of the Poisson process
gives the closed form

    P_dc(r) = I(r) * exp(-gamma * n_l * r^(2q) / (Z * upsilon_t_avg)),
    I(r) = exp(-rho * int_0^{2pi} int_r^{r+dR}
               nu G(th) r_c / (nu G(th) + r_c^(2q)) dr_c dth),
    nu(r) = gamma * r^(2q) * upsilon_c_avg / upsilon_t_avg,

where the radial integrand already carries the polar area measure r_c.
Through-clutter (NLoS) propagation multiplies both ways of every path by
exp(-alpha' * range), which inflates nu and the noise exponent by
exp(2 alpha' r) and the clutter denominator by exp(2 alpha' r_c).

A brute-force Monte Carlo oracle realizes the same experiment by sampling
clutter fields and comparing the drawn SCNR with gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import IntegrationError, InvalidConfigError
from .rng import as_rng

SPEED_OF_LIGHT = 299_792_458.0
TWO_PI = 2.0 * math.pi


def range_resolution(bandwidth_hz: float) -> float:
    """Width of one radar range cell, c / (2 * bandwidth)."""
    if bandwidth_hz <= 0:
        raise InvalidConfigError("bandwidth must be positive")
    return SPEED_OF_LIGHT / (2.0 * bandwidth_hz)


def radar_constant(power_w: float, wavelength_m: float) -> float:
    """Radar-equation constant p * lambda^2 / (4 pi)^3."""
    return power_w * wavelength_m**2 / (4.0 * math.pi) ** 3


def effective_attenuation(material_alpha: float, rho: float, upsilon_0: float) -> float:
    """Effective through-clutter attenuation alpha' = alpha * rho * upsilon_0.

    ``material_alpha`` is the material attenuation in nepers/m, scaled by
    the fraction of the path covered by scatterers (intensity times mean
    physical scatterer area).
    """
    if material_alpha < 0 or rho < 0 or upsilon_0 < 0:
        raise InvalidConfigError("attenuation factors must be nonnegative")
    return material_alpha * rho * upsilon_0


@dataclass(frozen=True)
class CoverageParams:
    """Parameters of the SCNR / detection-coverage analytics."""

    gamma: float = 10.0  # detection threshold, linear
    q: float = 2.0  # one-way path loss exponent (two-way loss uses 2q)
    z_const: float = 1e-6  # radar constant, watts * m^2
    noise: float = 1e-12  # receiver noise power, watts
    upsilon_t_avg: float = 1.0  # mean target cross-section, m^2
    upsilon_c_avg: float = 0.5  # mean clutter cross-section, m^2
    rho: float = 0.05  # clutter intensity, per m^2
    delta_r: float = 7.5  # range resolution, meters
    alpha_prime: float = 0.0  # effective attenuation, nepers/m
    gain: Optional[Callable] = None  # G(theta_c); None means isotropic G = 1

    def __post_init__(self):
        positives = {
            "gamma": self.gamma,
            "q": self.q,
            "z_const": self.z_const,
            "noise": self.noise,
            "upsilon_t_avg": self.upsilon_t_avg,
            "upsilon_c_avg": self.upsilon_c_avg,
            "delta_r": self.delta_r,
        }
        for name, value in positives.items():
            if value <= 0:
                raise InvalidConfigError(f"{name} must be positive")
        if self.rho < 0:
            raise InvalidConfigError("rho must be nonnegative")
        if self.alpha_prime < 0:
            raise InvalidConfigError("alpha_prime must be nonnegative")

    def with_(self, **kwargs) -> "CoverageParams":
        return replace(self, **kwargs)

    def gain_values(self, theta) -> np.ndarray:
        if self.gain is None:
            return np.ones_like(np.asarray(theta, dtype=float))
        return np.asarray(self.gain(np.asarray(theta, dtype=float)), dtype=float)


def scnr_realization(
    r_target: float,
    clutter,
    params: CoverageParams,
    upsilon_t: float = None,
    seed=None,
    origin=(0.0, 0.0),
) -> float:
    """SCNR for one clutter realization, seen from ``origin``.

    The target cross-section is drawn Exp(upsilon_t_avg) unless supplied.
    With ``alpha_prime`` > 0 the through-clutter attenuation multiplies the
    target return by exp(-2 alpha' r) and each clutter return by
    exp(-2 alpha' r_c).
    """
    if r_target <= 0:
        raise InvalidConfigError("target range must be positive")
    if upsilon_t is None:
        upsilon_t = float(as_rng(seed).exponential(params.upsilon_t_avg))
    signal = (
        params.z_const
        * upsilon_t
        * math.exp(-2.0 * params.alpha_prime * r_target)
        / r_target ** (2.0 * params.q)
    )
    clutter_power = 0.0
    if clutter is not None and clutter.num_scatterers:
        ranges = clutter.ranges_from(origin)
        gains = params.gain_values(clutter.bearings_from(origin))
        clutter_power = float(
            np.sum(
                params.z_const
                * gains
                * clutter.rcs
                * clutter.fading_gain
                * np.exp(-2.0 * params.alpha_prime * ranges)
                / ranges ** (2.0 * params.q)
            )
        )
    return signal / (params.noise + clutter_power)


def per_link_scnr(ap_position, ue_position, clutter, params: CoverageParams) -> float:
    """Deterministic per-link SCNR used to rank APs during association.

    Uses the mean target cross-section and only the clutter inside the
    UE's range-resolution cell [R, R + delta_r) of this AP, with unit
    fading gains (worst case).
    """
    ap_position = np.asarray(ap_position, dtype=float)
    ue_position = np.asarray(ue_position, dtype=float)
    r = float(np.hypot(*(ue_position - ap_position)))
    if r <= 0:
        raise InvalidConfigError("AP and UE positions coincide")
    signal = params.z_const * params.upsilon_t_avg / r ** (2.0 * params.q)
    clutter_power = 0.0
    if clutter is not None and clutter.num_scatterers:
        ranges = clutter.ranges_from(ap_position)
        in_cell = (ranges >= r) & (ranges < r + params.delta_r)
        if in_cell.any():
            gains = params.gain_values(clutter.bearings_from(ap_position)[in_cell])
            clutter_power = float(
                np.sum(
                    params.z_const
                    * gains
                    * clutter.rcs[in_cell]
                    / ranges[in_cell] ** (2.0 * params.q)
                )
            )
    return signal / (params.noise + clutter_power)


def _cell_integral(
    nu: float,
    params: CoverageParams,
    r_lo: float,
    r_hi: float,
    two_alpha: float,
    n_radial: int,
    n_angular: int,
    jacobian_in_integrand: bool,
) -> float:
    """Tensor Gauss-Legendre quadrature of the clutter cell integral."""
    x, w = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * (r_hi - r_lo) * x + 0.5 * (r_hi + r_lo)
    wr = 0.5 * (r_hi - r_lo) * w
    measure = r if jacobian_in_integrand else r * r
    denom_radial = r ** (2.0 * params.q) * np.exp(two_alpha * r)
    if params.gain is None:
        vals = nu * measure / (nu + denom_radial)
        return TWO_PI * float(vals @ wr)
    xt, wt = np.polynomial.legendre.leggauss(n_angular)
    theta = math.pi * xt + math.pi
    wth = math.pi * wt
    g = params.gain_values(theta)
    grid = (nu * g[None, :]) * measure[:, None] / (nu * g[None, :] + denom_radial[:, None])
    return float(wr @ grid @ wth)


def _converged_cell_integral(
    nu, params, r_lo, r_hi, two_alpha, jacobian_in_integrand, tol=1e-8
) -> float:
    """Refine the quadrature by node doubling until successive estimates agree."""
    n_radial, n_angular = 64, 32
    estimates = [
        _cell_integral(
            nu, params, r_lo, r_hi, two_alpha, n_radial, n_angular, jacobian_in_integrand
        )
    ]
    for _ in range(6):
        n_radial *= 2
        n_angular *= 2
        estimates.append(
            _cell_integral(
                nu, params, r_lo, r_hi, two_alpha, n_radial, n_angular, jacobian_in_integrand
            )
        )
        if abs(estimates[-1] - estimates[-2]) < tol:
            return estimates[-1]
    raise IntegrationError(
        f"cell integral did not converge below {tol} after refinement", estimates
    )


def pdc_los(r: float, params: CoverageParams, jacobian_in_integrand: bool = True) -> float:
    """Closed-form detection-coverage probability under line of sight.

    ``jacobian_in_integrand=True`` (default) treats the radial integrand as
    already carrying the polar area measure r_c, which is the reading the
    Monte Carlo oracle confirms; the alternative multiplies an extra r_c in.
    """
    if r <= 0:
        raise InvalidConfigError("range must be positive")
    exponent = params.gamma * params.noise * r ** (2.0 * params.q) / (
        params.z_const * params.upsilon_t_avg
    )
    base = math.exp(-exponent)
    if params.rho == 0:
        return base
    nu = params.gamma * r ** (2.0 * params.q) * params.upsilon_c_avg / params.upsilon_t_avg
    integral = _converged_cell_integral(
        nu, params, r, r + params.delta_r, 0.0, jacobian_in_integrand
    )
    return math.exp(-params.rho * integral) * base


def pdc_nlos(r: float, params: CoverageParams, jacobian_in_integrand: bool = True) -> float:
    """Closed-form detection-coverage probability through clutter (NLoS).

    Reduces exactly to the LoS expression when alpha_prime = 0.
    """
    if r <= 0:
        raise InvalidConfigError("range must be positive")
    two_alpha = 2.0 * params.alpha_prime
    growth = math.exp(two_alpha * r)
    exponent = (
        params.gamma
        * params.noise
        * r ** (2.0 * params.q)
        * growth
        / (params.z_const * params.upsilon_t_avg)
    )
    base = math.exp(-exponent)
    if params.rho == 0:
        return base
    nu = (
        params.gamma
        * r ** (2.0 * params.q)
        * growth
        * params.upsilon_c_avg
        / params.upsilon_t_avg
    )
    integral = _converged_cell_integral(
        nu, params, r, r + params.delta_r, two_alpha, jacobian_in_integrand
    )
    return math.exp(-params.rho * integral) * base


class PdcEstimate(NamedTuple):
    estimate: float
    stderr: float


def pdc_monte_carlo(
    r: float,
    params: CoverageParams,
    mode: str = "los",
    trials: int = 100_000,
    seed=0,
) -> PdcEstimate:
    """Brute-force oracle: fraction of realizations whose SCNR meets gamma.

    Each trial draws a Swerling-1 target cross-section, a Poisson number of
    scatterers area-uniform on the annulus [r, r + delta_r), and exponential
    clutter cross-sections with unit fading gains.  ``mode="nlos"`` applies
    the through-clutter attenuation factors to both target and clutter.
    """
    if trials < 1:
        raise InvalidConfigError("trials must be >= 1")
    if mode not in ("los", "nlos"):
        raise InvalidConfigError(f"unknown mode {mode!r}")
    rng = as_rng(seed)
    alpha = params.alpha_prime if mode == "nlos" else 0.0
    q2 = 2.0 * params.q
    area = math.pi * ((r + params.delta_r) ** 2 - r**2)
    counts = (
        rng.poisson(params.rho * area, size=trials)
        if params.rho > 0
        else np.zeros(trials, dtype=int)
    )
    total = int(counts.sum())
    clutter_power = np.zeros(trials)
    if total:
        u = rng.uniform(size=total)
        radii = np.sqrt(r**2 + u * ((r + params.delta_r) ** 2 - r**2))
        thetas = rng.uniform(0.0, TWO_PI, size=total)
        ups = rng.exponential(params.upsilon_c_avg, size=total)
        contrib = (
            params.z_const
            * params.gain_values(thetas)
            * ups
            * np.exp(-2.0 * alpha * radii)
            / radii**q2
        )
        idx = np.repeat(np.arange(trials), counts)
        clutter_power = np.bincount(idx, weights=contrib, minlength=trials)
    upsilon_t = rng.exponential(params.upsilon_t_avg, size=trials)
    signal = params.z_const * upsilon_t * math.exp(-2.0 * alpha * r) / r**q2
    detected = signal >= params.gamma * (params.noise + clutter_power)
    p = float(detected.mean())
    stderr = math.sqrt(max(p * (1.0 - p), 0.0) / trials)
    return PdcEstimate(p, stderr)


def coverage_grid(
    r_values,
    rho_values,
    params: CoverageParams,
    mode: str = "los",
    trials: int = 0,
    seed=0,
):
    """Rows (r, rho, upsilon_c_avg, alpha_prime, pdc_closed, pdc_mc, stderr).

    The Monte Carlo columns are empty strings when ``trials`` is zero.
    """
    closed = pdc_nlos if mode == "nlos" else pdc_los
    rows = []
    for i, r in enumerate(r_values):
        for j, rho in enumerate(rho_values):
            p = params.with_(rho=float(rho))
            pc = closed(float(r), p)
            if trials:
                mc = pdc_monte_carlo(float(r), p, mode=mode, trials=trials, seed=(seed, i, j))
                rows.append(
                    (float(r), float(rho), p.upsilon_c_avg, p.alpha_prime, pc, mc.estimate, mc.stderr)
                )
            else:
                rows.append((float(r), float(rho), p.upsilon_c_avg, p.alpha_prime, pc, "", ""))
    return rows
