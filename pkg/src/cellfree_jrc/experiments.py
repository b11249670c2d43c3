"""Experiment orchestration: figure datasets, scheme comparison, CSV export.

Every experiment is a pure function of (config, master seed): randomness is
drawn from named streams derived from the master seed, CSV floats are
formatted with a fixed precision, and rows are emitted in a deterministic
order, so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from . import aoa as aoa_mod
from . import association as assoc_mod
from . import comms
from . import coverage as cov_mod
from . import detector as det_mod
from .channel import (
    LsfcParams,
    array_response,
    build_channel_set,
    noise_power_w,
)
from .config import ExperimentConfig
from .errors import InvalidConfigError
from .estimation import assign_pilots
from .rng import rng_stream
from .topology import ClutterField, NetworkLayout, Rect, generate_layout

FIGURE_COLUMNS = {
    "5b": ["scheme", "ue_id", "se_bits_per_hz"],
    "5c": ["num_aps", "scheme", "mean_se_bits_per_hz"],
    "5d": ["scheme", "ue_id", "se_bits_per_hz"],
    "5e": ["trial", "noise_std_deg", "rmse_m"],
    "5f": ["snr_db", "aoa_error_deg", "scnr_db"],
    "6a-range": ["range_cell_m", "statistic"],
    "6b": ["scnr_db", "pdc_clutter_free", "pdc_with_clutter"],
    "6c": ["r_m", "rho_per_m2", "pdc"],
    "6d": ["r_m", "upsilon_c_avg_m2", "pdc"],
}


@dataclass
class FigureDataset:
    """Plot-ready columnar data for one figure."""

    figure_id: str
    columns: list
    rows: list

    def __post_init__(self):
        expected = FIGURE_COLUMNS.get(self.figure_id)
        if expected is not None and list(self.columns) != expected:
            raise InvalidConfigError(
                f"figure {self.figure_id} requires columns {expected}, got {self.columns}"
            )
        for row in self.rows:
            if len(row) != len(self.columns):
                raise InvalidConfigError("row length does not match column count")
            for value in row:
                if isinstance(value, float) and not math.isfinite(value):
                    raise InvalidConfigError(f"non-finite value in figure {self.figure_id}")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([_fmt(v) for v in row])


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, (np.floating,)):
        return f"{float(value):.12g}"
    return value


def _area_rect(cfg: ExperimentConfig) -> Rect:
    return Rect(*[float(v) for v in cfg.layout.area_m])


def _sigma2(cfg: ExperimentConfig) -> float:
    return noise_power_w(cfg.channel.bandwidth_hz, cfg.channel.noise_figure_db)


def _coverage_params(cfg: ExperimentConfig) -> cov_mod.CoverageParams:
    return cov_mod.CoverageParams(
        gamma=cfg.coverage.gamma,
        q=cfg.coverage.q,
        z_const=cfg.coverage.z_const,
        noise=cfg.coverage.noise_w,
        upsilon_t_avg=cfg.coverage.upsilon_t_avg,
        upsilon_c_avg=cfg.coverage.upsilon_c_avg,
        rho=cfg.coverage.rho_grid[-1] if cfg.coverage.rho_grid else 0.0,
        delta_r=cov_mod.range_resolution(cfg.channel.bandwidth_hz),
        alpha_prime=cfg.coverage.alpha_prime,
    )


SCHEMES = ("clustered", "all-serve-all", "nearest-ap")


def se_per_ue(cfg: ExperimentConfig, scheme: str, topology_index: int, num_aps: int = None):
    """Per-UE uplink SE of one random topology under a named scheme.

    ``"clustered"`` runs the capacity-aware association with the configured
    combiner; ``"all-serve-all"`` is the non-scalable baseline where every
    AP serves every UE with maximum-ratio processing; ``"nearest-ap"`` is a
    single-AP stand-in baseline.
    """
    if scheme not in SCHEMES:
        raise InvalidConfigError(f"unknown scheme {scheme!r}; use one of {SCHEMES}")
    seed = cfg.master_seed
    l_num = num_aps or cfg.layout.num_aps
    # Topology, channels, and pilots are scheme-independent streams so that
    # schemes are compared on identical network snapshots.
    layout = generate_layout(
        l_num,
        cfg.layout.num_ues,
        _area_rect(cfg),
        rng_stream(seed, "layout", topology_index, l_num),
    )
    params = LsfcParams(
        upsilon_db=cfg.channel.upsilon_db,
        alpha=cfg.channel.alpha,
        d_ref_m=cfg.channel.d_ref_m,
        sigma_sh_db=cfg.channel.sigma_sh_db,
    )
    channels = build_channel_set(
        layout,
        params,
        cfg.channel.num_antennas,
        rng_stream(seed, "channel", topology_index, l_num),
        model=cfg.channel.corr_model,
    )
    pilots = assign_pilots(
        cfg.layout.num_ues,
        cfg.estimation.tau_p,
        rng_stream(seed, "pilots", topology_index, l_num),
        pilot_power_w=cfg.estimation.pilot_power_w,
    )
    if scheme == "clustered":
        assoc = assoc_mod.initial_association(channels.beta, cfg.estimation.tau_p)
        combiner = cfg.comms.combiner
    elif scheme == "all-serve-all":
        assoc = assoc_mod.all_serve_all(cfg.layout.num_ues, l_num)
        combiner = "mr"
    else:
        assoc = assoc_mod.nearest_ap_association(layout)
        combiner = "mr"
    return comms.uplink_se(
        channels,
        assoc,
        pilots,
        cfg.comms.ue_power_w,
        _sigma2(cfg),
        cfg.estimation.tau_c,
        scheme=combiner,
        weight_scheme=cfg.comms.cpu_weights,
        n_mc=cfg.comms.n_mc,
        seed=rng_stream(seed, "se-mc", scheme, topology_index, l_num),
    )


def figure_5b(cfg: ExperimentConfig, num_topologies: int = 5) -> FigureDataset:
    """Per-UE SE samples for the clustered and all-serve-all systems."""
    rows = []
    for scheme in ("clustered", "all-serve-all"):
        ue = 0
        for t in range(num_topologies):
            for se in se_per_ue(cfg, scheme, t):
                rows.append((scheme, ue, float(se)))
                ue += 1
    return FigureDataset("5b", FIGURE_COLUMNS["5b"], rows)


def figure_5c(cfg: ExperimentConfig, num_topologies: int = 5) -> FigureDataset:
    """Mean uplink SE against the number of APs, clustered vs no clustering."""
    if cfg.full_scale:
        sweep = [25, 50, 75, 100]
    else:
        base = cfg.layout.num_aps
        sweep = sorted({max(4, round(base * f)) for f in (0.4, 0.6, 0.8, 1.0)})
    rows = []
    for l_num in sweep:
        for scheme in ("clustered", "all-serve-all"):
            means = [
                float(np.mean(se_per_ue(cfg, scheme, t, num_aps=l_num)))
                for t in range(num_topologies)
            ]
            rows.append((l_num, scheme, float(np.mean(means))))
    return FigureDataset("5c", FIGURE_COLUMNS["5c"], rows)


def figure_5d(cfg: ExperimentConfig, num_topologies: int = 5) -> FigureDataset:
    """SE distribution of clustered, all-serve-all, and nearest-AP baselines."""
    rows = []
    for scheme in SCHEMES:
        ue = 0
        for t in range(num_topologies):
            for se in se_per_ue(cfg, scheme, t):
                rows.append((scheme, ue, float(se)))
                ue += 1
    return FigureDataset("5d", FIGURE_COLUMNS["5d"], rows)


_AOA_APS = np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 100.0]])


def aoa_rmse_rows(cfg: ExperimentConfig):
    """Per-trial localization errors for every bearing-noise level."""
    rows = []
    for level_idx, noise_deg in enumerate(cfg.aoa.noise_std_deg):
        noise = math.radians(noise_deg)
        for trial in range(cfg.aoa.trials_per_level):
            rng = rng_stream(cfg.master_seed, "aoa", level_idx, trial)
            ue = rng.uniform(20.0, 80.0, size=2)
            angles = [
                aoa_mod.bearing(ap, ue) + (rng.normal(0.0, noise) if noise > 0 else 0.0)
                for ap in _AOA_APS
            ]
            est = aoa_mod.intersect_aoa(_AOA_APS, angles)
            rows.append((trial, float(noise_deg), aoa_mod.rmse([est.point], ue)))
    return rows


def figure_5e(cfg: ExperimentConfig) -> FigureDataset:
    return FigureDataset("5e", FIGURE_COLUMNS["5e"], aoa_rmse_rows(cfg))


def figure_5f(cfg: ExperimentConfig) -> FigureDataset:
    """SCNR against SNR for increasing bearing-estimation errors.

    Bearing error delta steers the sensing beam off the target: the target
    return scales by the normalized beam gain m = |a^H a_err|^2 / N^2 while
    the mispointed beam picks up clutter proportional to the leaked power,
    so SCNR = snr * m / (1 + snr * (1 - m)) saturates for delta > 0.
    """
    n = cfg.detector.num_antennas
    rows = []
    snr_grid_db = [float(x) for x in np.arange(-10.0, 21.0, 2.0)]
    for snr_db in snr_grid_db:
        snr = 10.0 ** (snr_db / 10.0)
        for err_deg in cfg.aoa.aoa_error_deg:
            a0 = array_response(0.0, 0.0, n)
            a1 = array_response(math.radians(err_deg), 0.0, n)
            m = abs(np.vdot(a0, a1)) ** 2 / n**2
            scnr = snr * m / (1.0 + snr * (1.0 - m))
            rows.append((snr_db, float(err_deg), 10.0 * math.log10(max(scnr, 1e-300))))
    return FigureDataset("5f", FIGURE_COLUMNS["5f"], rows)


def range_bias_scenario(cfg: ExperimentConfig, with_scatterer: bool = True):
    """Geometry and echo model of the dominant-scatterer range-bias demo."""
    det = cfg.detector
    area = _area_rect(cfg)
    ap = np.array([area.xmin + 100.0, area.ymin + 100.0])
    ue = ap + np.array([det.ue_range_m, 0.0])
    layout = NetworkLayout(
        ap_positions=ap[None, :], ue_positions=ue[None, :], area=area
    )
    params = _coverage_params(cfg)
    clutter = None
    if with_scatterer:
        ratio = 10.0 ** (det.scatterer_margin_db / 10.0)
        rcs = (
            params.upsilon_t_avg
            * ratio
            * (det.scatterer_range_m / det.ue_range_m) ** (2.0 * params.q)
        )
        clutter = ClutterField(
            positions=ap[None, :] + np.array([[det.scatterer_range_m, 0.0]]),
            rcs=np.array([rcs]),
            fading_gain=np.array([1.0]),
            intensity=0.0,
        )
    n = det.num_antennas
    model = det_mod.EchoModel(
        steering=array_response(0.0, 0.0, n),
        sigma2_target=det.sigma2_target,
        sigma2_clutter=0.0,
        noise_cov=np.eye(n),
    )
    return layout, clutter, model, params


def figure_6a_range(cfg: ExperimentConfig):
    layout, clutter, model, params = range_bias_scenario(cfg, with_scatterer=True)
    result = det_mod.range_estimate_bias_demo(
        layout,
        clutter,
        model,
        params=params,
        delta_r=params.delta_r,
        max_range=8.0 * params.delta_r,
        seed=rng_stream(cfg.master_seed, "range-bias"),
    )
    rows = [(float(c), float(s)) for c, s in zip(result.cell_centers_m, result.statistics)]
    dataset = FigureDataset("6a-range", FIGURE_COLUMNS["6a-range"], rows)
    summary = {
        "true_range_m": result.true_range_m,
        "estimated_range_m": result.estimated_range_m,
    }
    return dataset, summary


def figure_6b(cfg: ExperimentConfig, r: float = 15.0) -> FigureDataset:
    """Detection coverage against mean SNR, with and without clutter."""
    params = _coverage_params(cfg)
    rows = []
    for scnr_db in [float(x) for x in np.arange(-5.0, 25.5, 1.0)]:
        snr = 10.0 ** (scnr_db / 10.0)
        z = snr * params.noise * r ** (2.0 * params.q) / params.upsilon_t_avg
        clutter_free = cov_mod.pdc_los(r, params.with_(z_const=z, rho=0.0))
        cluttered = cov_mod.pdc_los(r, params.with_(z_const=z))
        rows.append((scnr_db, clutter_free, cluttered))
    return FigureDataset("6b", FIGURE_COLUMNS["6b"], rows)


def figure_6c(cfg: ExperimentConfig) -> FigureDataset:
    """Detection coverage against range for several clutter densities."""
    params = _coverage_params(cfg)
    rows = []
    for r in cfg.coverage.r_grid:
        for rho in cfg.coverage.rho_grid:
            rows.append(
                (float(r), float(rho), cov_mod.pdc_los(float(r), params.with_(rho=float(rho))))
            )
    return FigureDataset("6c", FIGURE_COLUMNS["6c"], rows)


def figure_6d(cfg: ExperimentConfig) -> FigureDataset:
    """Detection coverage against range for several clutter cross-sections."""
    params = _coverage_params(cfg)
    rows = []
    for r in cfg.coverage.r_grid:
        for ups in cfg.coverage.upsilon_c_grid:
            rows.append(
                (
                    float(r),
                    float(ups),
                    cov_mod.pdc_los(float(r), params.with_(upsilon_c_avg=float(ups))),
                )
            )
    return FigureDataset("6d", FIGURE_COLUMNS["6d"], rows)


def compare_schemes(cfg: ExperimentConfig, schemes=SCHEMES, num_topologies: int = None):
    """Mean and median SE per scheme with bootstrap confidence intervals.

    Returns one row per requested scheme:
    (scheme, mean_se_bits_per_hz, median_se_bits_per_hz, ci95_lo, ci95_hi).
    """
    num_topologies = num_topologies or cfg.comms.num_topologies
    rows = []
    for scheme in schemes:
        per_topology = np.array(
            [float(np.mean(se_per_ue(cfg, scheme, t))) for t in range(num_topologies)]
        )
        boot_rng = rng_stream(cfg.master_seed, "bootstrap", scheme)
        resamples = boot_rng.choice(
            per_topology, size=(1000, per_topology.size), replace=True
        ).mean(axis=1)
        rows.append(
            (
                scheme,
                float(np.mean(per_topology)),
                float(np.median(per_topology)),
                float(np.percentile(resamples, 2.5)),
                float(np.percentile(resamples, 97.5)),
            )
        )
    return rows


COMPARE_COLUMNS = [
    "scheme",
    "mean_se_bits_per_hz",
    "median_se_bits_per_hz",
    "ci95_lo_bits_per_hz",
    "ci95_hi_bits_per_hz",
]


def write_rows_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def run_experiment(cfg: ExperimentConfig, num_topologies: int = None):
    """Build the configured figure dataset(s), write CSVs, return a summary."""
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    scenario = cfg.scenario
    summary = {"scenario": scenario, "master_seed": cfg.master_seed}
    datasets = []
    if scenario == "compare":
        rows = compare_schemes(cfg, num_topologies=num_topologies)
        write_rows_csv(os.path.join(cfg.out_dir, "compare.csv"), COMPARE_COLUMNS, rows)
        summary["rows"] = rows
        return datasets, summary
    builders = {
        "5b": lambda: figure_5b(cfg, num_topologies or 5),
        "5c": lambda: figure_5c(cfg, num_topologies or 5),
        "5d": lambda: figure_5d(cfg, num_topologies or 5),
        "5e": lambda: figure_5e(cfg),
        "5f": lambda: figure_5f(cfg),
        "6b": lambda: figure_6b(cfg),
        "6c": lambda: figure_6c(cfg),
        "6d": lambda: figure_6d(cfg),
    }
    if scenario == "6a-range":
        dataset, extra = figure_6a_range(cfg)
        summary.update(extra)
    else:
        dataset = builders[scenario]()
    datasets.append(dataset)
    path = os.path.join(cfg.out_dir, f"figure_{scenario}.csv")
    dataset.write_csv(path)
    summary["rows_written"] = len(dataset.rows)
    summary["path"] = path
    return datasets, summary
