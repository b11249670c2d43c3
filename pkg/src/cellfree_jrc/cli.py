"""Command-line interface for the simulation harness.

Subcommands: layout, se, associate, pdc, aoa, detect, figure <id>, compare.
Exit codes: 0 on success, 2 on configuration validation failure, 3 on
numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import association as assoc_mod
from . import comms
from . import coverage as cov_mod
from . import detector as det_mod
from . import experiments as exp_mod
from .channel import LsfcParams, array_response, build_channel_set, noise_power_w
from .config import FIGURE_IDS, ExperimentConfig
from .errors import InvalidConfigError, NumericalError
from .estimation import assign_pilots
from .rng import rng_stream
from .topology import Rect, generate_layout, sample_clutter, write_entities_csv


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellfree-jrc",
        description="Joint radar and communication cell-free massive MIMO simulator",
    )
    parser.add_argument("--config", metavar="PATH", help="YAML configuration file")
    parser.add_argument("--seed", type=int, metavar="N", help="override the master seed")
    parser.add_argument("--out", metavar="DIR", help="output directory for CSV files")
    parser.add_argument(
        "--full-scale",
        action="store_true",
        help="run at the large-network scale (100 APs, 50 UEs, 4 antennas)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("layout", help="generate a layout plus clutter and write the entity CSV")
    sub.add_parser("se", help="per-UE uplink SE of one clustered snapshot")
    sub.add_parser("associate", help="two-phase association with a before/after diff")
    sub.add_parser("pdc", help="detection-coverage grid: closed form vs Monte Carlo")
    sub.add_parser("aoa", help="bearing-intersection RMSE sweep")
    sub.add_parser("detect", help="detector calibration and ROC-style sweep")
    fig = sub.add_parser("figure", help="build one figure dataset")
    fig.add_argument("figure_id", choices=FIGURE_IDS)
    sub.add_parser("compare", help="scheme comparison summary table")
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.full_scale:
        cfg = cfg.at_full_scale()
    return cfg


def _cmd_layout(cfg: ExperimentConfig) -> int:
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    layout = generate_layout(
        cfg.layout.num_aps,
        cfg.layout.num_ues,
        Rect(*cfg.layout.area_m),
        rng_stream(cfg.master_seed, "layout", 0, cfg.layout.num_aps),
    )
    clutter = sample_clutter(
        cfg.association.clutter_intensity,
        Rect(*cfg.layout.area_m),
        cfg.coverage.upsilon_c_avg,
        rng_stream(cfg.master_seed, "clutter"),
    )
    path = os.path.join(cfg.out_dir, "entities.csv")
    write_entities_csv(path, layout=layout, clutter=clutter)
    print(
        f"wrote {path}: {layout.num_aps} APs, {layout.num_ues} UEs, "
        f"{clutter.num_scatterers} scatterers"
    )
    return 0


def _cmd_se(cfg: ExperimentConfig) -> int:
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    se = exp_mod.se_per_ue(cfg, "clustered", 0)
    path = os.path.join(cfg.out_dir, "se_per_ue.csv")
    comms.write_se_csv(path, se)
    print(f"wrote {path}: mean SE {np.mean(se):.3f} bits/s/Hz over {se.size} UEs")
    return 0


def _cmd_associate(cfg: ExperimentConfig) -> int:
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    from . import aoa as aoa_mod

    layout = generate_layout(
        cfg.layout.num_aps,
        cfg.layout.num_ues,
        Rect(*cfg.layout.area_m),
        rng_stream(cfg.master_seed, "layout", 0, cfg.layout.num_aps),
    )
    params = LsfcParams(
        upsilon_db=cfg.channel.upsilon_db,
        alpha=cfg.channel.alpha,
        d_ref_m=cfg.channel.d_ref_m,
        sigma_sh_db=cfg.channel.sigma_sh_db,
    )
    channels = build_channel_set(
        layout, params, cfg.channel.num_antennas, rng_stream(cfg.master_seed, "channel", 0)
    )
    before = assoc_mod.initial_association(channels.beta, cfg.estimation.tau_p)
    clutter = sample_clutter(
        cfg.association.clutter_intensity,
        Rect(*cfg.layout.area_m),
        cfg.coverage.upsilon_c_avg,
        rng_stream(cfg.master_seed, "clutter"),
    )
    cov_params = cov_mod.CoverageParams(
        gamma=cfg.coverage.gamma,
        q=cfg.coverage.q,
        z_const=cfg.coverage.z_const,
        noise=cfg.coverage.noise_w,
        upsilon_t_avg=cfg.coverage.upsilon_t_avg,
        upsilon_c_avg=cfg.coverage.upsilon_c_avg,
        rho=cfg.association.clutter_intensity,
        delta_r=cov_mod.range_resolution(cfg.channel.bandwidth_hz),
    )
    reports = {}
    for k in range(layout.num_ues):
        reports.update(
            aoa_mod.synthesize_reports(
                layout,
                k,
                layout.ue_positions[k],
                clutter,
                capture_radius=cfg.association.capture_radius_m,
            )
        )

    def scnr_eval(k, l):
        return cov_mod.per_link_scnr(
            layout.ap_positions[l], layout.ue_positions[k], clutter, cov_params
        )

    after = assoc_mod.refine_association(
        before,
        reports,
        layout.ue_positions,
        layout,
        scnr_eval,
        cfg.estimation.tau_p,
        tol=cfg.association.epsilon_pos_m,
    )
    assoc_mod.write_association_csv(os.path.join(cfg.out_dir, "association_pairs.csv"), after)
    assoc_mod.write_association_grid(os.path.join(cfg.out_dir, "association_grid.csv"), after)
    assoc_mod.write_association_diff(
        os.path.join(cfg.out_dir, "association_diff.csv"), before, after
    )
    changes = assoc_mod.association_diff(before, after)
    print(
        f"wrote association CSVs to {cfg.out_dir}: "
        f"{sum(1 for *_, c in changes if c == 'removed')} removed, "
        f"{sum(1 for *_, c in changes if c == 'added')} added"
    )
    return 0


def _cmd_pdc(cfg: ExperimentConfig) -> int:
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    params = exp_mod._coverage_params(cfg)
    rows = cov_mod.coverage_grid(
        cfg.coverage.r_grid,
        cfg.coverage.rho_grid,
        params,
        trials=cfg.coverage.mc_trials,
        seed=cfg.master_seed,
    )
    path = os.path.join(cfg.out_dir, "pdc_grid.csv")
    exp_mod.write_rows_csv(
        path,
        ["r_m", "rho_per_m2", "upsilon_c_avg_m2", "alpha_prime_np_per_m", "pdc_closed", "pdc_mc", "stderr"],
        rows,
    )
    worst = max(abs(r[4] - r[5]) for r in rows)
    print(f"wrote {path}: {len(rows)} grid points, worst |closed - mc| = {worst:.4f}")
    return 0


def _cmd_aoa(cfg: ExperimentConfig) -> int:
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    rows = exp_mod.aoa_rmse_rows(cfg)
    path = os.path.join(cfg.out_dir, "aoa_rmse.csv")
    exp_mod.write_rows_csv(path, ["trial", "noise_std_deg", "rmse_m"], rows)
    print(f"wrote {path}: {len(rows)} trials")
    return 0


def _cmd_detect(cfg: ExperimentConfig) -> int:
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    det = cfg.detector
    n = det.num_antennas
    models = [
        det_mod.EchoModel(
            steering=array_response(0.3 * k, 0.0, n),
            sigma2_target=det.sigma2_target,
            sigma2_clutter=det.sigma2_clutter,
            noise_cov=det.noise_power * np.eye(n),
        )
        for k in range(det.num_aps)
    ]
    eta = det_mod.calibrate_threshold(
        models, det.target_pfa, det.calib_trials, rng_stream(cfg.master_seed, "calib")
    )
    rows = []
    for scnr_db in det.scnr_grid_db:
        scale = 10.0 ** (scnr_db / 10.0)
        pfa = det_mod.false_alarm_probability(
            models, eta, det.calib_trials, rng_stream(cfg.master_seed, "pfa", scnr_db)
        )
        pd = det_mod.detection_probability(
            models,
            eta,
            det.calib_trials,
            rng_stream(cfg.master_seed, "pd", scnr_db),
            target_power_scale=scale,
        )
        rows.append((float(scnr_db), pfa, pd))
    path = os.path.join(cfg.out_dir, "detector_roc.csv")
    exp_mod.write_rows_csv(path, ["scnr_db", "pfa", "pd"], rows)
    print(f"wrote {path}: threshold {eta:.4f} at target pfa {det.target_pfa}")
    return 0


def _cmd_figure(cfg: ExperimentConfig, figure_id: str) -> int:
    cfg.scenario = figure_id
    _, summary = exp_mod.run_experiment(cfg)
    print(f"figure {figure_id}: wrote {summary['path']} ({summary['rows_written']} rows)")
    if "estimated_range_m" in summary:
        print(
            f"true range {summary['true_range_m']:.2f} m, "
            f"estimated {summary['estimated_range_m']:.2f} m"
        )
    return 0


def _cmd_compare(cfg: ExperimentConfig) -> int:
    cfg.scenario = "compare"
    _, summary = exp_mod.run_experiment(cfg)
    for scheme, mean, median, lo, hi in summary["rows"]:
        print(f"{scheme}: mean {mean:.3f}, median {median:.3f}, 95% CI [{lo:.3f}, {hi:.3f}]")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "layout":
            return _cmd_layout(cfg)
        if args.command == "se":
            return _cmd_se(cfg)
        if args.command == "associate":
            return _cmd_associate(cfg)
        if args.command == "pdc":
            return _cmd_pdc(cfg)
        if args.command == "aoa":
            return _cmd_aoa(cfg)
        if args.command == "detect":
            return _cmd_detect(cfg)
        if args.command == "figure":
            return _cmd_figure(cfg, args.figure_id)
        if args.command == "compare":
            return _cmd_compare(cfg)
        parser.error(f"unknown command {args.command!r}")
    except InvalidConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
