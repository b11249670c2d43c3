"""Experiment configuration: defaults, YAML round-trip, and validation.

The configuration is a single nested key-value file whose sections mirror
the library modules.  Defaults reproduce the desk-scale setup (25 APs, 10
UEs, 2 antennas); ``--full-scale`` switches to the 500 m x 500 m network
with 100 APs, 50 UEs, and 4 antennas.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .errors import ConfigValidationError

FIGURE_IDS = ("5b", "5c", "5d", "5e", "5f", "6a-range", "6b", "6c", "6d")


@dataclass
class LayoutConfig:
    num_aps: int = 25
    num_ues: int = 10
    area_m: list = field(default_factory=lambda: [0.0, 0.0, 500.0, 500.0])


@dataclass
class ChannelConfig:
    upsilon_db: float = -148.1
    alpha: float = 3.76
    d_ref_m: float = 1000.0
    sigma_sh_db: float = 10.0
    num_antennas: int = 2
    corr_model: str = "uncorrelated"
    bandwidth_hz: float = 20e6
    noise_figure_db: float = 7.0


@dataclass
class EstimationConfig:
    tau_p: int = 5
    tau_c: int = 200
    pilot_power_w: float = 0.1


@dataclass
class CommsConfig:
    n_mc: int = 500
    combiner: str = "lp-mmse"
    cpu_weights: str = "equal"
    ue_power_w: float = 0.1
    num_topologies: int = 200


@dataclass
class AssociationConfig:
    epsilon_pos_m: float = 7.5
    capture_radius_m: float = 1.0
    clutter_intensity: float = 2e-4
    exhaustive_cap: int = 1_000_000


@dataclass
class CoverageConfig:
    gamma: float = 10.0
    q: float = 2.0
    z_const: float = 1e-6
    noise_w: float = 1e-12
    upsilon_t_avg: float = 1.0
    upsilon_c_avg: float = 0.5
    alpha_prime: float = 0.0
    r_grid: list = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0])
    rho_grid: list = field(default_factory=lambda: [0.0, 0.01, 0.05, 0.1])
    upsilon_c_grid: list = field(default_factory=lambda: [0.1, 0.5, 1.0, 2.0])
    mc_trials: int = 20000


@dataclass
class AoaConfig:
    noise_std_deg: list = field(default_factory=lambda: [0.0, 1.0, 2.0, 4.0, 8.0, 12.0])
    trials_per_level: int = 500
    aoa_error_deg: list = field(default_factory=lambda: [0.0, 4.0, 8.0, 12.0])


@dataclass
class DetectorConfig:
    num_aps: int = 4
    num_antennas: int = 4
    sigma2_target: float = 1.0
    sigma2_clutter: float = 0.5
    noise_power: float = 1.0
    target_pfa: float = 0.1
    calib_trials: int = 20000
    scnr_grid_db: list = field(default_factory=lambda: [-10.0, -5.0, 0.0, 5.0, 10.0])
    ue_range_m: float = 15.0
    scatterer_range_m: float = 45.0
    scatterer_margin_db: float = 20.0


_SECTIONS = {
    "layout": LayoutConfig,
    "channel": ChannelConfig,
    "estimation": EstimationConfig,
    "comms": CommsConfig,
    "association": AssociationConfig,
    "coverage": CoverageConfig,
    "aoa": AoaConfig,
    "detector": DetectorConfig,
}


@dataclass
class ExperimentConfig:
    master_seed: int = None  # mandatory: never defaulted from the clock
    scenario: str = "6c"
    out_dir: str = "out"
    full_scale: bool = False
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    comms: CommsConfig = field(default_factory=CommsConfig)
    association: AssociationConfig = field(default_factory=AssociationConfig)
    coverage: CoverageConfig = field(default_factory=CoverageConfig)
    aoa: AoaConfig = field(default_factory=AoaConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data or {})
        bad = {}
        kwargs = {}
        for name, section_cls in _SECTIONS.items():
            section_data = data.pop(name, {}) or {}
            known = {f.name for f in dataclasses.fields(section_cls)}
            unknown = set(section_data) - known
            for key in unknown:
                bad[f"{name}.{key}"] = "unknown field"
            kwargs[name] = section_cls(**{k: v for k, v in section_data.items() if k in known})
        top_known = {"master_seed", "scenario", "out_dir", "full_scale"}
        for key in set(data) - top_known:
            bad[key] = "unknown field"
        if bad:
            raise ConfigValidationError(bad)
        for key in top_known:
            if key in data:
                kwargs[key] = data[key]
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh)
        return cls.from_dict(data)

    def save(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)

    def at_full_scale(self) -> "ExperimentConfig":
        """Network dimensions from the large-network setup."""
        cfg = ExperimentConfig.from_dict(self.to_dict())
        cfg.full_scale = True
        cfg.layout.num_aps = 100
        cfg.layout.num_ues = 50
        cfg.channel.num_antennas = 4
        cfg.estimation.tau_p = 10
        cfg.comms.n_mc = 1000
        return cfg

    def validate(self):
        """Collect every invalid field and raise a single structured error."""
        bad = {}

        def positive(name, value):
            if not isinstance(value, (int, float)) or value <= 0:
                bad[name] = f"must be positive, got {value!r}"

        def nonnegative(name, value):
            if not isinstance(value, (int, float)) or value < 0:
                bad[name] = f"must be nonnegative, got {value!r}"

        if self.master_seed is None or not isinstance(self.master_seed, int):
            bad["master_seed"] = "a fixed integer seed is mandatory"
        if self.scenario not in FIGURE_IDS and self.scenario != "compare":
            bad["scenario"] = f"unknown scenario {self.scenario!r}; use one of {FIGURE_IDS}"
        positive("layout.num_aps", self.layout.num_aps)
        positive("layout.num_ues", self.layout.num_ues)
        area = self.layout.area_m
        if (
            not isinstance(area, (list, tuple))
            or len(area) != 4
            or area[2] <= area[0]
            or area[3] <= area[1]
        ):
            bad["layout.area_m"] = "must be [xmin, ymin, xmax, ymax] with positive extent"
        positive("channel.alpha", self.channel.alpha)
        positive("channel.d_ref_m", self.channel.d_ref_m)
        nonnegative("channel.sigma_sh_db", self.channel.sigma_sh_db)
        positive("channel.num_antennas", self.channel.num_antennas)
        positive("channel.bandwidth_hz", self.channel.bandwidth_hz)
        if self.channel.corr_model not in ("uncorrelated", "local-scattering"):
            bad["channel.corr_model"] = f"unknown model {self.channel.corr_model!r}"
        positive("estimation.tau_p", self.estimation.tau_p)
        if not (
            isinstance(self.estimation.tau_c, int)
            and self.estimation.tau_c > self.estimation.tau_p
        ):
            bad["estimation.tau_c"] = "must be an integer greater than tau_p"
        positive("estimation.pilot_power_w", self.estimation.pilot_power_w)
        positive("comms.n_mc", self.comms.n_mc)
        positive("comms.num_topologies", self.comms.num_topologies)
        positive("comms.ue_power_w", self.comms.ue_power_w)
        if self.comms.combiner not in ("lp-mmse", "mr"):
            bad["comms.combiner"] = f"unknown combiner {self.comms.combiner!r}"
        if self.comms.cpu_weights not in ("equal", "opt"):
            bad["comms.cpu_weights"] = f"unknown weight scheme {self.comms.cpu_weights!r}"
        positive("association.epsilon_pos_m", self.association.epsilon_pos_m)
        positive("association.capture_radius_m", self.association.capture_radius_m)
        nonnegative("association.clutter_intensity", self.association.clutter_intensity)
        positive("coverage.gamma", self.coverage.gamma)
        positive("coverage.q", self.coverage.q)
        positive("coverage.z_const", self.coverage.z_const)
        positive("coverage.noise_w", self.coverage.noise_w)
        positive("coverage.upsilon_t_avg", self.coverage.upsilon_t_avg)
        positive("coverage.upsilon_c_avg", self.coverage.upsilon_c_avg)
        nonnegative("coverage.alpha_prime", self.coverage.alpha_prime)
        positive("coverage.mc_trials", self.coverage.mc_trials)
        for name in ("r_grid", "rho_grid", "upsilon_c_grid"):
            values = getattr(self.coverage, name)
            if not isinstance(values, (list, tuple)) or not values:
                bad[f"coverage.{name}"] = "must be a nonempty list"
        positive("aoa.trials_per_level", self.aoa.trials_per_level)
        positive("detector.num_aps", self.detector.num_aps)
        positive("detector.num_antennas", self.detector.num_antennas)
        nonnegative("detector.sigma2_target", self.detector.sigma2_target)
        nonnegative("detector.sigma2_clutter", self.detector.sigma2_clutter)
        positive("detector.noise_power", self.detector.noise_power)
        if not (
            isinstance(self.detector.target_pfa, float) and 0 < self.detector.target_pfa < 1
        ):
            bad["detector.target_pfa"] = "must lie strictly between 0 and 1"
        positive("detector.calib_trials", self.detector.calib_trials)
        if bad:
            raise ConfigValidationError(bad)
        return self
