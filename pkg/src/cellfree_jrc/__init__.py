"""Joint radar and communication simulation for cell-free massive MIMO.

The library covers the full pipeline: network layouts and Poisson clutter
(:mod:`.topology`), correlated Rayleigh channels (:mod:`.channel`), MMSE
channel estimation (:mod:`.estimation`), uplink combining and spectral
efficiency (:mod:`.comms`), two-phase user association
(:mod:`.association`), detection-coverage analytics (:mod:`.coverage`),
bearing-intersection localization (:mod:`.aoa`), the estimator-correlator
sensing detector (:mod:`.detector`), and an experiment harness
(:mod:`.config`, :mod:`.experiments`, :mod:`.cli`).
"""

from .aoa import (
    AoaReport,
    PositionEstimate,
    detect_blocked_aps,
    intersect_aoa,
    intersection_error_area,
    rmse,
)
from .association import (
    AssociationMatrix,
    exhaustive_p1,
    initial_association,
    refine_association,
    threshold_select,
)
from .channel import (
    ChannelSet,
    LsfcParams,
    array_response,
    build_channel_set,
    correlation_matrix,
    lsfc_db,
    noise_power_w,
    sample_channel,
)
from .comms import (
    SinrTerms,
    cpu_weights,
    estimate_sinr_terms,
    lp_mmse_combiner,
    mr_precoder,
    sinr,
    spectral_efficiency,
    uplink_se,
)
from .config import ExperimentConfig
from .coverage import (
    CoverageParams,
    effective_attenuation,
    pdc_los,
    pdc_monte_carlo,
    pdc_nlos,
    scnr_realization,
)
from .detector import (
    DetectionResult,
    EchoModel,
    calibrate_threshold,
    detect,
    range_estimate_bias_demo,
    test_statistic,
    whiten,
)
from .estimation import (
    EstimateStats,
    PilotAssignment,
    assign_pilots,
    mmse_estimate,
    pilot_correlation,
)
from .experiments import FigureDataset, compare_schemes, run_experiment
from .topology import (
    Annulus,
    ClutterField,
    NetworkLayout,
    Rect,
    bearing,
    generate_layout,
    sample_clutter,
)

__version__ = "0.1.0"
