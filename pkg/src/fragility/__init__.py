"""Exposure-network fragility toolkit.

Reconstructs financial exposure networks from bilateral records (with
maximum-entropy completion of unobserved cells), measures spectral fragility
(algebraic connectivity via Lanczos), simulates shock diffusion and stress
amplification, estimates crisis impacts with network-level DID machinery, and
runs Fiedler-centrality policy counterfactuals.
"""

from .dynamics import (
    AMPLIFICATION_CALIBRATION_DAMPING,
    DualChannelParams,
    ShockScenario,
    Trajectory,
    amplification_factor,
    diffuse,
    dual_channel_operator,
    equilibrium_stress,
    equilibrium_stress_dense,
    great_circle_km,
    spatial_kernel_solution,
    stress_trajectory,
)
from .errors import FragilityError
from .estimators import (
    BootstrapResult,
    DecayData,
    DecayFit,
    EstimateReport,
    InstitutionPanel,
    PanelSeries,
    PretrendsReport,
    block_bootstrap,
    event_study,
    fit_spatial_decay,
    naive_did,
    placebo_test,
    pretrends_test,
    spatial_did,
)
from .exposures import ExposurePanel, ExposureRecord, Institution, aggregate_exposures
from .graph import (
    NetworkStats,
    WeightedGraph,
    build_graph,
    compute_stats,
    graph_from_adjacency,
    is_connected,
    mean_pair_exposure,
)
from .impute import ImputationProblem, ImputationResult, entropy_closed_form, ras_impute
from .policy import (
    CapitalPolicy,
    PolicyOutcome,
    ResolutionEntry,
    apply_capital_policy,
    lambda2_reduction_approx,
    resolution_ranking,
)
from .spectrum import (
    SpectrumResult,
    algebraic_connectivity,
    lambda2_dense,
    lambda2_lanczos,
    mixing_time,
)
from .synth import (
    ConsolidationScenario,
    CrisisPanelResult,
    CrisisPanelSpec,
    consolidation_pair,
    crisis_panel,
    decay_dataset,
    exposure_history,
    make_regular,
    observed_mask,
    ring_lattice_lambda2,
)

__version__ = "0.1.0"
