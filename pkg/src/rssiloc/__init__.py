"""Multi-robot relative localization from Wi-Fi RSSI maps.

Each robot fits a Gaussian-process map of the RSSI it measures, locates
the shared access point by a coarse-to-fine grid search over the
posterior mean, and converts peers' broadcast (odometry, AP estimate)
pairs into neighbor positions in its own frame. A seeded simulator and
benchmark CLI reproduce the desk-scale experiments.
"""

from .config import (
    ConfigInvalid,
    ControllerConfig,
    GpConfig,
    RunConfig,
    SimConfig,
    SimOptions,
    default_config,
    load_config,
)
from .frames import (
    MESSAGE_SIZE_BYTES,
    NeighborEstimate,
    PeerMessage,
    Pose2D,
    pack_message,
    relative_position,
    rotation_between,
    unpack_message,
    wrap_angle,
)
from .gp import (
    DegenerateData,
    FactorizationFailure,
    FitBudget,
    GpHyperParams,
    RssiSample,
    TrainedGp,
    fit,
    fit_with_hyperparams,
    log_marginal_likelihood,
    predict,
    predict_mean,
    predict_variance,
    se_kernel,
)
from .runtime import (
    Agent,
    AgentOutput,
    LocalObservation,
    MetricsRecord,
    NoNeighbors,
    rendezvous_command,
    run_trial,
    summarize_trial,
)
from .search import (
    ApEstimate,
    GridTooLarge,
    HierarchyConfig,
    SearchRegion,
    default_search_region,
    dense_argmax,
    gradient_ascent_baseline,
    hierarchical_search,
)
from .world import (
    ChannelParams,
    GroundTruthAccess,
    RandomWalkController,
    RobotInit,
    UnicycleState,
    World,
    WorldConfig,
    mean_rssi,
    sample_rssi,
    si_to_unicycle,
    step_unicycle,
)

__version__ = "0.1.0"
