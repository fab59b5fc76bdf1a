"""Meta-learning of within-task initializations and learning rates by
online learning on regret upper bounds."""

from .core import (
    EUCLIDEAN,
    NEGATIVE_ENTROPY,
    ArubaError,
    BoundaryError,
    ConvergenceError,
    Domain,
    Geometry,
    InvalidArgument,
    LinearLoss,
    LogisticLoss,
    NumericError,
    QuadraticLoss,
    Task,
    UnsupportedError,
    bregman,
    hindsight_optimum,
    make_rng,
    project,
)
from .engine import (
    LedgerRow,
    MetaRun,
    MetaRunConfig,
    RunAborted,
    aruba_plusplus_refine,
    aruba_practical,
    online_to_batch,
    run_meta_stream,
    transfer_risk_estimate,
)
from .environments import (
    DistributionalEnv,
    EnvSpec,
    TaskStream,
    gen_distributional,
    gen_dynamic,
    gen_geometry,
    gen_static,
    generate,
)
from .federated import (
    Client,
    FedConfig,
    ServerState,
    client_update,
    personalize_eval,
    run_fedavg,
    server_round,
)
from .meta_init import InitState, aogd_update, ftl_mean_update, ogd_dynamic_update
from .meta_scale import (
    DiagScaleState,
    IsotropicScaleState,
    MatrixScaleState,
    ScalarScaleState,
    diag_accumulate,
    diag_eta,
    eps_ewoo_v,
    eps_ftl_v,
    isotropic_accumulate,
    matrix_accumulate,
    riccati_H,
)
from .within_task import WithinTaskConfig, omd_iterate, regret_upper_bound, run_task

__version__ = "0.1.0"
