"""Peer-effects estimation on many networks with leave-own-out instruments."""

from ._accel import BACKEND
from .data import Dataset, GroupData
from .dgp import (
    ErrorCoupling,
    FormationConfig,
    StructuralParams,
    default_threshold,
    draw_covariates,
    draw_errors,
    reduced_form_check,
    simulate_dataset,
    simulate_network,
    simulate_outcomes,
)
from .errors import (
    ConfigError,
    DataError,
    GraphError,
    IdentificationError,
    PeerFxError,
    UndefinedStatisticError,
)
from .estimator import (
    Diagnostics,
    FitResult,
    ModelSpec,
    TestResult,
    cluster_variance,
    diagnostics,
    hausman_test,
    t_statistics,
    tsls_fit,
)
from .graph import Graph, build_graph, leave_one_out, row_normalize
from .instruments import (
    InstrumentMatrix,
    InstrumentSpec,
    build_instrument_matrix,
    q_transform,
    q_weights_reference,
    second_moment_instruments,
)
from .montecarlo import McConfig, McReport, format_table, run_design

__version__ = "0.1.0"
