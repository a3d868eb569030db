"""Network Lasso regression on graphs with flow-based training-set certificates."""

__version__ = "0.1.0"

from .errors import MaxItersReached, NLassoError, PatternBudgetExceeded  # noqa: E402
from .graph import (  # noqa: E402
    EmpiricalGraph,
    Partition,
    build_graph,
    incidence_matrix,
    laplacian,
    make_partition,
    spectral_gap,
    tv_norm,
)
from .signal import ClusteredSignal, LabelSet, NoiseModel, expand_signal, sample_labels, sample_training_set  # noqa: E402
from .solver import SolverConfig, SolverResult, solve  # noqa: E402
from .flows import ResolvingCertificate, check_resolving, max_certifiable_L, ncc_sampled_check  # noqa: E402
from .estimator import NetworkLassoRegressor  # noqa: E402

__all__ = [
    "NLassoError",
    "MaxItersReached",
    "PatternBudgetExceeded",
    "EmpiricalGraph",
    "Partition",
    "build_graph",
    "incidence_matrix",
    "laplacian",
    "make_partition",
    "spectral_gap",
    "tv_norm",
    "ClusteredSignal",
    "LabelSet",
    "NoiseModel",
    "expand_signal",
    "sample_labels",
    "sample_training_set",
    "SolverConfig",
    "SolverResult",
    "solve",
    "ResolvingCertificate",
    "check_resolving",
    "max_certifiable_L",
    "ncc_sampled_check",
    "NetworkLassoRegressor",
]
