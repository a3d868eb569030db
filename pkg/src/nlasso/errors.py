"""Exception and warning types raised across the package."""


class NLassoError(Exception):
    """Base class for all errors raised by :mod:`nlasso`."""


class GraphError(NLassoError, ValueError):
    """Invalid graph input."""


class SelfLoopError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class NonPositiveWeightError(GraphError):
    pass


class InvalidNodeError(GraphError):
    pass


class DisconnectedError(GraphError):
    pass


class EdgeNotInGraphError(GraphError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class PartitionError(NLassoError, ValueError):
    """Clusters that overlap, miss nodes or reference unknown nodes."""


class ClusterDisconnectedError(PartitionError):
    def __init__(self, cluster, message=None):
        self.cluster = cluster
        super().__init__(message or f"cluster {cluster} does not induce a connected subgraph")


class NumericalRankDeficiencyError(NLassoError, ArithmeticError):
    pass


class EmptySetError(NLassoError, ValueError):
    pass


class EmptyTrainingSetError(EmptySetError):
    pass


class SizeOutOfRangeError(NLassoError, ValueError):
    pass


class NonPositiveEtaError(NLassoError, ValueError):
    pass


class NonFiniteIterateError(NLassoError, FloatingPointError):
    pass


class NoFeasibleLError(NLassoError):
    pass


class LTooSmallError(NLassoError, ValueError):
    pass


class HypothesisViolatedError(NLassoError, ValueError):
    pass


class GeneratorExhaustedError(NLassoError, RuntimeError):
    pass


class ConfigError(NLassoError, ValueError):
    """Experiment configuration error; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class InputFileError(NLassoError, ValueError):
    """Malformed input file; the message names the path and field."""


class MaxItersReached(UserWarning):
    """The solver hit ``max_iters`` before its stopping rule fired."""


class PatternBudgetExceeded(UserWarning):
    """Sign-pattern enumeration was capped; the certificate is sampled only."""
