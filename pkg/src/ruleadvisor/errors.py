"""Exception hierarchy.

Each family maps onto one CLI exit code (see ``ruleadvisor.cli``).
"""


class RuleAdvisorError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RuleAdvisorError):
    pass


# -- data -------------------------------------------------------------------

class DataError(RuleAdvisorError):
    pass


class MissingLabelColumn(DataError):
    pass


class NonBinaryLabel(DataError):
    def __init__(self, row, values=None):
        self.row = row
        self.values = values
        super().__init__(f"label column is not binary (row {row}, values {values})")


class ParseError(DataError):
    def __init__(self, row, column, value=None):
        self.row = row
        self.column = column
        super().__init__(f"cannot parse row {row}, column {column!r}: {value!r}")


class CountsExceedSize(DataError):
    pass


class SchemaMismatch(DataError):
    pass


# -- rules ------------------------------------------------------------------

class RuleError(RuleAdvisorError):
    pass


class ZeroCoverage(RuleError):
    pass


class EmptyPool(RuleError):
    pass


class NoCoveringRule(RuleError):
    pass


# -- human simulation ---------------------------------------------------------

class SimulationError(RuleAdvisorError):
    pass


class NoMatchingRule(SimulationError):
    pass


class ConfidenceOutOfRange(SimulationError):
    pass


# -- estimators ---------------------------------------------------------------

class EstimatorError(RuleAdvisorError):
    pass


class SingleClassTrainingSet(EstimatorError):
    pass


class NonConvergence(EstimatorError):
    def __init__(self, iterations):
        self.iterations = iterations
        super().__init__(f"no convergence after {iterations} iterations")


class InsufficientRecords(EstimatorError):
    pass


class SingleClassRecords(EstimatorError):
    pass


# -- training -----------------------------------------------------------------

class TrainingError(RuleAdvisorError):
    pass


class ZeroTotalLoss(TrainingError):
    pass


class NoEligibleCandidate(TrainingError):
    pass


class EvaluationError(RuleAdvisorError):
    pass
