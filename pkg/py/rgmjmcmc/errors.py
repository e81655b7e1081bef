"""
Exceptions raised by rgmjmcmc.

Chain steps catch the component errors below and record them as rejected
steps; only configuration, input and estimator errors reach the caller.
"""


class RGMJMCMCError(RuntimeError):
    """Base class of all rgmjmcmc errors."""


class FeatureEvaluationError(RGMJMCMCError):
    """A feature produced non-finite values on the data."""


class OperatorError(RGMJMCMCError):
    """A genetic operator could not produce a valid feature."""


class PopulationError(RGMJMCMCError):
    """A population could not be built with the requested size."""


class EvidenceError(RGMJMCMCError):
    """The marginal likelihood of a model could not be computed."""


class ProposalError(RGMJMCMCError):
    """A randomized proposal could not satisfy the model size cap."""


class EstimatorError(RGMJMCMCError):
    """A posterior estimate was requested on empty input."""


class EstimatorValidityError(EstimatorError):
    """The frequency estimator was requested for a non-reversible chain."""


class EnumerationError(RGMJMCMCError):
    """The model space is too large to enumerate."""


class DataLoadError(RGMJMCMCError, ValueError):
    """Input table is missing a column or holds invalid cells."""


class ConfigError(RGMJMCMCError, ValueError):
    """Invalid configuration value."""
