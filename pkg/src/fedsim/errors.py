"""Exception hierarchy shared across the simulator.

Everything raised on purpose by this package derives from :class:`FedSimError`,
so callers can trap domain failures without also swallowing programming errors.
"""


class FedSimError(Exception):
    """Base class for all fedsim errors."""


# dataset construction and ingestion

class ShapeMismatch(FedSimError):
    pass


class EmptyFeatures(FedSimError):
    pass


class IoError(FedSimError):
    pass


class ParseError(FedSimError):
    """A cell failed to parse; carries the 0-based data row/column location."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class MissingColumn(FedSimError):
    pass


class NoLabels(FedSimError):
    pass


class InvalidArgument(FedSimError):
    pass


# federated partitioning

class ConflictingOptions(FedSimError):
    pass


class ClassCountMismatch(FedSimError):
    pass


class FeatureBudgetExceeded(FedSimError):
    pass


class LabelsRequired(FedSimError):
    pass


class BadLength(FedSimError):
    pass


# actor architectures

class DuplicateId(FedSimError):
    pass


class EmptyArchitecture(FedSimError):
    pass


# pools

class UnknownActor(FedSimError):
    pass


class SelectionTooLarge(FedSimError):
    pass


class PermissionDenied(FedSimError):
    pass


class MapError(FedSimError):
    """A map function raised a non-domain exception; message names the actor."""


# learners

class BadLabels(FedSimError):
    pass


class EmptyDataset(FedSimError):
    pass


# round flows

class MissingKey(FedSimError):
    pass


class MultipleServers(FedSimError):
    pass


class EmptyCollection(FedSimError):
    pass


class AllTrimmed(FedSimError):
    pass


# adversaries

class UnknownAttacker(FedSimError):
    pass
