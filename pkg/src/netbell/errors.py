"""Exception hierarchy shared by all netbell modules."""


class NetbellError(ValueError):
    """Base class for every error raised by netbell."""


# topology
class UnknownParty(NetbellError):
    pass


class DegenerateSource(NetbellError):
    pass


class EmptyNetwork(NetbellError):
    pass


class HOutOfRange(NetbellError):
    pass


# operators
class DimensionMismatch(NetbellError):
    pass


class NotHermitian(NetbellError):
    pass


class SameParty(NetbellError):
    pass


class NotCommuting(NetbellError):
    pass


# states
class BadDims(NetbellError):
    pass


class NotAState(NetbellError):
    pass


class SingletNeedsQubits(NetbellError):
    pass


class MissingSource(NetbellError):
    pass


class LayoutMismatch(NetbellError):
    pass


class NonCommutingFactors(NetbellError):
    pass


# bell functional
class InvalidIndependentSet(NetbellError):
    pass


class ThetaOutOfRange(NetbellError):
    pass


# optimisation
class NoIndependentSet(NetbellError):
    pass


class UnsupportedTopology(NetbellError):
    pass


class EvenDimension(NetbellError):
    pass


# scenario files
class ParseError(NetbellError):
    """Malformed scenario document; ``path`` locates the offending node."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ValidationError(NetbellError):
    """Scenario parsed but failed a domain check (party/source named in message)."""
