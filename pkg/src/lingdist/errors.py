"""Exception hierarchy.

Every error raised on bad input data derives from :class:`LingDistError`, which
the CLI maps to exit code 2.
"""


class LingDistError(ValueError):
    """Base class for data errors."""


class ParseError(LingDistError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class RaggedRows(ParseError):
    pass


class EmptyInput(LingDistError):
    pass


class AllZeroCounts(LingDistError):
    pass


class InvalidDistribution(LingDistError):
    pass


class CycleDetected(LingDistError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(map(str, self.cycle)))


class EmptyGraph(LingDistError):
    pass


class NoEligibleNegatives(LingDistError):
    pass


class DimensionMismatch(LingDistError):
    pass


class PointOutsideBall(LingDistError):
    pass


class OffManifold(LingDistError):
    pass


class TooFewNodes(LingDistError):
    pass


class DegenerateTable(LingDistError):
    pass


class NoAncestorPairs(LingDistError):
    pass


class InsufficientData(LingDistError):
    pass


class ZeroVector(LingDistError):
    pass


class MissingModality(LingDistError):
    pass


class InvalidWeights(LingDistError):
    pass


class RankDeficient(LingDistError):
    pass


class TooFewRows(LingDistError):
    pass


class NoCandidates(LingDistError):
    pass


class MissingScore(LingDistError):
    pass


class NonPositiveMax(LingDistError):
    pass


class UnknownId(LingDistError, KeyError):
    """An identifier (language, node, feature) is not present."""

    def __init__(self, kind, ident):
        self.kind = kind
        self.ident = ident
        LingDistError.__init__(self, f"unknown {kind}: {ident!r}")

    __str__ = LingDistError.__str__


class UnknownNode(UnknownId):
    def __init__(self, ident):
        super().__init__("node", ident)


class UnknownLanguage(UnknownId):
    def __init__(self, ident):
        super().__init__("language", ident)


class UnknownFeature(UnknownId):
    def __init__(self, ident):
        super().__init__("feature", ident)
