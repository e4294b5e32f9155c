"""Exception hierarchy shared by every pinfresh module."""


class PinfreshError(Exception):
    """Base class for all errors raised by pinfresh."""


class UnparseableVersion(PinfreshError, ValueError):
    pass


class MalformedRecord(PinfreshError, ValueError):
    """A line of an input file could not be decoded or validated."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class DanglingEdge(PinfreshError, ValueError):
    def __init__(self, line: int, endpoint):
        self.line = line
        self.endpoint = endpoint
        super().__init__(f"line {line}: edge references unknown library {endpoint}")


class DuplicateLibrary(PinfreshError, ValueError):
    def __init__(self, line: int, lib):
        self.line = line
        self.lib = lib
        super().__init__(f"line {line}: duplicate library record {lib}")


class DuplicateAdvisoryId(PinfreshError, ValueError):
    def __init__(self, line: int, advisory_id: str):
        self.line = line
        self.advisory_id = advisory_id
        super().__init__(f"line {line}: duplicate advisory id {advisory_id!r}")


class UnknownLibrary(PinfreshError, KeyError):
    def __init__(self, lib):
        self.lib = lib
        super().__init__(lib)

    def __str__(self):
        return f"unknown library {self.lib}"


class NotADependency(PinfreshError, ValueError):
    pass


class EmptySnapshot(PinfreshError, ValueError):
    pass


class InvalidUpgrade(PinfreshError, ValueError):
    pass


class ExecutorFailure(PinfreshError, RuntimeError):
    """Raised by a test executor when a consumer's suite cannot be run."""

    def __init__(self, consumer, reason: str):
        self.consumer = consumer
        self.reason = reason
        super().__init__(f"{consumer}: {reason}")


class WrongRepetitionCount(PinfreshError, ValueError):
    pass


class MixedDependency(PinfreshError, ValueError):
    pass


class EmptyInput(PinfreshError, ValueError):
    pass


class InvalidSubsetSize(PinfreshError, ValueError):
    pass
