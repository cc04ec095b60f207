"""Exception hierarchy shared by every tripert module."""


class TripertError(Exception):
    """Base class for all errors raised by tripert."""


class ParameterError(TripertError, ValueError):
    pass


class ConfigError(TripertError, ValueError):
    pass


class DomainError(TripertError, ValueError):
    """A moment was requested outside the family's finiteness domain."""


class NoRootError(TripertError):
    pass


class DriftError(TripertError):
    """E log a >= 0: the recursion has no stationary solution."""


class AssumptionError(TripertError):
    def __init__(self, assumption, detail=""):
        self.assumption = assumption
        self.detail = detail
        super().__init__(f"assumption {assumption} failed" + (f": {detail}" if detail else ""))


class UnboundedEnvelopeError(TripertError):
    pass


class NonConvergence(TripertError):
    pass


class DegenerateError(TripertError):
    pass


class RangeError(TripertError, ValueError):
    pass


class SingularDesign(TripertError):
    pass


class EmptyGrid(TripertError, ValueError):
    pass


class StageError(TripertError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage, error):
        self.stage = stage
        self.error = error
        super().__init__(f"stage {stage} failed: {type(error).__name__}: {error}")
