"""Exception hierarchy shared by all modules."""


class NumericalFailure(ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class LinearlyDependentCandidate(NumericalFailure):
    """Gram-Schmidt residual of a candidate fell below the dependence threshold."""

    def __init__(self, defect):
        super().__init__(f"candidate is numerically dependent on the system (defect={defect:.3e})")
        self.defect = defect


class SignalExhausted(NumericalFailure):
    """Every selection objective is below the noise floor; the expansion is complete."""


class DictionaryExhausted(NumericalFailure):
    """All candidates were rejected as linearly dependent."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class ArchiveError(ValueError):
    """Base class for decomposition archive problems."""


class ArchiveParseError(ArchiveError):
    """Archive file is truncated or structurally invalid."""


class IncompatibleArchiveVersion(ArchiveError):
    """Archive schema version is not supported by this build."""
