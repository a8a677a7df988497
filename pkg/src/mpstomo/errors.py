"""Exception hierarchy for mpstomo."""


class MpsTomoError(Exception):
    """Base class for every error raised by this package."""


class SizeExceeded(MpsTomoError, ValueError):
    """A dense operation would exceed the d**n memory guard."""


class InconsistentBonds(MpsTomoError, ValueError):
    pass


class ShapeMismatch(MpsTomoError, ValueError):
    pass


class WindowOutOfRange(MpsTomoError, IndexError):
    pass


class CutOutOfRange(MpsTomoError, IndexError):
    pass


class NotUnitary(MpsTomoError, ValueError):
    pass


class NotADensityMatrix(MpsTomoError, ValueError):
    pass


class ZeroProbability(MpsTomoError, ArithmeticError):
    """Postselection onto |0> has (numerically) vanishing probability."""


class InvalidSpec(MpsTomoError, ValueError):
    pass


class ShotsUnsupported(MpsTomoError, ValueError):
    pass


class TruncationAbort(MpsTomoError):
    """A protocol step lost more weight than the configured abort threshold.

    Carries the offending ``step`` and its ``truncation`` error ``1 - p``.
    """

    def __init__(self, step: int, truncation: float, threshold: float):
        super().__init__(
            f"step {step}: truncation error {truncation:.3e} exceeds abort threshold {threshold:.3e}"
        )
        self.step = step
        self.truncation = truncation
        self.threshold = threshold


class BondOverflow(MpsTomoError):
    pass


class BadDigitString(MpsTomoError, ValueError):
    pass


class IncompleteLog(MpsTomoError, ValueError):
    pass


class ConfigError(MpsTomoError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
