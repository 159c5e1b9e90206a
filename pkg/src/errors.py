"""
Exception hierarchy for qheat.

Every error raised on purpose by the library derives from QHeatError and
carries the process exit code the command-line front end should use.
"""

from typing import Optional, Sequence


class QHeatError(Exception):
    """Base class for all qheat errors."""

    exit_code = 3


class NonSymmetricError(QHeatError, ValueError):
    """A matrix that must be symmetric is not."""


class NegativeFrequencyError(QHeatError, ValueError):
    """A spectral function was evaluated at a negative frequency."""


class ZeroFrequencyError(QHeatError, ValueError):
    """The Bose occupation was requested at zero frequency."""


class ZeroGapError(QHeatError, ValueError):
    """A sequential rate was requested for a vanishing energy gap."""


class QuadratureFailure(QHeatError):
    """Adaptive quadrature did not converge after maximal refinement."""


class NonDecayingKernelError(QHeatError):
    """A correlation kernel does not decay within the truncation horizon."""


class DegenerateSteadyStateError(QHeatError):
    """The generator has more than one zero mode."""


class BranchCrossingError(QHeatError):
    """The tracked eigenvalue of the tilted generator changed branch."""


class SchemeMismatchError(QHeatError):
    """A formula was applied to a state or generator of another scheme."""


class AsymmetricSplittingError(QHeatError):
    """An analytic formula that needs eps_L == eps_R got unequal splittings."""


class TooFewPointsError(QHeatError, ValueError):
    """A sweep is too short for the requested analysis."""


class StepSizeUnderflowError(QHeatError):
    """The adaptive integrator could not continue."""


class ConfigError(QHeatError, ValueError):
    """Invalid run configuration.

    Args:
        message: Human readable description.
        key: Dotted path of the offending key, when known.
        line: 1-based line number in the config file, when known.
    """

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        location = ""
        if key:
            location += f" [key: {key}]"
        if line:
            location += f" [line {line}]"
        super().__init__(f"{message}{location}")


class ValidationFailure(QHeatError):
    """One or more invariants of the property suite failed."""

    exit_code = 4

    def __init__(self, failed: Sequence[str]):
        self.failed = list(failed)
        super().__init__(f"{len(self.failed)} invariant(s) failed: {', '.join(self.failed)}")
