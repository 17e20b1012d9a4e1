"""
Exception hierarchy for gabor-sections.

Every error carries the process exit code the CLI reports for it:
1 for configuration/validation problems, 2 for numerical failures.
"""


class GaborSectionsError(Exception):
    """Base class for all errors raised by the package"""

    exit_code = 2

    @property
    def code(self) -> str:
        return type(self).__name__


# --- configuration / validation (exit 1) ---

class ConfigError(GaborSectionsError, ValueError):
    """Invalid or unknown configuration key"""

    exit_code = 1

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class InvalidInput(GaborSectionsError, ValueError):
    """Malformed input data (windows, point clouds, weights)"""

    exit_code = 1


class RadiiNotAscending(GaborSectionsError, ValueError):
    exit_code = 1


# --- numerical failures (exit 2) ---

class GridTooCoarse(GaborSectionsError):
    """Quadrature changed by more than the tolerance under grid halving"""


class NotConverged(GaborSectionsError):
    """A truncated sum/integral left too much mass in its outer shell"""


class TooManyPoints(GaborSectionsError):
    pass


class NoTailPoint(GaborSectionsError):
    pass


class RemainderDominates(GaborSectionsError):
    pass


class NoConvergence(GaborSectionsError):
    """Eigensolver failure; partial results are never returned"""


class SingularResolvent(GaborSectionsError):
    """A contour node lies on or next to an eigenvalue"""


class GapMissing(GaborSectionsError):
    pass


class RankZero(GaborSectionsError):
    pass


class TooFewPoints(GaborSectionsError):
    pass


class MassConditionFailed(GaborSectionsError):
    pass


class InvariantViolation(GaborSectionsError):
    """A computed object broke one of its documented invariants"""


class IoFailure(GaborSectionsError):
    pass
