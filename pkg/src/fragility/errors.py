"""Exception hierarchy for the fragility package."""


class FragilityError(Exception):
    """Base class for all package-specific failures."""


class NotFoundError(FragilityError):
    """A requested key (quarter, institution, column) is absent."""


class ParamError(FragilityError):
    """Arguments violate a documented precondition."""


class ShapeError(FragilityError):
    """Array dimensions do not line up."""


class DegenerateNetworkError(FragilityError):
    """Exposure matrix carries no usable edges."""


class DegenerateProblemError(FragilityError):
    """Imputation targets carry no mass."""


class InfeasibleError(FragilityError):
    """No nonnegative completion can satisfy the pinned cells and targets."""

    def __init__(self, message: str, axis: str | None = None, label: str | None = None):
        super().__init__(message)
        self.axis = axis
        self.label = label


class SolverFailureError(FragilityError):
    """An iterative solver did not converge within its budget."""


class OracleTooLargeError(FragilityError):
    """Dense verification path refused; problem exceeds its size guard."""


class InfiniteMixingError(FragilityError):
    """Mixing time undefined: the network is disconnected."""


class DegenerateScenarioError(FragilityError):
    """Stress scenario carries zero total shock."""


class MissingGeoError(FragilityError):
    """Coordinates are required but missing for one or more nodes."""


class DomainError(FragilityError):
    """Input outside the mathematical domain of a closed-form expression."""


class CollinearControlsError(FragilityError):
    """Design matrix is rank deficient."""

    def __init__(self, message: str, columns: tuple[str, ...] = ()):
        super().__init__(message)
        self.columns = columns


class MissingYearError(FragilityError):
    """An event-study year cell contains no observations."""


class WindowError(FragilityError):
    """Estimation window too short on one side of the break."""


class SampleTooSmallError(FragilityError):
    """Cross-section too small for institution-level inference."""


class IdentificationError(FragilityError):
    """Data carry no variation along the dimension being estimated."""


class BootstrapUnstableError(FragilityError):
    """More than 10% of bootstrap replications failed."""


class StaleSpectrumError(FragilityError):
    """Spectrum result does not correspond to the supplied graph."""
