"""Exception types shared across the package."""


class PilotLabError(Exception):
    """Base class for all package-specific errors."""


class DegenerateState(PilotLabError):
    """A wave field with (numerically) zero norm was passed where a
    normalizable state is required."""


class DegenerateCollapse(PilotLabError):
    """A collapse center so far outside the support of the state that the
    post-jump norm underflows."""


class NoFringes(PilotLabError):
    """Fringe analysis requested on a field without an interference pattern."""


class EscapedDomain(PilotLabError):
    """A trajectory left the grid interior; absorbing layers should prevent
    this in well-posed scenarios."""


class ConfigError(PilotLabError):
    """Scenario configuration is missing required keys or violates ranges."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
