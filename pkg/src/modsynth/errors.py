class ConfigurationError(ValueError):
    """Invalid obstacle, actuator or solver setting."""


class DegenerateLegError(ValueError):
    """Two consecutive path points coincide while their timestamps differ."""


class NumericalFailure(RuntimeError):
    """A user-supplied function returned NaN or inf."""

    def __init__(self, name, message=None):
        self.name = name
        super().__init__(message or f"non-finite value in {name}")


class PlanningFailure(RuntimeError):
    """RRT* could not connect a leg within its sample budget."""

    def __init__(self, leg):
        self.leg = leg
        super().__init__(f"no path found for leg {leg}")
