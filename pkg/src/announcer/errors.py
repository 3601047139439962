"""Engine-wide exception types."""


class ConfigurationError(ValueError):
    """A config value violates an invariant; message names the offending field."""


class GeometryError(ValueError):
    """A camera solve was attempted on degenerate geometry."""


class PlanningError(RuntimeError):
    """No rule-compliant shot plan could be produced within the retry budget."""


class PathError(RuntimeError):
    """No collision-free camera path exists between the requested endpoints."""
