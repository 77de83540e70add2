"""Exception hierarchy shared across the pipeline stages."""


class ScenegraspError(Exception):
    """Base class for all pipeline errors."""


class InvalidArgumentError(ScenegraspError, ValueError):
    pass


class BehindCameraError(ScenegraspError, ValueError):
    pass


class EmptyInputError(ScenegraspError, ValueError):
    pass


class DegenerateRegionError(ScenegraspError, ValueError):
    pass


class GridMismatchError(ScenegraspError, ValueError):
    pass


class EmptySurfaceError(ScenegraspError, ValueError):
    pass


class LiftError(ScenegraspError, ValueError):
    pass


class NoGraspError(ScenegraspError):
    """No reachable grasp candidate exists."""


class PlacementError(ScenegraspError):
    """Objects could not be placed without overlap."""


class ConfigError(ScenegraspError, ValueError):
    pass


class BadInputError(ScenegraspError, ValueError):
    """Input files are unreadable or contain no usable data."""
