"""Exception types raised across the package."""


class VelaidError(Exception):
    """Base class for all package errors."""


class InvalidRotation(VelaidError):
    """Matrix is not a rotation within the accepted tolerance."""


class DegenerateFrame(VelaidError):
    """Matrix cannot be projected onto SO(3) (non-positive determinant)."""


class DegenerateGamma(VelaidError):
    """Gravity estimate is zero, so roll and pitch are undefined."""


class GainNotPositiveDefinite(VelaidError):
    """A gain matrix has a symmetric part that is not positive definite."""

    def __init__(self, name: str, min_eig: float):
        super().__init__(
            f"symmetric part of gain {name} is not positive definite "
            f"(smallest eigenvalue {min_eig:.6g})"
        )
        self.name = name
        self.min_eig = min_eig


class WorldInvalid(VelaidError):
    """World constants are unusable (g <= 0 or B collinear with the vertical)."""


class ScenarioError(VelaidError):
    """Scenario configuration could not be parsed or validated."""


class NumericalAbort(VelaidError):
    """A non-finite value appeared in the simulation."""

    def __init__(self, tick: int, what: str):
        super().__init__(f"non-finite {what} at tick {tick}")
        self.tick = tick
        self.what = what
