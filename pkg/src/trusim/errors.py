"""Exception hierarchy shared across the simulator."""


class TrusimError(Exception):
    """Base class for all simulator errors."""


class InvalidParams(TrusimError):
    """Construction parameters violate a documented invariant."""


class FormatError(TrusimError):
    """A volume or record file is malformed (bad magic, size mismatch, bad field)."""


class DegenerateSegment(TrusimError):
    """Segment endpoints coincide within tolerance."""


class OutsideGland(TrusimError):
    """Point classification was requested for a point outside the gland."""


class PoseOutOfRange(TrusimError):
    """A probe pose component exceeds the rig limit. Names the violated limit."""

    def __init__(self, limit_name: str, value: float, bound: float):
        self.limit_name = limit_name
        self.value = value
        self.bound = bound
        super().__init__(f"{limit_name}={value:.6g} exceeds limit {bound:.6g}")


class DepthOutOfRange(TrusimError):
    """Requested needle depth is outside the gun's reachable range."""


class BadResolution(TrusimError):
    """Slice resolution below the 2x2 minimum."""


class EvidenceMismatch(TrusimError):
    """Exercise evidence does not match the exercise kind."""


class InfeasibleTarget(TrusimError):
    """No valid pose within rig limits puts the core midpoint on the target."""


class NotFound(TrusimError):
    """Unknown operator, phantom, or session id."""


class SessionClosed(TrusimError):
    """Write attempted on a closed session."""
