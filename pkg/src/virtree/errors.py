"""Exception types shared across the package."""


class VirtreeError(Exception):
    """Base class for all library errors."""


class InvalidConfig(VirtreeError):
    """Hierarchy configuration violates a structural constraint."""


class UnknownCluster(VirtreeError):
    """Cluster id not present in the topology."""


class UnknownScope(VirtreeError):
    """Scope kind or id does not name anything in the topology."""


class NoCandidate(VirtreeError):
    """Role re-election found no alive candidate in scope."""


class EmptyGoalSet(VirtreeError):
    """A command must name at least one goal cluster."""


class RegionDead(VirtreeError):
    """No alive coordinator remains in the region."""


class Disconnected(VirtreeError):
    """No tree path exists between the requested endpoints."""


class ScenarioInvalid(VirtreeError):
    """Scenario file failed validation; `field` names the offending key."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class OracleMismatch(VirtreeError):
    """Simulated outcome disagrees with the independent reachability oracle."""
