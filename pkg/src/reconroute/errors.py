"""Exception hierarchy for the route design engine.

Every error carries a machine-readable ``code`` (the class name) so the
HTTP service and CLI can map failures onto structured payloads without
string matching.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine failures."""

    @property
    def code(self) -> str:
        return type(self).__name__


class ParseError(EngineError):
    """Input bytes could not be parsed at all (malformed JSON, CSV, geometry)."""


class ValidationError(EngineError):
    """Input parsed but violated a documented data contract."""


class RangeError(EngineError):
    """Coordinates fall outside the supported projection window."""


class ConfigError(EngineError):
    """Solver configuration is incomplete or inconsistent."""


class GeometryError(EngineError):
    """Degenerate geometry (zero-length polyline, empty ring)."""


class DomainError(EngineError):
    """Arguments outside an operation's mathematical domain."""


class NoPathError(EngineError):
    """No path exists between the requested nodes under the turn model."""


class EmptyAreaError(EngineError):
    """A query window intersects no usable data."""


class InfeasibleError(EngineError):
    """No solution satisfies the stated budget."""


class UnreachableError(EngineError):
    """Required stops cannot all be reached from the given endpoints."""

    def __init__(self, message: str, nodes: tuple[str, ...] = ()):
        super().__init__(message)
        self.nodes = nodes


class SyncError(EngineError):
    """Routes cannot be spliced at the requested synchronization points."""


class ConstraintError(EngineError):
    """Edit constraints are mutually unsatisfiable."""


class NotFoundError(EngineError):
    """A referenced entity (dataset, session, calendar entry) does not exist."""


class SerializationError(EngineError):
    """A stored artifact could not be serialized or restored."""
