"""Exception types shared across the package."""


class MeshTopologyError(Exception):
    """Mesh connectivity is not a conforming triangulation."""


class MacroPartitionError(Exception):
    """Macroelement partition cannot be derived or is invalid."""


class UnsupportedElementError(Exception):
    """A triangle does not admit the requested local construction."""


class SolverError(Exception):
    """Direct factorisation failed (system singular to working precision)."""


class NoExactSolutionError(Exception):
    """Requested an exact-solution quantity for a problem without one."""


class ConfigError(Exception):
    """Invalid run configuration."""
