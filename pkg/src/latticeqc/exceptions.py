"""Exception hierarchy. Every class carries a short ``category`` string that
the command line reports on failure."""


class LatticeQCError(Exception):
    category = "error"


class GeometryError(LatticeQCError, ValueError):
    category = "geometry"


class MeshError(LatticeQCError, ValueError):
    category = "mesh"


class SamplingError(LatticeQCError, ValueError):
    category = "sampling"


class SolverError(LatticeQCError, RuntimeError):
    category = "solver"


class BoundaryConditionError(LatticeQCError, ValueError):
    category = "boundary_condition"


class ConfigError(LatticeQCError, ValueError):
    category = "config"


class DeadStrutError(LatticeQCError, ValueError):
    category = "dead_strut"


class ExportError(LatticeQCError, OSError):
    category = "io"
