"""Exception hierarchy.

Every error carries a machine-readable ``code`` so the CLI can map it to an
exit status without parsing messages.
"""


class TransbeamError(Exception):
    """Base class; ``code`` is a short upper-case tag such as ``MESH_TOO_COARSE``."""

    exit_code = 1

    def __init__(self, code, message="", **details):
        self.code = code
        self.details = details
        super().__init__(f"{code}: {message}" if message else code)


class ConfigurationError(TransbeamError):
    """Invalid parameters, meshes, initial data or call arguments."""

    exit_code = 2


class SolverError(TransbeamError):
    """Newton failure, singular systems, infeasible searches."""

    exit_code = 3


class OutputError(TransbeamError):
    """Failure writing or reading an output artifact."""

    exit_code = 4
