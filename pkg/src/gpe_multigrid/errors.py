"""
errors.py

Exception hierarchy. Every error carries a stable `code` (e.g. "not-a-descendant",
"mass-block-singular") so callers and tests can branch on the failure kind without
parsing messages.

Author: Nathan Swanson
"""


class GpeError(Exception):
    """Base class for every failure raised by the solver stack."""

    def __init__(self, code: str, message: str | None = None):
        self.code = code
        self.message = message or code
        super().__init__(f"[{code}] {self.message}")


class MeshError(GpeError):
    pass


class AssemblyError(GpeError):
    pass


class MultigridError(GpeError):
    pass


class EigenError(GpeError):
    pass


class SolverError(GpeError):
    pass


class ConfigError(GpeError):
    pass
