"""Error taxonomy shared by the library, the CLI, and the HTTP service.

Two classes matter for callers: ValidationError covers malformed inputs
(bad files, inconsistent manifests, out-of-range arguments) and maps to
CLI exit code 1 / HTTP 400; ComputationError covers data that makes a
requested computation undefined (zero dynamic range, zero margin, no
valid pairs) and maps to exit code 2 / HTTP 422.
"""


class InjxError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(InjxError):
    """Input files, manifests, or arguments failed validation."""


class ComputationError(InjxError):
    """The data makes the requested computation undefined."""
