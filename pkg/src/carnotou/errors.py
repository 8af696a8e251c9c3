"""Shared exception base for the package.

Every error raised on a validated input path derives from CarnotouError so
the CLI can map the whole family to a single exit code.
"""


class CarnotouError(Exception):
    """Base class for all package-specific errors."""
