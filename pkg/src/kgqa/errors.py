"""Exception taxonomy shared across the package.

CLI exit-code mapping: ConfigError (and argparse usage problems) -> 1,
DataError and subclasses -> 2, EndpointError -> 3.
"""
from __future__ import annotations


class KgqaError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(KgqaError):
    """Invalid or inconsistent run configuration."""


class DataError(KgqaError):
    """Problem with input data (KG files, datasets, plan files)."""


class ParseError(DataError):
    """A line of an input file failed to parse."""

    def __init__(self, path: object, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class UnknownEntityError(DataError):
    """A referenced entity does not exist in the store."""

    def __init__(self, *entities: str):
        self.entities = tuple(entities)
        super().__init__("unknown entity: " + ", ".join(entities))


class TemplateError(KgqaError):
    """Prompt template rendering failure (missing or unexpected slot)."""


class ReplyParseError(KgqaError):
    """A model reply did not conform to the expected output grammar."""


class EndpointError(KgqaError):
    """Chat endpoint unreachable or persistently failing."""
