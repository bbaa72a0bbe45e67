"""Exception types shared across the package."""

from __future__ import annotations


class DisciteError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(DisciteError, ValueError):
    """A corpus input file could not be parsed.

    Carries the offending path and 1-based line number so callers (and the
    CLI) can point at the exact record.
    """

    def __init__(self, path: str, line: int, message: str):
        self.path = str(path)
        self.line = int(line)
        super().__init__(f"{path}:{line}: {message}")


class SnapshotFormatError(DisciteError, ValueError):
    """A binary corpus snapshot has a bad magic header or version."""


class NotFoundError(DisciteError, KeyError):
    """A publication id is not present in the corpus."""

    def __init__(self, pub_id: int):
        self.pub_id = int(pub_id)
        super().__init__(f"unknown publication id {pub_id}")

    def __str__(self) -> str:  # KeyError quotes its arg by default
        return f"unknown publication id {self.pub_id}"


class WindowContractError(DisciteError, ValueError):
    """An incremental window extension was requested out of sequence."""


class ThresholdUnavailableError(DisciteError, ValueError):
    """A labeling scheme is missing the threshold for a needed year."""
