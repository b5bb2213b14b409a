"""Exception types shared across the toolchain."""

from __future__ import annotations


class RepatchError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RepatchError):
    """Java source could not be turned into a structural model."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}]" if line is not None else "]")
        super().__init__(message + where)


class DiffFormatError(RepatchError):
    """Unified-diff text is malformed."""

    def __init__(self, message: str, line_number: int):
        self.line_number = line_number
        super().__init__(f"{message} (diff line {line_number})")


class ElementNotFound(RepatchError):
    """A refactoring's before-element does not exist in the working tree."""


class AmbiguousInline(RepatchError):
    """The callee body cannot be inlined safely at some call site."""


class CollisionError(RepatchError):
    """A refactoring's target name already exists."""


class CycleError(RepatchError):
    """Replay ordering constraints form a cycle."""

    def __init__(self, message: str, cycle: list | None = None):
        self.cycle = cycle or []
        super().__init__(message)


class TransformError(RepatchError):
    """A refactoring could not be applied to the working tree."""


class VcsError(RepatchError):
    """Base class for git adapter failures."""


class FetchError(VcsError):
    """Remote could not be added or fetched."""


class ObjectMissing(VcsError):
    """A commit, tree, or blob is not present in the object store."""


class MissingParent(VcsError):
    """The commit to cherry-pick has no parents."""


class NoCommonAncestor(VcsError):
    """Two commits share no history."""


class TimeoutExceeded(RepatchError):
    """A pipeline stage ran past its deadline."""
