"""Exception hierarchy shared by every module.

Errors caused by bad input also subclass ValueError so callers that only
care about "invalid input" can catch that.
"""

from __future__ import annotations


class Tfs3dError(Exception):
    """Base class for all library errors."""


class InvalidArgument(Tfs3dError, ValueError):
    pass


class InvalidEpisode(Tfs3dError, ValueError):
    pass


class EncodeError(Tfs3dError, ValueError):
    pass


class QuestError(Tfs3dError, ValueError):
    pass


class TrainingError(Tfs3dError):
    pass


class ConfigError(Tfs3dError, ValueError):
    pass


class EmptyEvaluation(Tfs3dError, ValueError):
    pass


class ParseError(Tfs3dError, ValueError):
    """Malformed block or feature file."""

    def __init__(self, message: str, path: str | None = None, offset: int | None = None):
        self.path = path
        self.offset = offset
        where = ""
        if path is not None:
            where = f"{path}"
            if offset is not None:
                where += f" @ byte {offset}"
            where += ": "
        super().__init__(f"{where}{message}")


class SamplingError(Tfs3dError, ValueError):
    def __init__(self, message: str, class_id: int | None = None):
        self.class_id = class_id
        super().__init__(message)


class CheckpointError(Tfs3dError, ValueError):
    def __init__(self, message: str, record: str | None = None):
        self.record = record
        prefix = f"record '{record}': " if record is not None else ""
        super().__init__(f"{prefix}{message}")
