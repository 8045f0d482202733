"""Exception hierarchy. Every error raised on bad data or bad models derives from
:class:`Vid360Error` so the CLI can map them to a single exit code."""


class Vid360Error(Exception):
    pass


class ParseError(Vid360Error, ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class UnsupportedFormatError(Vid360Error, ValueError):
    pass


class AmbiguousIdentityError(Vid360Error, ValueError):
    pass


class InvalidIntervalError(Vid360Error, ValueError):
    pass


class InvalidArgumentError(Vid360Error, ValueError):
    pass


class EmptyInputError(Vid360Error, ValueError):
    pass


class DegenerateLabelsError(Vid360Error, ValueError):
    pass


class InvalidFeatureError(Vid360Error, ValueError):
    pass


class SchemaMismatchError(Vid360Error, ValueError):
    pass


class DeserializationError(Vid360Error, ValueError):
    pass


class OrderingError(Vid360Error, ValueError):
    pass


class DegenerateSplitError(Vid360Error, RuntimeError):
    pass
