"""Error taxonomy shared by the engine, the service, and the CLI.

Every engine error derives from PageSearchError and carries a stable ``name``
used on the wire (service responses) and an exit-code category used by the CLI:
2 = usage, 3 = data, 4 = external service.
"""

from __future__ import annotations

USAGE, DATA, SERVICE = 2, 3, 4


class PageSearchError(Exception):
    name = "PageSearchError"
    exit_code = DATA


class DuplicateId(PageSearchError):
    name = "DuplicateId"


class ParseError(PageSearchError):
    """Malformed record; carries the 1-based line number."""

    name = "ParseError"

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class GoldNotFound(PageSearchError):
    name = "GoldNotFound"


class DimMismatch(PageSearchError):
    name = "DimMismatch"


class UnknownPage(PageSearchError):
    name = "UnknownPage"


class IncompatibleStore(PageSearchError):
    name = "IncompatibleStore"


class ChannelNotFound(PageSearchError):
    name = "ChannelNotFound"


class EmptySet(PageSearchError):
    name = "EmptySet"


class EmptyList(PageSearchError):
    name = "EmptyList"


class InvalidParams(PageSearchError):
    name = "InvalidParams"
    exit_code = USAGE


class QuerySetMismatch(PageSearchError):
    name = "QuerySetMismatch"


class PayloadMissing(PageSearchError):
    name = "PayloadMissing"


class NoScoredResults(PageSearchError):
    name = "NoScoredResults"


class ReaderError(PageSearchError):
    name = "ReaderError"
    exit_code = SERVICE


class JudgeError(PageSearchError):
    name = "JudgeError"
    exit_code = SERVICE


class RunAborted(PageSearchError):
    """Raised when more than the tolerated fraction of reader calls fail."""

    name = "RunAborted"
    exit_code = SERVICE


_BY_NAME = {
    cls.name: cls
    for cls in list(globals().values())
    if isinstance(cls, type) and issubclass(cls, PageSearchError)
}


def error_by_name(name: str) -> type[PageSearchError]:
    return _BY_NAME.get(name, PageSearchError)
