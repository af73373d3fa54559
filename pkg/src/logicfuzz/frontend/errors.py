"""Frontend error types."""

from __future__ import annotations


class FrontendError(Exception):
    pass


class ParseError(FrontendError):
    def __init__(self, line: int, col: int, expected: str, found: str | None = None):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"{line}:{col}: expected {expected}"
        if found is not None:
            msg += f", found {found!r}"
        super().__init__(msg)


class UnsupportedFeature(FrontendError):
    """Raised for constructs outside the MiniSol subset (inline assembly, inheritance, ...)."""

    def __init__(self, span: tuple[int, int], feature: str):
        self.span = span
        self.feature = feature
        super().__init__(f"unsupported feature {feature!r} at {span[0]}..{span[1]}")


class NotFound(FrontendError):
    pass


class Ambiguous(FrontendError):
    def __init__(self, query: str, candidates: list[str]):
        self.query = query
        self.candidates = candidates
        super().__init__(f"{query!r} is ambiguous: {', '.join(candidates)}")


class ScopeError(FrontendError):
    """An identifier does not resolve at its use site."""

    def __init__(self, name: str, span: tuple[int, int]):
        self.name = name
        self.span = span
        super().__init__(f"undeclared identifier {name!r} at {span[0]}..{span[1]}")
