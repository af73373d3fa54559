"""Tolerant span mode for Solidity outside the MiniSol subset.

Only contract and function boundaries are recovered, by brace matching over
the token stream.  That is enough to hand function source to the language
model and to splice text at known offsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from logicfuzz.frontend.errors import ParseError
from logicfuzz.frontend.lexer import Token, tokenize

_CONTAINERS = ("contract", "library", "interface")


@dataclass(frozen=True)
class SpanFunction:
    name: str
    span: tuple[int, int]
    body_span: tuple[int, int]


@dataclass
class SpanContract:
    name: str
    kind: str
    span: tuple[int, int]
    functions: list[SpanFunction] = field(default_factory=list)


@dataclass
class SpanUnit:
    path: str
    raw_text: str
    contracts: list[SpanContract]

    def text_of(self, span: tuple[int, int]) -> str:
        return self.raw_text[span[0]:span[1]]


def _match_brace(tokens: list[Token], open_idx: int) -> int:
    depth = 0
    for i in range(open_idx, len(tokens)):
        t = tokens[i]
        if t.kind == "punct" and t.text == "{":
            depth += 1
        elif t.kind == "punct" and t.text == "}":
            depth -= 1
            if depth == 0:
                return i
    tok = tokens[open_idx]
    raise ParseError(tok.line, tok.col, "matching '}'")


def _next_brace_or_semi(tokens: list[Token], i: int) -> int:
    while tokens[i].kind != "eof" and not (tokens[i].kind == "punct" and tokens[i].text in ("{", ";")):
        i += 1
    return i


def scan_spans(text: str, path: str = "<memory>") -> SpanUnit:
    tokens = tokenize(text)
    contracts: list[SpanContract] = []
    i = 0
    while tokens[i].kind != "eof":
        tok = tokens[i]
        if tok.kind == "ident" and tok.text in _CONTAINERS and tokens[i + 1].kind == "ident":
            open_idx = _next_brace_or_semi(tokens, i)
            if tokens[open_idx].text != "{":
                i = open_idx + 1
                continue
            close_idx = _match_brace(tokens, open_idx)
            contract = SpanContract(tokens[i + 1].text, tok.text, (tok.start, tokens[close_idx].end))
            j = open_idx + 1
            while j < close_idx:
                t = tokens[j]
                if t.kind == "ident" and t.text in ("function", "constructor", "modifier"):
                    fname = t.text if t.text == "constructor" else tokens[j + 1].text
                    body = _next_brace_or_semi(tokens, j)
                    if tokens[body].text == "{":
                        end = _match_brace(tokens, body)
                        if t.text != "modifier":
                            contract.functions.append(
                                SpanFunction(fname, (t.start, tokens[end].end), (tokens[body].start, tokens[end].end))
                            )
                        j = end + 1
                        continue
                    j = body + 1
                    continue
                if t.kind == "punct" and t.text == "{":
                    j = _match_brace(tokens, j) + 1
                    continue
                j += 1
            contracts.append(contract)
            i = close_idx + 1
            continue
        i += 1
    return SpanUnit(path, text, contracts)
