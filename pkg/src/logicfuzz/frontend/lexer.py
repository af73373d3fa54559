"""Tokenizer for the MiniSol subset."""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal

from logicfuzz.frontend.errors import ParseError

UNITS = {"wei": 1, "gwei": 10**9, "ether": 10**18}

_PUNCT = [
    "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=",
    "{", "}", "(", ")", "[", "]", ";", ",", ".", "=", "<", ">", "+", "-", "*", "/", "%",
    "!", "?", ":", "^", "~", "&", "|",
]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<line_comment>//[^\n]*)
  | (?P<block_comment>/\*.*?\*/)
  | (?P<hex>0[xX][0-9a-fA-F_]+)
  | (?P<number>\d[\d_]*(?:\.\d+)?(?:[eE]\d+)?)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<punct>"""
    + "|".join(re.escape(p) for p in _PUNCT)
    + r""")
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | hex | string | punct | eof
    text: str
    start: int
    end: int
    line: int
    col: int


def line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    n = len(text)
    while pos < n:
        if text.startswith("/*", pos) and text.find("*/", pos + 2) < 0:
            raise ParseError(line, pos - line_start + 1, "end of block comment")
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(line, pos - line_start + 1, "a valid token", found=text[pos])
        kind = m.lastgroup
        end = m.end()
        if kind == "block_comment" or kind == "ws":
            newlines = text.count("\n", pos, end)
            if newlines:
                line += newlines
                line_start = text.rfind("\n", pos, end) + 1
        elif kind != "line_comment":
            tokens.append(Token(kind, m.group(), pos, end, line, pos - line_start + 1))
        pos = end
    tokens.append(Token("eof", "", n, n, line, n - line_start + 1))
    return tokens


def number_value(text: str) -> int:
    """Integer value of a decimal or scientific literal; fractional results are rejected."""
    value = Decimal(text.replace("_", ""))
    if value != value.to_integral_value():
        raise ValueError(f"non-integral literal {text}")
    return int(value)
