"""MiniSol frontend: lexer, parser, printer and AST queries."""

from logicfuzz.frontend.errors import (
    Ambiguous,
    FrontendError,
    NotFound,
    ParseError,
    ScopeError,
    UnsupportedFeature,
)
from logicfuzz.frontend.parser import parse, parse_expression, parse_statements
from logicfuzz.frontend.printer import print_expr, print_unit
from logicfuzz.frontend.query import NodePath, check_names, dump_ast, isomorphic, node_path, resolve

__all__ = [
    "Ambiguous",
    "FrontendError",
    "NodePath",
    "NotFound",
    "ParseError",
    "ScopeError",
    "UnsupportedFeature",
    "check_names",
    "dump_ast",
    "isomorphic",
    "node_path",
    "parse",
    "parse_expression",
    "parse_statements",
    "print_expr",
    "print_unit",
    "resolve",
]
