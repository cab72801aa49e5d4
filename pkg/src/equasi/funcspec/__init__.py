"""Parsing, evaluation and differentiation of user-specified functions."""

from equasi.funcspec.expr import (
    BinOp,
    Call,
    ExpressionTree,
    Neg,
    Num,
    Var,
    parse_expression,
    serialize,
)
from equasi.funcspec.func import (
    HUGE,
    PLUS_INFINITY,
    Box,
    ScalarFunc,
    VectorFunc,
    directional_derivative,
    evaluate,
    ext_real,
    gradient,
)

__all__ = [
    "BinOp",
    "Box",
    "Call",
    "ExpressionTree",
    "HUGE",
    "Neg",
    "Num",
    "PLUS_INFINITY",
    "ScalarFunc",
    "Var",
    "VectorFunc",
    "directional_derivative",
    "evaluate",
    "ext_real",
    "gradient",
    "parse_expression",
    "serialize",
]
