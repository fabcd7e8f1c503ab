"""Expression trees for symbolic regression: evaluation, size, and round-trip text form.

Node kinds: real constants, feature variables, binary +, -, *, / and unary
log, sin. Division and log are protected so that every finite input maps to
a finite output:

    a / b  ->  a / b      if |b| > 1e-9, else 1.0
    log x  ->  log(|x|)   if |x| > 1e-9, else 0.0

Binary results are additionally clamped to |v| <= 1e150, which keeps chained
products and near-singular divisions from overflowing float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROTECT_EPS = 1e-9
VALUE_CAP = 1e150

BINARY_OPS = ("+", "-", "*", "/")
UNARY_OPS = ("log", "sin")


@dataclass(frozen=True)
class Expression:
    """Immutable operator-tree node.

    op is one of "const", "var", the four binary symbols, or a unary name.
    Constants carry `value`, variables carry `index`, operators carry
    `children` (a tuple, arity 1 or 2).
    """

    op: str
    value: float = 0.0
    index: int = 0
    children: tuple["Expression", ...] = field(default=())

    def __post_init__(self):
        if self.op in BINARY_OPS and len(self.children) != 2:
            raise ValueError(f"operator {self.op!r} needs 2 children")
        if self.op in UNARY_OPS and len(self.children) != 1:
            raise ValueError(f"operator {self.op!r} needs 1 child")
        if self.op in ("const", "var") and self.children:
            raise ValueError(f"leaf {self.op!r} cannot have children")


def constant(value: float) -> Expression:
    return Expression(op="const", value=float(value))


def variable(index: int) -> Expression:
    if index < 0:
        raise ValueError("variable index must be non-negative")
    return Expression(op="var", index=int(index))


def binary(op: str, left: Expression, right: Expression) -> Expression:
    if op not in BINARY_OPS:
        raise ValueError(f"unknown binary operator {op!r}")
    return Expression(op=op, children=(left, right))


def unary(op: str, child: Expression) -> Expression:
    if op not in UNARY_OPS:
        raise ValueError(f"unknown unary operator {op!r}")
    return Expression(op=op, children=(child,))


def eval_expr(expr: Expression, X: np.ndarray) -> np.ndarray:
    """Evaluate the tree elementwise over the rows of X (shape (n, d))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _eval(expr, X)


def _eval(expr: Expression, X: np.ndarray) -> np.ndarray:
    op = expr.op
    if op == "const":
        return np.full(X.shape[0], expr.value)
    if op == "var":
        if expr.index >= X.shape[1]:
            raise ValueError(
                f"expression uses x{expr.index} but input has {X.shape[1]} features"
            )
        return X[:, expr.index].copy()
    if op == "sin":
        return np.sin(_eval(expr.children[0], X))
    if op == "log":
        a = np.abs(_eval(expr.children[0], X))
        out = np.zeros_like(a)
        np.log(a, out=out, where=a > PROTECT_EPS)
        return out

    left = _eval(expr.children[0], X)
    right = _eval(expr.children[1], X)
    if op == "+":
        out = left + right
    elif op == "-":
        out = left - right
    elif op == "*":
        out = left * right
    else:  # protected division
        out = np.ones_like(left)
        np.divide(left, right, out=out, where=np.abs(right) > PROTECT_EPS)
    return np.clip(out, -VALUE_CAP, VALUE_CAP)


def complexity(expr: Expression) -> int:
    """Total node count of the tree."""
    if not expr.children:
        return 1
    return 1 + sum(complexity(c) for c in expr.children)


def depth(expr: Expression) -> int:
    """Edge count of the longest root-to-leaf path."""
    if not expr.children:
        return 0
    return 1 + max(depth(c) for c in expr.children)


def max_var_index(expr: Expression) -> int:
    """Largest feature index used, or -1 for constant-only trees."""
    if expr.op == "var":
        return expr.index
    if expr.op == "const":
        return -1
    return max(max_var_index(c) for c in expr.children)


def all_nodes(expr: Expression) -> list[Expression]:
    """Preorder list of every node in the tree."""
    nodes = [expr]
    for child in expr.children:
        nodes.extend(all_nodes(child))
    return nodes


def replace_node(expr: Expression, position: int, replacement: Expression) -> Expression:
    """New tree with the node at the given preorder position swapped out."""
    if position < 0 or position >= complexity(expr):
        raise IndexError(f"position {position} out of range")
    return _replace(expr, position, replacement)


def _replace(expr: Expression, position: int, replacement: Expression) -> Expression:
    if position == 0:
        return replacement
    offset = 1
    new_children = list(expr.children)
    for i, child in enumerate(expr.children):
        size = complexity(child)
        if position < offset + size:
            new_children[i] = _replace(child, position - offset, replacement)
            return Expression(
                op=expr.op, value=expr.value, index=expr.index, children=tuple(new_children)
            )
        offset += size
    raise IndexError(f"position {position} out of range")  # unreachable after bounds check


def to_string(expr: Expression) -> str:
    """Canonical infix form, e.g. "((x0 + sin(x1)) / 2.5)"."""
    op = expr.op
    if op == "const":
        return repr(expr.value)
    if op == "var":
        return f"x{expr.index}"
    if op in UNARY_OPS:
        return f"{op}({to_string(expr.children[0])})"
    return f"({to_string(expr.children[0])} {op} {to_string(expr.children[1])})"


def parse(text: str) -> Expression:
    """Parse the canonical infix form back into a tree (round-trips to_string)."""
    tokens = _tokenize(text)
    expr, pos = _parse_expr(tokens, 0)
    if pos != len(tokens):
        raise ValueError(f"trailing tokens after expression: {tokens[pos:]}")
    return expr


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()+*/":
            tokens.append(ch)
            i += 1
        elif ch == "-":
            # unary minus only ever precedes a numeric literal in canonical form
            if tokens and tokens[-1] not in "(+-*/":
                tokens.append(ch)
                i += 1
            else:
                j = i + 1
                while j < n and (text[j].isdigit() or text[j] in ".eE" or
                                 (text[j] in "+-" and text[j - 1] in "eE")):
                    j += 1
                tokens.append(text[i:j])
                i = j
        elif ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] in ".eE" or
                             (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            tokens.append(text[i:j])
            i = j
        elif ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(text[i:j])
            i = j
        else:
            raise ValueError(f"unexpected character {ch!r} in expression text")
    return tokens


def _parse_expr(tokens: list[str], pos: int) -> tuple[Expression, int]:
    if pos >= len(tokens):
        raise ValueError("unexpected end of expression text")
    tok = tokens[pos]
    if tok == "(":
        left, pos = _parse_expr(tokens, pos + 1)
        if pos >= len(tokens) or tokens[pos] not in BINARY_OPS:
            raise ValueError(f"expected binary operator at token {pos}")
        op = tokens[pos]
        right, pos = _parse_expr(tokens, pos + 1)
        if pos >= len(tokens) or tokens[pos] != ")":
            raise ValueError(f"expected ')' at token {pos}")
        return binary(op, left, right), pos + 1
    if tok in UNARY_OPS:
        if pos + 1 >= len(tokens) or tokens[pos + 1] != "(":
            raise ValueError(f"expected '(' after {tok!r}")
        child, pos = _parse_expr(tokens, pos + 2)
        if pos >= len(tokens) or tokens[pos] != ")":
            raise ValueError(f"expected ')' at token {pos}")
        return unary(tok, child), pos + 1
    if tok.startswith("x") and tok[1:].isdigit():
        return variable(int(tok[1:])), pos + 1
    try:
        return constant(float(tok)), pos + 1
    except ValueError:
        raise ValueError(f"cannot parse token {tok!r}") from None
