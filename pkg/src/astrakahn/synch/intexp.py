"""C-style integer expressions used in guards and do-clauses.

`^` is exponentiation (as in `2^bits`) and binds tighter than `*`; `=` is
accepted as equality and `&` as logical and, so guards such as
`count=2^bits-1 & k=d` read naturally.
"""
from __future__ import annotations

from ..errors import RuntimeFault
from ..lexer import Cursor
from .ast import Binary, Name, Num, Unary

_LEVELS = [
    ("||",),
    ("&&", "&"),
    ("|",),
    ("==", "!=", "="),
    ("<", "<=", ">", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
]
_CANON = {"&": "&&", "=": "=="}


def _at_op(cur: Cursor, ops):
    for op in ops:
        if op in ("<<", ">>"):
            ch = op[0]
            if cur.at(ch) and cur.at(ch, 1) and cur.adjacent(1):
                return op
        elif cur.at(op):
            if op == "|" and cur.at("|", 1) and cur.adjacent(1):
                continue
            if op in ("<", ">") and cur.at(op, 1) and cur.adjacent(1):
                continue
            return op
    return None


def parse_expr(cur: Cursor, level: int = 0):
    if level == len(_LEVELS):
        return _unary(cur)
    left = parse_expr(cur, level + 1)
    while True:
        op = _at_op(cur, _LEVELS[level])
        if op is None:
            return left
        cur.next()
        if op in ("<<", ">>"):
            cur.next()
        right = parse_expr(cur, level + 1)
        left = Binary(_CANON.get(op, op), left, right)


def _unary(cur):
    for op in ("-", "+", "!", "~"):
        if cur.at(op):
            cur.next()
            return Unary(op, _unary(cur))
    return _power(cur)


def _power(cur):
    # right associative, tighter than unary minus on the left: -2^2 == -4
    base = _primary(cur)
    if cur.accept("^"):
        return Binary("^", base, _unary(cur))
    return base


def _primary(cur):
    tok = cur.peek()
    if tok.kind == "num":
        cur.next()
        text = tok.text.rstrip("uUlL")
        try:
            return Num(int(text, 0) if not text.isdigit() else int(text))
        except ValueError:
            cur.error("integer expressions take integer literals", tok)
    if tok.kind == "id":
        cur.next()
        return Name(tok.text)
    if cur.accept("("):
        e = parse_expr(cur)
        cur.expect(")")
        return e
    cur.error("expected an integer expression")


def parse_int_expr(text: str):
    cur = Cursor(text)
    e = parse_expr(cur)
    if not cur.at_eof():
        cur.error("unexpected trailing input")
    return e


def _cdiv(a, b):
    if b == 0:
        raise RuntimeFault("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _cmod(a, b):
    return a - b * _cdiv(a, b)


def eval_int(e, env) -> int:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Name):
        try:
            return env[e.name]
        except KeyError:
            raise RuntimeFault(f"name {e.name!r} has no value here") from None
    if isinstance(e, Unary):
        v = eval_int(e.arg, env)
        if e.op == "-":
            return -v
        if e.op == "+":
            return v
        if e.op == "!":
            return int(not v)
        return ~v
    op = e.op
    if op == "&&":
        return int(bool(eval_int(e.left, env)) and bool(eval_int(e.right, env)))
    if op == "||":
        return int(bool(eval_int(e.left, env)) or bool(eval_int(e.right, env)))
    a = eval_int(e.left, env)
    b = eval_int(e.right, env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _cdiv(a, b)
    if op == "%":
        return _cmod(a, b)
    if op == "^":
        if b < 0:
            raise RuntimeFault("negative exponent")
        return a ** b
    if op == "<<":
        return a << b
    if op == ">>":
        return a >> b
    if op == "|":
        return a | b
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    raise ValueError(op)


def substitute(e, mapping):
    """Replace names by constant values where the mapping has them."""
    if isinstance(e, Name) and e.name in mapping:
        return Num(mapping[e.name])
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, mapping))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    return e


def render_expr(e) -> str:
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Unary):
        return f"{e.op}{render_expr(e.arg)}"
    return f"({render_expr(e.left)} {e.op} {render_expr(e.right)})"
