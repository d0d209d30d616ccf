"""MDL terms: representation, parsing and rendering."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ParseError
from .lexer import Cursor


class Term:
    __slots__ = ()

    def __str__(self):
        return render_term(self)


class Guard:
    __slots__ = ()


# guards

@dataclass(frozen=True)
class BoolConst(Guard):
    value: bool


@dataclass(frozen=True)
class Flag(Guard):
    name: str


@dataclass(frozen=True)
class Not(Guard):
    arg: Guard


@dataclass(frozen=True)
class And(Guard):
    args: tuple

    def __post_init__(self):
        if not self.args:
            raise ValueError("And needs at least one operand")


@dataclass(frozen=True)
class Or(Guard):
    args: tuple

    def __post_init__(self):
        if not self.args:
            raise ValueError("Or needs at least one operand")


TRUE = BoolConst(True)
FALSE = BoolConst(False)


# atoms and constructors

@dataclass(frozen=True)
class Symbol(Term):
    name: str


@dataclass(frozen=True, eq=False)
class Number(Term):
    text: str
    value: Fraction

    def __eq__(self, other):
        return isinstance(other, Number) and self.value == other.value

    def __hash__(self):
        return hash(("num", self.value))

    @staticmethod
    def of(value) -> "Number":
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, int):
            return Number(str(value), Fraction(value))
        value = Fraction(value)
        if value.denominator == 1:
            return Number(str(value.numerator), value)
        d = value.denominator
        while d % 2 == 0:
            d //= 2
        while d % 5 == 0:
            d //= 5
        if d == 1:
            return Number(_decimal_text(value), value)
        return Number(repr(float(value)), value)

    def is_integer(self) -> bool:
        return self.value.denominator == 1

    def as_int(self) -> int:
        return int(self.value)


def _decimal_text(value: Fraction) -> str:
    sign = "-" if value < 0 else ""
    value = abs(value)
    whole = value.numerator // value.denominator
    rest = value - whole
    digits = []
    while rest:
        rest *= 10
        digit = rest.numerator // rest.denominator
        digits.append(str(digit))
        rest -= digit
    return f"{sign}{whole}." + "".join(digits)


@dataclass(frozen=True)
class Str(Term):
    value: str


@dataclass(frozen=True)
class Var(Term):
    name: str  # includes the leading '$'


@dataclass(frozen=True)
class Tuple(Term):
    items: tuple


@dataclass(frozen=True)
class List(Term):
    head: Term
    tail: Term


@dataclass(frozen=True)
class Member:
    label: str
    guard: Guard
    term: Term


@dataclass(frozen=True)
class Record(Term):
    members: tuple
    tail: Term = field(default=None)

    def __post_init__(self):
        if self.tail is None:
            object.__setattr__(self, "tail", NIL)


@dataclass(frozen=True)
class Choice(Term):
    members: tuple
    tail: Term = field(default=None)

    def __post_init__(self):
        if self.tail is None:
            object.__setattr__(self, "tail", NONE)


@dataclass(frozen=True)
class Switch(Term):
    branches: tuple  # of (Guard, Term)


class _Nil(Term):
    __slots__ = ()

    def __repr__(self):
        return "NIL"

    def __reduce__(self):
        return (_nil, ())


class _None(Term):
    __slots__ = ()

    def __repr__(self):
        return "NONE"

    def __reduce__(self):
        return (_none, ())


NIL = _Nil()
NONE = _None()


def _nil():
    return NIL


def _none():
    return NONE


# smart constructors keep the canonical shapes

def make_tuple(items) -> Term:
    items = tuple(items)
    if not items:
        raise ValueError("a tuple needs at least one member")
    if len(items) == 1:
        return items[0]
    return Tuple(items)


def cons(head: Term, tail: Term) -> Term:
    if head is NIL and tail is NIL:
        return NIL
    return List(head, tail)


def make_list(items, tail: Term = NIL) -> Term:
    acc = tail
    for item in reversed(list(items)):
        acc = cons(item, acc)
    return acc


def list_items(t: Term):
    """Return (elements, tail) of a list chain; tail is Nil or a Var."""
    items = []
    while isinstance(t, List):
        items.append(t.head)
        t = t.tail
    return items, t


def make_record(members, tail: Term = NIL) -> Term:
    members = list(members)
    while isinstance(tail, Record):
        members.extend(tail.members)
        tail = tail.tail
    if not members:
        return tail
    return Record(tuple(members), tail)


def make_choice(members, tail: Term = NONE) -> Term:
    members = list(members)
    while isinstance(tail, Choice):
        members.extend(tail.members)
        tail = tail.tail
    if not members:
        return tail
    return Choice(tuple(members), tail)


def record(**fields) -> Term:
    return make_record(Member(k, TRUE, v) for k, v in fields.items())


def sym(name: str) -> Symbol:
    return Symbol(name)


def num(value) -> Number:
    return Number.of(value)


def is_atom(t: Term) -> bool:
    return isinstance(t, (Symbol, Number, Str))


def walk(t: Term):
    """Yield every subterm, preorder."""
    stack = [t]
    while stack:
        cur = stack.pop()
        yield cur
        if isinstance(cur, Tuple):
            stack.extend(reversed(cur.items))
        elif isinstance(cur, List):
            stack.append(cur.tail)
            stack.append(cur.head)
        elif isinstance(cur, (Record, Choice)):
            stack.append(cur.tail)
            stack.extend(m.term for m in reversed(cur.members))
        elif isinstance(cur, Switch):
            stack.extend(b[1] for b in reversed(cur.branches))


def guard_flags(g: Guard):
    if isinstance(g, Flag):
        yield g.name
    elif isinstance(g, Not):
        yield from guard_flags(g.arg)
    elif isinstance(g, (And, Or)):
        for a in g.args:
            yield from guard_flags(a)


def term_flags(t: Term) -> list[str]:
    seen = []
    for sub in walk(t):
        guards = []
        if isinstance(sub, (Record, Choice)):
            guards = [m.guard for m in sub.members]
        elif isinstance(sub, Switch):
            guards = [b[0] for b in sub.branches]
        for g in guards:
            for f in guard_flags(g):
                if f not in seen:
                    seen.append(f)
    return seen


def term_vars(t: Term) -> list[str]:
    seen = []
    for sub in walk(t):
        if isinstance(sub, Var) and sub.name not in seen:
            seen.append(sub.name)
    return seen


def is_ground(t: Term) -> bool:
    for sub in walk(t):
        if isinstance(sub, (Var, Switch)):
            return False
        if isinstance(sub, (Record, Choice)):
            if any(m.guard != TRUE for m in sub.members):
                return False
    return True


# parsing

_GUARD_OPS = ("not", "and", "or")


class TermParser:
    """Recursive-descent parser for MDL terms over a shared token cursor."""

    def __init__(self, cur: Cursor):
        self.cur = cur

    def term(self) -> Term:
        cur = self.cur
        tok = cur.peek()
        if tok.kind == "num":
            cur.next()
            return _number(tok.text)
        if cur.at("-") and cur.peek(1).kind == "num" and cur.adjacent(1):
            cur.next()
            return _number("-" + cur.next().text)
        if tok.kind == "str":
            cur.next()
            return Str(_unescape(tok.text[1:-1]))
        if tok.kind == "var":
            cur.next()
            return Var(tok.text)
        if tok.kind == "id":
            cur.next()
            if tok.text == "nil":
                return NIL
            if tok.text == "none":
                return NONE
            return Symbol(tok.text)
        if cur.at("("):
            if cur.at(":", 1) and cur.adjacent(1):
                return self.choice()
            return self.tuple()
        if cur.at("["):
            return self.list()
        if cur.at("{"):
            return self.record()
        if cur.at("<"):
            return self.switch()
        cur.error("expected a term")

    def tuple(self) -> Term:
        cur = self.cur
        cur.expect("(")
        items = [self.term()]
        while not cur.at(")"):
            items.append(self.term())
        cur.expect(")")
        return make_tuple(items)

    def list(self) -> Term:
        cur = self.cur
        cur.expect("[")
        items = [self.term()]
        while cur.accept(","):
            items.append(self.term())
        tail = NIL
        if cur.accept("||"):
            tail = self.term()
            if not (isinstance(tail, (List, Var)) or tail is NIL):
                cur.error("list tail must be a list, a variable or nil")
        cur.expect("]")
        return make_list(items, tail)

    def _members(self):
        cur = self.cur
        members = [self.member()]
        while cur.accept(","):
            members.append(self.member())
        return members

    def member(self) -> Member:
        cur = self.cur
        label = cur.expect_kind("id", "a label").text
        guard = TRUE
        if cur.at("("):
            cur.next()
            if cur.peek().kind == "id" and cur.peek().text in _GUARD_OPS and not cur.at(")", 1):
                guard = self._guard_op(cur.next().text)
            else:
                guard = self.guard()
            cur.expect(")")
        cur.expect(":")
        return Member(label, guard, self.term())

    def record(self) -> Term:
        cur = self.cur
        start = cur.expect("{")
        members = self._members()
        tail = NIL
        if cur.accept("||"):
            tail = self.term()
            if not (isinstance(tail, (Record, Var)) or tail is NIL):
                cur.error("record tail must be a record, a variable or nil")
        cur.expect("}")
        _check_labels(members, tail, start)
        return make_record(members, tail)

    def choice(self) -> Term:
        cur = self.cur
        start = cur.expect("(")
        cur.expect(":")
        members = self._members()
        tail = NONE
        if cur.accept("||"):
            tail = self.term()
            if not (isinstance(tail, (Choice, Var)) or tail is NONE):
                cur.error("choice tail must be a choice, a variable or none")
        if not (cur.at(":") and cur.at(")", 1) and cur.adjacent(1)):
            cur.error("expected ':)'")
        cur.next()
        cur.next()
        _check_labels(members, tail, start)
        return make_choice(members, tail)

    def switch(self) -> Term:
        cur = self.cur
        cur.expect("<")
        branches = []
        while True:
            g = self.guard()
            cur.expect(":")
            branches.append((g, self.term()))
            if not cur.accept(","):
                break
        cur.expect(">")
        return Switch(tuple(branches))

    def guard(self) -> Guard:
        cur = self.cur
        tok = cur.peek()
        if tok.kind == "id":
            cur.next()
            if tok.text == "true":
                return TRUE
            if tok.text == "false":
                return FALSE
            if tok.text in _GUARD_OPS:
                cur.error("guard operator must be parenthesised", tok)
            return Flag(tok.text)
        if cur.at("("):
            cur.next()
            op = cur.expect_kind("id", "not, and or or")
            if op.text not in _GUARD_OPS:
                cur.error("expected not, and or or", op)
            g = self._guard_op(op.text)
            cur.expect(")")
            return g
        cur.error("expected a guard expression")

    def _guard_op(self, op) -> Guard:
        cur = self.cur
        if op == "not":
            return Not(self.guard())
        args = [self.guard()]
        while not cur.at(")"):
            args.append(self.guard())
        return And(tuple(args)) if op == "and" else Or(tuple(args))


def _check_labels(members, tail, tok):
    seen = set()
    extra = list(tail.members) if isinstance(tail, (Record, Choice)) else []
    for m in list(members) + extra:
        if m.guard == TRUE:
            if m.label in seen:
                raise ParseError(f"duplicate label {m.label!r}", tok.line, tok.col)
            seen.add(m.label)


_SUFFIX = re.compile(r"[uUlLfF]+$")


def _number(text: str) -> Number:
    body = text
    neg = body.startswith("-")
    if neg:
        body = body[1:]
    if body[:2].lower() == "0x":
        value = Fraction(int(re.sub(r"[uUlL]+$", "", body[2:]), 16))
    else:
        value = Fraction(_SUFFIX.sub("", body))
    return Number(text, -value if neg else value)


_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "0": "\0", "\\": "\\", '"': '"', "'": "'", "a": "\a", "b": "\b", "f": "\f", "v": "\v"}


def _unescape(body: str) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            if nxt == "x":
                j = i + 2
                while j < len(body) and j < i + 4 and body[j] in "0123456789abcdefABCDEF":
                    j += 1
                out.append(chr(int(body[i + 2:j] or "0", 16)))
                i = j
                continue
            out.append(_ESCAPES.get(nxt, nxt))
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def parse_term(text: str) -> Term:
    cur = Cursor(text)
    t = TermParser(cur).term()
    if not cur.at_eof():
        cur.error("unexpected trailing input")
    return t


def parse_guard(text: str) -> Guard:
    cur = Cursor(text)
    g = TermParser(cur).guard()
    if not cur.at_eof():
        cur.error("unexpected trailing input")
    return g


# rendering

def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif 32 <= ord(ch) < 127:
            out.append(ch)
        else:
            out.append("\\x%02x" % ord(ch))
    return "".join(out)


def render_guard(g: Guard) -> str:
    if isinstance(g, BoolConst):
        return "true" if g.value else "false"
    if isinstance(g, Flag):
        return g.name
    if isinstance(g, Not):
        return f"(not {render_guard(g.arg)})"
    if isinstance(g, And):
        return "(and " + " ".join(render_guard(a) for a in g.args) + ")"
    if isinstance(g, Or):
        return "(or " + " ".join(render_guard(a) for a in g.args) + ")"
    raise TypeError(g)


def _render_members(members) -> str:
    parts = []
    for m in members:
        g = "" if m.guard == TRUE else f"({render_guard(m.guard)})"
        parts.append(f"{m.label}{g}:{render_term(m.term)}")
    return ", ".join(parts)


def render_term(t: Term) -> str:
    if t is NIL:
        return "nil"
    if t is NONE:
        return "none"
    if isinstance(t, Symbol):
        return t.name
    if isinstance(t, Number):
        return t.text
    if isinstance(t, Str):
        return '"' + _escape(t.value) + '"'
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Tuple):
        return "(" + " ".join(render_term(x) for x in t.items) + ")"
    if isinstance(t, List):
        items, tail = list_items(t)
        body = ", ".join(render_term(x) for x in items)
        if tail is not NIL:
            body += " || " + render_term(tail)
        return "[" + body + "]"
    if isinstance(t, Record):
        body = _render_members(t.members)
        if t.tail is not NIL:
            body += " || " + render_term(t.tail)
        return "{" + body + "}"
    if isinstance(t, Choice):
        body = _render_members(t.members)
        if t.tail is not NONE:
            body += " || " + render_term(t.tail)
        return "(: " + body + " :)"
    if isinstance(t, Switch):
        return "<" + ", ".join(f"{render_guard(g)}:{render_term(x)}" for g, x in t.branches) + ">"
    raise TypeError(f"not a term: {t!r}")
