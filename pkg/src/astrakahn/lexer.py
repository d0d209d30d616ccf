"""Tokenizer and token cursor shared by every source-language parser."""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError

_OPS = [
    "||", "..", ":=", "=>", "<=", ">=", "==", "!=", "&&",
    "(", ")", "[", "]", "{", "}", "<", ">", ",", ";", ":", ".", "|",
    "=", "+", "-", "*", "/", "%", "^", "&", "!", "?", "@", "~", "\\", "'",
]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<num>0[xX][0-9a-fA-F]+[uUlL]*|[0-9]+\.[0-9]+(?:[eE][+-]?[0-9]+)?[fFlL]?|[0-9]+(?:[eE][+-]?[0-9]+)?[uUlL]*)
  | (?P<var>\$[A-Za-z_][A-Za-z0-9_]*)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<op>%s)
    """ % "|".join(re.escape(o) for o in _OPS),
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # id, var, num, str, op, eof
    text: str
    line: int
    col: int
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, pos - line_start + 1, pos, m.end()))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1, pos, pos))
    return tokens


class Cursor:
    """Random-access token cursor with small conveniences for recursive descent."""

    def __init__(self, text_or_tokens):
        if isinstance(text_or_tokens, str):
            self.tokens = tokenize(text_or_tokens)
        else:
            self.tokens = list(text_or_tokens)
        self.i = 0

    def peek(self, k=0) -> Token:
        j = min(self.i + k, len(self.tokens) - 1)
        return self.tokens[j]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text, k=0) -> bool:
        tok = self.peek(k)
        return tok.kind in ("op", "id") and tok.text == text

    def at_kind(self, kind, k=0) -> bool:
        return self.peek(k).kind == kind

    def accept(self, text) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.next()

    def expect_kind(self, kind, what=None) -> Token:
        if self.peek().kind != kind:
            self.error(f"expected {what or kind}")
        return self.next()

    def adjacent(self, k=1) -> bool:
        """True when token at offset k starts exactly where the previous one ends."""
        a = self.peek(k - 1)
        b = self.peek(k)
        return a.end == b.start

    def at_eof(self) -> bool:
        return self.peek().kind == "eof"

    def error(self, message, tok: Token | None = None):
        tok = tok or self.peek()
        found = tok.text if tok.kind != "eof" else "end of input"
        raise ParseError(f"{message}, found {found!r}", tok.line, tok.col)
