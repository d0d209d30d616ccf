"""Net files: nested net declarations, synchronisers, morphisms and wiring expressions.

Wiring operators from loosest to tightest: `..` (serial), `||` (parallel),
then the postfix forms `\\`, `\\(...)` and `*`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..lexer import Cursor
from ..synch.ast import ChanParam, Depth
from ..synch.parser import parse_synch_from

CATEGORY_RE = re.compile(r"^(\d*)(T|I|DO|DU|MO|MS|MU)$", re.IGNORECASE)


# wiring expressions

@dataclass(frozen=True)
class Ref:
    name: str
    config: tuple = ()  # (key or None, value) with value an int or a name
    category: tuple | None = None  # (n or None, letters)
    line: int = 0


@dataclass(frozen=True)
class MergeOp:
    line: int = 0


@dataclass(frozen=True)
class Rename:
    left: tuple
    inner: object
    right: tuple


@dataclass(frozen=True)
class Serial:
    left: object
    right: object


@dataclass(frozen=True)
class Parallel:
    left: object
    right: object


@dataclass(frozen=True)
class Wrap:
    operand: object
    names: tuple | None = None
    exclude: bool = False
    sinks: tuple = ()


@dataclass(frozen=True)
class Star:
    operand: object


def render_wiring(e) -> str:
    if isinstance(e, Ref):
        pre = ""
        if e.category is not None:
            n, cat = e.category
            pre = f"{n or ''}{cat}:"
        cfg = ""
        if e.config:
            cfg = "[" + ", ".join(f"{k}={v}" if k else str(v) for k, v in e.config) + "]"
        return pre + e.name + cfg
    if isinstance(e, MergeOp):
        return "~"
    if isinstance(e, Rename):
        def side(xs):
            return ", ".join(f"{x[0]}={x[1]}" if isinstance(x, tuple) else x for x in xs)
        return f"<{side(e.left)} | {render_wiring(e.inner)} | {side(e.right)}>"
    if isinstance(e, Serial):
        return f"({render_wiring(e.left)} .. {render_wiring(e.right)})"
    if isinstance(e, Parallel):
        return f"({render_wiring(e.left)} || {render_wiring(e.right)})"
    if isinstance(e, Wrap):
        body = render_wiring(e.operand)
        if e.names is None and not e.sinks:
            return body + "\\"
        parts = ("^" if e.exclude else "") + ", ".join(e.names or ())
        if e.sinks:
            parts += (" " if parts else "") + "- " + ", ".join(e.sinks)
        return f"{body}\\({parts})"
    if isinstance(e, Star):
        return render_wiring(e.operand) + "*"
    raise TypeError(e)


def wiring_refs(e):
    """Every Ref in a wiring expression, left to right."""
    if isinstance(e, Ref):
        return [e]
    if isinstance(e, Rename):
        return wiring_refs(e.inner)
    if isinstance(e, (Serial, Parallel)):
        return wiring_refs(e.left) + wiring_refs(e.right)
    if isinstance(e, (Wrap, Star)):
        return wiring_refs(e.operand)
    return []


class _WiringParser:
    def __init__(self, cur: Cursor):
        self.cur = cur

    def wiring(self):
        left = self.parallel()
        while self.cur.accept(".."):
            left = Serial(left, self.parallel())
        return left

    def parallel(self):
        left = self.postfix()
        while self.cur.accept("||"):
            left = Parallel(left, self.postfix())
        return left

    def postfix(self):
        cur = self.cur
        e = self.primary()
        while True:
            if cur.accept("*"):
                e = Star(e)
            elif cur.accept("\\"):
                if cur.at("("):
                    e = self.wrap_list(e)
                else:
                    e = Wrap(e)
            else:
                return e

    def wrap_list(self, operand):
        cur = self.cur
        cur.expect("(")
        exclude = cur.accept("^")
        names, sinks = [], []
        while cur.at_kind("id"):
            names.append(cur.next().text)
            if not cur.accept(","):
                break
        if cur.accept("-"):
            sinks.append(cur.expect_kind("id", "a pressure sink channel").text)
            while cur.accept(","):
                sinks.append(cur.expect_kind("id", "a pressure sink channel").text)
        cur.expect(")")
        if exclude and not names:
            cur.error("'^' needs at least one channel name")
        return Wrap(operand, tuple(names) if names or exclude else None, exclude, tuple(sinks))

    def primary(self):
        cur = self.cur
        if cur.accept("("):
            e = self.wiring()
            cur.expect(")")
            return e
        if cur.at("<"):
            return self.rename()
        return self.ref()

    def names(self, stop):
        cur = self.cur
        items = []
        if cur.at(stop):
            return ()
        while True:
            a = cur.expect_kind("id", "a channel name").text
            if cur.accept("="):
                b = cur.expect_kind("id", "a channel name").text
                items.append((a, b))
            else:
                items.append(a)
            if not cur.accept(","):
                break
        if any(isinstance(x, tuple) for x in items) and not all(isinstance(x, tuple) for x in items):
            cur.error("renaming lists cannot mix positional and name=value forms")
        return tuple(items)

    def rename(self):
        cur = self.cur
        cur.expect("<")
        left = self.names("|")
        cur.expect("|")
        tok = cur.peek()
        if cur.accept("~"):
            inner = MergeOp(tok.line)
            if any(isinstance(x, tuple) for x in left):
                cur.error("a merge takes positional channel names only")
        else:
            inner = self.wiring()
        cur.expect("|")
        right = self.names(">")
        cur.expect(">")
        if isinstance(inner, MergeOp) and any(isinstance(x, tuple) for x in right):
            cur.error("a merge takes positional channel names only")
        return Rename(left, inner, right)

    def category_prefix(self):
        cur = self.cur
        tok = cur.peek()
        if tok.kind == "num" and cur.at_kind("id", 1) and cur.adjacent(1) and cur.at(":", 2):
            m = CATEGORY_RE.match(tok.text + cur.peek(1).text)
            if m is None:
                cur.error("unknown box category", cur.peek(1))
            cur.next(), cur.next(), cur.next()
            return (int(m.group(1)), m.group(2).upper())
        if tok.kind == "id" and cur.at(":", 1):
            m = CATEGORY_RE.match(tok.text)
            if m is None:
                cur.error("unknown box category", tok)
            cur.next(), cur.next()
            return (int(m.group(1)) if m.group(1) else None, m.group(2).upper())
        return None

    def ref(self):
        cur = self.cur
        cat = self.category_prefix()
        tok = cur.expect_kind("id", "a vertex name")
        config = []
        if cur.accept("["):
            if not cur.at("]"):
                while True:
                    key = None
                    if cur.at_kind("id") and cur.at("=", 1):
                        key = cur.next().text
                        cur.next()
                    config.append((key, self.config_value()))
                    if not cur.accept(","):
                        break
            cur.expect("]")
        return Ref(tok.text, tuple(config), cat, tok.line)

    def config_value(self):
        cur = self.cur
        neg = cur.accept("-")
        tok = cur.next()
        if tok.kind == "num":
            v = int(tok.text, 0)
            return -v if neg else v
        if tok.kind == "id" and not neg:
            return tok.text
        cur.error("expected an integer or a configuration parameter", tok)


def parse_wiring(text: str):
    cur = Cursor(text)
    e = _WiringParser(cur).wiring()
    if not cur.at_eof():
        cur.error("unexpected input after the wiring expression")
    return e


# morphisms

JOIN_KINDS = {"O": "ordered", "S": "segmented", "U": "unordered"}


@dataclass(frozen=True)
class MapItem:
    name: str
    arity: int | None = None


@dataclass(frozen=True)
class Join:
    kind: str  # O, S or U
    name: str


@dataclass(frozen=True)
class MorphGroup:
    splits: tuple  # one name, or one per map when the split is per-map
    maps: tuple  # MapItem
    joins: tuple  # one Join, or one per map
    shape: str  # shared-both | shared-join | shared-split


@dataclass(frozen=True)
class Override:
    join: Join
    split: str
    synch: str


@dataclass
class MorphismDecl:
    size: str
    groups: list
    overrides: list
    line: int = 0


class _MorphParser:
    def __init__(self, cur):
        self.cur = cur

    def morphism(self):
        cur = self.cur
        head = cur.expect("morph")
        cur.expect("(")
        size = cur.expect_kind("id", "a size variable").text
        cur.expect(")")
        cur.expect("{")
        groups = [self.group()]
        while cur.accept(","):
            groups.append(self.group())
        overrides = []
        if cur.accept("where"):
            overrides.append(self.override())
            while cur.accept(","):
                overrides.append(self.override())
        cur.expect("}")
        return MorphismDecl(size, groups, overrides, head.line)

    def map_item(self):
        cur = self.cur
        arity = None
        if cur.at_kind("num") and cur.at(":", 1):
            arity = int(cur.next().text)
            cur.next()
            if arity < 1:
                cur.error("a transductor needs at least one output")
        return MapItem(cur.expect_kind("id", "a transductor name").text, arity)

    def join(self):
        cur = self.cur
        tok = cur.peek()
        if tok.kind != "id" or tok.text not in JOIN_KINDS or not cur.at("'", 1):
            cur.error("expected a join: O'name, S'name or U'name")
        cur.next(), cur.next()
        return Join(tok.text, cur.expect_kind("id", "a reductor name").text)

    def group(self):
        cur = self.cur
        if cur.accept("("):
            splits, maps = [], []
            while True:
                splits.append(cur.expect_kind("id", "an inductor name").text)
                cur.expect("/")
                maps.append(self.map_item())
                if not cur.accept(","):
                    break
            cur.expect(")")
            cur.expect("/")
            return MorphGroup(tuple(splits), tuple(maps), (self.join(),), "shared-join")
        split = cur.expect_kind("id", "an inductor name").text
        cur.expect("/")
        if cur.accept("("):
            maps, joins = [], []
            while True:
                maps.append(self.map_item())
                cur.expect("/")
                joins.append(self.join())
                if not cur.accept(","):
                    break
            cur.expect(")")
            return MorphGroup((split,), tuple(maps), tuple(joins), "shared-split")
        maps = [self.map_item()]
        while cur.accept(","):
            maps.append(self.map_item())
        cur.expect("/")
        return MorphGroup((split,), tuple(maps), (self.join(),), "shared-both")

    def override(self):
        cur = self.cur
        j = self.join()
        cur.expect("..")
        split = cur.expect_kind("id", "an inductor name").text
        cur.expect("=")
        synch = cur.expect_kind("id", "a synchroniser name").text
        return Override(j, split, synch)


def parse_morphism(text: str) -> MorphismDecl:
    cur = Cursor(text)
    m = _MorphParser(cur).morphism()
    if not cur.at_eof():
        cur.error("unexpected input after the morphism")
    return m


# nets

@dataclass
class NetDecl:
    name: str
    pure: bool
    category: tuple | None
    configs: list
    inputs: list  # ChanParam
    outputs: list
    synchs: dict = field(default_factory=dict)
    nets: dict = field(default_factory=dict)
    morphs: list = field(default_factory=list)
    wiring: object = None
    line: int = 0

    @property
    def input_names(self):
        return [c.name for c in self.inputs]

    @property
    def output_names(self):
        return [c.name for c in self.outputs]


@dataclass
class Program:
    nets: dict = field(default_factory=dict)
    synchs: dict = field(default_factory=dict)
    morphs: list = field(default_factory=list)
    order: list = field(default_factory=list)  # (kind, name) in source order


class _NetParser:
    def __init__(self, cur):
        self.cur = cur

    def params(self):
        cur = self.cur
        out = []
        if cur.at("|") or cur.at(")"):
            return out
        while True:
            name = cur.expect_kind("id", "a channel name").text
            depth = Depth()
            if cur.accept(":"):
                neg = cur.accept("-")
                tok = cur.next()
                if tok.kind == "num":
                    depth = Depth(-int(tok.text) if neg else int(tok.text))
                elif tok.kind == "id" and not neg:
                    sign, shift = 1, 0
                    if cur.at("+") or cur.at("-"):
                        sign = 1 if cur.next().text == "+" else -1
                        t = cur.next()
                        shift = int(t.text) if t.kind == "num" else t.text
                    depth = Depth(tok.text, sign, shift)
                else:
                    cur.error("expected a depth", tok)
            out.append(ChanParam(name, depth))
            if not cur.accept(","):
                return out

    def net(self) -> NetDecl:
        cur = self.cur
        pure = cur.accept("pure")
        head = cur.expect("net")
        category = None
        tok = cur.peek()
        if tok.kind == "id" and cur.at(":", 1):
            m = CATEGORY_RE.match(tok.text)
            if m is None or m.group(1):
                cur.error("expected a category letter code such as t, i or du", tok)
            category = (None, m.group(2).upper())
            cur.next(), cur.next()
        if category is not None and not pure:
            cur.error("only pure nets take a category", tok)
        name = cur.expect_kind("id", "a net name").text
        configs = []
        if cur.accept("["):
            if not cur.at("]"):
                configs.append(cur.expect_kind("id", "a configuration parameter").text)
                while cur.accept(","):
                    configs.append(cur.expect_kind("id", "a configuration parameter").text)
            cur.expect("]")
        cur.expect("(")
        if cur.accept("||"):
            ins, outs = [], []
        else:
            ins = self.params()
            cur.expect("|")
            outs = self.params()
        cur.expect(")")
        decl = NetDecl(name, pure, category, configs, ins, outs, line=head.line)
        if pure and category is None:
            decl.category = (None, "T")
        while not cur.at("connect"):
            if cur.at_eof():
                cur.error("expected 'connect'")
            kind, item = self.decl()
            scope = {"net": decl.nets, "synch": decl.synchs}.get(kind)
            if kind == "morph":
                decl.morphs.append(item)
                continue
            if item.name in decl.nets or item.name in decl.synchs:
                cur.error(f"duplicate declaration of {item.name!r}")
            scope[item.name] = item
        cur.expect("connect")
        decl.wiring = _WiringParser(cur).wiring()
        cur.expect("end")
        return decl

    def decl(self):
        cur = self.cur
        if cur.at("net") or cur.at("pure"):
            return "net", self.net()
        if cur.at("synch") or cur.at("tab"):
            return "synch", parse_synch_from(cur)
        if cur.at("morph"):
            return "morph", _MorphParser(cur).morphism()
        cur.error("expected a net, synch, tab or morph declaration")

    def program(self) -> Program:
        prog = Program()
        cur = self.cur
        while not cur.at_eof():
            kind, item = self.decl()
            if kind == "morph":
                prog.morphs.append(item)
                prog.order.append(("morph", len(prog.morphs) - 1))
                continue
            if item.name in prog.nets or item.name in prog.synchs:
                cur.error(f"duplicate declaration of {item.name!r}")
            (prog.nets if kind == "net" else prog.synchs)[item.name] = item
            prog.order.append((kind, item.name))
        return prog


def parse_program(text: str) -> Program:
    return _NetParser(Cursor(text)).program()


def parse_net(text: str) -> NetDecl:
    cur = Cursor(text)
    decl = _NetParser(cur).net()
    if not cur.at_eof():
        cur.error("unexpected input after the net")
    return decl
