"""Recursive-descent parser for synchroniser and synch-table source."""
from __future__ import annotations

from ..errors import ParseError
from ..lexer import Cursor
from .ast import (
    Assign, ChanParam, DataExp, Depth, Dispatch, ElseTest, EnumType, IntType, NamedInt,
    NilMsg, OnClause, PatternTest, Ready, SigmaMsg, SigmaTest, StateDecl, StoreDecl,
    SynchDecl, This, Transition, VariantTest, VarItem, Name,
)
from .intexp import parse_expr

CLAUSE_WORDS = ("on", "elseon", "do", "send", "goto")
KEYWORDS = CLAUSE_WORDS + ("store", "state", "synch", "this", "nil", "else", "tab")


class _SynchParser:
    def __init__(self, cur: Cursor):
        self.cur = cur
        self.stores = {}
        self.bound = set()

    # signature

    def synch(self) -> SynchDecl:
        cur = self.cur
        indices = []
        if cur.accept("tab"):
            cur.expect("[")
            while True:
                ind = cur.expect_kind("id", "an index name").text
                cur.expect(":")
                tok = cur.next()
                if tok.kind == "num":
                    lim = int(tok.text, 0)
                elif tok.kind == "id":
                    lim = tok.text
                else:
                    cur.error("expected an index limit", tok)
                indices.append((ind, lim))
                if not cur.accept(","):
                    break
            cur.expect("]")
        head = cur.expect("synch")
        name = cur.expect_kind("id", "a synchroniser name").text
        configs = []
        if cur.accept("["):
            if not cur.at("]"):
                configs.append(cur.expect_kind("id", "a configuration parameter").text)
                while cur.accept(","):
                    configs.append(cur.expect_kind("id", "a configuration parameter").text)
            cur.expect("]")
        cur.expect("(")
        inputs = []
        outputs = []
        if cur.accept("||"):
            pass
        else:
            if not cur.at("|"):
                inputs.append(self.param())
                while cur.accept(","):
                    inputs.append(self.param())
            cur.expect("|")
            if not cur.at(")"):
                outputs.append(self.param())
                while cur.accept(","):
                    outputs.append(self.param())
        cur.expect(")")
        self._unique([c.name for c in inputs], "input channel")
        self._unique([c.name for c in outputs], "output channel")
        self.inputs = [c.name for c in inputs]
        self.outputs = [c.name for c in outputs]
        self.bound = set(configs) | {i for i, _ in indices}
        for c in inputs + outputs:
            if isinstance(c.depth.base, str):
                self.bound.add(c.depth.base)
        cur.expect("{")
        stores, states = self.decls()
        self.bound |= {v for d in states for v in d.vars}
        for d in states:
            if isinstance(d.type, EnumType):
                self.bound |= set(d.type.values)
        transitions = self.transitions()
        labels = {t.state for t in transitions}
        for t in transitions:
            if t.goto is not None and t.goto not in labels:
                raise ParseError(f"goto to undeclared state {t.goto!r}", t.line, 1)
        cur.expect("}")
        return SynchDecl(name, configs, inputs, outputs, stores, states, transitions, head.line, indices)

    def _unique(self, names, what):
        seen = set()
        for n in names:
            if n in seen:
                self.cur.error(f"duplicate {what} {n!r}")
            seen.add(n)

    def param(self) -> ChanParam:
        cur = self.cur
        name = cur.expect_kind("id", "a channel name").text
        if not cur.accept(":"):
            return ChanParam(name, Depth())
        return ChanParam(name, self.depth())

    def depth(self) -> Depth:
        cur = self.cur
        neg = cur.accept("-")
        tok = cur.next()
        if tok.kind == "num":
            v = int(tok.text, 0)
            return Depth(-v if neg else v)
        if tok.kind != "id" or neg:
            cur.error("expected a depth", tok)
        base = tok.text
        for sign_text, sign in (("+", 1), ("-", -1)):
            if cur.accept(sign_text):
                t = cur.next()
                if t.kind == "num":
                    return Depth(base, sign, int(t.text, 0))
                if t.kind == "id":
                    return Depth(base, sign, t.text)
                cur.error("expected a depth shift", t)
        return Depth(base)

    # declarations

    def decls(self):
        cur = self.cur
        stores, states = [], []
        while True:
            if cur.accept("store"):
                while True:
                    var = cur.expect_kind("id", "a store variable").text
                    cur.expect(":")
                    sources = [cur.expect_kind("id", "a channel or tail name").text]
                    while cur.at(",") and cur.peek(1).kind == "id" and not cur.at(":", 2):
                        cur.next()
                        sources.append(cur.next().text)
                    stores.append(StoreDecl(var, tuple(sources)))
                    self.stores[var] = stores[-1]
                    if cur.at(",") and cur.peek(1).kind == "id" and cur.at(":", 2):
                        cur.next()
                        continue
                    break
                cur.accept(";")
            elif cur.accept("state"):
                if cur.accept("int"):
                    cur.expect("(")
                    width = parse_expr(cur)
                    cur.expect(")")
                    ty = IntType(width)
                elif cur.accept("enum"):
                    cur.expect("(")
                    values = [cur.expect_kind("id", "an enumeration value").text]
                    while cur.accept(","):
                        values.append(cur.expect_kind("id", "an enumeration value").text)
                    cur.expect(")")
                    ty = EnumType(tuple(values))
                else:
                    cur.error("expected 'int(' or 'enum('")
                vars_ = [cur.expect_kind("id", "a state variable").text]
                while cur.accept(","):
                    vars_.append(cur.expect_kind("id", "a state variable").text)
                states.append(StateDecl(ty, tuple(vars_)))
                cur.accept(";")
            else:
                return stores, states

    # transitions

    def at_label(self, k=0):
        cur = self.cur
        tok = cur.peek(k)
        return (tok.kind == "id" and tok.text not in KEYWORDS and cur.at(":", k + 1)
                and not cur.at("=", k + 2))

    def at_transition_start(self, k=0):
        return any(self.cur.at(w, k) for w in CLAUSE_WORDS) or self.at_label(k)

    def transitions(self):
        cur = self.cur
        out = []
        state = None
        seen_labels = []
        has_on = set()
        while not cur.at("}"):
            if cur.at_eof():
                cur.error("unterminated synchroniser body")
            start_tok = cur.peek()
            if self.at_label():
                label = cur.next().text
                cur.next()
                if label in seen_labels:
                    cur.error(f"duplicate state label {label!r}", start_tok)
                seen_labels.append(label)
                state = label
            if state is None:
                cur.error("the first transition needs a state label")
            t = self.transition(state, start_tok.line)
            if t.on is not None:
                if t.on.priority == "elseon" and state not in has_on:
                    cur.error("'elseon' before the first 'on' of its state", start_tok)
                has_on.add(state)
            out.append(t)
            while cur.accept(",") or cur.accept(";"):
                pass
        return out

    def transition(self, state, line) -> Transition:
        cur = self.cur
        self.local = set()
        on = None
        if cur.at("on") or cur.at("elseon"):
            on = self.on_clause()
        do = ()
        if cur.accept("do"):
            do = self.assignments()
        send = ()
        if cur.accept("send"):
            send = self.dispatches()
        goto = None
        if cur.accept("goto"):
            goto = cur.expect_kind("id", "a state label").text
        if on is None and not do and not send and goto is None:
            cur.error("expected a transition")
        return Transition(state, on, tuple(do), tuple(send), goto, line)

    def on_clause(self) -> OnClause:
        cur = self.cur
        priority = cur.next().text
        tok = cur.expect_kind("id", "an input channel")
        chan = tok.text
        if chan not in self.inputs:
            cur.error(f"unknown input channel {chan!r}", tok)
        test = Ready()
        if cur.accept("."):
            test = self.secondary()
        guard = None
        if cur.accept("&") or cur.accept("&&"):
            guard = parse_expr(cur)
        return OnClause(priority, chan, test, guard)

    def secondary(self):
        cur = self.cur
        if cur.accept("@"):
            name = cur.expect_kind("id", "a mark variable").text
            self.local.add(name)
            return SigmaTest(bind=name)
        if cur.accept("else"):
            return ElseTest()
        if cur.at("sigma") and cur.at("(", 1):
            cur.next()
            cur.next()
            e = parse_expr(cur)
            cur.expect(")")
            if isinstance(e, Name) and e.name not in self.bound:
                self.local.add(e.name)
                return SigmaTest(bind=e.name)
            return SigmaTest(value=e)
        variant = None
        if cur.accept("?"):
            variant = cur.expect_kind("id", "a variant name").text
            if not cur.at("("):
                return VariantTest(variant)
        if cur.at("("):
            return self.pattern(variant)
        cur.error("expected '@', 'else', '?', 'sigma(' or a pattern after '.'")

    def pattern(self, variant) -> PatternTest:
        cur = self.cur
        cur.expect("(")
        names = [cur.expect_kind("id", "a field name").text]
        while cur.accept(","):
            names.append(cur.expect_kind("id", "a field name").text)
        tail = None
        if cur.accept("||"):
            tail = cur.expect_kind("id", "a tail name").text
        cur.expect(")")
        self.local.update(names)
        return PatternTest(variant, tuple(names), tail)

    def _at_assignment(self, k=0):
        cur = self.cur
        if cur.peek(k).kind != "id" or cur.peek(k).text in KEYWORDS:
            return False
        return cur.at(":=", k + 1) or cur.at("=", k + 1) or (cur.at(":", k + 1) and cur.at("=", k + 2))

    def assignments(self):
        cur = self.cur
        out = [self.assignment()]
        while cur.at(",") and self._at_assignment(1):
            cur.next()
            out.append(self.assignment())
        return out

    def assignment(self) -> Assign:
        cur = self.cur
        if not self._at_assignment():
            cur.error("expected an assignment")
        target = cur.next().text
        if not cur.accept(":="):
            if not cur.accept("="):
                cur.next()
                cur.expect("=")
        if target in self.stores:
            value = self.data_exp()
        else:
            value = parse_expr(cur)
        return Assign(target, value)

    def dispatches(self):
        cur = self.cur
        out = [self.dispatch()]
        while cur.at(",") and not self.at_transition_start(1) and not cur.at("}", 1):
            cur.next()
            out.append(self.dispatch())
        return out

    def dispatch(self) -> Dispatch:
        cur = self.cur
        msg = self.msg_exp()
        cur.expect("=>")
        tok = cur.expect_kind("id", "an output channel")
        if tok.text not in self.outputs:
            cur.error(f"unknown output channel {tok.text!r}", tok)
        return Dispatch(msg, tok.text)

    def msg_exp(self):
        cur = self.cur
        if cur.accept("@"):
            return SigmaMsg(parse_expr(cur))
        if cur.at("sigma") and cur.at("(", 1):
            cur.next()
            cur.next()
            e = parse_expr(cur)
            cur.expect(")")
            return SigmaMsg(e)
        if cur.accept("nil"):
            return NilMsg()
        variant = None
        if cur.accept("?"):
            variant = cur.expect_kind("id", "a variant name").text
            if cur.at("=>"):
                return DataExp((), variant)
        d = self.data_exp()
        return DataExp(d.items, variant)

    def data_exp(self) -> DataExp:
        cur = self.cur
        if cur.accept("("):
            items = [self.primary_mes()]
            while cur.accept(","):
                items.append(self.primary_mes())
            cur.expect(")")
            return DataExp(tuple(items))
        return DataExp((self.primary_mes(),))

    def primary_mes(self):
        cur = self.cur
        if cur.accept("this"):
            return This()
        tok = cur.expect_kind("id", "'this' or a variable")
        if cur.at("=") and not cur.at("=>"):
            cur.next()
            return NamedInt(tok.text, parse_expr(cur))
        return VarItem(tok.text)


def parse_synch_from(cur: Cursor) -> SynchDecl:
    return _SynchParser(cur).synch()


def parse_synchroniser(text: str) -> SynchDecl:
    cur = Cursor(text)
    decl = parse_synch_from(cur)
    if not cur.at_eof():
        cur.error("unexpected input after the synchroniser")
    return decl


def parse_synch_file(text: str) -> list[SynchDecl]:
    cur = Cursor(text)
    out = []
    while not cur.at_eof():
        out.append(parse_synch_from(cur))
    return out
