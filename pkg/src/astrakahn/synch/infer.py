"""Passports derived from synchroniser code alone.

Every input channel gets a fresh variable, or a choice over the variants the
code tests for. Patterns add a switch equality with a fresh flag choosing
between the record and the list reading of the named integers. An output
term is the meet of the shapes its pieces contribute; several sends to one
channel are joined.
"""
from __future__ import annotations

from ..passport import EQ, LEQ, Constraint, Passport
from ..terms import (
    NIL, TRUE, Flag, Member, Not, Switch, Var, make_choice, make_list,
    make_record, sym,
)
from .ast import NilMsg, PatternTest, SigmaMsg, This, VariantTest, VarItem

INT = sym("int")


class _Namer:
    def __init__(self):
        self.flags = 0

    def flag(self, chan):
        self.flags += 1
        return f"{chan}_p{self.flags}"


def _int_shapes(names, flag, tail=None):
    rec = make_record([Member(n, TRUE, INT) for n in names], tail if tail is not None else NIL)
    lst = make_list([INT] * len(names), tail if tail is not None else NIL)
    return Switch(((Flag(flag), rec), (Not(Flag(flag)), lst)))


def infer_passport(decl) -> Passport:
    namer = _Namer()
    constraints = []
    variants = {c: [] for c in decl.input_names}
    for t in decl.transitions:
        if t.on is None:
            continue
        test = t.on.test
        v = test.variant if isinstance(test, (VariantTest, PatternTest)) else None
        if v is not None and v not in variants[t.on.chan]:
            variants[t.on.chan].append(v)

    def chan_var(chan, variant=None):
        return Var(f"${chan}_{variant}") if variant else Var(f"${chan}_data")

    in_terms = {}
    for chan in decl.input_names:
        vs = variants[chan]
        if vs:
            in_terms[chan] = make_choice([Member(v, TRUE, chan_var(chan, v)) for v in vs], Var(f"${chan}_rest"))
        else:
            in_terms[chan] = chan_var(chan)

    for t in decl.transitions:
        if t.on is None or not isinstance(t.on.test, PatternTest):
            continue
        test = t.on.test
        tail = Var(f"${test.tail}") if test.tail else None
        shape = _int_shapes(test.names, namer.flag(t.on.chan), tail)
        constraints.append(Constraint((chan_var(t.on.chan, test.variant),), EQ, (shape,), f"{decl.name}:pattern@{t.line}"))

    stores = decl.store_vars
    tails = {t.on.test.tail for t in decl.transitions
             if t.on is not None and isinstance(t.on.test, PatternTest) and t.on.test.tail}
    for s in stores.values():
        for src in s.sources:
            low = in_terms[src] if src in in_terms else Var(f"${src}")
            constraints.append(Constraint((low,), LEQ, (Var(f"${s.var}"),), f"{decl.name}:store {s.var}"))

    def this_term(t):
        test = t.on.test if t.on is not None else None
        if isinstance(test, (VariantTest, PatternTest)) and test.variant is not None:
            return make_choice([Member(test.variant, TRUE, chan_var(t.on.chan, test.variant))])
        return in_terms[t.on.chan]

    sends = {c: [] for c in decl.output_names}
    counter = {}
    for t in decl.transitions:
        for d in t.send:
            if isinstance(d.msg, SigmaMsg):
                continue
            if isinstance(d.msg, NilMsg):
                sends[d.chan].append(NIL)
                continue
            structural, ints = [], []
            for item in d.msg.items:
                if isinstance(item, This):
                    if t.on is None:
                        continue
                    structural.append(this_term(t))
                elif isinstance(item, VarItem) and item.name in stores:
                    structural.append(Var(f"${item.name}"))
                elif isinstance(item, VarItem) and item.name in tails:
                    structural.append(Var(f"${item.name}"))
                else:
                    ints.append(item.name)
            if not structural:
                rhs = [make_record([Member(n, TRUE, INT) for n in ints])] if ints else [NIL]
            else:
                rhs = list(structural)
                if ints:
                    rhs.append(_int_shapes(ints, namer.flag(d.chan)))
            if len(rhs) == 1 and d.msg.variant is None:
                term = rhs[0]
            else:
                counter[d.chan] = counter.get(d.chan, 0) + 1
                var = Var(f"${d.chan}_s{counter[d.chan]}")
                constraints.append(Constraint((var,), EQ, tuple(rhs), f"{decl.name}:send@{t.line}"))
                term = var
            if d.msg.variant is not None:
                term = make_choice([Member(d.msg.variant, TRUE, term)])
            sends[d.chan].append(term)

    outputs = []
    for chan in decl.output_names:
        terms = []
        for x in sends[chan]:
            if x not in terms:
                terms.append(x)
        if not terms:
            outputs.append(NIL)
        elif len(terms) == 1:
            outputs.append(terms[0])
        else:
            out = Var(f"${chan}_out")
            constraints.append(Constraint(tuple(terms), LEQ, (out,), f"{decl.name}:output {chan}"))
            outputs.append(out)
    return Passport(decl.name, tuple(in_terms[c] for c in decl.input_names), tuple(constraints), tuple(outputs))
