"""Static checks on synchroniser declarations."""
from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    Assign, Binary, DataExp, EnumType, Name, NamedInt, PatternTest, SigmaMsg, SigmaTest,
    This, Unary, VarItem, expr_names,
)
from .intexp import eval_int
from ..errors import RuntimeFault


@dataclass(frozen=True)
class Diagnostic:
    level: str  # error | warning
    message: str
    line: int = 0

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{self.level}: {where}{self.message}"


def _transition_exprs(t):
    """(expression, context) pairs for every integer expression in t."""
    out = []
    if t.on is not None:
        if t.on.guard is not None:
            out.append((t.on.guard, "guard"))
        if isinstance(t.on.test, SigmaTest) and t.on.test.value is not None:
            out.append((t.on.test.value, "mark test"))
    for a in t.do:
        if not isinstance(a.value, DataExp):
            out.append((a.value, "assignment"))
        else:
            out.extend((i.value, "message field") for i in a.value.items if isinstance(i, NamedInt))
    for d in t.send:
        if isinstance(d.msg, SigmaMsg):
            out.append((d.msg.k, "mark send"))
        elif isinstance(d.msg, DataExp):
            out.extend((i.value, "message field") for i in d.msg.items if isinstance(i, NamedInt))
    return out


def _enum_type_of(e, var_types, value_types):
    if isinstance(e, Name):
        if e.name in var_types:
            return var_types[e.name]
        if e.name in value_types:
            return value_types[e.name]
    return None


def _enum_mismatches(e, var_types, value_types):
    bad = []
    if isinstance(e, Binary):
        if e.op in ("==", "!=", "<", "<=", ">", ">="):
            a = _enum_type_of(e.left, var_types, value_types)
            b = _enum_type_of(e.right, var_types, value_types)
            if a is not None and b is not None and a != b:
                bad.append(e)
        bad += _enum_mismatches(e.left, var_types, value_types)
        bad += _enum_mismatches(e.right, var_types, value_types)
    elif isinstance(e, Unary):
        bad += _enum_mismatches(e.arg, var_types, value_types)
    return bad


def validate(decl, bindings=None) -> list[Diagnostic]:
    """Diagnostics for a declaration; bindings (config values) enable cancellation checks."""
    diags = []
    inputs = set(decl.input_names)
    tails = set()
    for t in decl.transitions:
        if t.on is not None and isinstance(t.on.test, PatternTest) and t.on.test.tail:
            tails.add(t.on.test.tail)
    for s in decl.stores:
        for src in s.sources:
            if src not in inputs and src not in tails:
                diags.append(Diagnostic("error", f"store {s.var!r} names unknown channel or tail {src!r}", decl.line))

    state_vars = decl.state_vars
    var_types = {v: ty.values for v, ty in state_vars.items() if isinstance(ty, EnumType)}
    value_types = {}
    for ty in state_vars.values():
        if isinstance(ty, EnumType):
            for v in ty.values:
                value_types[v] = ty.values
    known = set(state_vars) | set(decl.configs) | set(decl.depth_vars()) | set(value_types)
    known |= {i for i, _ in decl.indices}
    stores = decl.store_vars
    assigned_anywhere = set()
    for t in decl.transitions:
        for a in t.do:
            if a.target not in stores and a.target not in state_vars:
                assigned_anywhere.add(a.target)
    warned = set()

    for t in decl.transitions:
        local = set()
        if t.on is not None:
            test = t.on.test
            if isinstance(test, SigmaTest) and test.bind:
                local.add(test.bind)
            if isinstance(test, PatternTest):
                local |= set(test.names)
        else:
            uses_this = any(isinstance(i, This) for a in t.do if isinstance(a.value, DataExp) for i in a.value.items)
            uses_this |= any(isinstance(i, This) for d in t.send if isinstance(d.msg, DataExp) for i in d.msg.items)
            if uses_this:
                diags.append(Diagnostic("error", "'this' used in a transition without an on-clause", t.line))
        # names are checked in evaluation order: guard, do (sequential), send
        seen_local = set(local)
        order = []
        if t.on is not None and t.on.guard is not None:
            order.append(("guard", t.on.guard, None))
        for a in t.do:
            order.append(("do", a.value, a))
        for d in t.send:
            order.append(("send", d.msg, None))
        for _, e, assign in order:
            names = []
            if isinstance(e, DataExp):
                for i in e.items:
                    if isinstance(i, NamedInt):
                        names += expr_names(i.value)
                    elif isinstance(i, VarItem) and i.name not in stores and i.name not in tails:
                        names.append(i.name)
            elif isinstance(e, SigmaMsg):
                names += expr_names(e.k)
            elif e is not None and not isinstance(e, DataExp):
                names += expr_names(e)
            for n in names:
                if n in known or n in seen_local:
                    continue
                if n not in assigned_anywhere and n not in warned:
                    warned.add(n)
                    diags.append(Diagnostic("warning", f"alias {n!r} is never assigned", t.line))
            if isinstance(assign, Assign) and assign.target not in stores:
                seen_local.add(assign.target)
        for e, ctx in _transition_exprs(t):
            for bad in _enum_mismatches(e, var_types, value_types):
                diags.append(Diagnostic("error", f"comparison between different enumeration types in {ctx}", t.line))
        for d in t.send:
            if isinstance(d.msg, SigmaMsg) and not expr_names(d.msg.k):
                try:
                    if eval_int(d.msg.k, {}) < 0:
                        diags.append(Diagnostic("error", "mark send with negative depth", t.line))
                except RuntimeFault:
                    pass
        for a in t.do:
            if isinstance(a.value, DataExp) and a.target in stores and t.on is not None:
                srcs = stores[a.target].sources
                if any(isinstance(i, This) for i in a.value.items) and t.on.chan not in srcs:
                    diags.append(Diagnostic(
                        "warning", f"store {a.target!r} receives a message from {t.on.chan!r}, not one of its sources", t.line))

    diags += _cancellation(decl, bindings)
    return diags


def _cancellation(decl, bindings):
    diags = []
    configs = set(decl.configs)
    maybe = {}
    for c in decl.outputs:
        d = c.depth
        if isinstance(d.base, str) and d.base in configs or isinstance(d.shift, str):
            maybe[c.name] = d
    if not maybe:
        return diags
    cancelled = set()
    if bindings is not None:
        for name, d in maybe.items():
            base = bindings.get(d.base, d.base) if isinstance(d.base, str) else d.base
            shift = bindings.get(d.shift, d.shift) if isinstance(d.shift, str) else d.shift
            if isinstance(base, int) and isinstance(shift, int) and base + d.sign * shift == -1:
                cancelled.add(name)
    for t in decl.transitions:
        guard_names = set(expr_names(t.on.guard)) if t.on is not None and t.on.guard is not None else set()
        config_guarded = bool(guard_names & configs)
        for s in t.send:
            if s.chan not in maybe:
                continue
            if s.chan in cancelled and not config_guarded:
                diags.append(Diagnostic("error", f"send to cancelled channel {s.chan!r} is not guarded by a configuration parameter", t.line))
            elif bindings is None and not config_guarded:
                diags.append(Diagnostic("warning", f"channel {s.chan!r} may be cancelled by configuration; its sends are unguarded", t.line))
    return diags
