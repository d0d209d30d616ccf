"""Syntax tree for synchroniser declarations."""
from __future__ import annotations

from dataclasses import dataclass, field


# integer expressions

@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


def expr_names(e):
    if isinstance(e, Name):
        return [e.name]
    if isinstance(e, Unary):
        return expr_names(e.arg)
    if isinstance(e, Binary):
        return expr_names(e.left) + expr_names(e.right)
    return []


# channel signature

@dataclass(frozen=True)
class Depth:
    """A channel depth: base (constant or name) plus an optional shift.

    The shift is an integer or a configuration parameter name with a sign.
    """
    base: object = None  # int, str or None (undeclared)
    sign: int = 1
    shift: object = 0  # int or str

    def render(self) -> str:
        if self.base is None:
            return ""
        out = str(self.base)
        if self.shift != 0:
            out += ("+" if self.sign > 0 else "-") + str(self.shift)
        return out


@dataclass(frozen=True)
class ChanParam:
    name: str
    depth: Depth


@dataclass(frozen=True)
class StoreDecl:
    var: str
    sources: tuple


@dataclass(frozen=True)
class IntType:
    width: object  # expression


@dataclass(frozen=True)
class EnumType:
    values: tuple


@dataclass(frozen=True)
class StateDecl:
    type: object
    vars: tuple


# transitions

@dataclass(frozen=True)
class Ready:
    pass


@dataclass(frozen=True)
class SigmaTest:
    """`.@k` binds k; `.sigma(e)` with a bound expression tests k == e."""
    bind: str | None = None
    value: object = None


@dataclass(frozen=True)
class ElseTest:
    pass


@dataclass(frozen=True)
class VariantTest:
    variant: str


@dataclass(frozen=True)
class PatternTest:
    variant: str | None
    names: tuple
    tail: str | None


@dataclass(frozen=True)
class OnClause:
    priority: str  # "on" or "elseon"
    chan: str
    test: object
    guard: object = None


@dataclass(frozen=True)
class Assign:
    target: str
    value: object  # int expression or DataExp


@dataclass(frozen=True)
class This:
    pass


@dataclass(frozen=True)
class VarItem:
    name: str


@dataclass(frozen=True)
class NamedInt:
    name: str
    value: object


@dataclass(frozen=True)
class DataExp:
    items: tuple
    variant: str | None = None


@dataclass(frozen=True)
class SigmaMsg:
    k: object


@dataclass(frozen=True)
class NilMsg:
    pass


@dataclass(frozen=True)
class Dispatch:
    msg: object  # SigmaMsg | NilMsg | DataExp
    chan: str


@dataclass(frozen=True)
class Transition:
    state: str
    on: OnClause | None
    do: tuple = ()
    send: tuple = ()
    goto: str | None = None
    line: int = 0


@dataclass
class SynchDecl:
    name: str
    configs: list
    inputs: list
    outputs: list
    stores: list
    states: list
    transitions: list
    line: int = 0
    indices: list = field(default_factory=list)  # synch-table (name, limit) pairs

    @property
    def input_names(self):
        return [c.name for c in self.inputs]

    @property
    def output_names(self):
        return [c.name for c in self.outputs]

    @property
    def store_vars(self):
        return {s.var: s for s in self.stores}

    @property
    def state_vars(self):
        out = {}
        for d in self.states:
            for v in d.vars:
                out[v] = d.type
        return out

    @property
    def labels(self):
        seen = []
        for t in self.transitions:
            if t.state not in seen:
                seen.append(t.state)
        return seen

    @property
    def start(self):
        return "start" if "start" in self.labels else self.labels[0]

    def depth_vars(self):
        names = []
        for c in self.inputs + self.outputs:
            if isinstance(c.depth.base, str) and c.depth.base not in self.configs and c.depth.base not in names:
                names.append(c.depth.base)
        return names

    def summary(self) -> str:
        ins = ", ".join(f"{c.name}:{c.depth.render()}" if c.depth.base is not None else c.name for c in self.inputs)
        outs = ", ".join(f"{c.name}:{c.depth.render()}" if c.depth.base is not None else c.name for c in self.outputs)
        conf = f" [{', '.join(self.configs)}]" if self.configs else ""
        tab = ""
        if self.indices:
            tab = "tab [" + ", ".join(f"{i}:{l}" for i, l in self.indices) + "] "
        lines = [f"{tab}synch {self.name}{conf} ({ins} | {outs})"]
        for s in self.stores:
            lines.append(f"  store {s.var}: {', '.join(s.sources)}")
        for d in self.states:
            if isinstance(d.type, EnumType):
                ty = "enum(" + ", ".join(d.type.values) + ")"
            else:
                ty = "int(...)"
            lines.append(f"  state {ty} {', '.join(d.vars)}")
        for label in self.labels:
            n = sum(1 for t in self.transitions if t.state == label)
            lines.append(f"  {label}: {n} transition{'s' if n != 1 else ''}")
        return "\n".join(lines)
