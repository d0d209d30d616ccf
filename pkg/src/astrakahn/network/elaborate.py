"""From net declarations to networks."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..boxes import BoxSpec, input_ports, output_ports
from ..errors import ElaborationError
from ..synch.machine import instantiate_config
from .fps import fps_connect
from .model import (
    BOX, DISCARD, NET, PLUG, SYNCH, TAB, Chan, NetInfo, Network, Vertex, merge_vertex,
    parallel_connect, rename_apply, serial_connect, sing, wrap_around,
)
from .syntax import JOIN_KINDS, MergeOp, NetDecl, Parallel, Ref, Rename, Serial, Star, Wrap


@dataclass
class Scope:
    synchs: dict
    nets: dict
    parent: "Scope | None" = None

    def lookup(self, name):
        s = self
        while s is not None:
            if name in s.synchs:
                return "synch", s.synchs[name], s
            if name in s.nets:
                return "net", s.nets[name], s
            s = s.parent
        return None, None, None


@dataclass
class Build:
    network: Network
    warnings: list = field(default_factory=list)
    morphisms: list = field(default_factory=list)  # report lines


class _Elaborator:
    def __init__(self, registry, build):
        self.registry = dict(registry or {})
        self.build = build
        self.stack = []

    # references

    def config(self, ref, params, bindings):
        values = {}
        positional = [v for k, v in ref.config if k is None]
        named = [(k, v) for k, v in ref.config if k is not None]
        if len(positional) > len(params):
            raise ElaborationError(f"{ref.name}: {len(positional)} configuration values for {len(params)} parameters (line {ref.line})")
        for p, v in zip(params, positional):
            values[p] = v
        for k, v in named:
            if k in values:
                raise ElaborationError(f"{ref.name}: parameter {k!r} given twice (line {ref.line})")
            values[k] = v
        out = {}
        for k, v in values.items():
            if isinstance(v, str):
                if v not in bindings:
                    raise ElaborationError(f"{ref.name}: {v!r} is not a configuration parameter in scope (line {ref.line})")
                v = bindings[v]
            out[k] = v
        return out

    def ref(self, ref: Ref, scope, bindings):
        kind, decl, _ = scope.lookup(ref.name)
        if kind is not None and ref.category is not None:
            prefix = f"{ref.category[0] or ''}{ref.category[1]}"
            if kind == "synch" or not decl.pure:
                raise ElaborationError(f"{ref.name} is a {kind}, not a box; drop the {prefix}: prefix (line {ref.line})")
        if kind == "synch":
            m = instantiate_config(decl, self.config(ref, decl.configs, bindings))
            vk = TAB if decl.indices else SYNCH
            return sing(Vertex(vk, decl.name, tuple(m.inputs), tuple(m.outputs), m))
        if kind == "net":
            return sing(self.net_vertex(decl, scope, self.config(ref, decl.configs, bindings), ref))
        spec = self.registry.get(ref.name)
        if ref.config:
            raise ElaborationError(f"box {ref.name} takes no configuration (line {ref.line})")
        if spec is None:
            if ref.category is None:
                raise ElaborationError(f"unknown vertex name {ref.name!r} (line {ref.line})")
            n, cat = ref.category
            spec = BoxSpec(ref.name, n or 1, cat, ("opaque", None))
            self.build.warnings.append(f"box {ref.name} has no implementation; it is kept as an opaque {spec.token} vertex")
        want = spec.n
        if ref.category is not None:
            n, cat = ref.category
            if cat != spec.category:
                raise ElaborationError(f"box {ref.name} is {spec.token}, used as {cat} (line {ref.line})")
            if n is not None:
                if n < 1:
                    raise ElaborationError(f"box {ref.name}: category count must be at least 1 (line {ref.line})")
                if n < spec.n:
                    raise ElaborationError(f"box {ref.name} has {spec.n} outputs but is used as {n}{cat} (line {ref.line})")
                want = n
        real = output_ports(spec.n)
        ports = output_ports(want)
        return sing(Vertex(BOX, ref.name, input_ports(spec.category), ports, spec, ports[len(real):]))

    def net_vertex(self, decl: NetDecl, scope, bindings, ref=None):
        if decl.name in self.stack:
            raise ElaborationError(f"net {decl.name} refers to itself")
        missing = [c for c in decl.configs if c not in bindings]
        if missing:
            raise ElaborationError(f"net {decl.name}: unbound configuration parameter(s) {', '.join(missing)}")
        body = self.body(decl, scope, bindings)
        category = decl.category[1] if decl.pure else None
        if decl.pure:
            want = len(input_ports(category))
            if len(decl.inputs) != want:
                raise ElaborationError(f"pure net {decl.name} of category {category} needs {want} input(s), has {len(decl.inputs)}")
        info = NetInfo(decl.name, body, decl.pure, category, tuple(decl.inputs), tuple(decl.outputs))
        return Vertex(NET, decl.name, tuple(decl.input_names), tuple(decl.output_names), info)

    # bodies

    def body(self, decl: NetDecl, scope, bindings):
        inner = Scope(decl.synchs, decl.nets, scope)
        self.stack.append(decl.name)
        try:
            n = self.expr(decl.wiring, inner, bindings)
        finally:
            self.stack.pop()
        for m in decl.morphs:
            self.build.morphisms.extend(validate_morphism(m, inner, self.registry, decl.name))
        return conform(n, decl, self.build.warnings)

    def expr(self, e, scope, bindings):
        if isinstance(e, Ref):
            return self.ref(e, scope, bindings)
        if isinstance(e, MergeOp):
            raise ElaborationError(f"a merge needs renaming brackets, as in <a,b|~|c> (line {e.line})")
        if isinstance(e, Rename):
            if isinstance(e.inner, MergeOp):
                if not e.left or not e.right:
                    raise ElaborationError(f"a merge needs input and output names (line {e.inner.line})")
                return sing(merge_vertex(e.left, e.right))
            return rename_apply(self.expr(e.inner, scope, bindings), e.left, e.right)
        if isinstance(e, Serial):
            return serial_connect(self.expr(e.left, scope, bindings), self.expr(e.right, scope, bindings))
        if isinstance(e, Parallel):
            return parallel_connect(self.expr(e.left, scope, bindings), self.expr(e.right, scope, bindings))
        if isinstance(e, Wrap):
            return wrap_around(self.expr(e.operand, scope, bindings), e.names, e.exclude, e.sinks)
        if isinstance(e, Star):
            n = fps_connect(self.expr(e.operand, scope, bindings))
            self.build.warnings.extend(n.vertices[0].payload.warnings)
            return n
        raise TypeError(e)


def conform(n: Network, decl: NetDecl, warnings) -> Network:
    """Match the body's channels to the header.

    Inputs missing from the header get an end mark; header outputs the body
    lacks are plugged; header inputs the body never reads are discarded.
    """
    header_in, header_out = decl.input_names, decl.output_names
    extra = [x for x in n.output_names() if x not in header_out]
    if extra:
        raise ElaborationError(f"net {decl.name}: output channel(s) {', '.join(extra)} are not in the header")
    body_in = n.input_names()
    wires = list(n.wires)
    inputs = list(n.inputs)
    vertices = list(n.vertices)
    names = dict(n.names)
    outputs = list(n.outputs)
    for x in body_in:
        if x in header_in:
            continue
        vid = len(vertices)
        vertices.append(Vertex(PLUG, f"plug:{x}", (), ("_1",)))
        src = Chan(vid, "out", "_1")
        names[src] = x
        for c in [c for c in inputs if names[c] == x]:
            wires.append((c, src))
            inputs.remove(c)
        warnings.append(f"net {decl.name}: input {x!r} is not in the header and receives an immediate end mark")
    for x in header_in:
        if x not in body_in:
            vid = len(vertices)
            vertices.append(Vertex(DISCARD, f"discard:{x}", ("_1",), ()))
            c = Chan(vid, "in", "_1")
            names[c] = x
            inputs.append(c)
    for x in header_out:
        if x not in n.output_names():
            vid = len(vertices)
            vertices.append(Vertex(PLUG, f"plug:{x}", (), ("_1",)))
            c = Chan(vid, "out", "_1")
            names[c] = x
            outputs.append(c)
    return Network(tuple(vertices), names, tuple(wires), tuple(inputs), tuple(outputs), n.depressurised, n.transfer)


def elaborate_net(decl: NetDecl, bindings=None, registry=None, scope=None) -> Network:
    """The network a net's connect expression denotes, fitted to its header."""
    return elaborate(decl, bindings, registry, scope).network


def elaborate(decl: NetDecl, bindings=None, registry=None, scope=None) -> Build:
    build = Build(None)
    el = _Elaborator(registry, build)
    bindings = dict(bindings or {})
    missing = [c for c in decl.configs if c not in bindings]
    if missing:
        raise ElaborationError(f"net {decl.name}: unbound configuration parameter(s) {', '.join(missing)}")
    build.network = el.body(decl, scope or Scope({}, {}), bindings)
    return build


def elaborate_program(prog, main=None, bindings=None, registry=None) -> Build:
    """Elaborate the chosen (default: last) top-level net of a program."""
    if not prog.nets:
        raise ElaborationError("the program declares no net")
    if main is None:
        main = [name for kind, name in prog.order if kind == "net"][-1]
    if main not in prog.nets:
        raise ElaborationError(f"no net named {main!r}")
    scope = Scope(prog.synchs, {k: v for k, v in prog.nets.items()})
    build = elaborate(prog.nets[main], bindings, registry, scope)
    for m in prog.morphs:
        build.morphisms.extend(validate_morphism(m, scope, registry or {}, None))
    return build


def synch_network(decl, bindings=None) -> Network:
    """A lone synchroniser as a network."""
    m = instantiate_config(decl, bindings)
    kind = TAB if decl.indices else SYNCH
    return sing(Vertex(kind, decl.name, tuple(m.inputs), tuple(m.outputs), m))


# morphisms

def _category_of(name, scope, registry):
    kind, decl, _ = scope.lookup(name)
    if kind == "net":
        return decl.category[1] if decl.pure else None, f"net {name}"
    if kind == "synch":
        return None, f"synchroniser {name}"
    spec = registry.get(name)
    if spec is not None:
        return spec.category, f"box {name}"
    return "unknown", name


def validate_morphism(m, scope, registry, where):
    """Check the names and categories of a morphism; return report lines.

    Each split/map/join group carries a commutation obligation that is
    recorded, not proven.
    """
    lines = []
    ctx = f" in net {where}" if where else ""
    errors = []

    def need(name, allowed, role):
        cat, what = _category_of(name, scope, registry)
        if cat == "unknown":
            errors.append(f"morphism{ctx}: unknown {role} {name!r}")
        elif cat is not None and cat not in allowed:
            errors.append(f"morphism{ctx}: {role} {what} has category {cat}, expected {'/'.join(allowed)}")
        return cat

    for g in m.groups:
        for s in g.splits:
            need(s, ("I",), "split inductor")
        for item in g.maps:
            need(item.name, ("T",), "map transductor")
        for j in g.joins:
            if j.kind not in JOIN_KINDS:
                errors.append(f"morphism{ctx}: join kind {j.kind!r} is not one of O, S, U")
                continue
            cat = need(j.name, ("DO", "DU", "MO", "MS", "MU"), "join reductor")
            if cat not in (None, "unknown") and cat[-1] != j.kind:
                errors.append(f"morphism{ctx}: join {j.name} is {cat} but marked {j.kind}'")
        for i, item in enumerate(g.maps):
            split = g.splits[i if len(g.splits) > 1 else 0]
            join = g.joins[i if len(g.joins) > 1 else 0]
            arity = f"{item.arity}:" if item.arity else ""
            lines.append(f"obligation: {split} .. {arity}{item.name} == {item.name} .. "
                         f"{join.kind}'{join.name} (fragments: {m.size}, {JOIN_KINDS.get(join.kind, '?')} join)")
    for o in m.overrides:
        kind, _, _ = scope.lookup(o.synch)
        if kind != "synch":
            errors.append(f"morphism{ctx}: override {o.join.kind}'{o.join.name} .. {o.split} names no synchroniser {o.synch!r}")
        else:
            lines.append(f"override: {o.join.kind}'{o.join.name} .. {o.split} = {o.synch}")
    lines.append(f"size {m.size}: the number of fragments the map's input can be split into")
    if errors:
        raise ElaborationError("; ".join(errors))
    return lines
