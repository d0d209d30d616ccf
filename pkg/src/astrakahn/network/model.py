"""Networks as (vertices, wiring, inputs, outputs) and the wiring connections.

A channel is identified by its vertex index, direction and port; its name is
kept separately so that renaming never touches identity. Wires pair a
consumer input channel with a producer output channel, as in w ⊆ I×O.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..errors import ElaborationError

BOX, SYNCH, TAB, MERGE, NET, FPS = "box", "synch", "tab", "merge", "net", "fps"
PLUG, DISCARD = "plug", "discard"  # end-mark source, message sink


@dataclass(frozen=True)
class Chan:
    vid: int
    dir: str  # "in" | "out"
    port: str

    def shift(self, k):
        return Chan(self.vid + k, self.dir, self.port)

    def __str__(self):
        return f"{self.vid}.{self.dir}.{self.port}"


@dataclass(frozen=True)
class Vertex:
    kind: str
    label: str
    inputs: tuple  # port names
    outputs: tuple
    payload: object = None
    synthetic: tuple = ()  # output ports that only ever carry an end mark

    def in_chans(self, vid):
        return [Chan(vid, "in", p) for p in self.inputs]

    def out_chans(self, vid):
        return [Chan(vid, "out", p) for p in self.outputs]


@dataclass(frozen=True)
class NetInfo:
    """Payload of a net vertex: the elaborated body and its header."""
    name: str
    body: "Network"
    pure: bool
    category: str | None
    inputs: tuple  # header ChanParams
    outputs: tuple
    warnings: tuple = ()


@dataclass(frozen=True)
class FpsInfo:
    operand: "Network"  # streamlined
    n_out: tuple  # names with a forward fixed point
    reverse: dict  # input name -> (vertex index, state label) of a bypass
    warnings: tuple = ()


@dataclass(frozen=True)
class Network:
    vertices: tuple
    names: dict
    wires: tuple  # (input chan, output chan)
    inputs: tuple
    outputs: tuple
    depressurised: frozenset = frozenset()
    transfer: dict = field(default_factory=dict)  # wire -> input chans taking its back pressure

    def name(self, c: Chan) -> str:
        return self.names[c]

    def input_names(self):
        return _unique_names(self, self.inputs)

    def output_names(self):
        return _unique_names(self, self.outputs)

    def wires_into(self, c):
        return [w for w in self.wires if w[0] == c]

    def wires_from(self, c):
        return [w for w in self.wires if w[1] == c]

    def shifted(self, k) -> "Network":
        if k == 0:
            return self
        wires = tuple((a.shift(k), b.shift(k)) for a, b in self.wires)
        return Network(
            self.vertices,
            {c.shift(k): n for c, n in self.names.items()},
            wires,
            tuple(c.shift(k) for c in self.inputs),
            tuple(c.shift(k) for c in self.outputs),
            frozenset((a.shift(k), b.shift(k)) for a, b in self.depressurised),
            {(a.shift(k), b.shift(k)): tuple(c.shift(k) for c in cs) for (a, b), cs in self.transfer.items()},
        )

    def edges(self):
        """Wires as (name, producer vertex, consumer vertex) triples."""
        return sorted((self.names[a], b.vid, a.vid) for a, b in self.wires)


def _unique_names(n, chans):
    out = []
    for c in chans:
        x = n.names[c]
        if x not in out:
            out.append(x)
    return out


def sing(v: Vertex) -> Network:
    ins = v.in_chans(0)
    outs = v.out_chans(0)
    names = {c: c.port for c in ins + outs}
    return Network((v,), names, (), tuple(ins), tuple(outs))


def _combine(n1: Network, n2: Network, match: bool) -> Network:
    n2 = n2.shifted(len(n1.vertices))
    names = dict(n1.names)
    names.update(n2.names)
    p = []
    if match:
        for c in n2.inputs:
            for d in n1.outputs:
                if names[c] == names[d]:
                    p.append((c, d))
    dom = {c for c, _ in p}
    img = {d for _, d in p}
    return Network(
        n1.vertices + n2.vertices,
        names,
        n1.wires + n2.wires + tuple(p),
        tuple(c for c in n1.inputs + n2.inputs if c not in dom),
        tuple(c for c in n1.outputs + n2.outputs if c not in img),
        n1.depressurised | n2.depressurised,
        {**n1.transfer, **n2.transfer},
    )


def serial_connect(n1: Network, n2: Network) -> Network:
    return _combine(n1, n2, True)


def parallel_connect(n1: Network, n2: Network) -> Network:
    return _combine(n1, n2, False)


def wrap_around(n: Network, explicit=None, exclude=False, pressure_sinks=()) -> Network:
    """Identify matching inputs and outputs; the new wires are depressurised."""
    in_names = set(n.input_names())
    out_names = set(n.output_names())
    common = in_names & out_names
    sinks = list(pressure_sinks or ())
    if explicit is not None:
        explicit = list(explicit)
        overlap = set(explicit) & set(sinks)
        if overlap:
            raise ElaborationError(f"names both wrapped and used as pressure sinks: {', '.join(sorted(overlap))}")
        if exclude:
            unknown = [x for x in explicit if x not in in_names | out_names]
            if unknown:
                raise ElaborationError(f"wrap-around exclusion names unknown channel(s): {', '.join(unknown)}")
            chosen = common - set(explicit)
        else:
            missing = [x for x in explicit if x not in common]
            if missing:
                raise ElaborationError(f"wrap-around names no matching input/output pair: {', '.join(missing)}")
            chosen = set(explicit)
    else:
        chosen = common
    chosen -= set(sinks)
    for s in sinks:
        if s not in in_names or s in chosen:
            raise ElaborationError(f"pressure sink {s!r} is not an input of the wrapped network")
    p = [(c, d) for c in n.inputs for d in n.outputs
         if n.names[c] == n.names[d] and n.names[c] in chosen]
    dom = {c for c, _ in p}
    img = {d for _, d in p}
    sink_chans = tuple(c for c in n.inputs if n.names[c] in sinks)
    transfer = dict(n.transfer)
    if sink_chans:
        for w in p:
            transfer[w] = sink_chans
    return Network(
        n.vertices, dict(n.names), n.wires + tuple(p),
        tuple(c for c in n.inputs if c not in dom),
        tuple(c for c in n.outputs if c not in img),
        n.depressurised | frozenset(p), transfer,
    )


def _form(items):
    if not items:
        return None
    pairs = [isinstance(x, tuple) for x in items]
    if all(pairs):
        return "pairs"
    if any(pairs):
        raise ElaborationError("renaming lists cannot mix positional and name=value forms")
    return "positional"


def rename_apply(n: Network, left=(), right=()) -> Network:
    """Apply renaming brackets to the external channels of n.

    Positional lists rename in order and leave uncovered channels alone; a
    positional output list longer than a box's outputs adds end-only outputs.
    """
    if isinstance(n, Vertex):
        n = sing(n)
    names = dict(n.names)
    vertices = list(n.vertices)
    outputs = list(n.outputs)
    left, right = list(left), list(right)
    for items, chans, side in ((left, list(n.inputs), "input"), (right, outputs, "output")):
        form = _form(items)
        if form is None:
            continue
        if form == "pairs":
            for old, new in items:
                hit = [c for c in chans if n.names[c] == old]
                if not hit:
                    raise ElaborationError(f"renaming names no {side} channel {old!r}")
                for c in hit:
                    names[c] = new
            continue
        order = _unique_names(n, chans)
        if len(items) > len(order):
            if side == "output" and len(vertices) == 1 and vertices[0].kind == BOX:
                v = vertices[0]
                extra = tuple(f"_{i}" for i in range(len(v.outputs) + 1, len(items) + 1))
                vertices[0] = replace(v, outputs=v.outputs + extra, synthetic=v.synthetic + extra)
                for p in extra:
                    c = Chan(0, "out", p)
                    outputs.append(c)
                    names[c] = p
                    order.append(p)
                    chans.append(c)
            else:
                raise ElaborationError(f"renaming list has {len(items)} {side} names for {len(order)} channels")
        mapping = dict(zip(order, items))
        for c in chans:
            if n.names.get(c, names.get(c)) in mapping:
                names[c] = mapping[n.names.get(c, names.get(c))]
    return Network(tuple(vertices), names, n.wires, n.inputs, tuple(outputs), n.depressurised, n.transfer)


def merge_vertex(ins, outs) -> Vertex:
    return Vertex(MERGE, "~", tuple(ins), tuple(outs))


def check_consistency(n: Network) -> list[str]:
    """Violations of concealment, completeness and identity."""
    out = []
    I, O = set(n.inputs), set(n.outputs)
    wired_in = {a for a, _ in n.wires}
    wired_out = {b for _, b in n.wires}
    all_in, all_out = set(), set()
    for vid, v in enumerate(n.vertices):
        all_in.update(v.in_chans(vid))
        all_out.update(v.out_chans(vid))
    for a, b in n.wires:
        if a in I:
            out.append(f"concealment: wired input {a} is a network input")
        if b in O:
            out.append(f"concealment: wired output {b} is a network output")
        if n.names.get(a) != n.names.get(b):
            out.append(f"identity: wire {a} ({n.names.get(a)}) <- {b} ({n.names.get(b)}) joins differently named channels")
        if a not in all_in or b not in all_out:
            out.append(f"completeness: wire {a} <- {b} refers to a channel no vertex has")
    for c in sorted(all_in, key=str):
        if c not in wired_in and c not in I:
            out.append(f"completeness: input {c} is neither wired nor a network input")
    for c in sorted(all_out, key=str):
        if c not in wired_out and c not in O:
            out.append(f"completeness: output {c} is neither wired nor a network output")
    for c in n.inputs:
        if c not in all_in:
            out.append(f"completeness: network input {c} belongs to no vertex")
    for c in n.outputs:
        if c not in all_out:
            out.append(f"completeness: network output {c} belongs to no vertex")
    return out
