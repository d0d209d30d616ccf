"""Bracketing depths: every wire equates producer and consumer depth.

Depth expressions are a variable plus an offset, so the system is solved with
a union-find that keeps each member's offset from its class root. Reductor
outputs drop one level except at depth 0, which is handled by propagation
once the input depth is known.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..boxes import is_dyadic, is_reductor
from ..errors import DepthError
from .model import BOX, FPS, MERGE, NET, SYNCH, TAB, FpsInfo, NetInfo, Network

CONST = ("const",)


class _UnionFind:
    def __init__(self):
        self.parent = {}
        self.offset = {}  # depth(x) = depth(parent) + offset
        self.why = {}

    def add(self, x):
        if x not in self.parent:
            self.parent[x] = x
            self.offset[x] = 0

    def find(self, x):
        self.add(x)
        path = []
        while self.parent[x] != x:
            path.append(x)
            x = self.parent[x]
        root = x
        total = 0
        for y in reversed(path):
            total += self.offset[y]
            self.offset[y] = total
            self.parent[y] = root
        return root

    def rel(self, x):
        """(root, offset of x from root)."""
        r = self.find(x)
        return r, self.offset[x] if x != r else 0

    def union(self, a, b, k, why):
        """Impose depth(a) = depth(b) + k."""
        ra, oa = self.rel(a)
        rb, ob = self.rel(b)
        if ra == rb:
            if oa != ob + k:
                raise DepthError(f"conflicting depths: {why}")
            return
        if ra == CONST:  # keep the constant as root
            ra, rb, oa, ob, k = rb, ra, ob, oa, -k
        # depth(ra) = depth(rb) + ob + k - oa
        self.parent[ra] = rb
        self.offset[ra] = ob + k - oa
        self.why[ra] = why

    def value(self, x):
        r, o = self.rel(x)
        return o if r == CONST else None


@dataclass
class DepthSolution:
    depths: dict  # (path, Chan) -> int
    vars: dict  # (path, vid) -> {depth var: value}
    underdetermined: list = field(default_factory=list)

    def channel(self, c, path=()):
        return self.depths.get((path, c))


class _System:
    def __init__(self):
        self.uf = _UnionFind()
        self.uf.add(CONST)
        self.reduce = []  # (out key, in key, why)
        self.labels = {}

    def eq(self, a, b, k, why):
        self.uf.union(a, b, k, why)

    def const(self, a, value, why):
        self.uf.union(a, CONST, value, why)


def _key(path, c):
    return ("chan", path, c)


def _describe(n, path, c):
    v = n.vertices[c.vid]
    where = "/".join(str(p) for p in path)
    return f"{v.label}.{c.port} ({n.names[c]}{', in ' + where if where else ''})"


def _vertex(sys, n, path, vid, v):
    ins = [_key(path, c) for c in v.in_chans(vid)]
    outs = [_key(path, c) for c in v.out_chans(vid)]
    label = v.label
    if v.kind in (SYNCH, TAB):
        m = v.payload
        for port, key in list(zip(v.inputs, ins)) + list(zip(v.outputs, outs)):
            spec = m.in_depths.get(port) if port in v.inputs else m.out_depths.get(port)
            var, off = spec if spec is not None else (None, 0)
            why = f"{label}.{port} is declared with depth {var + ('+' if off >= 0 else '') + str(off) if var else off}"
            if var is None:
                sys.const(key, off, why)
            else:
                sys.eq(key, ("var", path, vid, var), off, why)
    elif v.kind == MERGE:
        for key in ins[1:] + outs:
            sys.eq(key, ins[0], 0, f"merge {label} joins channels of different depth")
        for key in outs[1:]:
            sys.eq(key, outs[0], 0, f"merge {label} copies to channels of different depth")
    elif v.kind == BOX:
        _category_rules(sys, v.payload.category, ins, outs, label, v.synthetic, v.outputs)
    elif v.kind == NET:
        info: NetInfo = v.payload
        if info.pure:
            _category_rules(sys, info.category, ins, outs, label, (), v.outputs)
            inner = _System()
            _network(inner, info.body, path + (vid,))
            for c in info.body.inputs:
                inner.const(_key(path + (vid,), c), 0, f"pure net {info.name} runs on depth-0 streams")
            sys.inner = getattr(sys, "inner", [])
            sys.inner.append(inner)
        else:
            body = info.body
            sub = path + (vid,)
            _network(sys, body, sub)
            _header(sys, info.inputs, ins, v.inputs, path, vid, label)
            _header(sys, info.outputs, outs, v.outputs, path, vid, label)
            for port, key in zip(v.inputs, ins):
                for c in body.inputs:
                    if body.names[c] == port:
                        sys.eq(_key(sub, c), key, 0, f"net {label} input {port}")
            for port, key in zip(v.outputs, outs):
                for c in body.outputs:
                    if body.names[c] == port:
                        sys.eq(_key(sub, c), key, 0, f"net {label} output {port}")
    elif v.kind == FPS:
        info: FpsInfo = v.payload
        a = info.operand
        sub = path + (vid,)
        _network(sys, a, sub)
        for oc in a.outputs:
            for ic in a.inputs:
                if a.names[ic] == a.names[oc]:
                    sys.eq(_key(sub, oc), _key(sub, ic), 0,
                           f"replicas chain output {a.names[oc]} into the next replica's input")
        for port, key in zip(v.inputs, ins):
            for c in a.inputs:
                if a.names[c] == port:
                    sys.eq(_key(sub, c), key, 0, f"series input {port}")
        for port, key in zip(v.outputs, outs):
            for c in a.outputs:
                if a.names[c] == port:
                    sys.eq(_key(sub, c), key, 0, f"series output {port}")


def _header(sys, params, keys, ports, path, vid, label):
    for p, port, key in zip(params or (), ports, keys):
        d = p.depth
        if d.base is None:
            continue
        off = d.sign * d.shift if isinstance(d.shift, int) else 0
        if isinstance(d.base, int):
            sys.const(key, d.base + off, f"net {label} declares {port}:{d.render()}")
        else:
            sys.eq(key, ("var", path, vid, d.base), off, f"net {label} declares {port}:{d.render()}")


def _category_rules(sys, cat, ins, outs, label, synthetic, out_ports):
    real = [k for k, p in zip(outs, out_ports) if p not in synthetic]
    if cat == "T":
        for k in real:
            sys.eq(k, ins[0], 0, f"transductor {label} keeps the input depth")
    elif cat == "I":
        for k in real:
            sys.eq(k, ins[0], 1, f"inductor {label} adds one level")
    elif is_reductor(cat):
        fold = ins[1] if is_dyadic(cat) else ins[0]
        if real:
            sys.reduce.append((real[0], fold, f"reductor {label} output _1"))
        for k in real[1:]:
            if is_dyadic(cat):
                sys.eq(k, ins[0], 1, f"reductor {label} side outputs follow channel _1 plus one")
            else:
                sys.eq(k, ins[0], 0, f"reductor {label} side outputs keep the input depth")


def _network(sys, n: Network, path):
    for vid, v in enumerate(n.vertices):
        sys.labels[vid] = v.label
        _vertex(sys, n, path, vid, v)
    for a, b in n.wires:
        sys.eq(_key(path, a), _key(path, b), 0,
               f"wire {n.names[a]} from {_describe(n, path, b)} to {_describe(n, path, a)}")


def _close(sys, under, keys):
    """Resolve reductor relations, fixing free classes at 0 when stuck."""
    uf = sys.uf
    pending = list(sys.reduce)
    while True:
        progress = True
        while progress and pending:
            progress = False
            for item in list(pending):
                out, fold, why = item
                d = uf.value(fold)
                if d is None:
                    continue
                sys.const(out, max(d - 1, 0), why)
                pending.remove(item)
                progress = True
        if not pending:
            break
        # stuck: anchor the class of the first blocked fold input
        out, fold, why = pending[0]
        _anchor(sys, fold, keys, under)
    for k in keys:
        if uf.value(k) is None:
            _anchor(sys, k, keys, under)


def _anchor(sys, k, keys, under):
    """Fix an unconstrained class so that its smallest member is 0."""
    uf = sys.uf
    root = uf.find(k)
    members = [x for x in keys if uf.find(x) == root]
    low = min(uf.rel(x)[1] for x in members) if members else 0
    uf.union(k, CONST, uf.rel(k)[1] - low, "free depth fixed at 0")
    under.extend(x for x in members if x[0] == "var")


def _keys(sys):
    return [k for k in sys.uf.parent if k != CONST]


def solve_depths(n: Network, input_depths=None) -> DepthSolution:
    """Depth of every channel and depth variable of n and everything inside it.

    input_depths maps network input names to the depth of the supplied stream.
    """
    sys = _System()
    _network(sys, n, ())
    for c in n.inputs:
        name = n.names[c]
        if input_depths and name in input_depths:
            sys.const(_key((), c), int(input_depths[name]), f"input stream {name} has depth {input_depths[name]}")
    systems = [sys]
    i = 0
    while i < len(systems):
        systems.extend(getattr(systems[i], "inner", []))
        i += 1
    depths, vars_, under = {}, {}, []
    for s in systems:
        _close(s, under, _keys(s))
        for k in _keys(s):
            value = s.uf.value(k)
            if value < 0:
                raise DepthError(f"negative depth {value} for {_render_key(n, k)}")
            if k[0] == "chan":
                depths[(k[1], k[2])] = value
            else:
                vars_.setdefault((k[1], k[2]), {})[k[3]] = value
    names = []
    for u in under:
        text = f"{u[3]} of vertex {u[2]}" + (f" in {'/'.join(map(str, u[1]))}" if u[1] else "")
        if text not in names:
            names.append(text)
    return DepthSolution(depths, vars_, names)


def _render_key(n, k):
    if k[0] == "chan":
        c = k[2]
        return f"channel {c}" if k[1] else f"channel {n.names.get(c, c)} ({c})"
    return f"depth variable {k[3]} of vertex {k[2]}"


def bind_network_depths(n: Network, sol: DepthSolution, path=()) -> Network:
    """Copy of n whose synchronisers know their depth variables."""
    vertices = []
    for vid, v in enumerate(n.vertices):
        if v.kind in (SYNCH, TAB):
            env = sol.vars.get((path, vid), {})
            v = replace(v, payload=v.payload.bind_depths(env))
        elif v.kind == NET:
            v = replace(v, payload=replace(v.payload, body=bind_network_depths(v.payload.body, sol, path + (vid,))))
        elif v.kind == FPS:
            v = replace(v, payload=replace(v.payload, operand=bind_network_depths(v.payload.operand, sol, path + (vid,))))
        vertices.append(v)
    return replace(n, vertices=tuple(vertices))
