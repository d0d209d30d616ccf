"""Streamlining and fixed-point series.

An operand whose output names do not match its input names is augmented
first: an unmatched output gets a pair of merges that makes the channel
pass straight through the next replica, and an unmatched input gets a
make_rfp synchroniser that hands the first sublist to the operand and
forwards everything after it.
"""
from __future__ import annotations

from functools import lru_cache

from ..errors import ElaborationError
from ..synch.ast import Ready, This
from ..synch.machine import instantiate_config
from ..synch.parser import parse_synchroniser
from .model import FPS, MERGE, SYNCH, Chan, FpsInfo, Vertex, merge_vertex, rename_apply, serial_connect, sing

MAKE_RFP = """
synch make_rfp (u:k | v:k-1, w:k)
{
start:  on u.sigma(k) send sigma(k-1) => v goto bypass;
        on u.sigma(0) send sigma(0) => v, sigma(0) => w goto start;
        on u.sigma(m) & m < k send sigma(m-1) => v goto start;
        on u.else send this => v goto start;

bypass: on u send this => w goto bypass;
}
"""

DEFAULT_REPLICA_CAP = 64


@lru_cache(maxsize=None)
def _rfp_decl():
    return parse_synchroniser(MAKE_RFP)


def make_rfp(nu, phi):
    """The rfp vertex with u renamed to nu, v to phi and w to nu."""
    m = instantiate_config(_rfp_decl())
    v = Vertex(SYNCH, "make_rfp", ("u",), ("v", "w"), m)
    return rename_apply(sing(v), [("u", nu)], [("v", phi), ("w", nu)])


def _fresh(base, used):
    name = f"{base}_fp"
    i = 1
    while name in used:
        i += 1
        name = f"{base}_fp{i}"
    used.add(name)
    return name


def _used_names(n):
    return set(n.names.values())


def streamline(n):
    """Make the input and output name sets of n coincide."""
    ins, outs = n.input_names(), n.output_names()
    if set(ins) == set(outs):
        return n
    used = _used_names(n)
    for nu in [x for x in outs if x not in ins]:
        phi = _fresh(nu, used)
        n = serial_connect(n, sing(merge_vertex([nu], [phi])))
        n = serial_connect(n, sing(merge_vertex([nu, phi], [nu])))
    for nu in [x for x in ins if x not in outs]:
        phi = _fresh(nu, used)
        n = serial_connect(make_rfp(nu, phi), serial_connect(sing(merge_vertex([phi], [nu])), n))
    return n


def _pass_through(m, state, out_port, same_state=False):
    """Input port whose clause `on x send this => out goto start` feeds out_port."""
    by_chan = {}
    for c in m.clauses.get(state, ()):
        by_chan.setdefault(c.chan, []).append(c)
    for chan, cs in by_chan.items():
        if len(cs) != 1:
            continue
        t = cs[0].trans
        if not isinstance(t.on.test, Ready) or t.on.guard is not None or t.do:
            continue
        if len(t.send) != 1 or t.send[0].chan != out_port:
            continue
        msg = t.send[0].msg
        if not (hasattr(msg, "items") and len(msg.items) == 1 and isinstance(msg.items[0], This) and msg.variant is None):
            continue
        target = state if same_state else m.start
        if (t.goto or state) != target:
            continue
        return chan
    return None


def forward_fixed_point(n, out_chan: Chan, seen=None) -> bool:
    """True when out_chan is fed by the input of the same name through merges
    and start-state pass-through transitions only."""
    name = n.names[out_chan]
    seen = set() if seen is None else seen
    if out_chan in seen:
        return False
    seen.add(out_chan)
    v = n.vertices[out_chan.vid]
    if v.kind == MERGE:
        feeds = [Chan(out_chan.vid, "in", p) for p in v.inputs]
    elif v.kind == SYNCH:
        p = _pass_through(v.payload, v.payload.start, out_chan.port)
        feeds = [Chan(out_chan.vid, "in", p)] if p is not None else []
    else:
        return False
    for c in feeds:
        if c in n.inputs and n.names[c] == name:
            return True
        for _, producer in n.wires_into(c):
            if forward_fixed_point(n, producer, seen):
                return True
    return False


def reverse_fixed_points(n):
    """Inputs consumed by a synchroniser state that forwards them unchanged to
    the output of the same name: name -> (vertex index, state)."""
    out = {}
    for c in n.inputs:
        v = n.vertices[c.vid]
        if v.kind != SYNCH:
            continue
        m = v.payload
        name = n.names[c]
        for label in m.decl.labels:
            if label == m.start:
                continue
            for oc in n.outputs:
                if oc.vid != c.vid or n.names[oc] != name:
                    continue
                if _pass_through(m, label, oc.port, same_state=True) == c.port:
                    out[name] = (c.vid, label)
    return out


def fps_connect(n):
    """A* as a single vertex; replicas are created at run time."""
    a = streamline(n)
    n_out, warnings = [], []
    for oc in a.outputs:
        name = a.names[oc]
        if forward_fixed_point(a, oc):
            if name not in n_out:
                n_out.append(name)
    for name in a.output_names():
        if name not in n_out:
            warnings.append(f"fixed-point series: no forward fixed point detected on {name!r}; it is not an output")
    if not n_out:
        raise ElaborationError("fixed-point series has no channel with a forward fixed point, so it can never emit")
    info = FpsInfo(a, tuple(n_out), reverse_fixed_points(a), tuple(warnings))
    v = Vertex(FPS, "fps", tuple(a.input_names()), tuple(n_out), info)
    return sing(v)
