"""Configured synchroniser state machines and their pure transition function."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..errors import ElaborationError, RuntimeFault
from ..lattice import NO_MEET, meet_all
from ..messages import Data, Sigma
from ..terms import (
    NIL, TRUE, Choice, List, Member, Number, Record, Tuple, list_items, make_choice,
    make_list, make_record, make_tuple,
)
from .ast import (
    DataExp, ElseTest, IntType, NamedInt, NilMsg, PatternTest, Ready, SigmaMsg,
    SigmaTest, SynchDecl, This, VariantTest,
)
from .intexp import eval_int

ELSE_RANK = 10_000


@dataclass(frozen=True)
class Clause:
    index: int  # position among the state's transitions
    tier: int
    trans: object

    @property
    def is_else(self):
        return isinstance(self.trans.on.test, ElseTest)

    @property
    def chan(self):
        return self.trans.on.chan


@dataclass
class StateMachine:
    decl: SynchDecl
    name: str
    config: dict
    inputs: list
    outputs: list
    in_depths: dict  # chan -> (var or None, offset)
    out_depths: dict
    widths: dict  # int state var -> width
    enums: dict  # enum state var -> number of values
    enum_values: dict  # enum value -> index
    clauses: dict  # state -> list of Clause (on-clauses only)
    epsilon: dict  # state -> first transition without an on-clause
    start: str
    cancelled: set
    indices: list = field(default_factory=list)  # (name, limit)
    depth_env: dict = field(default_factory=dict)

    def consts(self):
        env = dict(self.enum_values)
        env.update(self.config)
        env.update(self.depth_env)
        return env

    def bind_depths(self, env) -> "StateMachine":
        """Copy with depth variables fixed, so guards such as k=d can be evaluated."""
        names = set(self.decl.depth_vars())
        return replace(self, depth_env={k: v for k, v in env.items() if k in names})

    def channels_in_state(self, label):
        return {c.chan for c in self.clauses.get(label, ())}


@dataclass
class MachineState:
    label: str
    vars: dict
    stores: dict = field(default_factory=dict)
    rot: dict = field(default_factory=dict)
    closed: frozenset = frozenset()
    ended: frozenset = frozenset()  # outputs that have carried the end mark
    done: bool = False

    def copy(self):
        return MachineState(self.label, dict(self.vars), dict(self.stores), dict(self.rot),
                            self.closed, self.ended, self.done)


@dataclass
class StepResult:
    sends: list  # (output channel, Message)
    state: MachineState
    transition: object = None  # the fired Transition, or None for a default rule
    rule: str = "transition"  # transition | implicit-else | end-default | epsilon

    @property
    def targets(self):
        return [c for c, _ in self.sends]


# configuration

def _resolve_depth(d, config, chan):
    if d.base is None:
        return (None, 0)
    base = d.base
    if isinstance(base, str) and base in config:
        base = config[base]
    shift = d.shift
    if isinstance(shift, str):
        if shift not in config:
            raise ElaborationError(f"depth shift {shift!r} on channel {chan!r} is not a configuration parameter")
        shift = config[shift]
    offset = d.sign * shift
    if isinstance(base, int):
        value = base + offset
        if value < -1:
            raise ElaborationError(f"channel {chan!r} gets negative depth {value}")
        return (None, value)
    return (base, offset)


def instantiate_config(decl: SynchDecl, bindings=None) -> StateMachine:
    bindings = dict(bindings or {})
    missing = [c for c in decl.configs if c not in bindings]
    if missing:
        raise ElaborationError(f"synchroniser {decl.name}: unbound configuration parameter(s) {', '.join(missing)}")
    unknown = [k for k in bindings if k not in decl.configs]
    if unknown:
        raise ElaborationError(f"synchroniser {decl.name}: unknown configuration parameter(s) {', '.join(unknown)}")
    config = {c: int(bindings[c]) for c in decl.configs}
    widths, enums, enum_values = {}, {}, {}
    for d in decl.states:
        if isinstance(d.type, IntType):
            w = eval_int(d.type.width, config)
            if w <= 0:
                raise ElaborationError(f"state variable width must be positive, got {w}")
            for v in d.vars:
                widths[v] = w
        else:
            for i, value in enumerate(d.type.values):
                enum_values[value] = i
            for v in d.vars:
                enums[v] = len(d.type.values)
    in_depths, out_depths, cancelled = {}, {}, set()
    for c in decl.inputs:
        dep = _resolve_depth(c.depth, config, c.name)
        if dep == (None, -1):
            cancelled.add(c.name)
        else:
            in_depths[c.name] = dep
    for c in decl.outputs:
        dep = _resolve_depth(c.depth, config, c.name)
        if dep == (None, -1):
            cancelled.add(c.name)
        else:
            out_depths[c.name] = dep
    clauses, epsilon = {}, {}
    for label in decl.labels:
        tier = 0
        lst = []
        idx = 0
        for t in decl.transitions:
            if t.state != label:
                continue
            if t.on is None:
                epsilon.setdefault(label, t)
            else:
                if t.on.priority == "elseon":
                    tier += 1
                if t.on.chan not in cancelled:
                    lst.append(Clause(idx, tier, t))
            idx += 1
        clauses[label] = lst
    indices = []
    for ind, lim in decl.indices:
        if isinstance(lim, str):
            if lim not in config:
                raise ElaborationError(f"index limit {lim!r} is not a configuration parameter")
            lim = config[lim]
        indices.append((ind, int(lim)))
    return StateMachine(
        decl=decl, name=decl.name, config=config,
        inputs=[c.name for c in decl.inputs if c.name not in cancelled],
        outputs=[c.name for c in decl.outputs if c.name not in cancelled],
        in_depths=in_depths, out_depths=out_depths, widths=widths, enums=enums,
        enum_values=enum_values, clauses=clauses, epsilon=epsilon, start=decl.start,
        cancelled=cancelled, indices=indices,
    )


def initial_state(m: StateMachine) -> MachineState:
    vars_ = {v: 0 for v in list(m.widths) + list(m.enums)}
    return MachineState(m.start, vars_)


# matching

class _NoMatch(Exception):
    pass


def _int_of(t):
    if isinstance(t, Number) and t.is_integer():
        return t.as_int()
    return None


def match_pattern(test: PatternTest, term):
    """Bindings and tail for a pattern, None if the variant differs.

    Raises RuntimeFault when the message lacks the named integers.
    """
    if test.variant is not None:
        if not (isinstance(term, Choice) and len(term.members) == 1 and term.members[0].label == test.variant):
            return None
        term = term.members[0].term
    names = test.names
    if isinstance(term, Record):
        fields = {m.label: m.term for m in term.members}
        out = {}
        for n in names:
            v = _int_of(fields.get(n))
            if v is None:
                raise RuntimeFault(f"message has no integer field {n!r}")
            out[n] = v
        rest = make_record([m for m in term.members if m.label not in names])
        return out, rest
    if isinstance(term, (List, Tuple)):
        items = list_items(term)[0] if isinstance(term, List) else list(term.items)
        if len(items) < len(names):
            raise RuntimeFault(f"message has fewer than {len(names)} positional integers")
        out = {}
        for n, x in zip(names, items):
            v = _int_of(x)
            if v is None:
                raise RuntimeFault(f"positional entry for {n!r} is not an integer")
            out[n] = v
        rest_items = items[len(names):]
        rest = make_list(rest_items) if isinstance(term, List) else (make_tuple(rest_items) if rest_items else NIL)
        return out, rest
    if len(names) == 1 and _int_of(term) is not None:
        return {names[0]: _int_of(term)}, NIL
    raise RuntimeFault("message does not carry the named integers of the pattern")


def _test(m, st, clause, msg):
    """Bindings when the clause accepts msg, else None."""
    on = clause.trans.on
    test = on.test
    binds, tail = {}, None
    if isinstance(test, (Ready, ElseTest)):
        if isinstance(msg, Sigma) and msg.k == 0:
            return None
    elif isinstance(test, SigmaTest):
        if not isinstance(msg, Sigma):
            return None
        if test.bind is not None:
            binds[test.bind] = msg.k
        else:
            env = m.consts()
            env.update(st.vars)
            if eval_int(test.value, env) != msg.k:
                return None
    elif isinstance(test, VariantTest):
        if not isinstance(msg, Data):
            return None
        t = msg.term
        if not (isinstance(t, Choice) and len(t.members) == 1 and t.members[0].label == test.variant):
            return None
    elif isinstance(test, PatternTest):
        if not isinstance(msg, Data):
            return None
        r = match_pattern(test, msg.term)
        if r is None:
            return None
        binds, tail = r
    if on.guard is not None:
        env = m.consts()
        env.update(st.vars)
        env.update(binds)
        if not eval_int(on.guard, env):
            return None
    out = {"ints": binds}
    if isinstance(test, PatternTest) and test.tail is not None:
        out["tail"] = (test.tail, tail)
    return out


def _rotate(st, key, n):
    if n <= 1:
        return 0
    r = st.rot.get(key, 0)
    st.rot[key] = r + 1
    return r % n


def select_clause(m, st, chan, msg):
    """Choose the clause for msg on chan: (clause, bindings) or (None, rule)."""
    clauses = [c for c in m.clauses.get(st.label, ()) if c.chan == chan]
    tiers = sorted({c.tier for c in clauses if not c.is_else})
    for tier in tiers:
        hits = []
        for c in clauses:
            if c.tier == tier and not c.is_else:
                b = _test(m, st, c, msg)
                if b is not None:
                    hits.append((c, b))
        if hits:
            return hits[_rotate(st, ("clause", st.label, chan, tier), len(hits))]
    for c in clauses:
        if c.is_else:
            b = _test(m, st, c, msg)
            if b is not None:
                return c, b
    if isinstance(msg, Sigma) and msg.k == 0:
        return None, "end-default"
    return None, "implicit-else"


def rank(m, st, chan, msg):
    """Priority of reading chan now; lower is preferred, None when blocked by state."""
    clauses = [c for c in m.clauses.get(st.label, ()) if c.chan == chan]
    if not clauses:
        return None
    probe = st.copy()
    for c in sorted(clauses, key=lambda c: (c.is_else, c.tier, c.index)):
        try:
            b = _test(m, probe, c, msg)
        except RuntimeFault:
            return ELSE_RANK
        if b is not None:
            return ELSE_RANK if c.is_else else c.tier
    return ELSE_RANK


def candidates(m, st, heads):
    """Input channels worth trying, best first, rotated fairly within the best rank.

    Returns (ordered channels, rotation key or None). The caller advances the
    rotation with commit_choice once a candidate actually fires.
    """
    if st.done:
        return [], None
    ranked = {}
    for chan in m.inputs:
        if chan in st.closed or chan not in heads:
            continue
        r = rank(m, st, chan, heads[chan])
        if r is not None:
            ranked.setdefault(r, []).append(chan)
    if not ranked:
        return [], None
    best = min(ranked)
    group = ranked[best]
    key = None
    if len(group) > 1:
        key = ("chan", st.label, tuple(group))
        r = st.rot.get(key, 0) % len(group)
        group = group[r:] + group[:r]
    return group, key


def commit_choice(st, key):
    if key is not None:
        st.rot[key] = st.rot.get(key, 0) + 1


# firing

def _combine(pieces, variant):
    others = [p for p in pieces if not isinstance(p, tuple)]
    ints = [p for p in pieces if isinstance(p, tuple)]
    if not others:
        term = make_record([Member(n, TRUE, Number.of(v)) for n, v in ints]) if ints else NIL
    elif all(isinstance(t, Record) or t is NIL for t in others):
        base = meet_all(others)
        if base is NO_MEET:
            raise RuntimeFault("stored records have conflicting fields")
        fields = {x.label: x.term for x in (base.members if isinstance(base, Record) else ())}
        for n, v in ints:
            fields[n] = Number.of(v)
        term = make_record([Member(k, TRUE, v) for k, v in fields.items()])
    elif all(isinstance(t, List) for t in others):
        items = []
        for p in pieces:
            if isinstance(p, tuple):
                items.append(Number.of(p[1]))
            else:
                items.extend(list_items(p)[0])
        term = make_list(items)
    elif len(pieces) == 1:
        term = others[0]
    else:
        term = make_tuple([Number.of(p[1]) if isinstance(p, tuple) else p for p in pieces])
    if variant is not None:
        term = make_choice([Member(variant, TRUE, term)])
    return term


def _eval_data(m, ctx, d: DataExp, as_message=False):
    msg = ctx["msg"]
    if as_message and len(d.items) == 1 and isinstance(d.items[0], This) and isinstance(msg, Sigma) and d.variant is None:
        return msg
    pieces = []
    for item in d.items:
        if isinstance(item, This):
            if not isinstance(msg, Data):
                raise RuntimeFault("'this' refers to a segmentation mark inside a data expression")
            pieces.append(msg.term)
        elif isinstance(item, NamedInt):
            pieces.append((item.name, eval_int(item.value, ctx["env"])))
        else:
            name = item.name
            if name in m.decl.store_vars:
                if name not in ctx["stores"]:
                    raise RuntimeFault(f"store variable {name!r} read before assignment since the last start")
                pieces.append(ctx["stores"][name])
            elif name in ctx["tails"]:
                pieces.append(ctx["tails"][name])
            elif name in ctx["env"]:
                pieces.append((name, ctx["env"][name]))
            else:
                raise RuntimeFault(f"name {name!r} has no value here")
    term = _combine(pieces, d.variant)
    return Data(term) if as_message else term


def _store(m, st, name, value):
    if name in m.widths:
        st.vars[name] = value % (1 << m.widths[name])
    elif name in m.enums:
        if not 0 <= value < m.enums[name]:
            raise RuntimeFault(f"enum state variable {name!r} assigned out-of-range index {value}")
        st.vars[name] = value
    else:
        return False
    return True


def fire(m, st, trans, msg=None, chan=None, binds=None):
    """Execute do, send and goto of a transition on a copy of the state."""
    st = st.copy()
    binds = binds or {"ints": {}}
    env = m.consts()
    env.update(st.vars)
    env.update(binds["ints"])
    ctx = {"msg": msg, "env": env, "stores": st.stores, "tails": {}}
    if "tail" in binds:
        name, t = binds["tail"]
        ctx["tails"][name] = t
    for a in trans.do:
        if isinstance(a.value, DataExp):
            st.stores[a.target] = _eval_data(m, ctx, a.value)
            continue
        value = eval_int(a.value, env)
        if _store(m, st, a.target, value):
            env[a.target] = st.vars[a.target]
        else:
            env[a.target] = value  # alias, local to this transition
    sends = []
    for d in trans.send:
        if d.chan in m.cancelled:
            raise RuntimeFault(f"send to cancelled channel {d.chan!r}")
        if isinstance(d.msg, SigmaMsg):
            k = eval_int(d.msg.k, env)
            if k < 0:
                raise RuntimeFault(f"send of a mark with negative depth {k}")
            out = Sigma(k)
        elif isinstance(d.msg, NilMsg):
            out = Data(NIL)
        else:
            out = _eval_data(m, ctx, d.msg, as_message=True)
        sends.append((d.chan, out))
    if trans.goto is not None:
        st.label = trans.goto
        if trans.goto == m.start:
            st.stores = {}
    return sends, st


def _finish(m, st, sends, chan, msg):
    if isinstance(msg, Sigma) and msg.k == 0 and chan is not None:
        st.closed = st.closed | {chan}
    ended = set(st.ended)
    for c, out in sends:
        if c in ended:
            raise RuntimeFault(f"synchroniser {m.name} sends on {c!r} after the end of its stream")
        if isinstance(out, Sigma) and out.k == 0:
            ended.add(c)
    if not st.done and m.inputs and all(c in st.closed for c in m.inputs):
        for c in m.outputs:
            if c not in ended:
                sends.append((c, Sigma(0)))
                ended.add(c)
        st.done = True
    st.ended = frozenset(ended)
    return sends


def step_machine(m: StateMachine, st: MachineState, chan: str, msg) -> StepResult:
    """React to msg arriving on chan; the input state is not modified."""
    if st.done:
        raise RuntimeFault(f"synchroniser {m.name} has terminated")
    if chan not in m.inputs:
        raise RuntimeFault(f"{chan!r} is not an input of {m.name}")
    work = st.copy()
    clause, b = select_clause(m, work, chan, msg)
    if clause is None:
        if b == "end-default":
            work.closed = work.closed | {chan}
            sends = [(c, Sigma(0)) for c in m.outputs if c not in work.ended]
            work.ended = frozenset(m.outputs)
            work.done = True
            return StepResult(sends, work, None, "end-default")
        return StepResult(_finish(m, work, [], chan, msg), work, None, "implicit-else")
    sends, new = fire(m, work, clause.trans, msg, chan, b)
    return StepResult(_finish(m, new, sends, chan, msg), new, clause.trans, "transition")


def epsilon_step(m: StateMachine, st: MachineState):
    """Fire the current state's transition without an on-clause, if there is one."""
    if st.done:
        return None
    t = m.epsilon.get(st.label)
    if t is None:
        return None
    sends, new = fire(m, st, t)
    return StepResult(_finish(m, new, sends, None, None), new, t, "epsilon")


def drive(m: StateMachine, streams: dict, max_steps: int = 100_000):
    """Run a machine alone over fully available input streams.

    Every input message is present from the beginning, so the only choices
    are the fairness rotations. Returns (outputs per channel, final state).
    """
    queues = {c: list(streams.get(c, ())) for c in m.inputs}
    outs = {c: [] for c in m.outputs}
    st = initial_state(m)
    for _ in range(max_steps):
        res = epsilon_step(m, st)
        if res is None:
            heads = {c: q[0] for c, q in queues.items() if q}
            order, key = candidates(m, st, heads)
            if not order:
                break
            chan = order[0]
            commit_choice(st, key)
            res = step_machine(m, st, chan, queues[chan].pop(0))
        for c, msg in res.sends:
            outs[c].append(msg)
        st = res.state
        if st.done:
            break
    else:
        raise RuntimeFault(f"synchroniser {m.name} did not settle within {max_steps} steps")
    return outs, st
