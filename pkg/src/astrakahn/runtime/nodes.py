"""Executable vertices: boxes by category, synchronisers, tables, merges.

Every node reads from its own input channels and writes into per-link
outboxes. A node is only activated when the outboxes it may write to are
empty, which is how output pressure reaches it.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import replace

from ..boxes import is_dyadic
from ..errors import ContractViolation, RuntimeFault
from ..messages import END, Data, Sigma, is_end, short
from ..synch.machine import candidates, commit_choice, epsilon_step, initial_state, step_machine
from ..terms import TRUE, Member, Number, Record, make_record
from .channels import Channel, Link


class Node:
    kind = "node"

    def __init__(self, sched, name, label):
        self.sched = sched
        self.name = name
        self.label = label
        self.ins = {}  # port -> Channel
        self.outs = {}  # port -> [Link]
        self.done = False

    # wiring

    def add_input(self, port, capacity):
        ch = Channel(f"{self.name}.{port}", capacity)
        ch.consumer = self
        self.ins[port] = ch
        return ch

    def link(self, port, channel):
        link = Link(channel, self)
        self.outs.setdefault(port, []).append(link)
        return link

    # outputs

    def emit(self, port, msg):
        self.sched.log(self, "emit", port, msg)
        for link in self.outs.get(port, ()):
            link.push(msg)

    def flush(self) -> bool:
        moved = 0
        for links in self.outs.values():
            for link in links:
                moved += link.flush()
        return moved > 0

    def idle(self, ports=None) -> bool:
        ports = self.outs.keys() if ports is None else ports
        return all(link.idle() for p in ports for link in self.outs.get(p, ()))

    def clear(self, ports=None) -> bool:
        ports = self.outs.keys() if ports is None else ports
        return all(link.clear() for p in ports for link in self.outs.get(p, ()))

    def take(self, port):
        msg = self.ins[port].take()
        self.sched.log(self, "take", port, msg)
        return msg

    # introspection

    def step(self) -> bool:
        return False

    def pristine(self) -> bool:
        return all(not ch.queue for ch in self.ins.values()) and self.idle()

    def blocking_links(self):
        """Links holding the node back: pending ones, and full ones while input waits."""
        has_input = any(ch.queue for ch in self.ins.values())
        return [l for links in self.outs.values() for l in links
                if not l.idle() or (has_input and l.channel.full())]

    def waiting(self):
        """Why the node cannot move, for deadlock reports (None if finished)."""
        if self.done:
            return None
        blocked = sorted({l.channel.name for l in self.blocking_links()})
        if blocked:
            return f"blocked sending on {', '.join(blocked)}"
        return "waiting for input"

    def drain(self) -> bool:
        """A finished node discards whatever still arrives."""
        moved = False
        for port, ch in self.ins.items():
            while ch.queue:
                msg = ch.take()
                self.sched.log(self, "drop", port, msg)
                moved = True
        return moved

    def close(self):
        pass


class SourceNode(Node):
    kind = "source"

    def __init__(self, sched, name, msgs):
        super().__init__(sched, name, name)
        self.msgs = list(msgs)
        if not self.msgs or not is_end(self.msgs[-1]):
            self.msgs.append(END)

    def step(self):
        if self.done:
            return False
        for m in self.msgs:
            self.emit("out", m)
        self.done = True
        return True

    def exhausted(self):
        return self.done and self.idle()


class SinkNode(Node):
    kind = "sink"

    def __init__(self, sched, name):
        super().__init__(sched, name, name)
        self.received = []
        self.add_input("in", None)

    def step(self):
        ch = self.ins["in"]
        if not ch.queue and not self.done:
            ch.demand += 1
        moved = False
        while ch.queue:
            msg = self.take("in")
            self.received.append(msg)
            moved = True
            if is_end(msg):
                self.done = True
        return moved


class PlugNode(Node):
    """Sends a single end mark."""
    kind = "plug"

    def step(self):
        if self.done:
            return False
        for port in self.outs:
            self.emit(port, END)
        self.done = True
        return True

    def pristine(self):
        return True


class DiscardNode(Node):
    kind = "discard"

    def step(self):
        return self.drain()

    def waiting(self):
        return None


class MergeNode(Node):
    """Forwards messages from any input in seeded nondeterministic order."""
    kind = "merge"

    def __init__(self, sched, name, label, ports_in, ports_out, rng):
        super().__init__(sched, name, label)
        self.order = list(ports_in)
        self.outputs = list(ports_out)
        self.closed = set()
        self.rot = rng.randrange(1 << 16)

    def step(self):
        if self.done:
            return self.drain()
        if not self.idle():
            return False
        ready = [p for p in self.order if p not in self.closed and self.ins[p].queue]
        if not ready:
            return False
        port = ready[self.rot % len(ready)]
        self.rot += 1
        msg = self.take(port)
        if is_end(msg):
            self.closed.add(port)
            if len(self.closed) == len(self.order):
                for p in self.outputs:
                    self.emit(p, END)
                self.done = True
        else:
            for p in self.outputs:
                self.emit(p, msg)
        return True

    def pristine(self):
        return not self.closed and super().pristine()


class SynchNode(Node):
    kind = "synch"

    def __init__(self, sched, name, label, machine):
        super().__init__(sched, name, label)
        self.m = machine
        self.st = initial_state(machine)

    def _clear_for(self, targets):
        return self.clear(set(targets))

    def _commit(self, res):
        for c, msg in res.sends:
            self.emit(c, msg)
        self.st = res.state
        if self.st.done:
            self.done = True

    def step(self):
        if self.done:
            return self.drain()
        res = epsilon_step(self.m, self.st)
        if res is not None:
            if not self._clear_for(res.targets):
                return False
            self.sched.log(self, "fire", None, None, state=self.st.label)
            self._commit(res)
            return True
        heads = {c: ch.head() for c, ch in self.ins.items() if ch.queue}
        for c in self.m.channels_in_state(self.st.label):
            if c not in heads and c in self.ins and c not in self.st.closed:
                self.ins[c].demand += 1
        order, key = candidates(self.m, self.st, heads)
        for chan in order:
            res = step_machine(self.m, self.st, chan, heads[chan])
            if not self._clear_for(res.targets):
                continue
            commit_choice(res.state, key)
            self.take(chan)
            self._commit(res)
            return True
        return False

    def pristine(self):
        st = self.st
        fresh = initial_state(self.m)
        return (st.label == fresh.label and st.vars == fresh.vars and not st.stores
                and not st.closed and not st.ended and super().pristine())

    def waiting(self):
        w = super().waiting()
        return None if w is None else f"{w} in state {self.st.label}"


class _Replica:
    def __init__(self, m, st, inputs, outputs):
        self.m = m
        self.st = st
        self.inbox = {c: deque() for c in inputs}
        self.held = {c: None for c in outputs}
        self.buf = {c: deque() for c in outputs}


class TabNode(Node):
    """An array of synchroniser replicas keyed by index fields."""
    kind = "tab"

    def __init__(self, sched, name, label, machine):
        super().__init__(sched, name, label)
        self.m = machine
        self.replicas = {}
        self.order = []
        self.closed = set()
        self.ended = set()
        self.after_mark = {c: False for c in machine.inputs}

    def key_of(self, term):
        fields = {}
        if isinstance(term, Record):
            fields = {x.label: x.term for x in term.members if x.guard == TRUE}
        key = []
        for name, limit in self.m.indices:
            v = fields.get(name)
            if v is None:
                raise RuntimeFault(f"synch-table {self.label}: message {short(Data(term))} lacks index {name!r}")
            if not (isinstance(v, Number) and v.is_integer()):
                raise RuntimeFault(f"synch-table {self.label}: index {name!r} is not an integer")
            i = v.as_int()
            if not 0 <= i < limit:
                raise RuntimeFault(f"synch-table {self.label}: index {name}={i} outside 0..{limit - 1}")
            key.append(i)
        return tuple(key)

    def replica(self, key):
        r = self.replicas.get(key)
        if r is None:
            env = dict(self.m.depth_env)
            env.update(zip((n for n, _ in self.m.indices), key))
            m = replace(self.m, depth_env=env)
            r = _Replica(m, initial_state(m), self.m.inputs, self.m.outputs)
            for c in self.closed:
                r.inbox[c].append(END)
            self.replicas[key] = r
            self.order.append(key)
            self.sched.log(self, "replica", None, None, key=list(key))
        return r

    def rekey(self, key, msg):
        if not isinstance(msg, Data) or not isinstance(msg.term, Record):
            return msg
        have = {x.label for x in msg.term.members}
        extra = [Member(n, TRUE, Number.of(k)) for (n, _), k in zip(self.m.indices, key) if n not in have]
        if not extra:
            return msg
        return Data(make_record(list(msg.term.members) + extra, msg.term.tail))

    def route(self, r, key, port, msg):
        if r.held[port] is not None:
            r.buf[port].append(msg)
        elif isinstance(msg, Sigma):
            r.held[port] = msg.k
        else:
            self.emit(port, self.rekey(key, msg))

    def boundary(self):
        """Every input is closed, has just given a mark, or shows one next.

        Only then are all replicas of the current segment known, so held
        marks can be joined without depending on arrival timing.
        """
        for chan, ch in self.ins.items():
            head = ch.head()
            if chan not in self.closed and not self.after_mark[chan] and not isinstance(head, Sigma):
                return False
        return True

    def barrier(self, port) -> bool:
        moved = False
        while True:
            live = [(k, r) for k, r in ((k, self.replicas[k]) for k in self.order) if r.held[port] != 0]
            if live and all(r.held[port] is not None for _, r in live) and self.boundary():
                k = min(r.held[port] for _, r in live)
                self.emit(port, Sigma(k))
                moved = True
                for key, r in live:
                    r.held[port] = None
                    buf, r.buf[port] = r.buf[port], deque()
                    for msg in buf:
                        self.route(r, key, port, msg)
                continue
            if not live and port not in self.ended and len(self.closed) == len(self.m.inputs):
                self.emit(port, END)
                self.ended.add(port)
                moved = True
            return moved

    def run_replica(self, key, r):
        res = epsilon_step(r.m, r.st)
        chan = None
        if res is None:
            heads = {c: q[0] for c, q in r.inbox.items() if q}
            order, rot = candidates(r.m, r.st, heads)
            if not order:
                return False
            chan = order[0]
            res = step_machine(r.m, r.st, chan, heads[chan])
            commit_choice(res.state, rot)
            r.inbox[chan].popleft()
        r.st = res.state
        for c, msg in res.sends:
            self.route(r, key, c, msg)
        return True

    def step(self):
        if self.done:
            return self.drain()
        if not self.idle():
            return False
        moved = False
        for chan, ch in self.ins.items():
            if not ch.queue:
                continue
            msg = self.take(chan)
            moved = True
            self.after_mark[chan] = isinstance(msg, Sigma)
            if isinstance(msg, Data):
                self.replica(self.key_of(msg.term)).inbox[chan].append(msg)
                continue
            if is_end(msg):
                self.closed.add(chan)
            if not self.replicas and not is_end(msg):
                for p in self.m.outputs:
                    self.emit(p, msg)
            for key in self.order:
                self.replicas[key].inbox[chan].append(msg)
        for key in list(self.order):
            r = self.replicas[key]
            while not r.st.done and self.run_replica(key, r):
                moved = True
        for p in self.m.outputs:
            moved |= self.barrier(p)
        if len(self.closed) == len(self.m.inputs) and all(p in self.ended for p in self.m.outputs):
            self.done = True
        return moved

    def pristine(self):
        return not self.replicas and not self.closed and super().pristine()


class BoxNode(Node):
    """A stateless box run under its category's protocol."""
    kind = "box"

    def __init__(self, sched, name, label, category, impl, ports_out, synthetic=()):
        super().__init__(sched, name, label)
        self.category = category
        self.impl = impl
        self.real = [p for p in ports_out if p not in synthetic]
        self.synthetic = list(synthetic)
        self.side = self.real[1:]
        self.in_progress = False
        self.last_data = False
        self.acc = None
        self.group = []
        self.closed = set()
        self.ended = set()
        self.started = False

    def emit_marks(self, ports, msg):
        for p in ports:
            if p in self.ended:
                continue
            self.emit(p, msg)
            if is_end(msg):
                self.ended.add(p)

    def _outputs(self, step, allowed):
        for p, t in step.outputs.items():
            if p not in allowed:
                raise ContractViolation(f"box {self.label} emitted on port {p!r} outside its protocol")
            self.emit(p, Data(t))

    def step(self):
        if not self.started:
            self.started = True
            for p in self.synthetic:
                self.emit(p, END)
            return True
        if self.done:
            return self.drain()
        if not self.clear():
            return False
        if self.category == "T":
            return self.transduce()
        if self.category == "I":
            return self.induct()
        if is_dyadic(self.category):
            return self.reduce_dyadic()
        return self.reduce_monadic()

    def _input(self, port="_1"):
        ch = self.ins[port]
        if not ch.queue:
            ch.demand += 1
            return None
        return ch.head()

    def _finish(self):
        if len(self.ended) == len(self.real):
            self.done = True

    def transduce(self):
        msg = self._input()
        if msg is None:
            return False
        self.take("_1")
        if isinstance(msg, Sigma):
            self.emit_marks(self.real, msg)
            self._finish()
            return True
        step = self.impl.transduce(msg.term)
        self._outputs(step, self.real)
        return True

    def induct(self):
        msg = self._input()
        if msg is None:
            return False
        ch = self.ins["_1"]
        if isinstance(msg, Sigma):
            self.take("_1")
            self.last_data = False
            self.emit_marks(self.real, msg if msg.k == 0 else Sigma(msg.k + 1))
            self._finish()
            return True
        term = msg.term
        if not self.in_progress and self.last_data:
            self.emit_marks(self.real, Sigma(1))
            self.last_data = False
        if getattr(self.impl, "burst", False):
            step = self.impl.induct(term)
            rounds = max((len(v) for v in step.outputs.values()), default=0)
            for i in range(rounds):
                for p in self.real:
                    seq = step.outputs.get(p, [])
                    if i < len(seq):
                        self.emit(p, seq[i])
            self.take("_1")
            self.last_data = True
            return True
        while True:
            step = self.impl.induct(term)
            self._outputs(step, self.real)
            self.flush()
            if not step.more:
                self.take("_1")
                self.in_progress = False
                self.last_data = True
                return True
            if step.continuation is None:
                raise ContractViolation(f"inductor {self.label} continued without a continuation")
            term = step.continuation
            ch.replace_head(Data(term))
            self.in_progress = True
            if not self.clear():
                self.sched.log(self, "continue", "_1", Data(term))
                return True

    def _out1_mark(self, k):
        """Channel-2 mark as it appears on output _1 after a group."""
        if k == 0:
            self.emit_marks(self.real[:1], END)
        elif k > 1:
            self.emit_marks(self.real[:1], Sigma(k - 1))

    def reduce_dyadic(self):
        a_ch = self.ins["_1"]
        if "_1" not in self.closed:
            a = self._input("_1")
            if a is None:
                return False
            if isinstance(a, Sigma):
                self.take("_1")
                self.last_data = False
                if a.k == 0:
                    self.closed.add("_1")
                    self.emit_marks(self.side, END)
                else:
                    self.emit_marks(self.side, Sigma(a.k + 1))
                self._finish()
                return True
        else:
            b = self._input("_2")
            if b is None:
                return False
            self.take("_2")
            if isinstance(b, Data):
                raise RuntimeFault(f"reductor {self.label}: data on channel _2 after channel _1 ended")
            self._out1_mark(b.k)
            if b.k == 0:
                self.closed.add("_2")
            self._finish()
            return True
        acc = a.term
        if not self.in_progress and self.last_data:
            self.emit_marks(self.side, Sigma(1))
            self.last_data = False
        self.in_progress = True
        moved = False
        while True:
            b = self._input("_2")
            if b is None:
                a_ch.replace_head(Data(acc))
                return moved
            if isinstance(b, Data):
                step = self.impl.reduce_step(acc, b.term)
                if self.real and self.real[0] in step.outputs:
                    raise ContractViolation(f"reductor {self.label} wrote {self.real[0]} before the fold completed")
                self._outputs(step, self.side)
                acc = step.result
                self.take("_2")
                a_ch.replace_head(Data(acc))
                moved = True
                self.flush()
                if not self.clear():
                    return True
                continue
            self.take("_2")
            self.take("_1")
            if self.real:
                self.emit(self.real[0], Data(acc))
            self._out1_mark(b.k)
            if b.k == 0:
                self.closed.add("_2")
            self.in_progress = False
            self.last_data = True
            self._finish()
            return True

    def reduce_monadic(self):
        msg = self._input()
        if msg is None:
            return False
        self.take("_1")
        if isinstance(msg, Data):
            if self.acc is None:
                self.acc = msg.term
            else:
                step = self.impl.reduce_step(self.acc, msg.term)
                if self.real and self.real[0] in step.outputs:
                    raise ContractViolation(f"reductor {self.label} wrote {self.real[0]} before the fold completed")
                self._outputs(step, self.side)
                self.acc = step.result
            self.group.append(msg.term)
            return True
        if self.acc is not None:
            self._check_group(self.acc)
            if self.real:
                self.emit(self.real[0], Data(self.acc))
        self.acc = None
        self.group = []
        self._out1_mark(msg.k)
        self.emit_marks(self.side, msg)
        self._finish()
        return True

    def _check_group(self, result):
        """Under the test flag, refold unordered/segmented groups differently."""
        if not self.sched.check_reductions or self.category not in ("MU", "MS") or len(self.group) < 2:
            return
        rng = self.sched.check_rng
        items = list(self.group)

        def fold(xs):
            acc = xs[0]
            for x in xs[1:]:
                acc = self.impl.reduce_step(acc, x).result
            return acc

        if self.category == "MU":
            rng.shuffle(items)
            other = fold(items)
        else:
            cut = rng.randrange(1, len(items))
            other = fold([fold(items[:cut]), fold(items[cut:])])
        if other != result:
            raise RuntimeFault(f"reductor {self.label} ({self.category}) is not invariant: {result} vs {other}")

    def pristine(self):
        return (not self.in_progress and self.acc is None and not self.closed and not self.ended
                and super().pristine())

    def close(self):
        self.impl.close()


def make_rng(seed, *salt):
    return random.Random(f"{seed}:{':'.join(map(str, salt))}")
