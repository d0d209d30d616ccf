"""Deterministic cooperative scheduler over an elaborated network."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter

from ..boxes import Step, is_dyadic, make_box
from ..errors import AkError, RuntimeFault
from ..messages import END, Data, is_end, short
from ..network.fps import DEFAULT_REPLICA_CAP
from ..network.model import BOX, DISCARD, FPS, MERGE, NET, PLUG, SYNCH, TAB, Chan, Network
from .channels import Channel, Link
from .nodes import (
    BoxNode, DiscardNode, MergeNode, Node, PlugNode, SinkNode, SourceNode, SynchNode, TabNode, make_rng,
)

DEFAULT_CAPACITY = 4
DEFAULT_MAX_STEPS = 100_000
PROLIFERATION_THRESHOLD = 4

TERMINATED, DEADLOCK, BUDGET, FAULT = "terminated", "deadlock", "budget", "fault"
EXIT_CODES = {TERMINATED: 0, DEADLOCK: 2, BUDGET: 3, FAULT: 4}


@dataclass
class RunResult:
    status: str
    outputs: dict  # network output name -> [Message]
    trace: list = field(default_factory=list)
    report: dict | None = None  # deadlock details
    pressure: list = field(default_factory=list)
    faults: list = field(default_factory=list)
    steps: int = 0

    @property
    def exit_code(self):
        return EXIT_CODES[self.status]

    def streams(self):
        """Outputs in compact text form, for comparisons."""
        return {k: [short(m) for m in v] for k, v in self.outputs.items()}

    def trace_text(self):
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.trace)


# pure nets used as boxes

class PureNetAdapter:
    """Runs a box-like net afresh for every activation, so it keeps no state."""

    burst = True

    def __init__(self, info, config):
        self.info = info
        self.config = config
        self.body = info.body
        self.ins = info.body.input_names()
        self.outs = [p.name for p in info.outputs]

    def _run(self, streams):
        result = run_network(self.body, streams, **self.config)
        if result.status != TERMINATED:
            raise RuntimeFault(f"pure net {self.info.name} did not terminate ({result.status})"
                               + (f": {result.faults[0]}" if result.faults else ""))
        return {p: result.outputs.get(p, []) for p in self.outs}

    def _single(self, outs, what):
        step = {}
        for p, msgs in outs.items():
            data = [m for m in msgs if isinstance(m, Data)]
            if len(data) > 1:
                raise RuntimeFault(f"pure net {self.info.name} produced {len(data)} messages on {p} for one {what}")
            if data:
                step[p] = data[0].term
        return step

    def transduce(self, term):
        return Step(self._single(self._run({self.ins[0]: [Data(term), END]}), "input"))

    def induct(self, term):
        outs = self._run({self.ins[0]: [Data(term), END]})
        return Step({p: [m for m in msgs if not is_end(m)] for p, msgs in outs.items()})

    def reduce_step(self, a, b):
        if len(self.ins) == 2:
            streams = {self.ins[0]: [Data(a), END], self.ins[1]: [Data(b), END]}
        else:
            streams = {self.ins[0]: [Data(a), Data(b), END]}
        vals = self._single(self._run(streams), "reduction step")
        first = self.outs[0]
        if first not in vals:
            raise RuntimeFault(f"pure net {self.info.name} gave no reduction result on {first}")
        result = vals.pop(first)
        return Step(vals, result=result)

    def close(self):
        pass


# fixed-point series

class _FpsReplica:
    def __init__(self, index, ins, queues):
        self.index = index
        self.ins = ins  # input name -> [Link] into the replica
        self.queues = queues  # output name -> Channel owned by the series node
        self.nodes = []


class FpsNode(Node):
    """Lazily instantiated serial chain of operand replicas."""
    kind = "fps"

    def __init__(self, sched, name, label, info, path):
        super().__init__(sched, name, label)
        self.info = info
        self.path = path
        self.replicas = []
        self.attach = {x: 0 for x in info.operand.input_names()}
        self.ended = set()

    def replica(self, i):
        while len(self.replicas) <= i:
            k = len(self.replicas)
            if k >= self.sched.replica_cap:
                raise RuntimeFault(f"fixed-point series {self.name} needs more than {self.sched.replica_cap} replicas")
            self.replicas.append(self.sched.instantiate_replica(self, k))
            self.sched.log(self, "spawn", None, None, replica=k)
        return self.replicas[i]

    def _clear(self, links):
        return all(link.clear() for link in links)

    def _deliver(self, i, name, msg):
        for link in self.replica(i).ins.get(name, ()):
            link.push(msg)

    def _downstream_quiet(self, i):
        for r in self.replicas[i + 1:]:
            if any(ch.queue for ch in r.queues.values()):
                return False
            if not all(link.idle() for links in r.ins.values() for link in links):
                return False
            if not all(n.pristine() for n in r.nodes):
                return False
        return True

    def _bypassing(self, r, name):
        vid, label = self.info.reverse[name]
        node = r.by_vid.get(vid)
        if not isinstance(node, SynchNode) or node.st.label != label:
            return False
        if any(ch.queue for ch in node.ins.values()):
            return False
        q = r.queues.get(name)
        return not (q and q.queue) and all(link.idle() for link in r.ins.get(name, ()))

    def step(self):
        if self.done:
            return self.drain()
        moved = False
        for name in self.attach:
            if name in self.info.reverse:
                while self.attach[name] < len(self.replicas) and self._bypassing(self.replicas[self.attach[name]], name):
                    self.attach[name] += 1
                    self.sched.log(self, "rewire", name, None, replica=self.attach[name])
                    moved = True
            ch = self.ins.get(name)
            if ch is None or not ch.queue:
                continue
            r = self.replica(self.attach[name])
            if not self._clear(r.ins.get(name, ())):
                continue
            msg = self.take(name)
            self._deliver(self.attach[name], name, msg)
            moved = True
        i = 0
        while i < len(self.replicas):
            r = self.replicas[i]
            for name, q in r.queues.items():
                while q.queue:
                    msg = q.head()
                    last = i + 1 >= len(self.replicas)
                    if is_end(msg) and last:
                        q.take()
                        if name in self.info.n_out and name not in self.ended:
                            self.emit(name, msg)
                            self.ended.add(name)
                        else:
                            self.sched.log(self, "drop", name, msg, replica=i)
                    elif not is_end(msg) and name in self.info.n_out and self._downstream_quiet(i):
                        if not self.clear([name]):
                            break
                        q.take()
                        self.sched.log(self, "warp", name, msg, replica=i)
                        self.emit(name, msg)
                    else:
                        nxt = self.replica(i + 1)
                        if not self._clear(nxt.ins.get(name, ())):
                            break
                        q.take()
                        self._deliver(i + 1, name, msg)
                    moved = True
            i += 1
        if all(x in self.ended for x in self.info.n_out):
            self.done = True
        return moved

    def pristine(self):
        return not self.replicas and super().pristine()

    def waiting(self):
        w = super().waiting()
        return None if w is None else f"{w} with {len(self.replicas)} replica(s)"


# building

class _Build:
    """Endpoints of an instantiated network: consumer channels per input
    channel and producing (node, port) pairs per output channel."""

    def __init__(self):
        self.ins = {}  # Chan -> [Channel]
        self.outs = {}  # Chan -> [(Node, port)]
        self.nodes = []
        self.by_vid = {}


class Scheduler:
    def __init__(self, network: Network, inputs=None, seed=0, capacity=DEFAULT_CAPACITY,
                 max_steps=DEFAULT_MAX_STEPS, replica_cap=DEFAULT_REPLICA_CAP,
                 pressurise_wraps=False, check_reductions=False, cwd=None, trace=True):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.network = network
        self.seed = seed
        self.capacity = capacity
        self.max_steps = max_steps
        self.replica_cap = replica_cap
        self.pressurise_wraps = pressurise_wraps
        self.check_reductions = check_reductions
        self.check_rng = make_rng(seed, "check")
        self.cwd = cwd
        self.tracing = trace
        self.nodes = []
        self.channels = []
        self.transfers = []  # (source Channel, [target Channel])
        self.trace = []
        self.steps = 0
        self.names = set()
        self.sources, self.sinks = {}, {}
        self._top(inputs or {})

    # trace

    def log(self, node, action, channel, msg, **extra):
        if not self.tracing:
            return
        rec = {"step": self.steps, "vertex": node.name, "action": action,
               "channel": channel, "message": None if msg is None else short(msg)}
        rec.update(extra)
        self.trace.append(rec)

    # construction

    def _name(self, label, path):
        base = f"{label}@{'.'.join(map(str, path))}" if path else label
        name, i = base, 1
        while name in self.names:
            i += 1
            name = f"{base}#{i}"
        self.names.add(name)
        return name

    def _chan(self, node, port):
        ch = node.add_input(port, self.capacity)
        self.channels.append(ch)
        return ch

    def _add(self, node, build=None):
        self.nodes.append(node)
        if build is not None:
            build.nodes.append(node)
        return node

    def config(self):
        return dict(seed=self.seed, capacity=self.capacity, max_steps=self.max_steps,
                    replica_cap=self.replica_cap, pressurise_wraps=self.pressurise_wraps,
                    check_reductions=self.check_reductions, cwd=self.cwd, trace=False)

    def build(self, n: Network, path, build=None) -> _Build:
        b = build or _Build()
        for vid, v in enumerate(n.vertices):
            here = path + (vid,)
            node = None
            ins, outs = list(v.inputs), list(v.outputs)
            if v.kind == NET and not v.payload.pure:
                inner = self.build(v.payload.body, here, _Build())
                b.nodes.extend(inner.nodes)
                body = v.payload.body
                for port in ins:
                    b.ins[Chan(vid, "in", port)] = [ch for c in body.inputs if body.names[c] == port
                                                    for ch in inner.ins.get(c, [])]
                for port in outs:
                    b.outs[Chan(vid, "out", port)] = [p for c in body.outputs if body.names[c] == port
                                                      for p in inner.outs.get(c, [])]
                continue
            name = self._name(v.label, here)
            if v.kind in (BOX, NET):
                if v.kind == BOX:
                    cat, impl = v.payload.category, make_box(v.payload, self.cwd)
                else:
                    cat, impl = v.payload.category, PureNetAdapter(v.payload, self.config())
                node = BoxNode(self, name, v.label, cat, impl, outs, v.synthetic)
                keys = ["_1", "_2"] if is_dyadic(cat) else ["_1"]
                for port, key in zip(ins, keys):
                    b.ins[Chan(vid, "in", port)] = [self._chan(node, key)]
            else:
                if v.kind == SYNCH:
                    node = SynchNode(self, name, v.label, v.payload)
                elif v.kind == TAB:
                    node = TabNode(self, name, v.label, v.payload)
                elif v.kind == MERGE:
                    node = MergeNode(self, name, v.label, ins, outs, make_rng(self.seed, name))
                elif v.kind == PLUG:
                    node = PlugNode(self, name, v.label)
                elif v.kind == DISCARD:
                    node = DiscardNode(self, name, v.label)
                elif v.kind == FPS:
                    node = FpsNode(self, name, v.label, v.payload, here)
                else:
                    raise RuntimeFault(f"cannot execute vertex kind {v.kind!r}")
                for port in ins:
                    b.ins[Chan(vid, "in", port)] = [self._chan(node, port)]
            for port in outs:
                b.outs[Chan(vid, "out", port)] = [(node, port)]
            node.outs.update({p: [] for p in outs})
            b.by_vid[vid] = node
            self._add(node, b)
        for a, c in n.wires:
            depress = (a, c) in n.depressurised and not self.pressurise_wraps
            for ch in b.ins.get(a, []):
                if depress:
                    ch.depressurised = True
                    ch.capacity = None
                for node, port in b.outs.get(c, []):
                    node.link(port, ch)
        for (a, c), targets in n.transfer.items():
            srcs = b.ins.get(a, [])
            dsts = [ch for t in targets for ch in b.ins.get(t, [])]
            for s in srcs:
                self.transfers.append((s, dsts))
        return b

    def _top(self, inputs):
        n = self.network
        b = self.build(n, ())
        for name in n.input_names():
            src = SourceNode(self, self._name(f"in:{name}", ()), inputs.get(name, [END]))
            for c in n.inputs:
                if n.names[c] == name:
                    for ch in b.ins.get(c, []):
                        src.link("out", ch)
            self.sources[name] = src
        self.nodes[:0] = list(self.sources.values())
        unknown = [k for k in inputs if k not in self.sources]
        if unknown:
            raise RuntimeFault(f"no network input named {', '.join(map(repr, unknown))}")
        for name in n.output_names():
            sink = SinkNode(self, self._name(f"out:{name}", ()))
            self.channels.append(sink.ins["in"])
            for c in n.outputs:
                if n.names[c] == name:
                    for node, port in b.outs.get(c, []):
                        node.link(port, sink.ins["in"])
            self.sinks[name] = sink
            self._add(sink)

    def instantiate_replica(self, fps: FpsNode, k):
        a = fps.info.operand
        b = self.build(a, fps.path + (k,))
        queues = {}
        for name in a.output_names():
            q = Channel(f"{fps.name}.q{k}.{name}", self.capacity)
            q.consumer = fps
            self.channels.append(q)
            for c in a.outputs:
                if a.names[c] == name:
                    for node, port in b.outs.get(c, []):
                        node.link(port, q)
            queues[name] = q
        ins = {}
        for name in a.input_names():
            ins[name] = [Link(ch, fps) for c in a.inputs if a.names[c] == name for ch in b.ins.get(c, [])]
        r = _FpsReplica(k, ins, queues)
        r.nodes = b.nodes
        r.by_vid = b.by_vid
        # replica links are flushed by the series node
        fps.outs.setdefault(f"#replica{k}", []).extend(link for links in ins.values() for link in links)
        return r

    # running

    def _links(self):
        for node in self.nodes:
            for links in node.outs.values():
                yield from links

    def _update_transfer(self):
        for ch in self.channels:
            ch.back_pressured = False
        for src, dsts in self.transfers:
            if src.pressured():
                for d in dsts:
                    d.back_pressured = True

    def _finished(self):
        if self.sinks:
            return all(s.done for s in self.sinks.values())
        return False

    def _quiesce(self):
        """Close depressurised cycles once nothing else can ever arrive."""
        if not all(s.exhausted() for s in self.sources.values()):
            return False
        hit = False
        for ch in self.channels:
            if ch.depressurised and not ch.closed:
                ch.inject_end()
                hit = True
                if ch.consumer is not None:
                    self.log(ch.consumer, "quiesce", ch.name, END)
        return hit

    def run(self) -> RunResult:
        status, faults = TERMINATED, []
        try:
            while True:
                if self._finished():
                    break
                self._update_transfer()
                progress = False
                for node in self.nodes:
                    progress |= node.flush()
                for node in list(self.nodes):
                    if node.step():
                        progress = True
                        self.steps += 1
                        if self.steps > self.max_steps:
                            status = BUDGET
                            break
                    progress |= node.flush()
                if status == BUDGET:
                    break
                if progress:
                    continue
                if self._finished():
                    break
                if self._quiesce():
                    continue
                if not self.sinks and all(link.idle() for link in self._links()) and \
                        all(not ch.queue for ch in self.channels):
                    break
                status = DEADLOCK
                break
        except AkError as e:
            status = FAULT
            faults.append(str(e))
        finally:
            for node in self.nodes:
                try:
                    node.close()
                except Exception as e:  # noqa: BLE001 - a dying box must not hide the result
                    faults.append(f"closing {node.name}: {e}")
                faults.extend(getattr(getattr(node, "impl", None), "faults", []))
        report = self.deadlock_report() if status == DEADLOCK else None
        outputs = {k: list(s.received) for k, s in self.sinks.items()}
        return RunResult(status, outputs, self.trace, report, self.pressure_report(), faults, self.steps)

    # reports

    def deadlock_report(self):
        """Blocked channels, waiting vertices and a wait-for cycle, if any."""
        if self._finished():
            return None
        blocked = []
        for ch in self.channels:
            if ch.full():
                blocked.append({"channel": ch.name, "queue": len(ch.queue), "capacity": ch.capacity,
                                "producers": sorted({n.name for n in ch.producer_nodes})})
        waiting = []
        graph = {}
        for node in self.nodes:
            why = node.waiting()
            if why is None or isinstance(node, SourceNode) and node.exhausted():
                continue
            waiting.append({"vertex": node.name, "reason": why})
            deps = {l.channel.consumer.name for l in node.blocking_links() if l.channel.consumer is not None}
            for ch in node.ins.values():
                if not ch.queue and not ch.closed:
                    deps.update(p.name for p in ch.producer_nodes)
            graph[node.name] = deps
        cycle = None
        try:
            TopologicalSorter(graph).prepare()
        except CycleError as e:
            cycle = list(reversed(e.args[1]))
        return {"blocked": blocked, "waiting": waiting, "cycle": cycle}

    def pressure_report(self, threshold=PROLIFERATION_THRESHOLD):
        rows = []
        for ch in self.channels:
            rows.append({"channel": ch.name, "queue": len(ch.queue), "capacity": ch.capacity,
                         "demand": ch.demand, "blocks": ch.blocks, "peak": ch.peak,
                         "blocked": ch.full(), "depressurised": ch.depressurised})
        eligible = []
        for node in self.nodes:
            if not isinstance(node, BoxNode):
                continue
            outs = [l.channel for ls in node.outs.values() for l in ls]
            queued = sum(len(ch.queue) for ch in node.ins.values())
            if outs and all(ch.demand > 0 for ch in outs) and queued >= threshold:
                eligible.append(node.name)
        for row in rows:
            row["proliferation"] = any(row["channel"].startswith(e + ".") for e in eligible)
        return rows


def run_network(network: Network, inputs=None, **config) -> RunResult:
    """Run network on the given input streams (name -> [Message])."""
    try:
        sched = Scheduler(network, inputs, **config)
    except AkError as e:
        return RunResult(FAULT, {}, [], None, [], [str(e)], 0)
    return sched.run()
