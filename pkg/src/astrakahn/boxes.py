"""Box registry: categories, built-in demonstration boxes and external boxes.

External boxes are subprocesses speaking newline-delimited JSON. A request
is {"api": 1, "op": ..., "inputs": [MDL text, ...], "state": null}; the reply
is {"outputs": {"_1": text or null, ...}, "continue": bool,
"continuation": text or null, "result": text or null}.
"""
from __future__ import annotations

import json
import os
import select
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .errors import AkError, ContractViolation, RuntimeFault
from .network.syntax import CATEGORY_RE
from .terms import Number, Tuple, is_ground, num, parse_term, render_term

API_VERSION = 1
DEFAULT_TIMEOUT = 10.0

CATEGORY_NAMES = {
    "T": "Transductor", "I": "Inductor", "DO": "DyadicOrdered", "DU": "DyadicUnordered",
    "MO": "MonadicOrdered", "MS": "MonadicSegmented", "MU": "MonadicUnordered",
}


class BoxError(AkError):
    pass


def parse_category(token: str):
    """`3T` -> (3, "T"); the count must be at least one."""
    m = CATEGORY_RE.match(token.strip())
    if m is None or not m.group(1):
        raise BoxError(f"bad box category {token!r}: expected <n><T|I|DO|DU|MO|MS|MU>")
    n = int(m.group(1))
    if n < 1:
        raise BoxError(f"bad box category {token!r}: a box has at least one output")
    return n, m.group(2).upper()


def is_dyadic(cat):
    return cat in ("DO", "DU")


def is_reductor(cat):
    return cat in ("DO", "DU", "MO", "MS", "MU")


def input_ports(cat):
    return ("_1", "_2") if is_dyadic(cat) else ("_1",)


def output_ports(n):
    return tuple(f"_{i}" for i in range(1, n + 1))


# step results shared by builtin and external boxes

@dataclass(frozen=True)
class Step:
    outputs: dict  # port -> term (ports without output absent)
    more: bool = False
    continuation: object = None
    result: object = None


def _check_outputs(name, outputs, ports):
    for p in outputs:
        if p not in ports:
            raise ContractViolation(f"box {name} emitted on undeclared port {p!r}")


# built-in boxes

def _int(t, who):
    if isinstance(t, Number) and t.is_integer():
        return t.as_int()
    raise RuntimeFault(f"{who} expects an integer, got {render_term(t)}")


def _ints(t, who):
    if isinstance(t, Tuple):
        return [_int(x, who) for x in t.items]
    return [_int(t, who)]


def _add2bit(a, b):
    s = _int(a, "add2bit") + _int(b, "add2bit")
    return num(s % 4), {"_2": num(s // 4)}


def _sum(a, b):
    return num(_int(a, "sumMU") + _int(b, "sumMU")), {}


def _iota(t):
    xs = _ints(t, "iota")
    if len(xs) == 1:
        i, n = 1, xs[0]
    elif len(xs) == 2:
        i, n = xs
    else:
        raise RuntimeFault("iota expects n or (i n)")
    if i > n:
        return Step({}, False)
    more = i < n
    return Step({"_1": num(i)}, more, Tuple((num(i + 1), num(n))) if more else None)


BUILTINS = {
    # id: (category letters, default outputs, function)
    "id": ("T", 1, lambda t: {"_1": t}),
    "add": ("T", 1, lambda t: {"_1": num(sum(_ints(t, "add")))}),
    "double": ("T", 1, lambda t: {"_1": num(2 * _int(t, "double"))}),
    "dec": ("T", 1, lambda t: {"_1": num(_int(t, "dec") - 1)}),
    "iota": ("I", 1, _iota),
    "add2bit": ("DO", 2, _add2bit),
    "sumMU": ("MU", 1, _sum),
}

BUILTIN_PASSPORTS = {
    "id": "vertex id < $x | | $x >",
    "add": "vertex add < (int int) | | int >",
    "double": "vertex double < int | | int >",
    "dec": "vertex dec < int | | int >",
    "iota": "vertex iota < int | | int >",
    "add2bit": "vertex add2bit < int, int | | int, int >",
    "sumMU": "vertex sumMU < int | | int >",
}


def builtin_registry() -> dict:
    """Name -> BoxSpec for every built-in box, at its natural category."""
    return {name: BoxSpec(name, n, cat, ("builtin", name)) for name, (cat, n, _) in BUILTINS.items()}


class BuiltinBox:
    def __init__(self, spec):
        self.spec = spec
        try:
            self.kind, _, self.fn = BUILTINS[spec.binding[1]]
        except KeyError:
            raise BoxError(f"unknown builtin {spec.binding[1]!r}") from None
        self.ports = output_ports(spec.n)

    def transduce(self, term) -> Step:
        out = self.fn(term)
        out = {p: t for p, t in out.items() if p in self.ports}
        return Step(out)

    def induct(self, term) -> Step:
        step = self.fn(term)
        return Step({p: t for p, t in step.outputs.items() if p in self.ports}, step.more, step.continuation)

    def reduce_step(self, a, b) -> Step:
        res, side = self.fn(a, b)
        return Step({p: t for p, t in side.items() if p in self.ports}, result=res)

    def close(self):
        pass


class ExternalBox:
    """One subprocess per box vertex, restarted once if it dies."""

    def __init__(self, spec, timeout=DEFAULT_TIMEOUT, cwd=None):
        self.spec = spec
        self.timeout = timeout
        self.cwd = cwd
        self.ports = output_ports(spec.n)
        self.proc = None
        self.faults = []

    def _start(self):
        argv = shlex.split(self.spec.binding[1])
        self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                     text=True, bufsize=1, cwd=self.cwd)

    def _send(self, line):
        if self.proc is None:
            self._start()
        try:
            self.proc.stdin.write(line)
            self.proc.stdin.flush()
        except BrokenPipeError:
            return None
        ready, _, _ = select.select([self.proc.stdout], [], [], self.timeout)
        if not ready:
            self.close()
            raise RuntimeFault(f"box {self.spec.name} did not answer within {self.timeout} s")
        return self.proc.stdout.readline() or None

    def _exchange(self, request):
        line = json.dumps(request) + "\n"
        reply = self._send(line)
        if reply is None:
            status = self.proc.wait()
            self.faults.append(f"box {self.spec.name} exited with status {status}; restarted")
            self.proc = None
            reply = self._send(line)
            if reply is None:
                status = self.proc.wait()
                self.proc = None
                raise RuntimeFault(f"box {self.spec.name} exited with status {status} again after a restart")
        try:
            data = json.loads(reply)
        except json.JSONDecodeError:
            raise ContractViolation(f"box {self.spec.name} sent malformed response {reply.strip()!r}") from None
        if not isinstance(data, dict):
            raise ContractViolation(f"box {self.spec.name} sent a non-object response")
        return data

    def _term(self, text, what):
        if text is None:
            return None
        if not isinstance(text, str):
            raise ContractViolation(f"box {self.spec.name}: {what} must be MDL text")
        t = parse_term(text)
        if not is_ground(t):
            raise ContractViolation(f"box {self.spec.name}: {what} is not a ground term")
        return t

    def _request(self, op, inputs) -> Step:
        data = self._exchange({"api": API_VERSION, "op": op,
                               "inputs": [render_term(t) for t in inputs], "state": None})
        raw = data.get("outputs") or {}
        if not isinstance(raw, dict):
            raise ContractViolation(f"box {self.spec.name}: outputs must be an object")
        for port, value in raw.items():
            if isinstance(value, list):
                raise ContractViolation(f"box {self.spec.name} emitted several messages on {port!r}")
        _check_outputs(self.spec.name, raw, self.ports)
        outputs = {p: self._term(v, f"output {p}") for p, v in raw.items() if v is not None}
        return Step(outputs, bool(data.get("continue", False)),
                    self._term(data.get("continuation"), "continuation"),
                    self._term(data.get("result"), "result"))

    def transduce(self, term) -> Step:
        return self._request("transduce", [term])

    def induct(self, term) -> Step:
        step = self._request("induct", [term])
        if step.more and step.continuation is None:
            raise ContractViolation(f"box {self.spec.name} asked to continue without a continuation")
        return step

    def reduce_step(self, a, b) -> Step:
        step = self._request("reduce_step", [a, b])
        if step.result is None:
            raise ContractViolation(f"box {self.spec.name} returned no reduction result")
        return step

    def close(self):
        if self.proc is not None and self.proc.poll() is None:
            self.proc.stdin.close()
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()
        self.proc = None


def invoke_external(spec, request: dict, timeout=DEFAULT_TIMEOUT, cwd=None) -> Step:
    """One validated request/response exchange with a fresh external box."""
    box = ExternalBox(spec, timeout, cwd)
    try:
        terms = [parse_term(x) if isinstance(x, str) else x for x in request.get("inputs", [])]
        op = request["op"]
        if op == "transduce":
            return box.transduce(*terms)
        if op == "induct":
            return box.induct(*terms)
        if op == "reduce_step":
            return box.reduce_step(*terms)
        raise BoxError(f"unknown box operation {op!r}")
    finally:
        box.close()


# manifests

@dataclass(frozen=True)
class BoxSpec:
    name: str
    n: int
    category: str
    binding: tuple  # ("builtin", id) | ("exec", command) | ("opaque", None)
    passport: str | None = None

    @property
    def token(self):
        return f"{self.n}{self.category}"

    def with_outputs(self, n):
        return BoxSpec(self.name, n, self.category, self.binding, self.passport)


def parse_manifest(text: str, base: Path | None = None) -> dict:
    """Lines `name category builtin:<id>|exec:<command> [passport=<path>]`."""
    specs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 2)
        if len(parts) < 3:
            raise BoxError(f"manifest line {lineno}: expected name, category and binding")
        name, cat, rest = parts
        n, letters = parse_category(cat)
        passport = None
        if " passport=" in " " + rest:
            head, _, tail = rest.rpartition("passport=")
            rest = head.strip()
            passport = tail.strip()
            if base is not None and passport and not os.path.isabs(passport):
                passport = str(base / passport)
        kind, sep, target = rest.partition(":")
        if not sep or kind not in ("builtin", "exec") or not target.strip():
            raise BoxError(f"manifest line {lineno}: binding must be builtin:<id> or exec:<command>")
        target = target.strip()
        if kind == "builtin" and target not in BUILTINS:
            raise BoxError(f"manifest line {lineno}: unknown builtin {target!r}")
        if name in specs:
            raise BoxError(f"manifest line {lineno}: box {name!r} declared twice")
        specs[name] = BoxSpec(name, n, letters, (kind, target), passport)
    return specs


def load_manifest(path) -> dict:
    path = Path(path)
    return parse_manifest(path.read_text(), path.resolve().parent)


def make_box(spec, cwd=None):
    if spec.binding[0] == "builtin":
        return BuiltinBox(spec)
    if spec.binding[0] == "exec":
        return ExternalBox(spec, cwd=cwd)
    raise BoxError(f"box {spec.name} has no implementation (declare it in a manifest)")
