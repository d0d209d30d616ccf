"""Network-wide term constraints.

Every vertex contributes its passport with variables and flags renamed
apart; every wire adds `producer output term <= consumer input term`.
The whole system goes to the passport solver in one piece.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .boxes import BUILTIN_PASSPORTS
from .errors import AkError, GroundError
from .network.model import BOX, FPS, MERGE, NET, SYNCH, TAB, Network
from .passport import LEQ, Constraint, Sat, check_ground_constraint, parse_passport, solve_constraints
from .synch.infer import infer_passport
from .terms import (
    And, Choice, Flag, List, Member, Not, Or, Record, Switch, Tuple, Var, cons, make_choice, make_record,
)


def _rename_guard(g, prefix):
    if isinstance(g, Flag):
        return Flag(prefix + g.name)
    if isinstance(g, Not):
        return Not(_rename_guard(g.arg, prefix))
    if isinstance(g, And):
        return And(tuple(_rename_guard(a, prefix) for a in g.args))
    if isinstance(g, Or):
        return Or(tuple(_rename_guard(a, prefix) for a in g.args))
    return g


def rename_apart(t, prefix):
    """t with every variable $x renamed $<prefix>x and every flag f <prefix>f."""
    if isinstance(t, Var):
        return Var("$" + prefix + t.name[1:])
    if isinstance(t, Tuple):
        return Tuple(tuple(rename_apart(x, prefix) for x in t.items))
    if isinstance(t, List):
        return cons(rename_apart(t.head, prefix), rename_apart(t.tail, prefix))
    if isinstance(t, (Record, Choice)):
        members = [Member(m.label, _rename_guard(m.guard, prefix), rename_apart(m.term, prefix)) for m in t.members]
        make = make_record if isinstance(t, Record) else make_choice
        return make(members, rename_apart(t.tail, prefix))
    if isinstance(t, Switch):
        return Switch(tuple((_rename_guard(g, prefix), rename_apart(x, prefix)) for g, x in t.branches))
    return t


def _rename_constraint(c, prefix, origin):
    return Constraint(tuple(rename_apart(t, prefix) for t in c.lhs), c.rel,
                      tuple(rename_apart(t, prefix) for t in c.rhs), origin)


@dataclass
class Aggregate:
    constraints: list = field(default_factory=list)
    missing: list = field(default_factory=list)  # vertices without a passport
    ins: dict = field(default_factory=dict)  # (path, Chan) -> term required
    outs: dict = field(default_factory=dict)  # (path, Chan) -> term produced


@dataclass
class CheckResult:
    result: object  # Sat | Unsat | Undecided
    aggregate: Aggregate
    recheck: dict = field(default_factory=dict)  # constraint text -> bool

    @property
    def verdict(self):
        return type(self.result).__name__

    @property
    def channel(self):
        """Channel named by the failing constraint, when it is a wire."""
        c = getattr(self.result, "constraint", None)
        if c is not None and c.origin.startswith("channel "):
            return c.origin.split()[1]
        return None


def _box_passport(spec, cwd):
    if spec.passport:
        path = Path(spec.passport)
        if not path.is_absolute() and cwd is not None:
            path = Path(cwd) / path
        return parse_passport(path.read_text())
    if spec.binding[0] == "builtin":
        return parse_passport(BUILTIN_PASSPORTS[spec.binding[1]])
    return None


def _where(path, vid):
    return "/".join(map(str, path + (vid,)))


class _Collector:
    def __init__(self, cwd):
        self.cwd = cwd
        self.agg = Aggregate()
        self.fresh = 0

    def var(self, base):
        self.fresh += 1
        return Var(f"$net{self.fresh}_{base}")

    def network(self, n: Network, path):
        for vid, v in enumerate(n.vertices):
            self.vertex(n, path, vid, v)
        for a, b in n.wires:
            lo = self.agg.outs.get((path, b))
            hi = self.agg.ins.get((path, a))
            if lo is None or hi is None:
                continue
            pv, cv = n.vertices[b.vid], n.vertices[a.vid]
            origin = f"channel {n.names[a]} ({pv.label}.{b.port} -> {cv.label}.{a.port})"
            self.agg.constraints.append(Constraint((lo,), LEQ, (hi,), origin))

    def vertex(self, n, path, vid, v):
        agg = self.agg
        prefix = f"v{_where(path, vid).replace('/', '_')}_"
        ins, outs = v.in_chans(vid), v.out_chans(vid)
        if v.kind in (SYNCH, TAB, BOX):
            if v.kind == BOX:
                pp = _box_passport(v.payload, self.cwd)
            else:
                pp = infer_passport(v.payload.decl)
            if pp is None:
                agg.missing.append(v.label)
                return
            where = f"{v.label}@{_where(path, vid)}"
            for c, t in zip(ins, pp.inputs):
                agg.ins[(path, c)] = rename_apart(t, prefix)
            real = [c for c in outs if c.port not in v.synthetic]
            for c, t in zip(real, pp.outputs):
                agg.outs[(path, c)] = rename_apart(t, prefix)
            for k, c in enumerate(pp.constraints, 1):
                agg.constraints.append(_rename_constraint(c, prefix, f"passport {where}#{k}"))
        elif v.kind == MERGE:
            m = Var(f"${prefix}m")
            for c in ins:
                agg.ins[(path, c)] = m
            for c in outs:
                agg.outs[(path, c)] = m
        elif v.kind in (NET, FPS):
            body = v.payload.body if v.kind == NET else v.payload.operand
            sub = path + (vid,)
            self.network(body, sub)
            self._bridge(body, sub, path, ins, outs, v.label)
            if v.kind == FPS:
                for oc in body.outputs:
                    for ic in body.inputs:
                        lo, hi = agg.outs.get((sub, oc)), agg.ins.get((sub, ic))
                        if body.names[oc] == body.names[ic] and lo is not None and hi is not None:
                            origin = f"channel {body.names[oc]} (replica to replica in {v.label})"
                            agg.constraints.append(Constraint((lo,), LEQ, (hi,), origin))

    def _bridge(self, body, sub, path, ins, outs, label):
        agg = self.agg
        for c in ins:
            inner = [agg.ins[(sub, x)] for x in body.inputs if body.names[x] == c.port and (sub, x) in agg.ins]
            if not inner:
                continue
            if len(inner) == 1:
                agg.ins[(path, c)] = inner[0]
                continue
            v = self.var(c.port)
            agg.ins[(path, c)] = v
            for t in inner:
                agg.constraints.append(Constraint((v,), LEQ, (t,), f"input {c.port} of {label}"))
        for c in outs:
            inner = [agg.outs[(sub, x)] for x in body.outputs if body.names[x] == c.port and (sub, x) in agg.outs]
            if not inner:
                continue
            if len(inner) == 1:
                agg.outs[(path, c)] = inner[0]
                continue
            v = self.var(c.port)
            agg.outs[(path, c)] = v
            for t in inner:
                agg.constraints.append(Constraint((t,), LEQ, (v,), f"output {c.port} of {label}"))


def aggregate(n: Network, cwd=None) -> Aggregate:
    col = _Collector(cwd)
    col.network(n, ())
    return col.agg


def check_network(n: Network, cwd=None) -> CheckResult:
    """Aggregate and solve; on Sat, re-check every ground constraint."""
    agg = aggregate(n, cwd)
    res = solve_constraints(agg.constraints)
    out = CheckResult(res, agg)
    if isinstance(res, Sat):
        for c in agg.constraints:
            try:
                out.recheck[str(c)] = check_ground_constraint(c, res.substitution)
            except (GroundError, AkError):
                out.recheck[str(c)] = False
    return out


def describe(check: CheckResult) -> list[str]:
    lines = [check.verdict]
    res = check.result
    if isinstance(res, Sat):
        for name, t in sorted(res.substitution.terms.items()):
            lines.append(f"  {name} = {t}")
        for name, b in sorted(res.substitution.flags.items()):
            lines.append(f"  flag {name} = {'true' if b else 'false'}")
        if res.underdetermined:
            lines.append("  underdetermined: " + ", ".join(res.underdetermined))
        bad = [c for c, ok in check.recheck.items() if not ok]
        lines.append(f"  re-check: {len(check.recheck) - len(bad)}/{len(check.recheck)} constraints hold")
        lines.extend(f"    fails: {c}" for c in bad)
    else:
        c = res.constraint
        lines.append(f"  {res.report}")
        if c is not None:
            lines.append(f"  at {c.origin or 'constraint'}: {c}")
    for v in check.aggregate.missing:
        lines.append(f"  no passport for {v}; its channels are unconstrained")
    return lines

