"""Vertex passports and the order-theoretic constraint solver."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import AkError, GroundError, NormalizeError, ParseError
from .lattice import NO_MEET, equivalent, is_junior, join_all, meet, meet_all, normalize
from .lexer import Cursor
from .terms import (
    NIL, NONE, Choice, List, Member, Number, Record, Str, Switch, Symbol, Term, Tuple, Var,
    cons, is_ground, list_items, make_choice, make_list, make_record, render_term, term_flags,
    term_vars, walk, TermParser, TRUE,
)

EQ = "="
LEQ = "<="
DEFAULT_BUDGET = 10_000
MAX_FLAGS = 12
MAX_DEPTH = 64


@dataclass(frozen=True)
class Constraint:
    lhs: tuple
    rel: str
    rhs: tuple
    origin: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.lhs or not self.rhs:
            raise ValueError("constraint sides must be nonempty")
        if self.rel not in (EQ, LEQ):
            raise ValueError(f"unknown relation {self.rel!r}")

    def terms(self):
        return list(self.lhs) + list(self.rhs)

    def __str__(self):
        lhs = "; ".join(render_term(t) for t in self.lhs)
        rhs = "; ".join(render_term(t) for t in self.rhs)
        return f"{lhs} {self.rel} {rhs}."


@dataclass(frozen=True)
class Passport:
    vertex_name: str
    inputs: tuple
    constraints: tuple
    outputs: tuple

    def variables(self):
        seen = []
        for t in list(self.inputs) + [x for c in self.constraints for x in c.terms()] + list(self.outputs):
            for v in term_vars(t):
                if v not in seen:
                    seen.append(v)
        return seen

    def underdetermined(self):
        """Output variables that no input or constraint mentions."""
        known = set()
        for t in list(self.inputs) + [x for c in self.constraints for x in c.terms()]:
            known.update(term_vars(t))
        out = []
        for t in self.outputs:
            for v in term_vars(t):
                if v not in known and v not in out:
                    out.append(v)
        return out

    def render(self):
        ins = ", ".join(render_term(t) for t in self.inputs)
        cs = "".join(f" {c}" for c in self.constraints)
        outs = ", ".join(render_term(t) for t in self.outputs)
        return f"vertex {self.vertex_name} < {ins} |{cs} | {outs} >"


@dataclass
class Substitution:
    terms: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def copy(self):
        return Substitution(dict(self.terms), dict(self.flags))


# parsing

def _term_list(cur, tp, stop):
    items = []
    if any(cur.at(s) for s in stop):
        return items
    items.append(tp.term())
    while cur.accept(","):
        items.append(tp.term())
    return items


def _side(cur, tp):
    if cur.at("=") or cur.at("<=") or cur.at(".") or cur.at("|"):
        cur.error("empty constraint side")
    items = [tp.term()]
    while cur.accept(";"):
        items.append(tp.term())
    return tuple(items)


def parse_passport_from(cur: Cursor) -> Passport:
    tp = TermParser(cur)
    cur.expect("vertex")
    name = cur.expect_kind("id", "a vertex name").text
    cur.expect("<")
    inputs = _term_list(cur, tp, ["|", "||"])
    constraints = []
    if cur.accept("||"):
        pass
    else:
        cur.expect("|")
        while not cur.at("|"):
            lhs = _side(cur, tp)
            if cur.accept("="):
                rel = EQ
            elif cur.accept("<="):
                rel = LEQ
            else:
                cur.error("expected '=' or '<='")
            rhs = _side(cur, tp)
            cur.expect(".")
            constraints.append(Constraint(lhs, rel, rhs, origin=f"{name}#{len(constraints) + 1}"))
        cur.expect("|")
    outputs = _term_list(cur, tp, [">"])
    cur.expect(">")
    return Passport(name, tuple(inputs), tuple(constraints), tuple(outputs))


def parse_passports(text: str) -> list[Passport]:
    cur = Cursor(text)
    out = []
    while not cur.at_eof():
        out.append(parse_passport_from(cur))
    return out


def parse_passport(text: str) -> Passport:
    ps = parse_passports(text)
    if len(ps) != 1:
        raise ParseError(f"expected exactly one passport, found {len(ps)}")
    return ps[0]


def parse_constraint(text: str) -> Constraint:
    cur = Cursor(text)
    tp = TermParser(cur)
    lhs = _side(cur, tp)
    if cur.accept("="):
        rel = EQ
    elif cur.accept("<="):
        rel = LEQ
    else:
        cur.error("expected '=' or '<='")
    rhs = _side(cur, tp)
    cur.accept(".")
    if not cur.at_eof():
        cur.error("unexpected trailing input")
    return Constraint(lhs, rel, rhs, origin=text.strip())


# substitution

class SpliceError(AkError):
    pass


def _subst(t: Term, terms: dict, depth=0) -> Term:
    if depth > 200:
        raise SpliceError("substitution does not terminate (cyclic binding)")
    if isinstance(t, Var):
        if t.name in terms:
            return _subst(terms[t.name], terms, depth + 1)
        return t
    if isinstance(t, Tuple):
        return Tuple(tuple(_subst(x, terms, depth) for x in t.items))
    if isinstance(t, List):
        tail = _subst(t.tail, terms, depth)
        if not (isinstance(tail, (List, Var)) or tail is NIL):
            raise SpliceError(f"list tail bound to a non-list: {render_term(tail)}")
        return cons(_subst(t.head, terms, depth), tail)
    if isinstance(t, (Record, Choice)):
        members = [Member(m.label, m.guard, _subst(m.term, terms, depth)) for m in t.members]
        tail = _subst(t.tail, terms, depth)
        if isinstance(t, Record):
            if not (isinstance(tail, (Record, Var)) or tail is NIL):
                raise SpliceError(f"record tail bound to a non-record: {render_term(tail)}")
            return make_record(members, tail)
        if not (isinstance(tail, (Choice, Var)) or tail is NONE):
            raise SpliceError(f"choice tail bound to a non-choice: {render_term(tail)}")
        return make_choice(members, tail)
    if isinstance(t, Switch):
        return Switch(tuple((g, _subst(x, terms, depth)) for g, x in t.branches))
    return t


def apply_substitution(t: Term, s: Substitution) -> Term:
    out = _subst(t, s.terms)
    for sub in walk(out):
        if isinstance(sub, (Record, Choice)):
            labels = [m.label for m in sub.members if m.guard == TRUE]
            if len(labels) != len(set(labels)):
                raise SpliceError(f"splice produced a duplicate label in {render_term(sub)}")
    if all(f in s.flags for f in term_flags(out)):
        out = normalize(out, s.flags)
    return out


def check_ground_constraint(c: Constraint, s: Substitution) -> bool:
    lhs = [apply_substitution(t, s) for t in c.lhs]
    rhs = [apply_substitution(t, s) for t in c.rhs]
    for t in lhs + rhs:
        if not is_ground(t):
            raise GroundError(f"constraint is not ground after substitution: {c}")
    left = join_all(lhs)
    right = meet_all(rhs)
    if right is NO_MEET:
        return False
    if c.rel == EQ:
        return equivalent(left, right)
    return is_junior(left, right)


# solving

@dataclass
class Sat:
    substitution: Substitution
    underdetermined: list = field(default_factory=list)
    steps: int = 0

    ok = True


@dataclass
class Unsat:
    report: str
    constraint: Constraint | None
    bindings: dict = field(default_factory=dict)

    ok = False


@dataclass
class Undecided:
    report: str
    constraint: Constraint | None = None

    ok = False


class _Fail(Exception):
    def __init__(self, why):
        self.why = why


class _Budget(Exception):
    pass


def _depth(t):
    best = 0
    stack = [(t, 1)]
    while stack:
        cur, d = stack.pop()
        best = max(best, d)
        if isinstance(cur, Tuple):
            stack.extend((x, d + 1) for x in cur.items)
        elif isinstance(cur, List):
            stack.append((cur.head, d + 1))
            stack.append((cur.tail, d))
        elif isinstance(cur, (Record, Choice)):
            stack.extend((m.term, d + 1) for m in cur.members)
    return best


class _Solver:
    """Greatest-solution propagation for one flag assignment.

    Every variable starts at the top element; each constraint lhs <= rhs
    pushes the current value of rhs into the variables of lhs by meet.
    Pushes only derive necessary conditions, so a failure is a proof of
    unsatisfiability; success is confirmed by re-checking every constraint.
    """

    def __init__(self, pairs, budget):
        self.pairs = pairs  # list of (lhs term, rhs term, constraint)
        self.budget = budget
        self.steps = 0
        self.est = {}
        self.changed = False

    def tick(self):
        self.steps += 1
        if self.steps > self.budget:
            raise _Budget()

    def evaluate(self, t):
        return _subst(t, self.est)

    def narrow(self, var, bound):
        self.tick()
        ub = _upper(bound)
        if ub is None:
            return
        cur = self.est.get(var)
        new = ub if cur is None else meet(cur, ub)
        if new is NO_MEET:
            raise _Fail(f"{var} has no value below both {render_term(cur)} and {render_term(ub)}")
        if cur is None or not equivalent(cur, new):
            if _depth(new) > MAX_DEPTH:
                raise _Budget(f"the bound on {var} keeps growing past depth {MAX_DEPTH}")
            self.est[var] = new
            self.changed = True

    def push(self, left, right):
        """Derive conditions on the variables of left from left <= right."""
        self.tick()
        if right is NIL or isinstance(right, Var):
            return
        if isinstance(left, Var):
            self.narrow(left.name, right)
            return
        if left is NIL:
            raise _Fail(f"nil is not below {render_term(right)}")
        if isinstance(left, (Symbol, Number, Str)):
            if not (type(left) is type(right) and left == right):
                raise _Fail(f"{render_term(left)} is not below {render_term(right)}")
            return
        if isinstance(left, Tuple):
            if not isinstance(right, Tuple) or len(right.items) != len(left.items):
                raise _Fail(f"{render_term(left)} is not below {render_term(right)}")
            for x, y in zip(left.items, right.items):
                self.push(x, y)
            return
        if isinstance(left, List):
            if not isinstance(right, List):
                raise _Fail(f"{render_term(left)} is not below {render_term(right)}")
            lxs, ltail = list_items(left)
            rxs, rtail = list_items(right)
            for i, y in enumerate(rxs):
                if i < len(lxs):
                    self.push(lxs[i], y)
                elif isinstance(ltail, Var):
                    self.push(ltail, make_list(rxs[i:], rtail))
                    break
                else:
                    raise _Fail(f"{render_term(left)} is shorter than {render_term(right)}")
            return
        if isinstance(left, Record):
            if not isinstance(right, Record):
                raise _Fail(f"{render_term(left)} is not below {render_term(right)}")
            mine = {m.label: m.term for m in left.members}
            missing = []
            for m in right.members:
                if m.label in mine:
                    self.push(mine[m.label], m.term)
                elif isinstance(left.tail, Var):
                    missing.append(m)
                else:
                    raise _Fail(f"label {m.label!r} required by {render_term(right)} is absent")
            if missing:
                self.push(left.tail, make_record(missing))
            return
        if isinstance(left, Choice) or left is NONE:
            if not (isinstance(right, Choice) or right is NONE):
                raise _Fail(f"{render_term(left)} is not below {render_term(right)}")
            if left is NONE:
                return
            theirs = {m.label: m.term for m in right.members} if right is not NONE else {}
            open_right = isinstance(right, Choice) and isinstance(right.tail, Var)
            for m in left.members:
                if m.label in theirs:
                    self.push(m.term, theirs[m.label])
                elif not open_right:
                    raise _Fail(f"alternative {m.label!r} is not accepted by {render_term(right)}")
            if isinstance(left.tail, Var) and not open_right:
                # the tail may not repeat a label already present on the left
                rest = [m for m in right.members if m.label not in {x.label for x in left.members}] \
                    if right is not NONE else []
                self.push(left.tail, make_choice(rest))
            return
        raise _Fail(f"cannot compare {render_term(left)} with {render_term(right)}")

    def run(self):
        while True:
            self.changed = False
            for left, right, c in self.pairs:
                try:
                    self.push(left, self.evaluate(right))
                except _Fail as f:
                    f.constraint = c
                    raise
                except SpliceError as e:
                    f = _Fail(str(e))
                    f.constraint = c
                    raise f
            if not self.changed:
                return


def _upper(t):
    """A ground term above every instance of t, or None when none is representable."""
    if is_ground(t):
        return t
    if isinstance(t, Var):
        return NIL
    if isinstance(t, Tuple):
        items = [_upper(x) for x in t.items]
        if any(x is None for x in items):
            return None
        return Tuple(tuple(items))
    if isinstance(t, List):
        xs, tail = list_items(t)
        items = [_upper(x) for x in xs]
        if any(x is None for x in items):
            return None
        return make_list(items)
    if isinstance(t, Record):
        members = []
        for m in t.members:
            u = _upper(m.term)
            if u is None:
                return None
            members.append(Member(m.label, TRUE, u))
        return make_record(members)
    return None


def _pairs(cs):
    pairs = []
    for c in cs:
        for l in c.lhs:
            for r in c.rhs:
                pairs.append((l, r, c))
        if c.rel == EQ and len(c.lhs) == 1 and len(c.rhs) == 1:
            pairs.append((c.rhs[0], c.lhs[0], c))
    return pairs


def _tail_kinds(cs):
    kinds = {}
    for c in cs:
        for t in c.terms():
            for sub in walk(t):
                if isinstance(sub, Choice) and isinstance(sub.tail, Var):
                    kinds[sub.tail.name] = "choice"
    return kinds


def _ground_all(cs, est, kinds, pairs):
    names = []
    for c in cs:
        for t in c.terms():
            for v in term_vars(t):
                if v not in names:
                    names.append(v)
    top = [v for v in names if v not in est]
    provisional = dict(est)
    for v in top:
        provisional[v] = NONE if kinds.get(v) == "choice" else NIL
    refined = dict(provisional)
    for v in top:
        lows = []
        for left, right, _ in pairs:
            if isinstance(right, Var) and right.name == v:
                try:
                    g = _subst(left, provisional)
                except SpliceError:
                    continue
                if is_ground(g):
                    lows.append(g)
        if lows:
            refined[v] = join_all(lows)
    return names, top, provisional, refined


def _solve_assignment(cs, flags, seeds, budget):
    try:
        normal = [Constraint(tuple(normalize(_subst(t, seeds.terms), flags) for t in c.lhs), c.rel,
                             tuple(normalize(_subst(t, seeds.terms), flags) for t in c.rhs), c.origin)
                  for c in cs]
    except (NormalizeError, SpliceError) as e:
        return Unsat(f"flag assignment {flags} makes a term ill-formed: {e}", cs[0] if cs else None), 0
    pairs = _pairs(normal)
    solver = _Solver(pairs, budget)
    try:
        solver.run()
    except _Budget as b:
        why = b.args[0] if b.args else f"step budget of {budget} exhausted"
        return Undecided(why), solver.steps
    except _Fail as f:
        c = getattr(f, "constraint", None)
        return Unsat(f"constraint {_name(c)} fails: {f.why}", c, dict(solver.est)), solver.steps
    kinds = _tail_kinds(normal)
    names, top, provisional, refined = _ground_all(normal, solver.est, kinds, pairs)
    for candidate in (refined, provisional):
        s = Substitution(dict(seeds.terms), dict(flags))
        s.terms.update(candidate)
        bad = None
        for c in cs:
            try:
                if not check_ground_constraint(c, s):
                    bad = c
                    break
            except (GroundError, SpliceError, NormalizeError):
                bad = c
                break
        if bad is None:
            return Sat(s, top, solver.steps), solver.steps
    return Undecided(f"propagation succeeded but constraint {_name(bad)} does not re-check", bad), solver.steps


def _name(c):
    if c is None:
        return "?"
    return f"[{c.origin}] {c}" if c.origin else str(c)


def _groups(cs):
    """Split constraints into groups connected by shared variables or flags."""
    parent = list(range(len(cs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner = {}
    for i, c in enumerate(cs):
        keys = set()
        for t in c.terms():
            keys.update(term_vars(t))
            keys.update("?" + f for f in term_flags(t))
        for k in keys:
            if k in owner:
                parent[find(i)] = find(owner[k])
            else:
                owner[k] = i
    groups = {}
    for i in range(len(cs)):
        groups.setdefault(find(i), []).append(cs[i])
    return [groups[k] for k in sorted(groups)]


def _solve_group(cs, seeds, budget):
    flags = []
    for c in cs:
        for t in c.terms():
            for f in term_flags(t):
                if f not in flags and f not in seeds.flags:
                    flags.append(f)
    if len(flags) > MAX_FLAGS:
        return Undecided(f"{len(flags)} free flags exceed the search limit of {MAX_FLAGS}")
    first_unsat = None
    undecided = None
    spent = 0
    for values in itertools.product((False, True), repeat=len(flags)):
        env = dict(seeds.flags)
        env.update(zip(flags, values))
        res, steps = _solve_assignment(cs, env, seeds, max(1, budget - spent))
        spent += steps
        if isinstance(res, Sat):
            return res
        if isinstance(res, Undecided):
            undecided = undecided or res
            if spent >= budget:
                break
        elif first_unsat is None:
            first_unsat = res
    if undecided is not None:
        return undecided
    return first_unsat


def solve_constraints(cs, seeds: Substitution | None = None, budget: int = DEFAULT_BUDGET):
    """Find a substitution satisfying every constraint.

    Returns Sat, Unsat (with the first failing constraint) or Undecided.
    """
    seeds = seeds or Substitution()
    cs = list(cs)
    total = Substitution(dict(seeds.terms), dict(seeds.flags))
    under = []
    steps = 0
    for group in _groups(cs):
        res = _solve_group(group, seeds, budget)
        if not isinstance(res, Sat):
            return res
        total.terms.update(res.substitution.terms)
        total.flags.update(res.substitution.flags)
        under.extend(v for v in res.underdetermined if v not in under)
        steps += res.steps
    return Sat(total, under, steps)
