"""Guard evaluation, normalization and the seniority order on ground terms."""
from __future__ import annotations

import enum

from .errors import GroundError, NormalizeError
from .terms import (
    NIL, NONE, TRUE, And, BoolConst, Choice, Flag, List, Member, Not, Number, Or,
    Record, Str, Switch, Symbol, Term, Tuple, cons, is_ground, list_items,
    make_choice, make_list, make_record,
)


class Seniority(enum.Enum):
    EQUAL = "equal"
    JUNIOR = "junior"
    SENIOR = "senior"
    INCOMMENSURABLE = "incommensurable"


class _NoMeet:
    __slots__ = ()

    def __repr__(self):
        return "NO_MEET"

    def __bool__(self):
        return False


NO_MEET = _NoMeet()


def eval_guard(g, env) -> bool:
    if isinstance(g, BoolConst):
        return g.value
    if isinstance(g, Flag):
        if g.name not in env:
            raise NormalizeError(f"unbound flag {g.name!r}")
        return bool(env[g.name])
    if isinstance(g, Not):
        return not eval_guard(g.arg, env)
    if isinstance(g, And):
        return all(eval_guard(a, env) for a in g.args)
    if isinstance(g, Or):
        return any(eval_guard(a, env) for a in g.args)
    raise TypeError(g)


def normalize(t: Term, env=None) -> Term:
    """Resolve switches and guards under a flag environment."""
    env = env or {}
    if isinstance(t, Switch):
        live = [x for g, x in t.branches if eval_guard(g, env)]
        if len(live) != 1:
            raise NormalizeError(f"switch has {len(live)} true guards, expected exactly one")
        return normalize(live[0], env)
    if isinstance(t, (Record, Choice)):
        kept = []
        seen = set()
        for m in t.members:
            if m.guard != TRUE and not eval_guard(m.guard, env):
                continue
            if m.label in seen:
                raise NormalizeError(f"label {m.label!r} has more than one true guard")
            seen.add(m.label)
            kept.append(Member(m.label, TRUE, normalize(m.term, env)))
        tail = normalize(t.tail, env)
        if isinstance(t, Record):
            out = make_record(kept, tail)
        else:
            out = make_choice(kept, tail)
        if isinstance(out, (Record, Choice)):
            labels = [m.label for m in out.members]
            if len(set(labels)) != len(labels):
                raise NormalizeError("duplicate label after fusing tails")
        return out
    if isinstance(t, List):
        return cons(normalize(t.head, env), normalize(t.tail, env))
    if isinstance(t, Tuple):
        return Tuple(tuple(normalize(x, env) for x in t.items))
    return t


def _require_ground(*terms):
    for t in terms:
        if not is_ground(t):
            raise GroundError(f"order operations need ground terms: {t}")


def _labels(t):
    if t is NONE:
        return {}
    return {m.label: m.term for m in t.members}


def _is_choice(t):
    return isinstance(t, Choice) or t is NONE


def _cmp(a: Term, b: Term):
    """Return (a below-or-equal b, b below-or-equal a) in one structural pass."""
    if a is NIL or b is NIL:
        return (b is NIL, a is NIL)
    if isinstance(a, (Symbol, Str, Number)):
        same = type(a) is type(b) and a == b
        return (same, same)
    if isinstance(a, List):
        if not isinstance(b, List):
            return (False, False)
        xs, _ = list_items(a)
        ys, _ = list_items(b)
        le = len(xs) >= len(ys)
        ge = len(ys) >= len(xs)
        for x, y in zip(xs, ys):
            l, g = _cmp(x, y)
            le = le and l
            ge = ge and g
            if not (le or ge):
                break
        return (le, ge)
    if isinstance(a, Tuple):
        if not isinstance(b, Tuple) or len(a.items) != len(b.items):
            return (False, False)
        le = ge = True
        for x, y in zip(a.items, b.items):
            l, g = _cmp(x, y)
            le = le and l
            ge = ge and g
            if not (le or ge):
                break
        return (le, ge)
    if isinstance(a, Record):
        if not isinstance(b, Record):
            return (False, False)
        la, lb = _labels(a), _labels(b)
        # a bigger record is junior
        le = set(lb) <= set(la)
        ge = set(la) <= set(lb)
        for k in la.keys() & lb.keys():
            if not (le or ge):
                break
            l, g = _cmp(la[k], lb[k])
            le = le and l
            ge = ge and g
        return (le, ge)
    if _is_choice(a):
        if not _is_choice(b):
            return (False, False)
        la, lb = _labels(a), _labels(b)
        # a bigger choice is senior
        le = set(la) <= set(lb)
        ge = set(lb) <= set(la)
        for k in la.keys() & lb.keys():
            if not (le or ge):
                break
            l, g = _cmp(la[k], lb[k])
            le = le and l
            ge = ge and g
        return (le, ge)
    raise GroundError(f"not a ground term: {a!r}")


def seniority_cmp(t1: Term, t2: Term) -> Seniority:
    _require_ground(t1, t2)
    le, ge = _cmp(t1, t2)
    if le and ge:
        return Seniority.EQUAL
    if le:
        return Seniority.JUNIOR
    if ge:
        return Seniority.SENIOR
    return Seniority.INCOMMENSURABLE


def is_junior(t1: Term, t2: Term) -> bool:
    """t1 is junior to or equal to t2."""
    _require_ground(t1, t2)
    return _cmp(t1, t2)[0]


def equivalent(t1: Term, t2: Term) -> bool:
    _require_ground(t1, t2)
    return _cmp(t1, t2) == (True, True)


def _join(a: Term, b: Term) -> Term:
    if a is NIL or b is NIL:
        return NIL
    if isinstance(a, (Symbol, Str, Number)):
        return a if type(a) is type(b) and a == b else NIL
    if isinstance(a, List) and isinstance(b, List):
        xs, _ = list_items(a)
        ys, _ = list_items(b)
        return make_list([_join(x, y) for x, y in zip(xs, ys)])
    if isinstance(a, Tuple) and isinstance(b, Tuple):
        if len(a.items) != len(b.items):
            return NIL
        return Tuple(tuple(_join(x, y) for x, y in zip(a.items, b.items)))
    if isinstance(a, Record) and isinstance(b, Record):
        lb = _labels(b)
        common = [Member(m.label, TRUE, _join(m.term, lb[m.label])) for m in a.members if m.label in lb]
        return make_record(common)
    if _is_choice(a) and _is_choice(b):
        la, lb = _labels(a), _labels(b)
        members = []
        for k, x in la.items():
            members.append(Member(k, TRUE, _join(x, lb[k]) if k in lb else x))
        for k, y in lb.items():
            if k not in la:
                members.append(Member(k, TRUE, y))
        return make_choice(members)
    return NIL


def join(t1: Term, t2: Term) -> Term:
    """Least upper bound; always exists because nil is the top element."""
    _require_ground(t1, t2)
    return _join(t1, t2)


def _meet(a: Term, b: Term):
    if a is NIL:
        return b
    if b is NIL:
        return a
    if isinstance(a, (Symbol, Str, Number)):
        return a if type(a) is type(b) and a == b else NO_MEET
    if isinstance(a, List) and isinstance(b, List):
        xs, _ = list_items(a)
        ys, _ = list_items(b)
        out = []
        for x, y in zip(xs, ys):
            m = _meet(x, y)
            if m is NO_MEET:
                return NO_MEET
            out.append(m)
        longer = xs if len(xs) > len(ys) else ys
        out.extend(longer[len(out):])
        return make_list(out)
    if isinstance(a, Tuple) and isinstance(b, Tuple):
        if len(a.items) != len(b.items):
            return NO_MEET
        out = []
        for x, y in zip(a.items, b.items):
            m = _meet(x, y)
            if m is NO_MEET:
                return NO_MEET
            out.append(m)
        return Tuple(tuple(out))
    if isinstance(a, Record) and isinstance(b, Record):
        la, lb = _labels(a), _labels(b)
        members = []
        for k, x in la.items():
            if k in lb:
                m = _meet(x, lb[k])
                if m is NO_MEET:
                    return NO_MEET
                members.append(Member(k, TRUE, m))
            else:
                members.append(Member(k, TRUE, x))
        for k, y in lb.items():
            if k not in la:
                members.append(Member(k, TRUE, y))
        return make_record(members)
    if _is_choice(a) and _is_choice(b):
        # greatest lower bound: common labels whose member meets exist
        la, lb = _labels(a), _labels(b)
        members = []
        for k, x in la.items():
            if k in lb:
                m = _meet(x, lb[k])
                if m is not NO_MEET:
                    members.append(Member(k, TRUE, m))
        return make_choice(members)
    return NO_MEET


def meet(t1: Term, t2: Term):
    """Greatest lower bound, or NO_MEET when the terms have no common lower bound."""
    _require_ground(t1, t2)
    return _meet(t1, t2)


def join_all(terms) -> Term:
    terms = list(terms)
    acc = terms[0]
    for t in terms[1:]:
        acc = join(acc, t)
    return acc


def meet_all(terms):
    terms = list(terms)
    acc = terms[0]
    for t in terms[1:]:
        acc = meet(acc, t)
        if acc is NO_MEET:
            return NO_MEET
    return acc
