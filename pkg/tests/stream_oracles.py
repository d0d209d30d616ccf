"""Whole-stream reference semantics for the box protocols.

These work on complete input lists with no channels or scheduling, so the
simulator's results under back pressure can be compared against them.
"""
from astrakahn.messages import END, Data, Sigma


def transduce(stream, fn, ports=("_1",)):
    out = {p: [] for p in ports}
    for m in stream:
        if isinstance(m, Sigma):
            for p in ports:
                out[p].append(m)
        else:
            for p, t in fn(m.term).items():
                out[p].append(Data(t))
    return out


def induct(stream, gen, ports=("_1",)):
    """gen(term) -> list of {port: term} rounds."""
    out = {p: [] for p in ports}
    prev_data = False
    for m in stream:
        if isinstance(m, Sigma):
            for p in ports:
                out[p].append(m if m.k == 0 else Sigma(m.k + 1))
            prev_data = False
            continue
        if prev_data:
            for p in ports:
                out[p].append(Sigma(1))
        for rnd in gen(m.term):
            for p, t in rnd.items():
                out[p].append(Data(t))
        prev_data = True
    return out


def _b_mark_on_first(k):
    if k == 0:
        return [END]
    if k > 1:
        return [Sigma(k - 1)]
    return []


def reduce_dyadic(a, b, op, sides=("_2",)):
    """op(acc, x) -> (acc, {side port: term})."""
    first = []
    side = {p: [] for p in sides}
    b = list(b)
    prev_data = False
    for m in a:
        if isinstance(m, Sigma):
            for p in sides:
                side[p].append(m if m.k == 0 else Sigma(m.k + 1))
            prev_data = False
            continue
        if prev_data:
            for p in sides:
                side[p].append(Sigma(1))
        acc = m.term
        while b and isinstance(b[0], Data):
            acc, extra = op(acc, b.pop(0).term)
            for p, t in extra.items():
                side[p].append(Data(t))
        mark = b.pop(0)
        first.append(Data(acc))
        first.extend(_b_mark_on_first(mark.k))
        prev_data = True
    for m in b:
        first.extend(_b_mark_on_first(m.k))
    return first, side


def reduce_monadic(stream, op, sides=()):
    first = []
    side = {p: [] for p in sides}
    acc = None
    for m in stream:
        if isinstance(m, Data):
            if acc is None:
                acc = m.term
            else:
                acc, extra = op(acc, m.term)
                for p, t in extra.items():
                    side[p].append(Data(t))
            continue
        if acc is not None:
            first.append(Data(acc))
        acc = None
        first.extend(_b_mark_on_first(m.k))
        for p in sides:
            side[p].append(m)
    return first, side
