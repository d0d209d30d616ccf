import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from astrakahn.errors import GroundError, NormalizeError
from astrakahn.lattice import (
    NO_MEET, Seniority, eval_guard, join, meet, normalize, seniority_cmp,
)
from astrakahn.terms import NIL, NONE, And, Flag, Not, Or, TRUE, parse_guard, parse_term as p
from oracles import equiv, leq, nested_universe, oracle_glb, oracle_lub, related_pair, seeded, universe_closed
from strategies import ground_terms


def test_guard_evaluation_examples():
    assert eval_guard(TRUE, {}) is True
    assert eval_guard(Not(Flag("p")), {"p": False}) is True
    g = And((Flag("p"), Or((Flag("q"), Not(Flag("q"))))))
    assert eval_guard(g, {"p": True, "q": False}) is True


def test_guard_matches_truth_table():
    g = parse_guard("(or (and p (not q)) (and q r))")
    for p_, q_, r_ in itertools.product([False, True], repeat=3):
        expected = (p_ and not q_) or (q_ and r_)
        assert eval_guard(g, {"p": p_, "q": q_, "r": r_}) == expected


def test_unbound_flag():
    with pytest.raises(NormalizeError):
        eval_guard(Flag("z"), {})


def test_normalize_switch():
    assert normalize(p("<a:[1,2], b:[3]>"), {"a": True, "b": False}) == p("[1,2]")


def test_normalize_guard_filter():
    assert normalize(p("{x(p):1, x(not p):2}"), {"p": True}) == p("{x:1}")
    assert normalize(p("{x(p):1, x(not p):2}"), {"p": False}) == p("{x:2}")


def test_normalize_drops_everything():
    assert normalize(p("{x(false):1}"), {}) is NIL
    assert normalize(p("(: x(false):1 :)"), {}) is NONE
    assert normalize(NIL, {"p": True}) is NIL


def test_normalize_keeps_variables():
    assert normalize(p("[<p:$a, (not p):nil> || $t]"), {"p": True}) == p("[$a || $t]")
    assert normalize(p("[<p:$a, (not p):nil>]"), {"p": False}) is NIL


@pytest.mark.parametrize("src,env", [
    ("<p:1, q:2>", {"p": True, "q": True}),
    ("<p:1, q:2>", {"p": False, "q": False}),
    ("{x(p):1, x(q):2}", {"p": True, "q": True}),
])
def test_normalize_rejects_ill_formed(src, env):
    with pytest.raises(NormalizeError):
        normalize(p(src), env)


def _env_for(t):
    from astrakahn.terms import term_flags
    return {f: (hash(f) % 2 == 0) for f in term_flags(t)}


@settings(max_examples=300, deadline=None)
@given(ground_terms, st.dictionaries(st.sampled_from(["p", "q", "r"]), st.booleans(), min_size=3))
def test_normalize_idempotent(t, env):
    once = normalize(t, env)
    assert normalize(once, env) == once


def test_seniority_examples():
    assert seniority_cmp(p("{a:int, b:int}"), p("{a:int}")) is Seniority.JUNIOR
    assert seniority_cmp(p("(: a:int :)"), p("(: a:int, b:str :)")) is Seniority.JUNIOR
    assert seniority_cmp(p("5"), p('"5"')) is Seniority.INCOMMENSURABLE
    assert seniority_cmp(p("(x y)"), NIL) is Seniority.JUNIOR
    assert seniority_cmp(NIL, NIL) is Seniority.EQUAL


def test_seniority_lists():
    assert seniority_cmp(p("[int, str, int]"), p("[int, str]")) is Seniority.JUNIOR
    assert seniority_cmp(p("[int, str]"), p("[int, int]")) is Seniority.INCOMMENSURABLE
    assert seniority_cmp(p("[{a:1,b:2}]"), p("[{a:1}]")) is Seniority.JUNIOR


def test_seniority_atoms_and_kinds():
    assert seniority_cmp(p("5"), p("5.0")) is Seniority.EQUAL
    assert seniority_cmp(p("abc"), p('"abc"')) is Seniority.INCOMMENSURABLE
    assert seniority_cmp(p("(a b)"), p("[a, b]")) is Seniority.INCOMMENSURABLE
    assert seniority_cmp(p("(a b)"), p("(a b c)")) is Seniority.INCOMMENSURABLE
    assert seniority_cmp(p("none"), p("(: a:1 :)")) is Seniority.JUNIOR
    assert seniority_cmp(p("none"), p("{a:1}")) is Seniority.INCOMMENSURABLE


def test_member_order_irrelevant():
    a = p("{l1:int, l2:(x y) || {l3:str}}")
    b = p("{l2:(x y), l3:str, l1:int}")
    assert seniority_cmp(a, b) is Seniority.EQUAL
    assert seniority_cmp(p("(: a:1, b:2 :)"), p("(: b:2, a:1 :)")) is Seniority.EQUAL


def test_order_rejects_open_terms():
    for bad in ["$x", "{a:$x}", "<p:1, (not p):2>", "{a(p):1}"]:
        with pytest.raises(GroundError):
            seniority_cmp(p(bad), NIL)
        with pytest.raises(GroundError):
            join(p(bad), NIL)
        with pytest.raises(GroundError):
            meet(NIL, p(bad))


def test_join_examples():
    assert join(p("{a:k, b:m}"), p("{a:k, c:n}")) == p("{a:k}")
    assert join(p("(: a:x :)"), p("(: b:y :)")) == p("(: a:x, b:y :)")
    assert join(p("{x:1}"), NIL) is NIL
    assert join(p("[int, str]"), p("[int]")) == p("[int]")
    assert join(p("{a:1}"), p("{b:1}")) is NIL
    assert join(p("[a]"), p("[b]")) is NIL
    assert join(p("(a b)"), p("(a c)")) == p("(a nil)")
    assert join(p("(a b)"), p("(a b c)")) is NIL
    assert join(p("3"), p("3")) == p("3")
    assert join(p("3"), p("4")) is NIL


def test_meet_examples():
    assert meet(p("{a:x}"), p("{b:y}")) == p("{a:x, b:y}")
    assert meet(p("3"), p("4")) is NO_MEET
    assert meet(p("[1,2]"), NIL) == p("[1,2]")
    assert meet(NIL, NIL) is NIL
    assert meet(p("[1]"), p("[1, 2]")) == p("[1, 2]")
    assert meet(p("[1, 3]"), p("[1, 2]")) is NO_MEET
    assert meet(p("{a:1}"), p("{a:2}")) is NO_MEET
    assert meet(p("(: a:x, b:y :)"), p("(: a:x, c:z :)")) == p("(: a:x :)")
    assert meet(p("(: a:x :)"), p("(: b:y :)")) is NONE
    assert meet(p("(1 2)"), p("(1 2 3)")) is NO_MEET
    assert meet(p("{a:1}"), p("[1]")) is NO_MEET


@settings(max_examples=500, deadline=None)
@given(ground_terms, ground_terms)
def test_cmp_matches_reference(a, b):
    res = seniority_cmp(a, b)
    le, ge = leq(a, b), leq(b, a)
    expected = {(True, True): Seniority.EQUAL, (True, False): Seniority.JUNIOR,
                (False, True): Seniority.SENIOR, (False, False): Seniority.INCOMMENSURABLE}[(le, ge)]
    assert res is expected
    swapped = {Seniority.JUNIOR: Seniority.SENIOR, Seniority.SENIOR: Seniority.JUNIOR}
    assert seniority_cmp(b, a) is swapped.get(res, res)


@settings(max_examples=500, deadline=None)
@given(ground_terms, ground_terms)
def test_join_is_upper_bound_and_commutes(a, b):
    j = join(a, b)
    assert leq(a, j) and leq(b, j)
    assert equiv(j, join(b, a))
    assert equiv(join(a, a), a)


@settings(max_examples=500, deadline=None)
@given(ground_terms, ground_terms)
def test_meet_is_lower_bound_and_commutes(a, b):
    m = meet(a, b)
    other = meet(b, a)
    if m is NO_MEET:
        assert other is NO_MEET
        return
    assert leq(m, a) and leq(m, b)
    assert equiv(m, other)
    assert equiv(meet(a, a), a)


@settings(max_examples=300, deadline=None)
@given(ground_terms, ground_terms, ground_terms)
def test_join_associative(a, b, c):
    assert equiv(join(join(a, b), c), join(a, join(b, c)))


def test_related_pairs_against_bounds():
    rng = seeded(7)
    from oracles import strengthen, weaken
    for _ in range(2000):
        a, b = related_pair(rng)
        j = join(a, b)
        for _ in range(3):
            u = weaken(a, rng)
            if leq(b, u):
                assert leq(j, u)
        m = meet(a, b)
        for _ in range(3):
            low = strengthen(a, rng)
            if leq(low, b):
                assert m is not NO_MEET and leq(low, m)


def _closed_universe():
    def m(x, y):
        r = meet(x, y)
        return None if r is NO_MEET else r
    return universe_closed(nested_universe(), [join, m])


def test_brute_force_bounds_agree():
    u = _closed_universe()
    assert len(u) <= 200
    for a, b in itertools.product(u, repeat=2):
        lub = oracle_lub(u, a, b)
        assert lub is not None and equiv(lub, join(a, b))
        glb = oracle_glb(u, a, b)
        m = meet(a, b)
        if glb == "empty":
            assert m is NO_MEET
        else:
            assert glb is not None and m is not NO_MEET and equiv(glb, m)
