from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from astrakahn.errors import ElaborationError, ParseError, RuntimeFault
from astrakahn.messages import Data, Sigma, short
from astrakahn.passport import EQ, parse_passport, solve_constraints, Sat
from astrakahn.synch.ast import IntType, PatternTest, SigmaTest, VariantTest, ElseTest
from astrakahn.synch.infer import infer_passport
from astrakahn.synch.intexp import eval_int, parse_int_expr
from astrakahn.synch.machine import (
    candidates, commit_choice, drive, initial_state, instantiate_config, step_machine,
)
from astrakahn.synch.parser import parse_synch_file, parse_synchroniser
from astrakahn.synch.validate import validate
from astrakahn.terms import num, parse_term, render_term

FIX = Path(__file__).parent / "fixtures"


def load(name, **config):
    decl = parse_synchroniser((FIX / f"{name}.sync").read_text())
    return decl, instantiate_config(decl, config)


def D(x):
    return Data(parse_term(x) if isinstance(x, str) else num(x))


S = Sigma


def stream(*items):
    return [x if isinstance(x, Sigma) else D(x) for x in items]


def shorts(msgs):
    return [short(m) for m in msgs]


# parsing

def test_parse_zip2():
    decl, _ = load("zip2")
    assert decl.input_names == ["a", "b"] and decl.output_names == ["c"]
    assert [(s.var, s.sources) for s in decl.stores] == [("ma", ("a",)), ("mb", ("b",))]
    assert decl.labels == ["start", "s1", "s2"]


def test_parse_counter():
    decl, m = load("counter")
    assert decl.input_names == ["a", "c"] and decl.output_names == ["b", "error"]
    (sd,) = decl.states
    assert sd.vars == ("count",) and isinstance(sd.type, IntType)
    assert m.widths == {"count": 8}


def test_parse_listmerge_depths():
    decl, _ = load("listmerge")
    assert [c.depth.render() for c in decl.inputs] == ["d", "d"]
    assert [c.depth.render() for c in decl.outputs] == ["d+1"]
    assert decl.depth_vars() == ["d"]


def test_secondary_forms():
    decl = parse_synchroniser("""
    synch t [n] (a, b | c) {
      start: on a.@k & k > 1 send @k-1 => c;
             elseon a.sigma(n) goto start;
             elseon a.?v goto start;
             on b.?w(x, y || z) send (z, x=x+1) => c;
             on b.(q) send q => c;
             on b.else;
    }""")
    tests = [t.on.test for t in decl.transitions]
    assert tests[0] == SigmaTest(bind="k")
    assert tests[1] == SigmaTest(value=parse_int_expr("n"))
    assert tests[2] == VariantTest("v")
    assert tests[3] == PatternTest("w", ("x", "y"), "z")
    assert tests[4] == PatternTest(None, ("q",), None)
    assert tests[5] == ElseTest()
    assert [t.on.priority for t in decl.transitions][:3] == ["on", "elseon", "elseon"]


def test_separators_optional():
    a = parse_synchroniser("synch t (a | b) { start: on a send this => b goto start, on a.else }")
    b = parse_synchroniser("synch t (a | b) { start: on a send this => b goto start; on a.else; }")
    c = parse_synchroniser("synch t (a | b) { start: on a send this => b goto start on a.else }")
    assert a.transitions == b.transitions == c.transitions


def test_parse_several_synchronisers():
    decls = parse_synch_file((FIX / "zip2.sync").read_text() + (FIX / "rfp.sync").read_text())
    assert [d.name for d in decls] == ["zip2", "rfp"]


@pytest.mark.parametrize("src, word", [
    ("synch t (a | b) { s: on a; s: on a; }", "duplicate state label"),
    ("synch t (a | b) { s: on x; }", "unknown input channel"),
    ("synch t (a | b) { s: on a send this => q; }", "unknown output channel"),
    ("synch t (a | b) { s: elseon a; on a; }", "elseon"),
    ("synch t (a | b) { s: on a goto nowhere; }", "undeclared state"),
    ("synch t (a, a | b) { s: on a; }", "duplicate input channel"),
    ("synch t (a | b) { s: on a send this b; }", "expected"),
])
def test_parse_errors(src, word):
    with pytest.raises(ParseError) as e:
        parse_synchroniser(src)
    assert word in str(e.value)


def test_parse_error_location():
    with pytest.raises(ParseError) as e:
        parse_synchroniser("synch t (a | b)\n{\n s: on zz;\n}")
    assert e.value.line == 3


def test_expression_precedence():
    env = {"bits": 8, "count": 3, "k": 2, "d": 2}
    assert eval_int(parse_int_expr("2^bits-1"), env) == 255
    assert eval_int(parse_int_expr("-2^2"), env) == -4
    assert eval_int(parse_int_expr("2^3^2"), env) == 512
    assert eval_int(parse_int_expr("count < 2^bits-1 & k=d"), env) == 1
    assert eval_int(parse_int_expr("7 / -2"), env) == -3
    assert eval_int(parse_int_expr("-7 % 2"), env) == -1
    assert eval_int(parse_int_expr("1 << 4 | 1"), env) == 17
    with pytest.raises(RuntimeFault):
        eval_int(parse_int_expr("1 / 0"), env)


# validation

def test_validate_fixtures_clean():
    for name in ("zip2", "counter", "listmerge", "rfp"):
        decl, _ = load(name)
        assert validate(decl) == []
    decl = parse_synchroniser((FIX / "cnt1.sync").read_text())
    assert validate(decl) == []


def test_validate_alias_never_assigned():
    decl = parse_synchroniser("synch t (a | b) { s: on a & q > 1 send this => b; }")
    (d,) = validate(decl)
    assert d.level == "warning" and "q" in d.message


def test_validate_store_source_unknown():
    decl = parse_synchroniser("synch t (a | b) { store m: zz; s: on a do m := this; }")
    assert any(d.level == "error" and "zz" in d.message for d in validate(decl))


def test_validate_cancelled_channel():
    src = "synch t [n] (a | b, c:n) { s: on a send this => c; }"
    decl = parse_synchroniser(src)
    errs = [d for d in validate(decl, {"n": -1}) if d.level == "error"]
    assert errs and "cancelled" in errs[0].message
    assert not [d for d in validate(decl, {"n": 0}) if d.level == "error"]
    guarded = parse_synchroniser("synch t [n] (a | b, c:n) { s: on a & n >= 0 send this => c; }")
    assert not [d for d in validate(guarded, {"n": -1}) if d.level == "error"]


def test_validate_enum_mismatch():
    decl = parse_synchroniser("""synch t (a | b) {
      state enum(red, green) light; state enum(on_, off_) sw;
      s: on a & light == off_ send this => b;
    }""")
    assert any(d.level == "error" and "enumeration" in d.message for d in validate(decl))


def test_validate_this_without_on():
    decl = parse_synchroniser("synch t (a | b) { s: send this => b goto s; }")
    assert any("this" in d.message for d in validate(decl))


# configuration

def test_cnt1_bits8_equals_counter():
    _, m8 = load("cnt1", bits=8)
    _, mc = load("counter")
    assert m8.widths == mc.widths == {"count": 8}
    msgs = stream(*range(300), S(0))
    out8, _ = drive(m8, {"a": msgs})
    outc, _ = drive(mc, {"a": msgs})
    assert shorts(out8["error"]) == shorts(outc["error"])
    assert shorts(out8["b"]) == shorts(outc["b"])


def test_cnt1_bits2_threshold():
    decl, m = load("cnt1", bits=2)
    guard = [t for t in decl.transitions if t.on is not None][1].on.guard
    assert eval_int(guard.right, m.consts()) == 3
    out, _ = drive(m, {"a": stream(10, 11, 12, 13, 14, 15, S(0))})
    assert shorts(out["b"]) == ["(1 10)", "(2 11)", "(3 12)", "(0 13)", "(1 14)", "(2 15)", "s0"]
    assert shorts(out["error"]) == ["{errcode:-1}", "s0"]


def test_listmerge_depth_instantiation():
    _, m = load("listmerge")
    assert m.out_depths == {"c": ("d", 1)}
    decl = parse_synchroniser("synch lm [d] (a:d, b:d | c:d+1) { start: on a; }")
    m1 = instantiate_config(decl, {"d": 1})
    assert m1.out_depths["c"] == (None, 2)


def test_instantiate_errors():
    decl, _ = load("cnt1", bits=1)
    with pytest.raises(ElaborationError):
        instantiate_config(decl, {})
    with pytest.raises(ElaborationError):
        instantiate_config(decl, {"bits": 0})
    with pytest.raises(ElaborationError):
        instantiate_config(decl, {"bits": 2, "extra": 1})
    neg = parse_synchroniser("synch t [n] (a | b:n) { s: on a; }")
    with pytest.raises(ElaborationError):
        instantiate_config(neg, {"n": -2})
    m = instantiate_config(neg, {"n": -1})
    assert m.outputs == [] and m.cancelled == {"b"}


# single steps

def test_zip2_steps():
    _, m = load("zip2")
    st0 = initial_state(m)
    r = step_machine(m, st0, "a", D(1))
    assert r.sends == [] and r.state.label == "s1" and r.state.stores["ma"] == num(1)
    assert st0.label == "start" and st0.stores == {}
    r2 = step_machine(m, r.state, "b", D(10))
    assert r2.state.label == "start"
    assert [(c, short(x)) for c, x in r2.sends] == [("c", "(1 10)")]
    assert r2.state.stores == {}


def test_counter_overflow_step():
    _, m = load("counter")
    st0 = initial_state(m)
    st0.label = "work"
    st0.vars["count"] = 255
    r = step_machine(m, st0, "a", D("{v:7}"))
    assert [(c, short(x)) for c, x in r.sends] == [("error", "{errcode:-1}"), ("b", "{v:7, cnt:0}")]
    assert r.state.vars["count"] == 0 and r.state.label == "start"


def test_listmerge_mark_step():
    _, m = load("listmerge")
    m = m.bind_depths({"d": 1})
    r = step_machine(m, initial_state(m), "a", S(1))
    assert r.sends == [("c", S(1))] and r.state.label == "alt"
    r = step_machine(m, r.state, "b", S(1))
    assert r.sends == [("c", S(2))] and r.state.label == "start"


def test_step_is_deterministic():
    _, m = load("zip2")
    st0 = initial_state(m)
    a = step_machine(m, st0, "a", D(1))
    b = step_machine(m, st0, "a", D(1))
    assert a.sends == b.sends and a.state == b.state


def test_implicit_else_discards():
    decl = parse_synchroniser("synch t (a | b) { s: on a.@k send this => b; }")
    m = instantiate_config(decl)
    r = step_machine(m, initial_state(m), "a", D(5))
    assert r.rule == "implicit-else" and r.sends == []


def test_blocked_by_state():
    _, m = load("zip2")
    st0 = initial_state(m)
    r = step_machine(m, st0, "a", D(1))
    order, _ = candidates(m, r.state, {"a": D(2), "b": D(3)})
    assert order == ["b"]


def test_pattern_failure_faults():
    _, m = load("counter")
    st0 = initial_state(m)
    st0.label = "work"
    with pytest.raises(RuntimeFault):
        step_machine(m, st0, "c", D("{x:1}"))


def test_pattern_sets_count():
    _, m = load("counter")
    st0 = initial_state(m)
    st0.label = "work"
    assert step_machine(m, st0, "c", D("{cnt:200}")).state.vars["count"] == 200
    assert step_machine(m, st0, "c", D("[7, 8]")).state.vars["count"] == 7
    assert step_machine(m, st0, "c", D(9)).state.vars["count"] == 9


# golden traces

def test_zip2_golden():
    _, m = load("zip2")
    out, st0 = drive(m, {"a": stream(1, 2, S(0)), "b": stream(10, 20, S(0))})
    assert shorts(out["c"]) == ["(1 10)", "(20 2)", "s0"]
    assert st0.done


def test_counter_golden_exact():
    _, m = load("counter")
    out, _ = drive(m, {"a": [D("{v:%d}" % i) for i in range(257)] + [S(0)]})
    b = shorts(out["b"])
    assert b[0] == "{v:0, cnt:1}"
    assert b[253:257] == ["{v:253, cnt:254}", "{v:254, cnt:255}", "{v:255, cnt:0}", "{v:256, cnt:1}"]
    assert b[-1] == "s0"
    assert shorts(out["error"]) == ["{errcode:-1}", "s0"]


def test_listmerge_golden():
    _, m = load("listmerge")
    m = m.bind_depths({"d": 1})
    a = stream(1, 2, S(1), 3, S(1), S(0))
    b = stream(10, S(1), 20, 30, S(1), S(0))
    out, _ = drive(m, {"a": a, "b": b})
    assert shorts(out["c"]) == ["1", "2", "s1", "10", "s2", "3", "s1", "20", "30", "s2", "s0"]


def test_rfp_golden_depth1():
    _, m = load("rfp")
    m = m.bind_depths({"k": 1})
    out, st0 = drive(m, {"u": stream(1, 2, S(1), 3, S(1), S(0))})
    assert shorts(out["v"]) == ["1", "2", "s0"]
    assert shorts(out["w"]) == ["3", "s1", "s0"]


def test_rfp_golden_depth2():
    _, m = load("rfp")
    m = m.bind_depths({"k": 2})
    out, _ = drive(m, {"u": stream(1, 2, S(2), 3, S(1), 4, S(2), S(0))})
    assert shorts(out["v"]) == ["1", "2", "s1", "s0"]
    assert shorts(out["w"]) == ["3", "s1", "4", "s2", "s0"]


def test_end_default_broadcast():
    _, m = load("zip2")
    st0 = initial_state(m)
    r = step_machine(m, st0, "a", D(1))
    r = step_machine(m, r.state, "a", S(0))
    assert r.rule == "end-default" and r.sends == [("c", S(0))] and r.state.done


def test_end_default_skips_ended_outputs():
    decl = parse_synchroniser("synch t (a | b, c) { s: on a.@k & k == 1 send sigma(0) => b; }")
    m = instantiate_config(decl)
    r = step_machine(m, initial_state(m), "a", S(1))
    r = step_machine(m, r.state, "a", S(0))
    assert r.sends == [("c", S(0))]


def test_all_inputs_closed_ends_machine():
    decl = parse_synchroniser("synch t (a, b | c, d, e) { s: on a.@k send this => c; on b.@k send this => d; }")
    m = instantiate_config(decl)
    r = step_machine(m, initial_state(m), "a", S(0))
    assert r.sends == [("c", S(0))] and r.state.closed == {"a"} and not r.state.done
    r = step_machine(m, r.state, "b", S(0))
    assert r.sends == [("d", S(0)), ("e", S(0))] and r.state.done


def test_send_after_end_faults():
    decl = parse_synchroniser("synch t (a, b | c) { s: on a.@k send this => c; on b.@k send this => c; }")
    m = instantiate_config(decl)
    r = step_machine(m, initial_state(m), "a", S(0))
    with pytest.raises(RuntimeFault, match="after the end"):
        step_machine(m, r.state, "b", S(0))


def test_store_reset_fault():
    decl = parse_synchroniser("""synch t (a, b | c) { store m: a;
      start: on a do m := this goto s1;
             on b send (m, this) => c;
      s1:    on b send (m, this) => c goto start;
    }""")
    m = instantiate_config(decl)
    st0 = initial_state(m)
    r = step_machine(m, st0, "a", D(1))
    r = step_machine(m, r.state, "b", D(2))
    assert short(r.sends[0][1]) == "(1 2)"
    with pytest.raises(RuntimeFault, match="read before assignment"):
        step_machine(m, r.state, "b", D(3))


# fairness

def test_channel_fairness():
    decl = parse_synchroniser("synch f (a, b | c) { start: on a send this => c; on b send this => c; }")
    m = instantiate_config(decl)
    st0 = initial_state(m)
    counts = {"a": 0, "b": 0}
    for _ in range(1000):
        order, key = candidates(m, st0, {"a": D(1), "b": D(2)})
        commit_choice(st0, key)
        counts[order[0]] += 1
        st0 = step_machine(m, st0, order[0], D(1)).state
        assert abs(counts["a"] - counts["b"]) <= 1
    assert counts == {"a": 500, "b": 500}


def test_clause_fairness_same_channel():
    decl = parse_synchroniser("synch f (a | x, y) { s: on a send this => x; on a send this => y; }")
    m = instantiate_config(decl)
    out, _ = drive(m, {"a": stream(*range(1000), S(0))})
    assert abs(len(out["x"]) - len(out["y"])) <= 1


def test_elseon_priority():
    decl = parse_synchroniser("""synch f (a, b | c) {
      s: on a.@k send this => c; elseon b send this => c; elseon a send this => c;
    }""")
    m = instantiate_config(decl)
    order, _ = candidates(m, initial_state(m), {"a": D(1), "b": D(2)})
    assert order[0] == "b"
    order, _ = candidates(m, initial_state(m), {"a": S(1), "b": D(2)})
    assert order[0] == "a"


# state variable width

@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.lists(st.integers(-50, 50), min_size=1, max_size=20))
def test_int_state_wraps(width, values):
    decl = parse_synchroniser("synch w [n] (a | b) { state int(n) x; s: on a.(v) do x := x + v send x => b; }")
    m = instantiate_config(decl, {"n": width})
    out, _ = drive(m, {"a": stream(*values, S(0))})
    total = 0
    for v, msg in zip(values, out["b"]):
        total += v
        x = msg.term.members[0].term.as_int()
        assert 0 <= x < 2 ** width
        assert x == total % 2 ** width


def test_enum_state_and_aliases():
    decl = parse_synchroniser("""synch e (a | b) { state enum(red, amber, green) light;
      s: on a & light < green do light := light + 1, nxt = light send (nxt) => b;
         on a.else do light := red send nil => b;
    }""")
    m = instantiate_config(decl)
    out, _ = drive(m, {"a": stream(1, 2, 3, 4, S(0))})
    assert shorts(out["b"]) == ["{nxt:1}", "{nxt:2}", "nil", "{nxt:1}", "s0"]


def test_variant_send_wraps_choice():
    decl = parse_synchroniser("synch v (a | b) { s: on a.?p send ?q this => b; }")
    m = instantiate_config(decl)
    out, _ = drive(m, {"a": [D("(: p:1 :)"), D("(: r:2 :)"), S(0)]})
    assert shorts(out["b"]) == ["(: q:(: p:1 :) :)", "s0"]


# passports

def test_infer_zip2_fresh_vars():
    decl, _ = load("zip2")
    pp = infer_passport(decl)
    assert [render_term(t) for t in pp.inputs] == ["$a_data", "$b_data"]
    assert parse_passport(pp.render()) == pp
    assert isinstance(solve_constraints(pp.constraints), Sat)


def test_infer_variant_choice():
    decl = parse_synchroniser("synch t (a | b) { s: on a.?v send this => b; on a.?w send this => b; }")
    pp = infer_passport(decl)
    assert render_term(pp.inputs[0]) == "(: v:$a_v, w:$a_w || $a_rest :)"


def test_infer_pattern_switch():
    decl = parse_synchroniser("synch t (a | b) { s: on a.?v(x, y || z) send (z, x) => b; }")
    pp = infer_passport(decl)
    (c, *_) = pp.constraints
    assert c.rel == EQ and render_term(c.lhs[0]) == "$a_v"
    assert render_term(c.rhs[0]) == "<a_p1:{x:int, y:int || $z}, (not a_p1):[int, int || $z]>"


def test_infer_counter_outputs():
    decl, _ = load("counter")
    pp = infer_passport(decl)
    assert render_term(pp.outputs[1]) == "{errcode:int}"
    res = solve_constraints(pp.constraints)
    assert isinstance(res, Sat)
