import pytest
from hypothesis import given, settings, strategies as st

from astrakahn.boxes import (
    BoxError, BuiltinBox, ExternalBox, invoke_external, load_manifest, make_box, parse_category,
    parse_manifest,
)
from astrakahn.errors import ContractViolation, RuntimeFault
from astrakahn.runtime import FAULT, TERMINATED
from astrakahn.terms import num, parse_term

from netutil import FIX, msgs, network, registry, run

EXT = load_manifest(FIX / "ext.boxes")


@pytest.mark.parametrize("token, want", [
    ("1T", (1, "T")), ("3I", (3, "I")), ("2DO", (2, "DO")), ("1du", (1, "DU")), ("12MS", (12, "MS")),
])
def test_parse_category(token, want):
    assert parse_category(token) == want


@pytest.mark.parametrize("token", ["T", "0T", "2X", "2D", "", "1TT"])
def test_parse_category_rejects(token):
    with pytest.raises(BoxError):
        parse_category(token)


def test_builtins():
    reg = registry()
    step = BuiltinBox(reg["add2bit"]).reduce_step(num(3), num(1))
    assert step.result == num(0) and step.outputs == {"_2": num(1)}
    assert BuiltinBox(reg["add"]).transduce(parse_term("(1 2 3)")).outputs == {"_1": num(6)}
    assert BuiltinBox(reg["double"]).transduce(num(4)).outputs == {"_1": num(8)}
    s = BuiltinBox(reg["iota"]).induct(num(3))
    assert s.outputs == {"_1": num(1)} and s.more and s.continuation == parse_term("(2 3)")
    last = BuiltinBox(reg["iota"]).induct(parse_term("(3 3)"))
    assert not last.more and last.outputs == {"_1": num(3)}


def test_builtin_rejects_non_integers():
    with pytest.raises(RuntimeFault):
        BuiltinBox(registry()["double"]).transduce(parse_term("{a: 1}"))


def test_manifest_lines():
    specs = parse_manifest("""
    # comment
    f 2T builtin:id
    g 1DO exec:python3 g.py --fast   # trailing comment
    h 1I builtin:iota passport=h.passport
    """)
    assert specs["f"].token == "2T" and specs["f"].binding == ("builtin", "id")
    assert specs["g"].binding == ("exec", "python3 g.py --fast")
    assert specs["h"].passport == "h.passport"


@pytest.mark.parametrize("text", [
    "f 1T",
    "f 1T builtin:nosuch",
    "f 1T shell:ls",
    "f 1T builtin:id\nf 1T builtin:id",
    "f 0T builtin:id",
])
def test_manifest_errors(text):
    with pytest.raises(BoxError):
        parse_manifest(text)


def test_manifest_passport_relative_to_file():
    specs = load_manifest(FIX / "cal_ok.boxes")
    assert all(s.passport is None or s.passport.startswith(str(FIX)) for s in specs.values())


def test_opaque_box_cannot_run():
    from astrakahn.boxes import BoxSpec
    with pytest.raises(BoxError):
        make_box(BoxSpec("x", 1, "T", ("opaque", None)))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3))
def test_external_add2bit_pairs_with_builtin(a, b):
    ext = invoke_external(EXT["xadd2bit"], {"op": "reduce_step", "inputs": [str(a), str(b)]}, cwd=FIX)
    ref = BuiltinBox(registry()["add2bit"]).reduce_step(num(a), num(b))
    assert (ext.result, ext.outputs) == (ref.result, ref.outputs)


@pytest.mark.parametrize("box, builtin, cat, stream", [
    ("xiota", "iota", "I", [3, "s1", 1, 2]),
    ("xid", "id", "T", ["{a: 1}", "(1 2)", "s1", "[1, 2]"]),
    ("xadd", "add", "T", ["(1 2)", "(3 4 5)"]),
    ("xsum", "sumMU", "MU", [1, 2, "s1", 3]),
])
def test_external_twin_gives_identical_trace(box, builtin, cat, stream):
    def go(name):
        n = network(f"net t (x | y) connect <x | 1{cat}:{name} | y> end", "ext.boxes", {"x": 1})
        return run(n, {"x": msgs(*stream)}, capacity=1)
    ext, ref = go(box), go(builtin)
    assert ext.status == ref.status == TERMINATED
    assert ext.outputs == ref.outputs
    strip = lambda r: [(e["action"], e["channel"], e["message"]) for e in r.trace]
    assert strip(ext) == strip(ref)


def test_external_undeclared_port_is_contract_violation():
    box = ExternalBox(EXT["xbad"], cwd=FIX)
    try:
        with pytest.raises(ContractViolation, match="undeclared"):
            box.transduce(num(1))
    finally:
        box.close()


def test_external_several_messages_is_contract_violation():
    with pytest.raises(ContractViolation, match="several"):
        invoke_external(EXT["xmany"], {"op": "transduce", "inputs": ["1"]}, cwd=FIX)


def test_external_crash_restarts_once_then_faults():
    box = ExternalBox(EXT["xcrash"], cwd=FIX)
    with pytest.raises(RuntimeFault, match="again after a restart"):
        box.transduce(num(1))
    assert any("restarted" in f for f in box.faults)
    box.close()


def test_external_timeout():
    box = ExternalBox(EXT["xslow"], timeout=0.3, cwd=FIX)
    with pytest.raises(RuntimeFault, match="did not answer"):
        box.transduce(num(1))
    box.close()


def test_crashing_box_run_reports_fault():
    n = network("net t (x | y) connect <x | xcrash | y> end", "ext.boxes")
    r = run(n, {"x": msgs(1)})
    assert r.status == FAULT and r.exit_code == 4
