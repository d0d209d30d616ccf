"""Helpers shared by the network, runtime and acceptance tests."""
from pathlib import Path

from astrakahn.boxes import builtin_registry, load_manifest
from astrakahn.messages import Data, Sigma, short
from astrakahn.network.depths import bind_network_depths, solve_depths
from astrakahn.network.elaborate import elaborate_program, synch_network
from astrakahn.network.syntax import parse_program
from astrakahn.runtime import run_network
from astrakahn.synch.parser import parse_synchroniser
from astrakahn.terms import num, parse_term

FIX = Path(__file__).parent / "fixtures"


def msgs(*items):
    """Stream from ints, term strings and 's<k>' marks."""
    out = []
    for x in items:
        if isinstance(x, str) and x[:1] == "s" and x[1:].isdigit():
            out.append(Sigma(int(x[1:])))
        elif isinstance(x, str):
            out.append(Data(parse_term(x)))
        else:
            out.append(Data(num(x)))
    return out


def shorts(ms):
    return [short(m) for m in ms]


def registry(manifest=None):
    reg = builtin_registry()
    if manifest:
        reg.update(load_manifest(FIX / manifest))
    return reg


def network(source, manifest=None, depths=None, main=None, bindings=None):
    """Elaborated, depth-bound network from program text or a fixture name."""
    text = (FIX / source).read_text() if source.endswith((".ak", ".sync")) else source
    if source.endswith(".sync"):
        n = synch_network(parse_synchroniser(text), bindings)
    else:
        n = elaborate_program(parse_program(text), main, bindings, registry(manifest)).network
    return bind_network_depths(n, solve_depths(n, depths))


def run(n, inputs, **config):
    config.setdefault("cwd", str(FIX))
    return run_network(n, inputs, **config)


SUM_A = msgs(2, 1, "s1", 2, "s0")
SUM_B = msgs(0, 1, 0, "s2", 1, 1, 1, "s1", 0, 0, 1, "s0")
SUM_S = ["3", "s1", "0", "3", "s0"]
SUM_C = ["0", "0", "0", "s1", "0", "0", "1", "s2", "0", "0", "0", "s0"]


def sum_network(box="add2bit", manifest=None):
    return network(f"net sum (a, b | s, c) connect <a, b | 2DO:{box} | s, c> end", manifest, {"a": 1, "b": 2})
