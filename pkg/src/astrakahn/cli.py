"""akc: parse, check, draw, import and run coordination programs."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .boxes import builtin_registry, load_manifest
from .cal import check_network, describe
from .errors import AkError
from .messages import parse_message
from .network.depths import bind_network_depths, solve_depths
from .network.elaborate import elaborate_program, synch_network
from .network.export import to_dot, to_json
from .network.fps import DEFAULT_REPLICA_CAP
from .network.graphimport import graph_import, parse_graph
from .network.syntax import parse_program, render_wiring
from .runtime import DEFAULT_CAPACITY, DEFAULT_MAX_STEPS, Scheduler
from .synch.infer import infer_passport
from .synch.parser import parse_synch_file
from .synch.validate import validate

EXIT_ERROR = 1


class _Parser(argparse.ArgumentParser):
    # exit status 2 is reserved for deadlock
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _assignment(text):
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError("expected NAME=VALUE")
    return name, value


def read_stream(path):
    """Messages of a stream file and its depth (declared, else the deepest mark).

    Lines are `data <term>`, `sigma <k>` or `depth <k>`; `#` starts a comment.
    """
    msgs, depth = [], None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line.startswith("data"):  # terms may contain '#' inside strings
            line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("depth"):
            depth = int(line.split()[1])
            continue
        try:
            msgs.append(parse_message(line))
        except (ValueError, AkError) as e:
            raise AkError(f"{path}:{lineno}: {e}") from None
    if depth is None:
        marks = [m.k for m in msgs if hasattr(m, "k")]
        depth = max(marks, default=0)
    return msgs, depth


# loading

def _is_synch_file(path, text):
    if path.endswith(".sync"):
        return True
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            return line.startswith(("synch", "tab"))
    return False


def _registry(args):
    reg = builtin_registry()
    if getattr(args, "boxes", None):
        reg.update(load_manifest(args.boxes))
    return reg


def _bindings(args):
    out = {}
    for name, value in getattr(args, "set", None) or ():
        out[name] = int(value)
    return out


def load_network(args):
    """(network, warnings, morphism report, synch declarations) for a source file."""
    text = Path(args.path).read_text()
    if _is_synch_file(args.path, text):
        decls = parse_synch_file(text)
        if not decls:
            raise AkError("the file declares no synchroniser")
        names = [d.name for d in decls]
        want = getattr(args, "net", None) or names[-1]
        if want not in names:
            raise AkError(f"no synchroniser named {want!r}")
        decl = decls[names.index(want)]
        return synch_network(decl, _bindings(args)), [], [], decls
    prog = parse_program(text)
    build = elaborate_program(prog, getattr(args, "net", None), _bindings(args), _registry(args))
    return build.network, build.warnings, build.morphisms, _all_synchs(prog)


def _all_synchs(prog):
    out = list(prog.synchs.values())
    todo = list(prog.nets.values())
    while todo:
        n = todo.pop(0)
        out.extend(n.synchs.values())
        todo.extend(n.nets.values())
    return out


def _cwd(args):
    return str(Path(args.boxes).resolve().parent) if getattr(args, "boxes", None) else None


# commands

def _print_net(decl, indent, out):
    pad = "  " * indent
    ins = ", ".join(f"{c.name}:{c.depth.render()}" if c.depth.base is not None else c.name for c in decl.inputs)
    outs = ", ".join(f"{c.name}:{c.depth.render()}" if c.depth.base is not None else c.name for c in decl.outputs)
    kind = "pure net" if decl.pure else "net"
    cat = f" {decl.category[1].lower()}:" if decl.pure and decl.category else ""
    conf = f" [{', '.join(decl.configs)}]" if decl.configs else ""
    out.append(f"{pad}{kind}{cat} {decl.name}{conf} ({ins} | {outs})")
    for s in decl.synchs.values():
        out.append(f"{pad}  {s.summary()}")
    for n in decl.nets.values():
        _print_net(n, indent + 1, out)
    for m in decl.morphs:
        out.append(f"{pad}  morph {getattr(m, 'name', '')}".rstrip())
    out.append(f"{pad}  connect {render_wiring(decl.wiring)}")


def cmd_parse(args):
    text = Path(args.path).read_text()
    out = []
    if _is_synch_file(args.path, text):
        for d in parse_synch_file(text):
            out.append(d.summary())
    else:
        prog = parse_program(text)
        for kind, name in prog.order:
            if kind == "synch":
                out.append(prog.synchs[name].summary())
            elif kind == "net":
                _print_net(prog.nets[name], 0, out)
            else:
                out.append("morph")
    print("\n".join(out))
    return 0


def cmd_check(args):
    n, warnings, morphisms, synchs = load_network(args)
    ok = True
    out = []
    for d in synchs:
        diags = validate(d, _bindings(args) or None)
        for diag in diags:
            out.append(f"{d.name}: {diag}")
            ok &= diag.level != "error"
        out.append(infer_passport(d).render())
    out.extend(f"warning: {w}" for w in warnings)
    depths = {}
    for name, path in args.inputs or ():
        depths[name] = read_stream(path)[1]
    sol = solve_depths(n, depths)
    out.append("depths:")
    for c in n.inputs:
        out.append(f"  input {n.names[c]}: {sol.channel(c)}")
    for a, b in sorted(n.wires, key=lambda w: (w[1].vid, w[1].port)):
        out.append(f"  {n.names[a]} ({n.vertices[b.vid].label}.{b.port} -> {n.vertices[a.vid].label}.{a.port}): "
                   f"{sol.channel(a)}")
    for c in n.outputs:
        out.append(f"  output {n.names[c]}: {sol.channel(c)}")
    for (path, vid), env in sorted(sol.vars.items()):
        if path == ():
            label = n.vertices[vid].label
            out.append("  " + label + ": " + ", ".join(f"{k}={v}" for k, v in sorted(env.items())))
    if sol.underdetermined:
        out.append("  underdetermined (fixed at 0): " + ", ".join(sol.underdetermined))
    check = check_network(n, _cwd(args))
    out.append("constraints: " + "\n".join(describe(check)))
    ok &= check.verdict == "Sat" and all(check.recheck.values())
    if morphisms:
        out.append("morphisms:")
        out.extend(f"  {line}" for line in morphisms)
    print("\n".join(out))
    return 0 if ok else EXIT_ERROR


def cmd_graph(args):
    n, warnings, _, _ = load_network(args)
    if not n.vertices:
        raise AkError("the network is empty")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    sol = solve_depths(n)
    dot, doc = to_dot(n, Path(args.path).stem), to_json(n, sol)
    if args.dot:
        Path(args.dot).write_text(dot)
    if args.json:
        Path(args.json).write_text(doc + "\n")
    if not args.dot and not args.json:
        sys.stdout.write(dot if args.format == "dot" else doc + "\n")
    return 0


def cmd_import(args):
    print(graph_import(parse_graph(Path(args.path).read_text())))
    return 0


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("AKC_SEED")
    return int(env) if env else 0


def cmd_run(args):
    n, warnings, _, _ = load_network(args)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    streams, depths = {}, {}
    for name, path in args.inputs or ():
        streams[name], depths[name] = read_stream(path)
    sol = solve_depths(n, depths)
    n = bind_network_depths(n, sol)
    sched = Scheduler(n, streams, seed=_seed(args), capacity=args.capacity, max_steps=args.max_steps,
                      replica_cap=args.replica_cap, pressurise_wraps=args.pressurise_wraps,
                      check_reductions=args.check_reductions, cwd=_cwd(args), trace=bool(args.trace))
    result = sched.run()
    for name, msgs in result.outputs.items():
        for m in msgs:
            print(f"{name} {m.render()}")
    if args.trace:
        Path(args.trace).write_text(result.trace_text())
    if args.pressure:
        Path(args.pressure).write_text(json.dumps(result.pressure, indent=2, sort_keys=True) + "\n")
    print(f"status: {result.status} after {result.steps} steps", file=sys.stderr)
    for f in result.faults:
        print(f"fault: {f}", file=sys.stderr)
    if result.report:
        rep = result.report
        if rep["cycle"]:
            print("deadlock cycle: " + " -> ".join(rep["cycle"]), file=sys.stderr)
        for b in rep["blocked"]:
            print(f"  full channel {b['channel']} ({b['queue']}/{b['capacity']}) from {', '.join(b['producers'])}",
                  file=sys.stderr)
        for w in rep["waiting"]:
            print(f"  {w['vertex']}: {w['reason']}", file=sys.stderr)
    return result.exit_code


def build_parser():
    p = _Parser(prog="akc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def source(sp):
        sp.add_argument("path", help="program (.ak) or synchroniser (.sync) file")
        sp.add_argument("--net", help="net (or synchroniser) to use; default: the last one")
        sp.add_argument("--boxes", help="box manifest")
        sp.add_argument("--set", action="append", type=_assignment, metavar="NAME=INT",
                        help="configuration parameter value (repeatable)")

    sp = sub.add_parser("parse", help="parse a source file and list its declarations")
    sp.add_argument("path")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("check", help="validate, solve depths and aggregate term constraints")
    source(sp)
    sp.add_argument("--in", dest="inputs", action="append", type=_assignment, metavar="CHAN=FILE")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("graph", help="render the elaborated network as DOT or JSON")
    source(sp)
    sp.add_argument("--format", choices=("dot", "json"), default="dot")
    sp.add_argument("--dot", help="write DOT to this file")
    sp.add_argument("--json", help="write JSON to this file")
    sp.set_defaults(func=cmd_graph)

    sp = sub.add_parser("import", help="wiring expression for an edge-list graph")
    sp.add_argument("path")
    sp.set_defaults(func=cmd_import)

    sp = sub.add_parser("run", help="simulate a network on input stream files")
    source(sp)
    sp.add_argument("--in", dest="inputs", action="append", type=_assignment, metavar="CHAN=FILE")
    sp.add_argument("--seed", type=int, help="seed for merge choices (default: $AKC_SEED or 0)")
    sp.add_argument("--capacity", type=_positive, default=DEFAULT_CAPACITY)
    sp.add_argument("--max-steps", type=_positive, default=DEFAULT_MAX_STEPS)
    sp.add_argument("--replica-cap", type=_positive, default=DEFAULT_REPLICA_CAP)
    sp.add_argument("--trace", help="write the NDJSON trace to this file")
    sp.add_argument("--pressure", help="write the pressure report (JSON) to this file")
    sp.add_argument("--pressurise-wraps", action="store_true",
                    help="give wrap-around channels the normal capacity")
    sp.add_argument("--check-reductions", action="store_true",
                    help="refold unordered and segmented reductions differently and compare")
    sp.set_defaults(func=cmd_run)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AkError as e:
        print(f"akc: {args.path}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"akc: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
