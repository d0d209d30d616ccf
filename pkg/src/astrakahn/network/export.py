"""Deterministic JSON and DOT renderings of an elaborated network."""
from __future__ import annotations

import json

from .model import BOX, FPS, NET, Network


def _vertex_doc(v, vid, depths=None, path=()):
    doc = {"id": vid, "kind": v.kind, "label": v.label,
           "inputs": list(v.inputs), "outputs": list(v.outputs)}
    if v.kind == BOX:
        doc["category"] = v.payload.token
        if v.synthetic:
            doc["synthetic"] = list(v.synthetic)
    elif v.kind == NET:
        doc["pure"] = v.payload.pure
        if v.payload.pure:
            doc["category"] = v.payload.category
        doc["body"] = network_doc(v.payload.body, depths, path + (vid,))
    elif v.kind == FPS:
        doc["n_out"] = list(v.payload.n_out)
        doc["reverse"] = {k: list(t) for k, t in sorted(v.payload.reverse.items())}
        doc["operand"] = network_doc(v.payload.operand, depths, path + (vid,))
    return doc


def network_doc(n: Network, depths=None, path=()) -> dict:
    def chan(c):
        out = {"vertex": c.vid, "port": c.port, "name": n.names[c]}
        if depths is not None and (path, c) in depths.depths:
            out["depth"] = depths.depths[(path, c)]
        return out

    wires = []
    for a, b in sorted(n.wires, key=lambda w: (w[1].vid, w[1].port, w[0].vid, w[0].port)):
        w = {"from": chan(b), "to": chan(a)}
        if (a, b) in n.depressurised:
            w["depressurised"] = True
        if (a, b) in n.transfer:
            w["pressure_to"] = [chan(c) for c in n.transfer[(a, b)]]
        wires.append(w)
    return {
        "vertices": [_vertex_doc(v, i, depths, path) for i, v in enumerate(n.vertices)],
        "wires": wires,
        "inputs": [chan(c) for c in n.inputs],
        "outputs": [chan(c) for c in n.outputs],
    }


def to_json(n: Network, depths=None) -> str:
    return json.dumps(network_doc(n, depths), indent=2, sort_keys=True)


def _q(s):
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot_body(n: Network, prefix, lines, indent):
    pad = "  " * indent
    for vid, v in enumerate(n.vertices):
        node = f"{prefix}{vid}"
        label = v.label
        if v.kind == BOX:
            label = f"{v.payload.token}:{v.label}"
        elif v.kind == FPS:
            label = f"{v.label}* N_out={','.join(v.payload.n_out)}"
        shape = {"box": "box", "synch": "ellipse", "tab": "box3d", "merge": "circle",
                 "net": "folder", "fps": "doubleoctagon"}.get(v.kind, "point")
        lines.append(f"{pad}{_q(node)} [label={_q(label)}, shape={shape}];")
    for a, b in sorted(n.wires, key=lambda w: (w[1].vid, w[1].port, w[0].vid, w[0].port)):
        style = ", style=dashed" if (a, b) in n.depressurised else ""
        lines.append(f"{pad}{_q(prefix + str(b.vid))} -> {_q(prefix + str(a.vid))} [label={_q(n.names[a])}{style}];")
    for i, c in enumerate(n.inputs):
        src = f"{prefix}in{i}"
        lines.append(f"{pad}{_q(src)} [label={_q(n.names[c])}, shape=plaintext];")
        lines.append(f"{pad}{_q(src)} -> {_q(prefix + str(c.vid))};")
    for i, c in enumerate(n.outputs):
        dst = f"{prefix}out{i}"
        lines.append(f"{pad}{_q(dst)} [label={_q(n.names[c])}, shape=plaintext];")
        lines.append(f"{pad}{_q(prefix + str(c.vid))} -> {_q(dst)};")


def to_dot(n: Network, name="network") -> str:
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;"]
    _dot_body(n, "v", lines, 1)
    lines.append("}")
    return "\n".join(lines) + "\n"
