"""Stream messages: data carrying a ground term, or a segmentation mark."""
from __future__ import annotations

from dataclasses import dataclass

from .terms import Term, parse_term, render_term


@dataclass(frozen=True)
class Data:
    term: Term

    def render(self) -> str:
        return "data " + render_term(self.term)


@dataclass(frozen=True)
class Sigma:
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("segmentation marks have k >= 0")

    def render(self) -> str:
        return f"sigma {self.k}"


END = Sigma(0)


def is_end(msg) -> bool:
    return isinstance(msg, Sigma) and msg.k == 0


def parse_message(line: str):
    """Parse one stream line: `data <term>` or `sigma <k>`."""
    text = line.strip()
    word, _, rest = text.partition(" ")
    if word == "sigma":
        return Sigma(int(rest.strip()))
    if word == "data":
        return Data(parse_term(rest))
    raise ValueError(f"stream line must start with 'data' or 'sigma': {line!r}")


def render_stream(msgs) -> str:
    return "".join(m.render() + "\n" for m in msgs)


def short(msg) -> str:
    """Compact form for traces and test diffs: terms as text, marks as s<k>."""
    if isinstance(msg, Sigma):
        return f"s{msg.k}"
    return render_term(msg.term)
