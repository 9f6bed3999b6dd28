"""Line-oriented trace output.

Every line has the shape ``t=<ns> node=<name> comp=<component> ev=<NAME> k=v ...``
with keys in emission order, so two identical runs produce identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class TraceEvent:
    time: int
    node: str
    comp: str
    ev: str
    details: dict = field(default_factory=dict)
    index: int = 0

    def get(self, key, default=None):
        return self.details.get(key, default)

    def line(self) -> str:
        parts = [f"t={self.time}", f"node={self.node}", f"comp={self.comp}", f"ev={self.ev}"]
        parts.extend(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return " ".join(parts)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if v is None:
        return "-"
    return str(v)


class Tracer:
    def __init__(self, sim, keep_events: bool = True):
        self.sim = sim
        self.lines: list[str] = []
        self.events: list[TraceEvent] = []
        self.keep_events = keep_events
        self.counts: dict[str, int] = {}

    def emit(self, node, comp, ev, **details):
        te = TraceEvent(self.sim.now, str(node), str(comp), ev, details, len(self.lines))
        self.lines.append(te.line())
        if self.keep_events:
            self.events.append(te)
        self.counts[ev] = self.counts.get(ev, 0) + 1
        return te

    def text(self) -> str:
        return "\n".join(self.lines) + ("\n" if self.lines else "")

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.text())

    def select(self, ev=None, node=None, comp=None, **match):
        return select(self.events, ev=ev, node=node, comp=comp, **match)


def select(events, ev=None, node=None, comp=None, **match):
    out = []
    for te in events:
        if ev is not None and te.ev != ev:
            continue
        if node is not None and te.node != node:
            continue
        if comp is not None and te.comp != comp:
            continue
        if any(str(te.details.get(k)) != str(v) for k, v in match.items()):
            continue
        out.append(te)
    return out


def parse_line(line: str, index: int = 0) -> TraceEvent:
    fields = line.split(" ")
    head = {}
    details = {}
    for i, tok in enumerate(fields):
        k, _, v = tok.partition("=")
        if i < 4:
            head[k] = v
        else:
            details[k] = v
    return TraceEvent(int(head["t"]), head["node"], head["comp"], head["ev"], details, index)


def parse_trace(text: str) -> list[TraceEvent]:
    return [parse_line(ln, i) for i, ln in enumerate(text.splitlines()) if ln.strip()]
