"""Scenario files: YAML in, validated :class:`Scenario` out.

Units are spelled out in the key names (``delay_ms``, ``rate_bps``,
``payload_bytes``, ...) and converted to integer nanoseconds once, here.
Every diagnostic carries the dotted path of the offending field and, when the
text came from a file, its line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .daf import MIN_PING_PAYLOAD, ROLES, AppSpec
from .errors import ParseError, ValidationError
from .identifiers import QosCube, QosRequirements

NODE_KINDS = {"host": 2, "interior-router": 2, "border-router": 3}  # minimum DIF ranks
ROUTING = {"link-state"}
SCHEDULERS = {"fifo"}
BOOTSTRAP = {"lazy", "eager"}
MAX_ADDRESS = 0xFFFF


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str
    line: int | None = None

    def __str__(self):
        where = f" (line {self.line})" if self.line else ""
        return f"{self.path or '<root>'}: {self.message}{where}"


@dataclass
class DifSpec:
    name: str
    rank: int
    mpl: int
    a_timer: int
    r_timer: int
    sender_discard_multiple: int = 3
    receiver_discard_multiple: int = 2
    rto: int | None = None
    queue_capacity: int = 100
    max_pdu_payload: int = 1400
    routing: str = "link-state"
    scheduler: str = "fifo"
    auth: str = ""
    bootstrap: str = "lazy"
    allocate_timeout: int | None = None
    enroll_timeout: int | None = None


@dataclass
class IpcpSpec:
    name: str
    dif: str
    address: int
    over: list | None = None
    auth: str | None = None


@dataclass
class NodeSpec:
    name: str
    kind: str
    ipcps: list = field(default_factory=list)


@dataclass
class LinkSpec:
    a: str
    b: str
    rate: int
    delay: int
    ber: float = 0.0
    metric: int = 1
    name: str = ""


@dataclass
class DaEntry:
    apn: str
    difs: list


@dataclass
class Scenario:
    name: str
    seed: int = 0
    stop_time: int = 10_000_000_000
    qos_cubes: list = field(default_factory=list)
    difs: list = field(default_factory=list)
    nodes: list = field(default_factory=list)
    links: list = field(default_factory=list)
    apps: list = field(default_factory=list)
    da_directory: list = field(default_factory=list)

    def dif(self, name) -> DifSpec | None:
        return next((d for d in self.difs if d.name == name), None)

    def node(self, name) -> NodeSpec | None:
        return next((n for n in self.nodes if n.name == name), None)


# -- YAML with line numbers ---------------------------------------------------

def _compose(text: str):
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ParseError([Diagnostic("", f"malformed YAML: {getattr(exc, 'problem', exc)}", line)]) from None
    if root is None:
        raise ParseError([Diagnostic("", "empty scenario")])
    lines: dict[str, int] = {}
    ctor = yaml.SafeLoader("")

    def build(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            out = {}
            for k, v in node.value:
                key = str(ctor.construct_object(k, deep=True))
                out[key] = build(v, f"{path}.{key}" if path else key)
            return out
        if isinstance(node, yaml.SequenceNode):
            return [build(v, f"{path}[{i}]") for i, v in enumerate(node.value)]
        return ctor.construct_object(node, deep=True)

    doc = build(root, "")
    if not isinstance(doc, dict):
        raise ParseError([Diagnostic("", "top level must be a mapping", 1)])
    return doc, lines


class _Reader:
    """Typed field access that records diagnostics instead of raising."""

    def __init__(self, lines):
        self.lines = lines
        self.diags: list[Diagnostic] = []

    def err(self, path, message):
        line = self.lines.get(path)
        if line is None and "." in path:
            line = self.lines.get(path.rsplit(".", 1)[0])
        self.diags.append(Diagnostic(path, message, line))

    def keys(self, obj, path, allowed):
        if not isinstance(obj, dict):
            self.err(path, "expected a mapping")
            return False
        for k in obj:
            if k not in allowed:
                self.err(f"{path}.{k}" if path else k, f"unknown field '{k}'")
        return True

    def get(self, obj, key, path, kind, default=None, required=False):
        p = f"{path}.{key}" if path else key
        if key not in obj or obj[key] is None:
            if required:
                self.err(p, f"missing required field '{key}'")
            return default
        v = obj[key]
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                self.err(p, "expected a number")
                return default
            return float(v)
        if kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                self.err(p, "expected an integer")
                return default
            return v
        if kind is bool:
            if not isinstance(v, bool):
                self.err(p, "expected true or false")
                return default
            return v
        if kind is str:
            if not isinstance(v, (str, int)) or isinstance(v, bool):
                self.err(p, "expected a string")
                return default
            return str(v)
        if kind is list:
            if not isinstance(v, list):
                self.err(p, "expected a list")
                return default
            return v
        if kind is dict:
            if not isinstance(v, dict):
                self.err(p, "expected a mapping")
                return default
            return v
        return v

    def ms(self, obj, key, path, default=None, required=False):
        v = self.get(obj, key, path, float, None, required)
        return default if v is None else int(round(v * 1_000_000))


# -- parse ---------------------------------------------------------------------

TOP_KEYS = {"name", "seed", "stop_time_s", "qos_cubes", "difs", "nodes", "links", "apps", "da_directory"}
CUBE_KEYS = {"id", "reliable", "ordered", "max_delay_ms", "avg_bandwidth_bps"}
DIF_KEYS = {"name", "rank", "mpl_ms", "a_timer_ms", "r_timer_ms", "sender_discard_multiple",
            "receiver_discard_multiple", "rto_ms", "queue_capacity", "max_pdu_payload_bytes",
            "routing", "scheduler", "auth", "bootstrap", "allocate_timeout_ms", "enroll_timeout_ms"}
NODE_KEYS = {"name", "kind", "ipcps"}
IPCP_KEYS = {"name", "dif", "address", "over", "auth"}
LINK_KEYS = {"a", "b", "rate_bps", "delay_ms", "ber", "metric", "name"}
APP_KEYS = {"node", "apn", "role", "dst", "count", "interval_ms", "payload_bytes", "qos", "start_ms",
            "timeout_ms", "deny", "gap_after", "gap_ms"}
QOS_KEYS = {"reliable", "ordered", "max_delay_ms", "avg_bandwidth_bps"}
DA_KEYS = {"apn", "difs"}


def _qos_requirements(r: _Reader, obj, path) -> QosRequirements:
    if obj is None:
        return QosRequirements()
    if not r.keys(obj, path, QOS_KEYS):
        return QosRequirements()
    max_delay = r.ms(obj, "max_delay_ms", path)
    if max_delay is not None and max_delay <= 0:
        r.err(f"{path}.max_delay_ms", "max_delay_ms must be positive")
        max_delay = None
    return QosRequirements(r.get(obj, "reliable", path, bool), r.get(obj, "ordered", path, bool),
                           max_delay, r.get(obj, "avg_bandwidth_bps", path, int))


def _items(r: _Reader, doc, key):
    v = r.get(doc, key, "", list, [])
    return [(f"{key}[{i}]", item) for i, item in enumerate(v)]


def _parse(doc: dict, lines) -> tuple[Scenario, _Reader]:
    r = _Reader(lines)
    r.keys(doc, "", TOP_KEYS)
    sc = Scenario(name=r.get(doc, "name", "", str, "", required=True),
                  seed=r.get(doc, "seed", "", int, 0))
    stop = r.get(doc, "stop_time_s", "", float, 10.0)
    sc.stop_time = int(round(stop * 1_000_000_000))

    for path, c in _items(r, doc, "qos_cubes"):
        if not r.keys(c, path, CUBE_KEYS):
            continue
        sc.qos_cubes.append(QosCube(r.get(c, "id", path, int, 0, required=True),
                                    bool(r.get(c, "reliable", path, bool, False)),
                                    bool(r.get(c, "ordered", path, bool, False)),
                                    r.ms(c, "max_delay_ms", path),
                                    r.get(c, "avg_bandwidth_bps", path, int)))

    for path, d in _items(r, doc, "difs"):
        if not r.keys(d, path, DIF_KEYS):
            continue
        sc.difs.append(DifSpec(
            name=r.get(d, "name", path, str, "", required=True),
            rank=r.get(d, "rank", path, int, 0, required=True),
            mpl=r.ms(d, "mpl_ms", path, 0, required=True),
            a_timer=r.ms(d, "a_timer_ms", path, 0, required=True),
            r_timer=r.ms(d, "r_timer_ms", path, 0, required=True),
            sender_discard_multiple=r.get(d, "sender_discard_multiple", path, int, 3),
            receiver_discard_multiple=r.get(d, "receiver_discard_multiple", path, int, 2),
            rto=r.ms(d, "rto_ms", path),
            queue_capacity=r.get(d, "queue_capacity", path, int, 100),
            max_pdu_payload=r.get(d, "max_pdu_payload_bytes", path, int, 1400),
            routing=r.get(d, "routing", path, str, "link-state"),
            scheduler=r.get(d, "scheduler", path, str, "fifo"),
            auth=r.get(d, "auth", path, str, ""),
            bootstrap=r.get(d, "bootstrap", path, str, "lazy"),
            allocate_timeout=r.ms(d, "allocate_timeout_ms", path),
            enroll_timeout=r.ms(d, "enroll_timeout_ms", path)))

    for path, n in _items(r, doc, "nodes"):
        if not r.keys(n, path, NODE_KEYS):
            continue
        node = NodeSpec(r.get(n, "name", path, str, "", required=True),
                        r.get(n, "kind", path, str, "", required=True))
        for i, ip in enumerate(r.get(n, "ipcps", path, list, [], required=True)):
            ipath = f"{path}.ipcps[{i}]"
            if not r.keys(ip, ipath, IPCP_KEYS):
                continue
            over = r.get(ip, "over", ipath, list)
            node.ipcps.append(IpcpSpec(r.get(ip, "name", ipath, str, "", required=True),
                                       r.get(ip, "dif", ipath, str, "", required=True),
                                       r.get(ip, "address", ipath, int, 0, required=True),
                                       [str(o) for o in over] if over is not None else None,
                                       r.get(ip, "auth", ipath, str)))
        sc.nodes.append(node)

    for path, ln in _items(r, doc, "links"):
        if not r.keys(ln, path, LINK_KEYS):
            continue
        sc.links.append(LinkSpec(r.get(ln, "a", path, str, "", required=True),
                                 r.get(ln, "b", path, str, "", required=True),
                                 r.get(ln, "rate_bps", path, int, 0, required=True),
                                 r.ms(ln, "delay_ms", path, 0, required=True),
                                 r.get(ln, "ber", path, float, 0.0),
                                 r.get(ln, "metric", path, int, 1),
                                 r.get(ln, "name", path, str, "")))

    for path, a in _items(r, doc, "apps"):
        if not r.keys(a, path, APP_KEYS):
            continue
        sc.apps.append(AppSpec(
            node=r.get(a, "node", path, str, "", required=True),
            apn=r.get(a, "apn", path, str, "", required=True),
            role=r.get(a, "role", path, str, "", required=True),
            dst=r.get(a, "dst", path, str),
            count=r.get(a, "count", path, int, 0),
            interval=r.ms(a, "interval_ms", path, 0),
            payload_bytes=r.get(a, "payload_bytes", path, int, 64),
            qos=_qos_requirements(r, r.get(a, "qos", path, dict), f"{path}.qos"),
            start=r.ms(a, "start_ms", path, 0),
            timeout=r.ms(a, "timeout_ms", path, 1_000_000_000),
            deny=bool(r.get(a, "deny", path, bool, False)),
            gap_after=r.get(a, "gap_after", path, int),
            gap=r.ms(a, "gap_ms", path, 0)))

    for path, e in _items(r, doc, "da_directory"):
        if not r.keys(e, path, DA_KEYS):
            continue
        sc.da_directory.append(DaEntry(r.get(e, "apn", path, str, "", required=True),
                                       [str(x) for x in r.get(e, "difs", path, list, [], required=True)]))
    return sc, r


# -- validation ------------------------------------------------------------------

def _validate(sc: Scenario, r: _Reader):
    err = r.err
    if sc.stop_time <= 0:
        err("stop_time_s", "stop_time_s must be positive")
    if sc.seed < 0:
        err("seed", "seed must be non-negative")

    cube_ids = set()
    for i, c in enumerate(sc.qos_cubes):
        p = f"qos_cubes[{i}]"
        if c.id <= 0:
            err(f"{p}.id", "cube id 0 is reserved for management; use ids >= 1")
        if c.id in cube_ids:
            err(f"{p}.id", f"duplicate cube id {c.id}")
        cube_ids.add(c.id)
        if c.avg_bandwidth is not None and c.avg_bandwidth <= 0:
            err(f"{p}.avg_bandwidth_bps", "avg_bandwidth_bps must be positive")
        if c.max_delay is not None and c.max_delay <= 0:
            err(f"{p}.max_delay_ms", "max_delay_ms must be positive")

    difs = {}
    for i, d in enumerate(sc.difs):
        p = f"difs[{i}]"
        if d.name in difs:
            err(f"{p}.name", f"duplicate DIF name '{d.name}'")
        difs[d.name] = d
        if d.rank < 0:
            err(f"{p}.rank", "rank must be >= 0")
        for key, v in (("mpl_ms", d.mpl), ("a_timer_ms", d.a_timer), ("r_timer_ms", d.r_timer)):
            if v <= 0:
                err(f"{p}.{key}", f"{key} must be positive")
        for key in ("sender_discard_multiple", "receiver_discard_multiple"):
            if getattr(d, key) not in (2, 3):
                err(f"{p}.{key}", f"{key} must be 2 or 3")
        if d.receiver_discard_multiple > d.sender_discard_multiple:
            err(f"{p}.receiver_discard_multiple",
                "the receiver must not outlive the sender (receiver multiple <= sender multiple)")
        if d.rto is not None and d.rto <= 0:
            err(f"{p}.rto_ms", "rto_ms must be positive")
        if d.queue_capacity <= 0:
            err(f"{p}.queue_capacity", "queue_capacity must be positive")
        if d.max_pdu_payload <= 0:
            err(f"{p}.max_pdu_payload_bytes", "max_pdu_payload_bytes must be positive")
        if d.routing not in ROUTING:
            err(f"{p}.routing", f"unknown routing policy '{d.routing}' (known: {sorted(ROUTING)})")
        if d.scheduler not in SCHEDULERS:
            err(f"{p}.scheduler", f"unknown scheduling policy '{d.scheduler}' (known: {sorted(SCHEDULERS)})")
        if d.bootstrap not in BOOTSTRAP:
            err(f"{p}.bootstrap", "bootstrap must be 'lazy' or 'eager'")
        for key in ("allocate_timeout", "enroll_timeout"):
            v = getattr(d, key)
            if v is not None and v <= 0:
                err(f"{p}.{key}_ms", f"{key}_ms must be positive")

    node_names = set()
    ipcp_refs = {}  # "node.ipcp" -> (IpcpSpec, node, path)
    addresses = {}
    for i, n in enumerate(sc.nodes):
        p = f"nodes[{i}]"
        if not n.name or "." in n.name or "/" in n.name:
            err(f"{p}.name", "node names must be non-empty and contain no '.' or '/'")
        if n.name in node_names:
            err(f"{p}.name", f"duplicate node name '{n.name}'")
        node_names.add(n.name)
        if n.kind not in NODE_KINDS:
            err(f"{p}.kind", f"unknown node kind '{n.kind}' (known: {sorted(NODE_KINDS)})")
        local = {}
        dif_seen = set()
        for j, ip in enumerate(n.ipcps):
            ip_path = f"{p}.ipcps[{j}]"
            if not ip.name or "." in ip.name or "/" in ip.name:
                err(f"{ip_path}.name", "IPCP names must be non-empty and contain no '.' or '/'")
            if ip.name in local:
                err(f"{ip_path}.name", f"duplicate IPCP name '{ip.name}' on node '{n.name}'")
            local[ip.name] = ip
            ipcp_refs[f"{n.name}.{ip.name}"] = (ip, n, ip_path)
            if ip.dif not in difs:
                err(f"{ip_path}.dif", f"unknown DIF '{ip.dif}'")
                continue
            if ip.dif in dif_seen:
                err(f"{ip_path}.dif", f"node '{n.name}' already has an IPCP in DIF '{ip.dif}'")
            dif_seen.add(ip.dif)
            if not 1 <= ip.address <= MAX_ADDRESS:
                err(f"{ip_path}.address", f"address must be in 1..{MAX_ADDRESS}")
            key = (ip.dif, ip.address)
            if key in addresses:
                err(f"{ip_path}.address", f"address {ip.address} already used in DIF '{ip.dif}' by {addresses[key]}")
            addresses[key] = f"{n.name}.{ip.name}"
        ranks = {difs[ip.dif].rank for ip in n.ipcps if ip.dif in difs}
        need = NODE_KINDS.get(n.kind)
        if need is not None and len(ranks) < need:
            rule = "three or more DIF ranks" if need == 3 else "at least two DIF ranks"
            err(f"{p}.ipcps", f"a {n.kind} needs {rule}; found {len(ranks)}")
        # stacking: each IPCP above rank 0 sits on the next lower rank
        for j, ip in enumerate(n.ipcps):
            if ip.dif not in difs:
                continue
            ip_path = f"{p}.ipcps[{j}]"
            rank = difs[ip.dif].rank
            if rank == 0:
                if ip.over:
                    err(f"{ip_path}.over", "a rank-0 IPCP sits on the medium, not on other IPCPs")
                continue
            below = ip.over if ip.over is not None else [
                o.name for o in n.ipcps if o.dif in difs and difs[o.dif].rank == rank - 1]
            if not below:
                err(f"{ip_path}.over", f"IPCP '{ip.name}' (rank {rank}) has no rank-{rank - 1} IPCP below it on '{n.name}'")
            for o in below:
                lower = local.get(o)
                if lower is None:
                    err(f"{ip_path}.over", f"unknown IPCP '{o}' on node '{n.name}'")
                elif lower.dif in difs and difs[lower.dif].rank != rank - 1:
                    err(f"{ip_path}.over", f"'{o}' is rank {difs[lower.dif].rank}, expected rank {rank - 1}")

    pairs = set()
    for i, ln in enumerate(sc.links):
        p = f"links[{i}]"
        ends = []
        for key in ("a", "b"):
            ref = getattr(ln, key)
            hit = ipcp_refs.get(ref)
            if hit is None:
                err(f"{p}.{key}", f"unknown IPCP '{ref}' (use node.ipcp)")
                continue
            ip, _n, _ = hit
            if ip.dif in difs and difs[ip.dif].rank != 0:
                err(f"{p}.{key}", f"links join rank-0 IPCPs; '{ref}' is rank {difs[ip.dif].rank}")
            ends.append(hit)
        if len(ends) == 2:
            (ia, na, _), (ib, nb, _) = ends
            if na.name == nb.name:
                err(p, "a link joins two different nodes")
            if ia.dif != ib.dif:
                err(p, f"link endpoints are in different DIFs ('{ia.dif}' and '{ib.dif}')")
            pair = frozenset((ln.a, ln.b))
            if pair in pairs:
                err(p, "duplicate link between the same IPCPs")
            pairs.add(pair)
        if ln.rate <= 0:
            err(f"{p}.rate_bps", "rate_bps must be positive")
        if ln.delay < 0:
            err(f"{p}.delay_ms", "delay_ms must be non-negative")
        if not 0.0 <= ln.ber <= 1.0:
            err(f"{p}.ber", "ber must lie in [0, 1]")
        if ln.metric <= 0:
            err(f"{p}.metric", "metric must be positive")

    apns = {}
    for i, a in enumerate(sc.apps):
        p = f"apps[{i}]"
        if a.node not in node_names:
            err(f"{p}.node", f"unknown node '{a.node}'")
        if not a.apn:
            continue
        if a.apn in apns or a.apn in ipcp_refs:
            err(f"{p}.apn", f"duplicate APN '{a.apn}'")
        apns[a.apn] = a
        if a.role not in ROLES:
            err(f"{p}.role", f"unknown role '{a.role}' (known: {sorted(ROLES)})")
        if a.role == "ping-initiator":
            if not a.dst:
                err(f"{p}.dst", "a ping initiator needs a destination APN")
            if a.count < 0:
                err(f"{p}.count", "count must be >= 0")
            if a.payload_bytes < MIN_PING_PAYLOAD:
                err(f"{p}.payload_bytes", f"ping payload must be at least {MIN_PING_PAYLOAD} bytes")
            if a.interval < 0:
                err(f"{p}.interval_ms", "interval_ms must be >= 0")
            if a.timeout <= 0:
                err(f"{p}.timeout_ms", "timeout_ms must be positive")
            if a.gap_after is not None and a.gap_after < 1:
                err(f"{p}.gap_after", "gap_after must be >= 1")
        if a.start < 0:
            err(f"{p}.start_ms", "start_ms must be >= 0")
    for i, a in enumerate(sc.apps):
        if a.role == "ping-initiator" and a.dst and a.dst not in apns:
            err(f"apps[{i}].dst", f"destination APN '{a.dst}' is not declared")

    for i, e in enumerate(sc.da_directory):
        p = f"da_directory[{i}]"
        if e.apn not in apns:
            err(f"{p}.apn", f"unknown APN '{e.apn}'")
        for d in e.difs:
            if d not in difs:
                err(f"{p}.difs", f"unknown DIF '{d}'")


def check_scenario(text: str) -> tuple[Scenario | None, list[Diagnostic]]:
    """Parse and validate; returns ``(scenario, [])`` or ``(None, diagnostics)``."""
    try:
        doc, lines = _compose(text)
    except ParseError as exc:
        return None, exc.diagnostics
    sc, r = _parse(doc, lines)
    if not r.diags:
        _validate(sc, r)
    return (None, r.diags) if r.diags else (sc, [])


def parse_scenario(text: str) -> Scenario:
    doc, lines = _compose(text)
    sc, r = _parse(doc, lines)
    if r.diags:
        raise ValidationError(r.diags)
    _validate(sc, r)
    if r.diags:
        raise ValidationError(r.diags)
    return sc


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# -- emit -----------------------------------------------------------------------

def _ms(ns):
    return ns // 1_000_000 if ns % 1_000_000 == 0 else ns / 1_000_000


def _put(d, key, value, default=None):
    if value is not None and value != default:
        d[key] = value


def scenario_to_dict(sc: Scenario) -> dict:
    out = {"name": sc.name, "seed": sc.seed}
    stop = sc.stop_time / 1_000_000_000
    out["stop_time_s"] = int(stop) if stop == int(stop) else stop
    out["qos_cubes"] = []
    for c in sc.qos_cubes:
        d = {"id": c.id, "reliable": c.reliable, "ordered": c.ordered}
        if c.max_delay is not None:
            d["max_delay_ms"] = _ms(c.max_delay)
        _put(d, "avg_bandwidth_bps", c.avg_bandwidth)
        out["qos_cubes"].append(d)
    out["difs"] = []
    for f in sc.difs:
        d = {"name": f.name, "rank": f.rank, "mpl_ms": _ms(f.mpl), "a_timer_ms": _ms(f.a_timer),
             "r_timer_ms": _ms(f.r_timer)}
        _put(d, "sender_discard_multiple", f.sender_discard_multiple, 3)
        _put(d, "receiver_discard_multiple", f.receiver_discard_multiple, 2)
        if f.rto is not None:
            d["rto_ms"] = _ms(f.rto)
        _put(d, "queue_capacity", f.queue_capacity, 100)
        _put(d, "max_pdu_payload_bytes", f.max_pdu_payload, 1400)
        _put(d, "routing", f.routing, "link-state")
        _put(d, "scheduler", f.scheduler, "fifo")
        _put(d, "auth", f.auth, "")
        _put(d, "bootstrap", f.bootstrap, "lazy")
        if f.allocate_timeout is not None:
            d["allocate_timeout_ms"] = _ms(f.allocate_timeout)
        if f.enroll_timeout is not None:
            d["enroll_timeout_ms"] = _ms(f.enroll_timeout)
        out["difs"].append(d)
    out["nodes"] = []
    for n in sc.nodes:
        ipcps = []
        for ip in n.ipcps:
            d = {"name": ip.name, "dif": ip.dif, "address": ip.address}
            _put(d, "over", ip.over)
            _put(d, "auth", ip.auth)
            ipcps.append(d)
        out["nodes"].append({"name": n.name, "kind": n.kind, "ipcps": ipcps})
    out["links"] = []
    for ln in sc.links:
        d = {"a": ln.a, "b": ln.b, "rate_bps": ln.rate, "delay_ms": _ms(ln.delay)}
        _put(d, "ber", ln.ber, 0.0)
        _put(d, "metric", ln.metric, 1)
        _put(d, "name", ln.name, "")
        out["links"].append(d)
    out["apps"] = []
    for a in sc.apps:
        d = {"node": a.node, "apn": a.apn, "role": a.role}
        _put(d, "dst", a.dst)
        if a.role == "ping-initiator":
            d["count"] = a.count
            d["interval_ms"] = _ms(a.interval)
            d["payload_bytes"] = a.payload_bytes
        q = {}
        _put(q, "reliable", a.qos.reliable)
        _put(q, "ordered", a.qos.ordered)
        if a.qos.max_delay is not None:
            q["max_delay_ms"] = _ms(a.qos.max_delay)
        _put(q, "avg_bandwidth_bps", a.qos.avg_bandwidth)
        if q:
            d["qos"] = q
        _put(d, "start_ms", _ms(a.start), 0)
        _put(d, "timeout_ms", _ms(a.timeout), 1000)
        _put(d, "deny", a.deny, False)
        _put(d, "gap_after", a.gap_after)
        _put(d, "gap_ms", _ms(a.gap), 0)
        out["apps"].append(d)
    if sc.da_directory:
        out["da_directory"] = [{"apn": e.apn, "difs": list(e.difs)} for e in sc.da_directory]
    return out


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)
