"""Applications, the IPC resource manager and the DIF allocator directory.

The only application protocol is a ping: the initiator writes requests that
carry a sequence number and send time, the responder writes each one back
with its own receive time stamped in. Latency samples use the global
simulated clock, so one-way delay needs no clock synchronisation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import AllocationFailed, FlowNotAllocated, NoRoute, SimError
from .identifiers import Apn, QosRequirements

PING_REQUEST = 1
PING_RESPONSE = 2
PING_HEADER = struct.Struct(">BQQQ")  # op, seq, send_ts, recv_ts
MIN_PING_PAYLOAD = PING_HEADER.size


def encode_ping(op, seq, send_ts, recv_ts, size) -> bytes:
    head = PING_HEADER.pack(op, seq, send_ts, recv_ts)
    return head + bytes(max(0, size - len(head)))


def decode_ping(data: bytes):
    if len(data) < PING_HEADER.size:
        raise ValueError(f"ping message too short ({len(data)} bytes)")
    return PING_HEADER.unpack_from(data)


@dataclass
class PingSample:
    seq: int
    send_time: int
    recv_time: int | None = None
    response_time: int | None = None

    @property
    def lost(self) -> bool:
        return self.response_time is None

    @property
    def one_way(self) -> int | None:
        return None if self.recv_time is None else self.recv_time - self.send_time

    @property
    def rtt(self) -> int | None:
        return None if self.response_time is None else self.response_time - self.send_time


class DaDirectory:
    """Static map from APN to the DIFs (and nodes) where it can be reached."""

    def __init__(self):
        self.entries: dict[str, list[tuple[str, str]]] = {}

    def register(self, apn, dif: str, node: str):
        placements = self.entries.setdefault(str(apn), [])
        if (dif, node) not in placements:
            placements.append((dif, node))

    def placements(self, apn) -> list[tuple[str, str]]:
        return list(self.entries.get(str(apn), []))

    def lookup(self, apn) -> list[str]:
        out = []
        for dif, _node in self.entries.get(str(apn), []):
            if dif not in out:
                out.append(dif)
        return out


def da_lookup(dst, directory: DaDirectory) -> list[str]:
    return directory.lookup(dst)


@dataclass
class IrmEntry:
    port_id: int
    ae: object
    remote: Apn
    status: str
    ipcp: object = None


class Irm:
    """Per-node IPC resource manager: delegates (de)allocation to IPCPs."""

    def __init__(self, node, net):
        self.node = node
        self.net = net
        self.table: dict[int, IrmEntry] = {}

    def _trace(self, ev, **kw):
        self.net.tracer.emit(self.node.name, "irm", ev, **kw)

    def choose_ipcp(self, dst: Apn):
        for dif in da_lookup(dst, self.net.directory):
            ipcp = self.node.ipcp_in(dif)
            if ipcp is not None:
                return ipcp
        return None

    def allocate(self, app, dst: Apn, qos: QosRequirements, user):
        ipcp = self.choose_ipcp(dst)
        if ipcp is None:
            self._trace("IRM_ALLOC_FAILED", src_apn=app.apn, dst_apn=dst, reason="no-route")
            raise NoRoute(f"{dst} is not reachable from {self.node.name}")
        self._trace("IRM_ALLOCATE", src_apn=app.apn, dst_apn=dst, dif=ipcp.dif.name)
        fai = ipcp.fa.submit_allocate(app.apn, dst, qos, user)
        if fai.port_id in self.node.bindings:
            self.table[fai.port_id] = IrmEntry(fai.port_id, user, dst, "pending", ipcp)
        return fai

    def accepted(self, fai, user, ipcp):
        self.table[fai.port_id] = IrmEntry(fai.port_id, user, fai.remote_apn, "allocated", ipcp)

    def allocated(self, fai):
        entry = self.table.get(fai.port_id)
        if entry is not None:
            entry.status = "allocated"

    def released(self, port_id):
        self.table.pop(port_id, None)

    def write(self, port_id, data: bytes):
        entry = self.table.get(port_id)
        if entry is None:
            raise FlowNotAllocated(f"port {port_id} is not known to the IRM")
        return entry.ipcp.fa.write(port_id, data)

    def deallocate(self, port_id):
        entry = self.table.get(port_id)
        if entry is None:
            raise FlowNotAllocated(f"port {port_id} is not known to the IRM")
        entry.status = "releasing"
        return entry.ipcp.fa.deallocate(port_id)


@dataclass
class AppSpec:
    node: str
    apn: str
    role: str
    dst: str | None = None
    count: int = 0
    interval: int = 0
    payload_bytes: int = 64
    qos: QosRequirements = field(default_factory=QosRequirements)
    start: int = 0
    timeout: int = 1_000_000_000
    deny: bool = False
    gap_after: int | None = None
    gap: int = 0


class AppProcess:
    infrastructure = False

    def __init__(self, net, node, spec: AppSpec):
        self.net = net
        self.node = node
        self.spec = spec
        self.apn = Apn.parse(spec.apn)
        self.sim = net.sim

    @property
    def irm(self) -> Irm:
        return self.node.irm

    def trace(self, ev, **kw):
        self.net.tracer.emit(self.node.name, f"app.{self.apn}", ev, **kw)

    def start(self):
        pass

    def incoming_user(self, ipcp, src_apn):
        return _Refuser(ipcp)

    def finished(self) -> bool:
        return True


class _Refuser:
    """Flow user for an application that takes no incoming flows."""

    infrastructure = False

    def __init__(self, ipcp):
        self.ipcp = ipcp

    def on_flow_request(self, fai):
        self.ipcp.fa.deny(fai, "not-accepting")


class PingInitiator(AppProcess):
    def __init__(self, net, node, spec):
        super().__init__(net, node, spec)
        self.samples: list[PingSample] = []
        self.port_id = None
        self.fai = None
        self.state = "idle"
        self.failure = None
        self.flow_errors = 0
        self._sent = 0
        self._answered = 0
        self._timer = None

    def start(self):
        self.sim.schedule(self.spec.start, self._open, kind="app-start")

    def _open(self):
        self.state = "allocating"
        self.trace("APP_START", dst=self.spec.dst, count=self.spec.count)
        try:
            self.fai = self.irm.allocate(self, Apn.parse(self.spec.dst), self.spec.qos, self)
        except (AllocationFailed, SimError) as exc:
            self._fail(getattr(exc, "reason", str(exc)))

    def _fail(self, reason):
        self.state = "failed"
        self.failure = reason
        self.trace("APP_ALLOC_FAILED", dst=self.spec.dst, reason=reason)

    # flow user interface

    def allocated(self, fai):
        self.port_id = fai.port_id
        self.irm.allocated(fai)
        self.state = "running"
        self.trace("APP_FLOW_UP", port=fai.port_id, dst=self.spec.dst)
        if self.spec.count <= 0:
            self.finish()
        else:
            self._send_next()

    def failed(self, fai, reason):
        self.irm.released(fai.port_id)
        self._fail(reason)

    def deliver(self, sdu):
        op, seq, send_ts, recv_ts = decode_ping(sdu.data)
        if op != PING_RESPONSE or not 1 <= seq <= len(self.samples):
            self.trace("APP_UNEXPECTED", op=op, seq=seq)
            return
        sample = self.samples[seq - 1]
        if sample.response_time is not None:
            self.trace("APP_DUP", seq=seq)
            return
        sample.recv_time = recv_ts
        sample.response_time = self.sim.now
        self._answered += 1
        self.trace("APP_RECV", seq=seq, one_way=sample.one_way, rtt=sample.rtt)
        if self._answered == self.spec.count:
            self.finish()

    def remote_release(self, fai):
        self.state = "released-by-peer"
        self.sim.cancel(self._timer)

    def deallocated(self, fai):
        self.irm.released(fai.port_id)
        self.trace("APP_FLOW_DOWN", port=fai.port_id)
        if self.state != "released-by-peer":
            self.state = "done"

    def flow_error(self, fai, err):
        self.flow_errors += 1

    # ping schedule

    def _send_next(self):
        if self.state != "running":
            return
        seq = self._sent + 1
        now = self.sim.now
        sample = PingSample(seq, now)
        self.samples.append(sample)
        self._sent = seq
        data = encode_ping(PING_REQUEST, seq, now, 0, self.spec.payload_bytes)
        self.trace("APP_SEND", seq=seq, bytes=len(data))
        try:
            self.irm.write(self.port_id, data)
        except FlowNotAllocated as exc:
            self.trace("APP_WRITE_FAILED", seq=seq, reason=str(exc))
        if seq < self.spec.count:
            wait = self.spec.interval
            if self.spec.gap_after and seq == self.spec.gap_after:
                wait += self.spec.gap
            self.sim.schedule_in(wait, self._send_next, kind="app-send")
        else:
            self._timer = self.sim.schedule_in(self.spec.timeout, self.finish, kind="app-timeout")

    def finish(self):
        """Application-level release, then hand the flow back."""
        if self.state != "running":
            return
        self.state = "releasing"
        self.sim.cancel(self._timer)
        lost = sum(1 for s in self.samples if s.lost)
        self.trace("APP_RELEASE", port=self.port_id, samples=len(self.samples), lost=lost)
        self.irm.deallocate(self.port_id)

    def finished(self) -> bool:
        return self.state in ("done", "failed", "released-by-peer")


class PingResponder(AppProcess):
    def __init__(self, net, node, spec):
        super().__init__(net, node, spec)
        self.received: list[int] = []
        self.flows = 0

    def incoming_user(self, ipcp, src_apn):
        return ResponderFlow(self, ipcp)


class ResponderFlow:
    infrastructure = False

    def __init__(self, app: PingResponder, ipcp):
        self.app = app
        self.ipcp = ipcp
        self.fai = None

    def on_flow_request(self, fai):
        self.fai = fai
        app = self.app
        if app.spec.deny:
            app.trace("APP_DENY", src=fai.remote_apn)
            self.ipcp.fa.deny(fai, "denied")
            return
        app.trace("APP_ACCEPT", src=fai.remote_apn)
        self.ipcp.fa.accept(fai)

    def allocated(self, fai):
        self.app.flows += 1
        self.app.irm.accepted(fai, self, self.ipcp)
        self.app.trace("APP_FLOW_UP", port=fai.port_id, src=fai.remote_apn)

    def failed(self, fai, reason):
        pass

    def deliver(self, sdu):
        app = self.app
        op, seq, send_ts, _ = decode_ping(sdu.data)
        if op != PING_REQUEST:
            app.trace("APP_UNEXPECTED", op=op, seq=seq)
            return
        now = app.sim.now
        app.received.append(seq)
        reply = encode_ping(PING_RESPONSE, seq, send_ts, now, len(sdu.data))
        try:
            app.irm.write(self.fai.port_id, reply)
        except FlowNotAllocated as exc:
            app.trace("APP_WRITE_FAILED", seq=seq, reason=str(exc))

    def remote_release(self, fai):
        self.app.trace("APP_PEER_RELEASE", port=fai.port_id)

    def deallocated(self, fai):
        self.app.irm.released(fai.port_id)
        self.app.trace("APP_FLOW_DOWN", port=fai.port_id)


ROLES = {"ping-initiator": PingInitiator, "ping-responder": PingResponder}


def make_app(net, node, spec: AppSpec) -> AppProcess:
    return ROLES[spec.role](net, node, spec)
