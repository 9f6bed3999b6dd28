"""RIB daemon, enrollment and link-state routing.

Management messages travel as MGMT PDUs on the management flow (qos-id 0).
Enrollment is a four-state machine per neighbour; routing floods versioned
link-state advertisements over enrolled adjacencies and runs Dijkstra with a
lowest-address tie-break on the first hop.
"""

from __future__ import annotations

import enum
import heapq
import json
from dataclasses import dataclass, field

from .errors import NoManagementFlow
from .identifiers import MGMT_QOS_ID
from .pdu import Pdu, PduKind
from .rmt import ForwardingTable


class MsgKind(str, enum.Enum):
    CREATE_FLOW_REQUEST = "CreateFlowRequest"
    CREATE_FLOW_RESPONSE = "CreateFlowResponse"
    DELETE_FLOW_REQUEST = "DeleteFlowRequest"
    DELETE_FLOW_RESPONSE = "DeleteFlowResponse"
    M_CONNECT = "MConnect"
    M_CONNECT_RESPONSE = "MConnectResponse"
    ROUTING_UPDATE = "RoutingUpdate"


FLOW_KINDS = {MsgKind.CREATE_FLOW_REQUEST, MsgKind.CREATE_FLOW_RESPONSE,
              MsgKind.DELETE_FLOW_REQUEST, MsgKind.DELETE_FLOW_RESPONSE}
ENROLL_KINDS = {MsgKind.M_CONNECT, MsgKind.M_CONNECT_RESPONSE}


class UnknownKind(ValueError):
    pass


@dataclass
class MgmtMessage:
    kind: str
    src: int
    dst: int
    body: dict = field(default_factory=dict)

    @property
    def positive(self) -> bool:
        return self.body.get("result") == "+"

    def encode(self) -> bytes:
        doc = {"kind": str(self.kind.value if isinstance(self.kind, MsgKind) else self.kind),
               "src": self.src, "dst": self.dst, "body": self.body}
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def decode(cls, data: bytes) -> "MgmtMessage":
        doc = json.loads(data.decode())
        try:
            kind = MsgKind(doc["kind"])
        except ValueError:
            raise UnknownKind(doc.get("kind")) from None
        return cls(kind, int(doc["src"]), int(doc["dst"]), doc.get("body") or {})

    def reply(self, kind, result, **extra) -> "MgmtMessage":
        body = dict(self.body)
        body["result"] = "+" if result else "-"
        body.update(extra)
        return MgmtMessage(kind, self.dst, self.src, body)


class RibDaemon:
    def __init__(self, ipcp):
        self.ipcp = ipcp
        self.sent = 0
        self.received = 0

    def _trace(self, ev, **kw):
        self.ipcp.trace("ribd", ev, **kw)

    def send(self, msg: MgmtMessage, via=None):
        """Send ``msg``; ``via`` pins the next hop (neighbour-scoped messages)."""
        ipcp = self.ipcp
        if via is not None and not ipcp.has_mgmt_flow(via):
            raise NoManagementFlow(f"{ipcp.label}: no management flow to {via}")
        pdu = Pdu(ipcp.address, msg.dst, 0, 0, MGMT_QOS_ID, PduKind.MGMT, 0, msg.encode())
        pdu.rank = ipcp.rank
        nh = via
        if nh is None and msg.dst != ipcp.address:
            nh = ipcp.rmt.table.lookup(msg.dst, MGMT_QOS_ID)
        self.sent += 1
        details = {"msg": msg.kind.value, "src": msg.src, "dst": msg.dst, "via": nh}
        details.update(_summary(msg))
        self._trace("RIBD_SEND", **details)
        ipcp.rmt.send(pdu, via=via)

    def deliver(self, pdu: Pdu):
        try:
            msg = MgmtMessage.decode(pdu.payload)
        except (UnknownKind, ValueError, KeyError) as exc:
            self._trace("RIBD_DROP", src=pdu.src_addr, reason=f"bad-message:{type(exc).__name__}")
            return None
        self.received += 1
        details = {"msg": msg.kind.value, "src": msg.src, "dst": msg.dst}
        details.update(_summary(msg))
        self._trace("RIBD_RECV", **details)
        return self.dispatch(msg)

    def dispatch(self, msg: MgmtMessage):
        ipcp = self.ipcp
        if msg.kind in FLOW_KINDS:
            return ipcp.fa.handle(msg)
        if msg.kind in ENROLL_KINDS:
            return ipcp.enrollment.handle(msg)
        if msg.kind == MsgKind.ROUTING_UPDATE:
            return ipcp.routing.routing_step(msg.body, sender=msg.src)
        self._trace("RIBD_DROP", src=msg.src, reason="unknown-kind")
        return None


def _summary(msg: MgmtMessage) -> dict:
    b = msg.body
    out = {}
    if msg.kind in FLOW_KINDS:
        out["src_apn"] = b.get("src_apn")
        out["dst_apn"] = b.get("dst_apn")
        out["qos"] = b.get("qos")
        out["scep"] = b.get("src_cep")
        out["dcep"] = b.get("dst_cep")
    elif msg.kind == MsgKind.ROUTING_UPDATE:
        out["origin"] = b.get("origin")
        out["version"] = b.get("version")
    if "result" in b:
        out["result"] = b["result"]
    return out


# -- enrollment ------------------------------------------------------------

class EnrollState(str, enum.Enum):
    NOT_ENROLLED = "NOT_ENROLLED"
    CONNECTING = "CONNECTING"
    ENROLLED = "ENROLLED"
    FAILED = "FAILED"


@dataclass
class EnrollmentFsm:
    peer: int
    dif: str
    auth: str
    state: EnrollState = EnrollState.NOT_ENROLLED
    timer: object = None
    bootstrapping: bool = False


class Enrollment:
    def __init__(self, ipcp):
        self.ipcp = ipcp
        self.fsms: dict[int, EnrollmentFsm] = {}
        self.joined = False

    def fsm(self, peer) -> EnrollmentFsm:
        f = self.fsms.get(peer)
        if f is None:
            f = EnrollmentFsm(peer, self.ipcp.dif.name, self.ipcp.auth)
            self.fsms[peer] = f
        return f

    def state(self, peer) -> EnrollState:
        f = self.fsms.get(peer)
        return f.state if f else EnrollState.NOT_ENROLLED

    def enrolled_peers(self) -> list[int]:
        return sorted(p for p, f in self.fsms.items() if f.state == EnrollState.ENROLLED)

    def _set(self, f: EnrollmentFsm, state: EnrollState, **kw):
        old = f.state
        if old == state:
            return
        f.state = state
        self.ipcp.trace("enroll", "ENROLL_STATE", peer=f.peer, old=old.value, new=state.value,
                        dif=f.dif, **kw)
        if state in (EnrollState.ENROLLED, EnrollState.FAILED):
            self.ipcp.sim.cancel(f.timer)
            f.timer = None
        if state == EnrollState.ENROLLED:
            self.ipcp.on_enrolled(f.peer)
        elif state == EnrollState.FAILED:
            self.ipcp.on_enroll_failed(f.peer)

    def join(self, eager=False):
        """Enroll with every configured neighbour not already in progress."""
        self.joined = True
        for peer in sorted(self.ipcp.adjacencies):
            if eager and peer < self.ipcp.address:
                continue  # the lower address initiates
            self.start(peer)

    def in_progress(self) -> bool:
        return any(f.state == EnrollState.CONNECTING or f.bootstrapping for f in self.fsms.values())

    def start(self, peer):
        """Bootstrap the management flow to ``peer`` and then enroll."""
        f = self.fsm(peer)
        if f.state in (EnrollState.CONNECTING, EnrollState.ENROLLED) or f.bootstrapping:
            return
        if f.state == EnrollState.FAILED:
            return
        f.bootstrapping = True
        self.ipcp.ra.get_mgmt_flow(peer, lambda _flow: self._mgmt_ready(peer),
                                   lambda reason: self._mgmt_failed(peer, reason))

    def _mgmt_ready(self, peer):
        f = self.fsm(peer)
        f.bootstrapping = False
        if f.state == EnrollState.NOT_ENROLLED:
            self.enroll_initiate(peer)

    def _mgmt_failed(self, peer, reason):
        f = self.fsm(peer)
        f.bootstrapping = False
        if f.state != EnrollState.ENROLLED:
            self._set(f, EnrollState.FAILED, reason=reason)

    def enroll_initiate(self, peer) -> EnrollmentFsm:
        ipcp = self.ipcp
        f = self.fsm(peer)
        if f.state != EnrollState.NOT_ENROLLED:
            return f
        msg = MgmtMessage(MsgKind.M_CONNECT, ipcp.address, peer,
                          {"dif": ipcp.dif.name, "auth": ipcp.auth, "src_apn": str(ipcp.apn)})
        self._set(f, EnrollState.CONNECTING)
        f.timer = ipcp.sim.schedule_in(ipcp.dif.enroll_timeout_ns, self._timeout, peer, kind="enroll-timeout")
        ipcp.ribd.send(msg, via=peer)
        return f

    def _timeout(self, peer):
        f = self.fsm(peer)
        if f.state == EnrollState.CONNECTING:
            self._set(f, EnrollState.FAILED, reason="timeout")

    def handle(self, msg: MgmtMessage):
        ipcp = self.ipcp
        peer = msg.src
        f = self.fsm(peer)
        if msg.kind == MsgKind.M_CONNECT:
            ok = msg.body.get("dif") == ipcp.dif.name and msg.body.get("auth") == ipcp.auth
            reason = "" if ok else ("dif-mismatch" if msg.body.get("dif") != ipcp.dif.name else "auth")
            reply = msg.reply(MsgKind.M_CONNECT_RESPONSE, ok, reason=reason)
            ipcp.ribd.send(reply, via=peer)
            if ok:
                self._set(f, EnrollState.ENROLLED, role="responder")
            elif f.state != EnrollState.ENROLLED:
                self._set(f, EnrollState.FAILED, reason=reason, role="responder")
            return f
        if msg.kind == MsgKind.M_CONNECT_RESPONSE:
            if f.state != EnrollState.CONNECTING:
                ipcp.trace("enroll", "ENROLL_IGNORED", peer=peer, state=f.state.value)
                return f
            if msg.positive:
                self._set(f, EnrollState.ENROLLED, role="initiator")
            else:
                self._set(f, EnrollState.FAILED, reason=msg.body.get("reason") or "refused",
                          role="initiator")
            return f
        return f


# -- routing -----------------------------------------------------------------

def shortest_next_hops(graph: dict, source) -> dict:
    """Dijkstra from ``source`` over ``graph[u][v] = cost`` (costs > 0).

    Returns ``{dst: (cost, next_hop)}``; among equal-cost paths the one whose
    first hop has the lowest address wins.
    """
    best = {source: (0, None)}
    heap = [(0, -1, source)]
    done = set()
    while heap:
        d, nh, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in graph.get(u, {}).items():
            if v in done:
                continue
            cand = (d + w, v if u == source else nh)
            cur = best.get(v)
            if cur is None or cand < cur:
                best[v] = cand
                heapq.heappush(heap, (cand[0], cand[1], v))
    best.pop(source)
    return best


class LinkStateRouting:
    """Versioned link-state flooding; installs a next-hop table into the RMT."""

    name = "link-state"

    def __init__(self, ipcp):
        self.ipcp = ipcp
        self.lsdb: dict[int, tuple[int, dict]] = {}
        self.version = 0
        self.neighbors: dict[int, int] = {}
        self.updates_sent = 0
        self.routes: dict = {}

    def neighbor_up(self, peer, metric=1):
        self.neighbors[peer] = metric
        self._originate()
        # database exchange with the new neighbour
        for origin in sorted(self.lsdb):
            if origin == self.ipcp.address:
                continue
            self._send(peer, origin, *self.lsdb[origin])

    def neighbor_down(self, peer):
        if self.neighbors.pop(peer, None) is not None:
            self._originate()

    def _originate(self):
        self.version += 1
        me = self.ipcp.address
        self.lsdb[me] = (self.version, dict(sorted(self.neighbors.items())))
        self._flood(me, exclude=None)
        self.recompute()

    def _flood(self, origin, exclude):
        version, nbrs = self.lsdb[origin]
        for peer in sorted(self.neighbors):
            if peer == exclude or peer == origin:
                continue
            self._send(peer, origin, version, nbrs)

    def _send(self, peer, origin, version, nbrs):
        body = {"origin": origin, "version": version,
                "neighbors": [[n, m] for n, m in sorted(nbrs.items())]}
        self.updates_sent += 1
        self.ipcp.ribd.send(MgmtMessage(MsgKind.ROUTING_UPDATE, self.ipcp.address, peer, body), via=peer)

    def routing_step(self, update=None, sender=None) -> ForwardingTable:
        if update is not None:
            origin = int(update["origin"])
            version = int(update["version"])
            stored = self.lsdb.get(origin)
            if origin == self.ipcp.address or (stored is not None and version <= stored[0]):
                self.ipcp.trace("routing", "ROUTING_STALE", origin=origin, version=version)
                return self.ipcp.rmt.table
            self.lsdb[origin] = (version, {int(n): int(m) for n, m in update["neighbors"]})
            self._flood(origin, exclude=sender)
        return self.recompute()

    def graph(self) -> dict:
        """Adjacency map using only links both ends advertise."""
        g = {}
        for u, (_v, nbrs) in self.lsdb.items():
            for v, w in nbrs.items():
                back = self.lsdb.get(v)
                if back is not None and u in back[1]:
                    g.setdefault(u, {})[v] = w
        return g

    def recompute(self) -> ForwardingTable:
        ipcp = self.ipcp
        routes = shortest_next_hops(self.graph(), ipcp.address)
        table = ForwardingTable()
        qos_ids = [MGMT_QOS_ID] + sorted(ipcp.net.cubes)
        for dst in sorted(routes):
            _cost, nh = routes[dst]
            for q in qos_ids:
                table.entries[(dst, q)] = nh
        self.routes = routes
        if table.entries != ipcp.rmt.table.entries:
            ipcp.rmt.table = table
            ipcp.trace("routing", "ROUTING_INSTALL", entries=len(routes), digest=table.digest(),
                       version=self.version)
            ipcp.on_routes_changed()
        return ipcp.rmt.table

    def next_hops(self) -> dict:
        return {d: nh for d, (_c, nh) in self.routes.items()}
