"""IPC process assembly.

An :class:`Ipcp` is one node's member of one DIF. It bundles the flow
allocator, resource allocator, RMT, RIB daemon, enrollment and routing, plus
one EFCP instance per flow endpoint. Rank-0 IPCPs sit on medium links; every
other IPCP reaches its neighbours through (N-1)-flows of an IPCP below it on
the same node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .efcp import DeltaTParams, EfcpInstance, EfcpPolicy, delta_t
from .errors import StaleState
from .flow_alloc import FlowAllocator, ResourceAllocator
from .identifiers import MGMT_CUBE, MGMT_QOS_ID, Apn, IdAllocator
from .mgmt import Enrollment, LinkStateRouting, MgmtMessage, MsgKind, RibDaemon
from .pdu import PduKind
from .rmt import Rmt


@dataclass
class DifConfig:
    name: str
    rank: int
    timers: DeltaTParams
    rto: int | None = None
    max_pdu_payload: int = 1400
    queue_capacity: int = 100
    scheduler: str = "fifo"
    routing: str = "link-state"
    auth: str = ""
    bootstrap: str = "lazy"
    allocate_timeout: int | None = None
    enroll_timeout: int | None = None

    @property
    def delta_t(self) -> int:
        return delta_t(self.timers)

    @property
    def policy(self) -> EfcpPolicy:
        return EfcpPolicy(self.timers, self.rto, self.max_pdu_payload)

    @property
    def allocate_timeout_ns(self) -> int:
        return self.allocate_timeout if self.allocate_timeout is not None else 10 * self.delta_t

    @property
    def enroll_timeout_ns(self) -> int:
        return self.enroll_timeout if self.enroll_timeout is not None else 10 * self.delta_t


@dataclass
class Adjacency:
    peer: int  # neighbour address in this DIF
    peer_apn: Apn
    lower: "Ipcp | None" = None  # IPCP below that reaches the neighbour
    peer_endpoint: str = ""  # rank 0 only
    metric: int = 1
    link: object = None


ROUTING_POLICIES = {"link-state": LinkStateRouting}


def _noop(*_a):
    return None


class Ipcp:
    def __init__(self, net, node, name: str, dif: DifConfig, address: int, auth=None):
        self.net = net
        self.node = node
        self.name = name
        self.dif = dif
        self.address = address
        self.rank = dif.rank
        self.auth = dif.auth if auth is None else auth
        self.sim = net.sim
        self.tracer = net.tracer
        self.accounting = net.accounting
        self.label = f"{node.name}.{name}"
        self.apn = Apn(self.label)
        self.endpoint = f"{node.name}/{name}"
        self.over: list[Ipcp] = []
        self.adjacencies: dict[int, Adjacency] = {}
        self.ceps = IdAllocator(scope=self.label)
        self.efcp: dict[int, EfcpInstance] = {}
        self.link_ports: dict = {}
        self._port_by_link: dict = {}
        self.flow_errors: list = []

        self.rmt = Rmt(self.sim, node.name, f"{name}.rmt", address, self.tracer, self.accounting,
                       capacity=dif.queue_capacity, scheduler=dif.scheduler)
        self.rmt.resolve_port = self._resolve_port
        self.rmt.deliver_local = self._deliver_local
        self.rmt.relay_hook = self._relay_hook
        self.ribd = RibDaemon(self)
        self.enrollment = Enrollment(self)
        self.routing = ROUTING_POLICIES[dif.routing](self)
        self.fa = FlowAllocator(self)
        self.ra = ResourceAllocator(self)
        self.rmt.on_occupancy = self.ra.on_occupancy

    def __repr__(self):
        return f"Ipcp({self.label}, dif={self.dif.name}, addr={self.address})"

    def trace(self, part, ev, **kw):
        self.tracer.emit(self.node.name, f"{self.name}.{part}", ev, **kw)

    # -- wiring -----------------------------------------------------------

    def attach_link(self, link, adjacency: Adjacency):
        """Rank 0: one RMT port per medium link, draining onto the wire."""
        medium = self.net.medium
        endpoint = self.endpoint

        def sink(pdu, link=link):
            medium.transmit(link, pdu, endpoint)
            return link.serialization_ns(pdu.size_bits)

        port = self.rmt.add_port(("link", adjacency.peer), f"{link.name}", sink=sink)
        self.link_ports[adjacency.peer] = port
        self._port_by_link[link.index] = port
        self.adjacencies[adjacency.peer] = adjacency
        return port

    def link_port(self, peer):
        return self.link_ports.get(peer)

    def on_medium(self, pdu, link):
        self.rmt.receive(pdu, self._port_by_link[link.index])

    def _resolve_port(self, next_hop, qos):
        if self.rank == 0:
            return self.link_ports.get(next_hop)
        port = self.rmt.ports.get((next_hop, qos))
        if port is None and next_hop in self.adjacencies:
            # first PDU toward this neighbour at this qos: provision on demand
            self.ra.get_or_allocate_n1_flow(next_hop, qos, _noop, _noop)
            port = self.rmt.ports.get((next_hop, qos))
        return port

    def _relay_hook(self, pdu, next_hop) -> bool:
        """Hold a relayed flow request until the next hop's data flow exists."""
        if self.rank == 0 or pdu.kind != PduKind.MGMT:
            return False
        try:
            msg = MgmtMessage.decode(pdu.payload)
        except ValueError:
            return False
        if msg.kind not in (MsgKind.CREATE_FLOW_REQUEST, MsgKind.CREATE_FLOW_RESPONSE):
            return False
        qos = int(msg.body.get("qos", MGMT_QOS_ID))
        if qos == MGMT_QOS_ID or self.ra.has_flow(next_hop, qos):
            return False
        if msg.kind == MsgKind.CREATE_FLOW_RESPONSE and not msg.positive:
            return False

        def go(_arg=None):
            self.rmt.forward_to(pdu, next_hop)

        self.ra.get_or_allocate_n1_flow(next_hop, qos, go, go)
        return True

    def _deliver_local(self, pdu):
        if pdu.kind == PduKind.MGMT:
            self.ribd.deliver(pdu)
            return
        inst = self.efcp.get(pdu.dst_cep)
        if inst is None:
            self.trace("efcp", "EFCP_NO_CONN", cep=pdu.dst_cep, seq=pdu.seq, kind=pdu.kind.name)
            if pdu.kind == PduKind.DATA:
                self.accounting.lose(pdu.carried)
            return
        try:
            inst.receive(pdu)
        except StaleState as exc:
            self.trace("efcp", "EFCP_STALE", conn=inst.conn, seq=pdu.seq, reason=str(exc))

    # -- component callbacks ------------------------------------------------

    def has_mgmt_flow(self, peer) -> bool:
        if self.rank == 0 and peer in self.adjacencies and not self.ra.has_flow(peer, MGMT_QOS_ID):
            # the medium is always there; record it as this IPCP's management flow
            self.ra.get_mgmt_flow(peer, _noop, _noop)
        return self.ra.has_flow(peer, MGMT_QOS_ID)

    def spawn_efcp(self, fai) -> EfcpInstance:
        cube = MGMT_CUBE if fai.qos_id == MGMT_QOS_ID else self.net.cubes[fai.qos_id]

        def deliver(sdu, fai=fai):
            if fai.user is not None:
                fai.user.deliver(sdu)

        inst = EfcpInstance(self.sim, fai.connection_id, self.address, fai.remote_addr, cube,
                            self.dif.policy, tx=self.rmt.send, deliver=deliver, tracer=self.tracer,
                            node=self.node.name, comp=f"{self.name}.efcp", accounting=self.accounting,
                            on_flow_error=lambda _inst, err, fai=fai: self.on_flow_error(fai, err),
                            rank=self.rank)
        self.efcp[fai.cep] = inst
        return inst

    def on_flow_error(self, fai, err):
        self.flow_errors.append((self.sim.now, fai.fai_id, err))
        self.net.flow_errors.append((self.label, fai.fai_id, err))
        self.trace("fa", "FA_FLOW_ERROR", fai=fai.fai_id, seq=err.seq, reason=err.reason)
        handler = getattr(fai.user, "flow_error", None)
        if handler is not None:
            handler(fai, err)

    def join(self):
        self.enrollment.join(eager=self.dif.bootstrap == "eager")

    def on_enrolled(self, peer):
        adj = self.adjacencies.get(peer)
        self.routing.neighbor_up(peer, adj.metric if adj else 1)
        if not self.enrollment.joined:
            self.join()

    def on_enroll_failed(self, peer):
        self.routing.neighbor_down(peer)
        self.fa.on_enrollment_settled()

    def on_routes_changed(self):
        self.fa.on_routes_changed()

    # -- audits -------------------------------------------------------------

    def live_fais(self):
        return self.fa.live()

    def infrastructure_ceps(self) -> set:
        return {f.cep for f in self.fa.live() if f.infrastructure and f.cep}


@dataclass(eq=False)
class Node:
    name: str
    kind: str
    ports: IdAllocator = None
    ipcps: dict = field(default_factory=dict)
    apps: dict = field(default_factory=dict)
    bindings: dict = field(default_factory=dict)  # port-id -> (ipcp, user)
    irm: object = None

    def __post_init__(self):
        if self.ports is None:
            self.ports = IdAllocator(scope=self.name)

    def ipcp_by_label(self, label) -> Ipcp:
        return self.ipcps[label.split(".", 1)[1]]

    def ipcp_in(self, dif_name):
        for ipcp in self.ipcps.values():
            if ipcp.dif.name == dif_name:
                return ipcp
        return None

    def bind_port(self, port_id, ipcp, user):
        self.bindings[port_id] = (ipcp, user)

    def unbind_port(self, port_id):
        self.bindings.pop(port_id, None)

    def local_user(self, dst_apn: Apn, ipcp: Ipcp, src_apn: Apn, body: dict):
        """Who on this node answers a flow request addressed to ``dst_apn``."""
        app = self.apps.get(str(dst_apn))
        if app is not None:
            return app.incoming_user(ipcp, src_apn)
        for upper in self.ipcps.values():
            if upper.apn == dst_apn and ipcp in upper.over:
                peer = ipcp.net.ipcp_by_apn.get(str(src_apn))
                if peer is None or peer.dif.name != upper.dif.name:
                    return None
                qos = body.get("user_qos")
                return upper.ra.incoming_user(peer.address, MGMT_QOS_ID if qos is None else int(qos))
        return None

    def irm_table(self) -> dict:
        return dict(self.irm.table) if self.irm is not None else {}
