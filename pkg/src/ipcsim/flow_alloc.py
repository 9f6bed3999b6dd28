"""Flow allocator, flow allocator instances and the resource allocator.

Allocation at the initiator: pick a QoS cube, create the FAI and its EFCP
instance, make sure the IPCP is enrolled and has a route, provision the
(N-1)-flow toward the next hop, then send CreateFlowRequest. The responder
asks the destination user, answers with CreateFlowResponse, and both ends
tear down with DeleteFlowRequest/DeleteFlowResponse.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from .efcp import EfcpInstance
from .errors import (AllocationFailed, DuplicateRequest, FlowNotAllocated, NoQosCube,
                     NoRoute, NoSuchFlow, NoSuchLink, SimError)
from .identifiers import MGMT_QOS_ID, Apn, ConnectionId, QosRequirements, select_cube
from .mgmt import MgmtMessage, MsgKind
from .pdu import Sdu
from .rmt import mux

log = logging.getLogger(__name__)


class FaiState(str, enum.Enum):
    NULL = "NULL"
    ALLOC_PENDING = "ALLOC_PENDING"
    NOTIFY_PENDING = "NOTIFY_PENDING"
    ALLOCATED = "ALLOCATED"
    DEALLOC_PENDING = "DEALLOC_PENDING"
    DEALLOCATED = "DEALLOCATED"


S = FaiState
TRANSITIONS = frozenset({
    (S.NULL, S.ALLOC_PENDING),
    (S.NULL, S.NOTIFY_PENDING),
    (S.NOTIFY_PENDING, S.ALLOCATED),
    (S.NOTIFY_PENDING, S.DEALLOCATED),
    (S.ALLOC_PENDING, S.ALLOCATED),
    (S.ALLOC_PENDING, S.DEALLOCATED),
    (S.ALLOCATED, S.DEALLOC_PENDING),
    (S.ALLOCATED, S.DEALLOCATED),
    (S.DEALLOC_PENDING, S.DEALLOCATED),
})


class InvalidTransition(SimError):
    pass


class UnexpectedMessage(SimError):
    pass


class UnknownDestinationApn(SimError):
    pass


@dataclass(eq=False)
class FaiRecord:
    fai_id: int
    local_apn: Apn
    remote_apn: Apn
    qos_id: int
    ipcp: str
    initiator: bool
    remote_addr: int
    port_id: int = 0
    cep: int = 0
    remote_cep: int = 0
    state: FaiState = FaiState.NULL
    user: object = None
    efcp: EfcpInstance | None = None
    timer: object = None
    user_qos: int | None = None
    requirements: QosRequirements | None = None
    request: object = None
    history: list = field(default_factory=list)

    @property
    def connection_id(self) -> ConnectionId:
        return ConnectionId(self.cep, self.remote_cep, self.qos_id)

    @property
    def infrastructure(self) -> bool:
        return getattr(self.user, "infrastructure", False)

    def descriptor(self) -> dict:
        src_apn, dst_apn = (self.local_apn, self.remote_apn) if self.initiator else (self.remote_apn, self.local_apn)
        src_cep, dst_cep = (self.cep, self.remote_cep) if self.initiator else (self.remote_cep, self.cep)
        d = {"src_apn": str(src_apn), "dst_apn": str(dst_apn), "src_cep": src_cep,
             "dst_cep": dst_cep, "qos": self.qos_id}
        if self.user_qos is not None:
            d["user_qos"] = self.user_qos
        return d


class FlowAllocator:
    def __init__(self, ipcp):
        self.ipcp = ipcp
        self.fais: dict[int, FaiRecord] = {}
        self.by_port: dict[int, FaiRecord] = {}
        self.by_cep: dict[int, FaiRecord] = {}
        self._next_fai = 1
        self._route_waiters: list = []  # (dst, callback, fai)
        self.completed = 0
        self.user_allocated = 0
        self.user_deallocated = 0

    # -- bookkeeping -------------------------------------------------------

    def _trace(self, ev, **kw):
        self.ipcp.trace("fa", ev, **kw)

    def transition(self, fai: FaiRecord, new: FaiState, **kw):
        old = fai.state
        if (old, new) not in TRANSITIONS:
            raise InvalidTransition(f"FAI {fai.fai_id}: {old.value} -> {new.value}")
        fai.state = new
        fai.history.append((self.ipcp.sim.now, old, new))
        self.ipcp.trace("fai", "FAI_STATE", fai=fai.fai_id, old=old.value, new=new.value,
                        local=fai.local_apn, remote=fai.remote_apn, port=fai.port_id or None,
                        conn=fai.connection_id, dif=self.ipcp.dif.name, **kw)
        if not fai.infrastructure:
            if new == FaiState.ALLOCATED:
                self.user_allocated += 1
            elif new == FaiState.DEALLOCATED and old in (FaiState.ALLOCATED, FaiState.DEALLOC_PENDING):
                self.user_deallocated += 1
        if new == FaiState.DEALLOCATED:
            self.fais.pop(fai.fai_id, None)
            self.completed += 1

    def _new_fai(self, local_apn, remote_apn, qos_id, initiator, remote_addr, user, user_qos=None):
        fai = FaiRecord(self._next_fai, local_apn, remote_apn, qos_id, self.ipcp.label,
                        initiator, remote_addr, user=user, user_qos=user_qos)
        self._next_fai += 1
        self.fais[fai.fai_id] = fai
        return fai

    def _claim_ids(self, fai: FaiRecord):
        ipcp = self.ipcp
        fai.port_id = ipcp.node.ports.allocate()
        fai.cep = ipcp.ceps.allocate()
        self.by_port[fai.port_id] = fai
        self.by_cep[fai.cep] = fai
        ipcp.node.bind_port(fai.port_id, ipcp, fai.user)

    def _spawn_efcp(self, fai: FaiRecord):
        ipcp = self.ipcp
        fai.efcp = ipcp.spawn_efcp(fai)
        ipcp.trace("efcp", "EFCP_CREATE", conn=fai.connection_id, fai=fai.fai_id)

    def _release(self, fai: FaiRecord):
        """Remove EFCP, disconnect bindings, free port-id and CEP-id."""
        ipcp = self.ipcp
        if fai.efcp is not None:
            fai.efcp.destroy()
            ipcp.efcp.pop(fai.cep, None)
            ipcp.trace("efcp", "EFCP_DESTROY", conn=fai.connection_id, fai=fai.fai_id)
            fai.efcp = None
        if fai.port_id:
            self.by_port.pop(fai.port_id, None)
            ipcp.node.unbind_port(fai.port_id)
            ipcp.node.ports.release(fai.port_id)
        if fai.cep:
            self.by_cep.pop(fai.cep, None)
            ipcp.ceps.release(fai.cep)
        ipcp.sim.cancel(fai.timer)
        fai.timer = None

    def live(self) -> list[FaiRecord]:
        return [f for f in self.fais.values() if f.state != FaiState.DEALLOCATED]

    # -- initiator side ----------------------------------------------------

    def submit_allocate(self, src_apn: Apn, dst_apn: Apn, qos, user, user_qos=None) -> FaiRecord:
        """Start allocating a flow; ``qos`` is QosRequirements or a cube id."""
        ipcp = self.ipcp
        dst_addr = ipcp.net.resolve(dst_apn, ipcp.dif.name)
        if dst_addr is None:
            raise NoRoute(f"{dst_apn} not reachable in {ipcp.dif.name}")
        if isinstance(qos, int):
            cube_id = qos
            if cube_id != MGMT_QOS_ID and cube_id not in ipcp.net.cubes:
                raise NoQosCube()
            req = None
        else:
            req = qos
            cube_id = select_cube(req, ipcp.net.cubes.values())
            if cube_id is None:
                raise NoQosCube()
        for f in self.fais.values():
            if (f.initiator and f.state == FaiState.ALLOC_PENDING and f.local_apn == src_apn
                    and f.remote_apn == dst_apn and f.qos_id == cube_id):
                raise DuplicateRequest(f"{src_apn}->{dst_apn} qos {cube_id} already pending")
        fai = self._new_fai(src_apn, dst_apn, cube_id, True, dst_addr, user, user_qos)
        fai.requirements = req
        self._trace("FA_ALLOC_REQ", fai=fai.fai_id, src_apn=src_apn, dst_apn=dst_apn, qos=cube_id,
                    dst=dst_addr, dif=ipcp.dif.name)
        self._claim_ids(fai)
        self.transition(fai, FaiState.ALLOC_PENDING)
        self._spawn_efcp(fai)
        fai.timer = ipcp.sim.schedule_in(ipcp.dif.allocate_timeout_ns, self._alloc_timeout, fai,
                                         kind="alloc-timeout")
        self.await_route(dst_addr, lambda nh: self._provision(fai, nh), fai)
        return fai

    def await_route(self, dst, callback, fai=None):
        """Run ``callback(next_hop)`` once a route to ``dst`` exists."""
        ipcp = self.ipcp
        if dst == ipcp.address:
            callback(None)
            return
        nh = ipcp.rmt.table.lookup(dst, MGMT_QOS_ID)
        if nh is not None:
            callback(nh)
            return
        self._route_waiters.append((dst, callback, fai))
        if not ipcp.enrollment.joined:
            ipcp.join()
        elif not ipcp.enrollment.enrolled_peers() and not ipcp.enrollment.in_progress():
            self._fail_waiters("not-enrolled")

    def on_routes_changed(self):
        waiters, self._route_waiters = self._route_waiters, []
        for dst, cb, fai in waiters:
            if fai is not None and fai.state in (FaiState.DEALLOCATED,):
                continue
            nh = self.ipcp.rmt.table.lookup(dst, MGMT_QOS_ID)
            if nh is None:
                self._route_waiters.append((dst, cb, fai))
            else:
                cb(nh)

    def on_enrollment_settled(self):
        """No neighbour is enrolled or connecting: pending requests cannot proceed."""
        ipcp = self.ipcp
        if not ipcp.enrollment.enrolled_peers() and not ipcp.enrollment.in_progress():
            self._fail_waiters("not-enrolled")

    def _fail_waiters(self, reason):
        waiters, self._route_waiters = self._route_waiters, []
        for _dst, _cb, fai in waiters:
            if fai is not None and fai.state == FaiState.ALLOC_PENDING:
                self._fail_initiator(fai, reason)

    def _provision(self, fai: FaiRecord, nh):
        if fai.state != FaiState.ALLOC_PENDING:
            return
        ipcp = self.ipcp
        if nh is None or ipcp.rank == 0 or fai.qos_id == MGMT_QOS_ID:
            self._send_create(fai, nh)
            return
        # data (N-1)-flow toward the next hop must exist before the request leaves
        ipcp.ra.get_or_allocate_n1_flow(nh, fai.qos_id,
                                        lambda _f: self._send_create(fai, nh),
                                        lambda reason: self._fail_initiator(fai, f"n1:{reason}"))

    def _send_create(self, fai: FaiRecord, nh):
        if fai.state != FaiState.ALLOC_PENDING:
            return
        ipcp = self.ipcp
        body = fai.descriptor()
        body["src_addr"] = ipcp.address
        body["dst_addr"] = fai.remote_addr
        ipcp.ribd.send(MgmtMessage(MsgKind.CREATE_FLOW_REQUEST, ipcp.address, fai.remote_addr, body))

    def _alloc_timeout(self, fai: FaiRecord):
        if fai.state == FaiState.ALLOC_PENDING:
            self._fail_initiator(fai, "timeout")
        elif fai.state == FaiState.DEALLOC_PENDING:
            self._finish_dealloc(fai, reason="timeout")

    def _fail_initiator(self, fai: FaiRecord, reason):
        if fai.state != FaiState.ALLOC_PENDING:
            return
        self._release(fai)
        self.transition(fai, FaiState.DEALLOCATED, reason=reason)
        if fai.user is not None:
            fai.user.failed(fai, reason)

    def handle(self, msg: MgmtMessage):
        k = msg.kind
        if k == MsgKind.CREATE_FLOW_REQUEST:
            return self.handle_create_request(msg)
        if k == MsgKind.CREATE_FLOW_RESPONSE:
            return self.on_create_response(msg)
        if k == MsgKind.DELETE_FLOW_REQUEST:
            return self.handle_delete_request(msg)
        if k == MsgKind.DELETE_FLOW_RESPONSE:
            return self.on_delete_response(msg)
        return None

    def _unexpected(self, msg, why):
        self._trace("FA_UNEXPECTED", msg=msg.kind.value, src=msg.src, reason=why)
        return UnexpectedMessage(f"{msg.kind.value}: {why}")

    def on_create_response(self, msg: MgmtMessage):
        fai = self.by_cep.get(int(msg.body.get("src_cep", 0)))
        if fai is None or not fai.initiator or fai.state != FaiState.ALLOC_PENDING:
            return self._unexpected(msg, "no-pending-fai")
        ipcp = self.ipcp
        if msg.positive:
            fai.remote_cep = int(msg.body["dst_cep"])
            fai.efcp.conn = fai.connection_id
            ipcp.sim.cancel(fai.timer)
            fai.timer = None
            self.transition(fai, FaiState.ALLOCATED)
            if fai.user is not None:
                fai.user.allocated(fai)
        else:
            self._release(fai)
            self.transition(fai, FaiState.DEALLOCATED, reason=msg.body.get("reason") or "refused")
            if fai.user is not None:
                fai.user.failed(fai, msg.body.get("reason") or "refused")
        return fai

    # -- responder side ----------------------------------------------------

    def handle_create_request(self, msg: MgmtMessage):
        ipcp = self.ipcp
        body = msg.body
        dst_apn = Apn.parse(body["dst_apn"])
        src_apn = Apn.parse(body["src_apn"])
        user = ipcp.node.local_user(dst_apn, ipcp, src_apn, body)
        if user is None:
            err = UnknownDestinationApn(str(dst_apn))
            self._trace("FA_DENY", src_apn=src_apn, dst_apn=dst_apn, reason="unknown-apn")
            self._respond(msg, False, reason="unknown-apn")
            return err
        fai = self._new_fai(dst_apn, src_apn, int(body["qos"]), False, msg.src, user,
                            body.get("user_qos"))
        fai.remote_cep = int(body["src_cep"])
        fai.request = msg
        self.transition(fai, FaiState.NOTIFY_PENDING)
        ipcp.sim.call_soon(user.on_flow_request, fai)
        return fai

    def accept(self, fai: FaiRecord):
        if fai.state != FaiState.NOTIFY_PENDING:
            return
        self._claim_ids(fai)
        self._spawn_efcp(fai)
        self.transition(fai, FaiState.ALLOCATED)
        if fai.user is not None:
            fai.user.allocated(fai)
        self.await_route(fai.remote_addr, lambda nh: self._provision_response(fai, nh), fai)

    def _provision_response(self, fai: FaiRecord, nh):
        ipcp = self.ipcp
        if nh is None or ipcp.rank == 0 or fai.qos_id == MGMT_QOS_ID:
            self._respond(fai.request, True, dst_cep=fai.cep)
            return
        ipcp.ra.get_or_allocate_n1_flow(nh, fai.qos_id,
                                        lambda _f: self._respond(fai.request, True, dst_cep=fai.cep),
                                        lambda reason: self._respond(fai.request, True, dst_cep=fai.cep))

    def deny(self, fai: FaiRecord, reason="denied"):
        if fai.state != FaiState.NOTIFY_PENDING:
            return
        self.transition(fai, FaiState.DEALLOCATED, reason=reason)
        self._respond(fai.request, False, reason=reason)

    def _respond(self, request: MgmtMessage, ok: bool, **extra):
        reply = request.reply(MsgKind.CREATE_FLOW_RESPONSE, ok, **extra)
        self.ipcp.ribd.send(reply)

    # -- deallocation -------------------------------------------------------

    def deallocate(self, port_id: int) -> FaiRecord:
        fai = self.by_port.get(port_id)
        if fai is None:
            raise NoSuchFlow(f"no flow on port {port_id}")
        if fai.state != FaiState.ALLOCATED:
            raise FlowNotAllocated(f"flow on port {port_id} is {fai.state.value}")
        ipcp = self.ipcp
        self._trace("FA_DEALLOC", fai=fai.fai_id, port=port_id, local=fai.local_apn,
                    remote=fai.remote_apn, dif=ipcp.dif.name)
        self.transition(fai, FaiState.DEALLOC_PENDING)
        body = fai.descriptor()
        body["from_initiator"] = fai.initiator
        ipcp.ribd.send(MgmtMessage(MsgKind.DELETE_FLOW_REQUEST, ipcp.address, fai.remote_addr, body))
        fai.timer = ipcp.sim.schedule_in(ipcp.dif.allocate_timeout_ns, self._alloc_timeout, fai,
                                         kind="dealloc-timeout")
        return fai

    def _local_cep(self, msg: MgmtMessage) -> int:
        # the sender's view of the descriptor tells which CEP is ours
        body = msg.body
        from_initiator = body.get("from_initiator", True)
        return int(body["dst_cep"] if from_initiator else body["src_cep"])

    def handle_delete_request(self, msg: MgmtMessage):
        fai = self.by_cep.get(self._local_cep(msg))
        if fai is None or fai.state not in (FaiState.ALLOCATED, FaiState.DEALLOC_PENDING):
            self._unexpected(msg, "no-such-flow")
            self.ipcp.ribd.send(msg.reply(MsgKind.DELETE_FLOW_RESPONSE, False, reason="no-such-flow"))
            return None
        if fai.state == FaiState.ALLOCATED:
            if fai.user is not None:
                fai.user.remote_release(fai)
            self._release(fai)
            self.transition(fai, FaiState.DEALLOCATED, reason="remote")
            if fai.user is not None:
                fai.user.deallocated(fai)
        self.ipcp.ribd.send(msg.reply(MsgKind.DELETE_FLOW_RESPONSE, True))
        return fai

    def on_delete_response(self, msg: MgmtMessage):
        body = msg.body
        from_initiator = body.get("from_initiator", True)
        cep = int(body["src_cep"] if from_initiator else body["dst_cep"])
        fai = self.by_cep.get(cep)
        if fai is None or fai.state != FaiState.DEALLOC_PENDING:
            return self._unexpected(msg, "no-dealloc-pending")
        self._finish_dealloc(fai)
        return fai

    def _finish_dealloc(self, fai: FaiRecord, reason=None):
        self._release(fai)
        kw = {"reason": reason} if reason else {}
        self.transition(fai, FaiState.DEALLOCATED, **kw)
        if fai.user is not None:
            fai.user.deallocated(fai)

    # -- data path -----------------------------------------------------------

    def write(self, port_id: int, sdu) -> list:
        fai = self.by_port.get(port_id)
        if fai is None or fai.efcp is None or fai.state not in (FaiState.ALLOCATED,):
            raise FlowNotAllocated(f"port {port_id} has no allocated flow")
        if isinstance(sdu, (bytes, bytearray)):
            sdu = Sdu(bytes(sdu))
        return fai.efcp.send_sdu(sdu)


# -- resource allocator -------------------------------------------------------

@dataclass(eq=False)
class N1Flow:
    peer: int
    qos: int
    state: str = "pending"
    port_id: int = 0
    lower: object = None
    link: object = None
    rmt_port: object = None
    waiters: list = field(default_factory=list)
    fai: FaiRecord | None = None

    @property
    def key(self):
        return (self.peer, self.qos)


class N1User:
    """Binds an (N-1)-flow port to the RMT of the IPCP above it."""

    infrastructure = True

    def __init__(self, ra, flow: N1Flow):
        self.ra = ra
        self.flow = flow

    def deliver(self, sdu):
        self.ra.ipcp.rmt.receive_sdu(sdu, self.flow.rmt_port)

    def allocated(self, fai):
        self.ra._n1_allocated(self.flow, fai)

    def failed(self, fai, reason):
        self.ra._n1_failed(self.flow, reason)

    def on_flow_request(self, fai):
        fai_ipcp = self.ra.ipcp
        fai.user = self
        self.flow.fai = fai
        self.flow.lower = fai_ipcp.node.ipcp_by_label(fai.ipcp)
        self.flow.lower.fa.accept(fai)

    def remote_release(self, fai):
        pass

    def deallocated(self, fai):
        self.ra._n1_gone(self.flow)


class ResourceAllocator:
    def __init__(self, ipcp):
        self.ipcp = ipcp
        self.flows: dict[tuple, N1Flow] = {}
        self.extra: list[N1Flow] = []
        self.occupancy: dict = {}

    def _trace(self, ev, **kw):
        self.ipcp.trace("ra", ev, **kw)

    def on_occupancy(self, port, direction, length):
        self.occupancy[(port.name, direction)] = length

    def get_mgmt_flow(self, peer, on_ok, on_fail):
        return self.get_or_allocate_n1_flow(peer, MGMT_QOS_ID, on_ok, on_fail)

    def has_flow(self, peer, qos) -> bool:
        f = self.flows.get((peer, qos))
        return f is not None and f.state == "allocated"

    def get_or_allocate_n1_flow(self, peer, qos, on_ok, on_fail):
        ipcp = self.ipcp
        key = (peer, qos)
        flow = self.flows.get(key)
        if flow is not None:
            if flow.state == "allocated":
                on_ok(flow)
            else:
                flow.waiters.append((on_ok, on_fail))
            return flow
        adj = ipcp.adjacencies.get(peer)
        if adj is None:
            on_fail("no-adjacency")
            return None
        flow = N1Flow(peer, qos)
        flow.waiters.append((on_ok, on_fail))
        self.flows[key] = flow
        if ipcp.rank == 0:
            try:
                flow.link = ipcp.net.medium.allocate(ipcp.endpoint, adj.peer_endpoint)
            except NoSuchLink:
                del self.flows[key]
                on_fail("no-such-link")
                return None
            flow.rmt_port = ipcp.link_port(peer)
            self._trace("RA_N1_ALLOC", status="done", peer=peer, qos=qos, via="medium",
                        link=flow.link.name)
            self._ready(flow)
            return flow
        lower = adj.lower
        flow.lower = lower
        self._trace("RA_N1_ALLOC", status="start", peer=peer, qos=qos, via=lower.dif.name)
        flow.rmt_port = ipcp.rmt.ports.get(key) or ipcp.rmt.add_port(key, f"n1:{peer}/{qos}")
        user = N1User(self, flow)
        try:
            lower_qos = qos if qos == MGMT_QOS_ID else self._lower_qos(qos)
            flow.fai = lower.fa.submit_allocate(ipcp.apn, adj.peer_apn, lower_qos, user, user_qos=qos)
        except AllocationFailed as exc:
            self._n1_failed(flow, exc.reason)
        return flow

    def _lower_qos(self, qos):
        return self.ipcp.net.cubes[qos].requirements()

    def _n1_allocated(self, flow: N1Flow, fai):
        flow.port_id = fai.port_id
        flow.fai = fai
        lower = flow.lower
        port_id = fai.port_id
        flow.rmt_port.sink = None
        self.ipcp.rmt.bind(flow.rmt_port, lambda pdu: lower.fa.write(port_id, mux(pdu)) and 0)
        self._trace("RA_N1_ALLOC", status="done", peer=flow.peer, qos=flow.qos,
                    via=lower.dif.name, port=port_id)
        self._ready(flow)

    def _ready(self, flow: N1Flow):
        flow.state = "allocated"
        waiters, flow.waiters = flow.waiters, []
        for on_ok, _f in waiters:
            on_ok(flow)

    def _n1_failed(self, flow: N1Flow, reason):
        flow.state = "failed"
        if self.flows.get(flow.key) is flow:
            del self.flows[flow.key]
        self._trace("RA_N1_ALLOC", status="failed", peer=flow.peer, qos=flow.qos, reason=reason)
        if flow.rmt_port is not None:
            self.ipcp.rmt.fail_port(flow.rmt_port, reason=f"n1-failed:{reason}")
        waiters, flow.waiters = flow.waiters, []
        for _ok, on_fail in waiters:
            on_fail(reason)

    def _n1_gone(self, flow: N1Flow):
        if self.flows.get(flow.key) is flow:
            del self.flows[flow.key]
        if flow in self.extra:
            self.extra.remove(flow)
        if flow.rmt_port is not None and self.ipcp.rmt.ports.get(flow.key) is flow.rmt_port:
            del self.ipcp.rmt.ports[flow.key]

    def incoming_user(self, peer_addr, qos) -> N1User:
        """User for an (N-1)-flow a neighbour is allocating toward us."""
        flow = N1Flow(peer_addr, qos)
        key = flow.key
        existing = self.flows.get(key)
        if existing is None or existing.state == "failed":
            flow.rmt_port = self.ipcp.rmt.ports.get(key) or self.ipcp.rmt.add_port(key, f"n1:{peer_addr}/{qos}")
            self.flows[key] = flow
        elif existing.state == "pending":
            # crossing allocations: the incoming one serves the queued users too
            flow.rmt_port = existing.rmt_port
            flow.waiters = existing.waiters
            existing.waiters = []
            existing.rmt_port = self.ipcp.rmt.add_port(key + ("x",), f"n1:{peer_addr}/{qos}x")
            self.extra.append(existing)
            self.flows[key] = flow
        else:
            flow.rmt_port = self.ipcp.rmt.add_port(key + ("in",), f"n1:{peer_addr}/{qos}in")
            self.extra.append(flow)
        return N1User(self, flow)
