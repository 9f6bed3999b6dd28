"""Error and Flow Control Protocol instances.

One :class:`EfcpInstance` per flow endpoint. The data transfer half fragments,
sequences and reassembles SDUs; the control half (acks, retransmission, rate
limiting) is only active when the QoS cube asks for it. Connection state is
soft: it is dropped after a multiple of delta-t without traffic, and the flow's
port bindings survive the discard.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from .engine import NS_PER_S
from .errors import FlowError, FlowNotAllocated, StaleState
from .identifiers import ConnectionId, QosCube
from .pdu import FLAG_FIRST, FLAG_LAST, Pdu, PduKind, Sdu

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeltaTParams:
    mpl: int
    a_timer: int
    r_timer: int
    sender_discard_multiple: int = 3
    receiver_discard_multiple: int = 2

    def __post_init__(self):
        if min(self.mpl, self.a_timer, self.r_timer) <= 0:
            raise ValueError("mpl, a_timer and r_timer must be positive")
        for m in (self.sender_discard_multiple, self.receiver_discard_multiple):
            if m not in (2, 3):
                raise ValueError("discard multiples must be 2 or 3")

    def delta_t(self) -> int:
        return delta_t(self)


def delta_t(p: DeltaTParams) -> int:
    return p.mpl + p.a_timer + p.r_timer


@dataclass(frozen=True)
class EfcpPolicy:
    timers: DeltaTParams
    rto: int | None = None
    max_pdu_payload: int = 1400

    @property
    def retransmission_timeout(self) -> int:
        return self.rto if self.rto is not None else self.timers.r_timer // 4


def fragment(data: bytes, max_payload: int) -> list[tuple[int, bytes, int]]:
    """Split ``data`` into ``(offset, chunk, flags)`` triples."""
    if not data:
        raise ValueError("an SDU carries at least one byte")
    if max_payload <= 0:
        raise ValueError("max_payload must be positive")
    chunks = []
    for off in range(0, len(data), max_payload):
        flags = 0
        if off == 0:
            flags |= FLAG_FIRST
        if off + max_payload >= len(data):
            flags |= FLAG_LAST
        chunks.append((off, data[off:off + max_payload], flags))
    return chunks


@dataclass
class RtxEntry:
    pdu: Pdu
    first_sent_at: int
    retries: int = 0
    timer: object = None


@dataclass
class EfcpStateVector:
    connection_id: ConnectionId
    next_send_seq: int = 1
    highest_acked: int = 0
    next_expected_seq: int | None = None
    next_sdu_id: int = 1
    retransmission_queue: dict = field(default_factory=dict)  # seq -> RtxEntry, insertion ordered
    reassembly: dict = field(default_factory=dict)  # sdu_id -> list[Pdu]
    out_of_order: dict = field(default_factory=dict)  # seq -> Pdu
    last_send_activity: int = 0
    last_recv_activity: int = 0
    sender_open: bool = False
    receiver_open: bool = False
    receiver_discarded: bool = False
    ack_timer: object = None
    next_allowed: int = 0  # rate limiter: earliest next emission
    held: deque = field(default_factory=deque)  # PDUs waiting on the rate limiter

    @property
    def last_activity(self) -> int:
        return max(self.last_send_activity, self.last_recv_activity)


class EfcpInstance:
    def __init__(self, sim, conn: ConnectionId, src_addr: int, dst_addr: int, cube: QosCube,
                 policy: EfcpPolicy, tx, deliver, tracer=None, node="", comp="efcp",
                 accounting=None, on_flow_error=None, rank=0):
        self.sim = sim
        self.src_addr = src_addr
        self.dst_addr = dst_addr
        self.cube = cube
        self.policy = policy
        self.tx = tx
        self.deliver = deliver
        self.tracer = tracer
        self.node = node
        self.comp = comp
        self.accounting = accounting
        self.on_flow_error = on_flow_error
        self.rank = rank
        self.sv = EfcpStateVector(conn)
        self.active = True
        self.stats = {"sent": 0, "rtx": 0, "acks": 0, "delivered": 0, "dups": 0, "flow_errors": 0}
        self._idle_timer = None
        self._limiter_timer = None

    # -- helpers ---------------------------------------------------------

    @property
    def conn(self) -> ConnectionId:
        return self.sv.connection_id

    @conn.setter
    def conn(self, value: ConnectionId):
        self.sv.connection_id = value

    @property
    def reliable(self) -> bool:
        return self.cube.reliable

    @property
    def rate_limited(self) -> bool:
        return bool(self.cube.avg_bandwidth)

    @property
    def dtcp_present(self) -> bool:
        return self.reliable or self.rate_limited

    def _trace(self, ev, **kw):
        if self.tracer is not None:
            self.tracer.emit(self.node, self.comp, ev, conn=self.conn, **kw)

    # -- sending ---------------------------------------------------------

    def send_sdu(self, sdu) -> list[Pdu]:
        """Fragment ``sdu`` and hand the PDUs on (possibly paced)."""
        if not self.active:
            raise FlowNotAllocated(f"connection {self.conn} is not active")
        if isinstance(sdu, (bytes, bytearray)):
            sdu = Sdu(bytes(sdu))
        sv = self.sv
        if not sv.sender_open:
            sv.sender_open = True
        sdu_id = sv.next_sdu_id
        sv.next_sdu_id += 1
        pdus = []
        for off, chunk, flags in fragment(sdu.data, self.policy.max_pdu_payload):
            pdu = Pdu(self.src_addr, self.dst_addr, self.conn.src_cep, self.conn.dst_cep,
                      self.conn.qos_id, PduKind.DATA, sv.next_send_seq, chunk, sdu_id, off, flags)
            pdu.rank = self.rank
            pdu.carried = sdu.carried
            pdu.recoverable = self.reliable
            sv.next_send_seq += 1
            pdus.append(pdu)
        sv.last_send_activity = self.sim.now
        for pdu in pdus:
            if self.rate_limited and (sv.held or self.sim.now < sv.next_allowed):
                sv.held.append(pdu)
            else:
                self._emit(pdu)
        self._arm_limiter()
        self._arm_idle()
        return pdus

    def _pace(self, pdu):
        bits = 8 * len(pdu.payload)
        sv = self.sv
        start = max(self.sim.now, sv.next_allowed)
        sv.next_allowed = start + -(-bits * NS_PER_S // self.cube.avg_bandwidth)

    def _arm_limiter(self):
        sv = self.sv
        if sv.held and (self._limiter_timer is None or not self._limiter_timer.pending):
            self._limiter_timer = self.sim.schedule(max(self.sim.now, sv.next_allowed),
                                                    self._release_held, kind="efcp-rate")

    def _release_held(self):
        sv = self.sv
        if not self.active:
            return
        while sv.held and self.sim.now >= sv.next_allowed:
            self._emit(sv.held.popleft())
        self._arm_limiter()
        self._arm_idle()

    def _emit(self, pdu: Pdu):
        sv = self.sv
        now = self.sim.now
        if self.rate_limited:
            self._pace(pdu)
        sv.last_send_activity = now
        self.stats["sent"] += 1
        self._trace("EFCP_SEND", seq=pdu.seq, kind=pdu.kind.name, bytes=len(pdu.payload))
        if self.reliable:
            entry = RtxEntry(pdu, now)
            entry.timer = self.sim.schedule_in(self.policy.retransmission_timeout,
                                               self.on_rto, pdu.seq, kind="efcp-rto")
            sv.retransmission_queue[pdu.seq] = entry
            self.tx(pdu.copy())
        else:
            self.tx(pdu)

    # -- control: acks and retransmission -------------------------------

    def on_ack(self, ack: Pdu) -> list[int]:
        """Cumulative ack: release every queued seq <= ack.seq."""
        sv = self.sv
        released = []
        if not self.active or ack.seq <= sv.highest_acked:
            return released
        sv.last_send_activity = self.sim.now
        self.stats["acks"] += 1
        for seq in list(sv.retransmission_queue):
            if seq > ack.seq:
                break
            entry = sv.retransmission_queue.pop(seq)
            self.sim.cancel(entry.timer)
            released.append(seq)
        sv.highest_acked = min(ack.seq, sv.next_send_seq - 1)
        self._trace("EFCP_ACK", seq=ack.seq, released=len(released))
        self._arm_idle()
        return released

    def on_rto(self, seq: int):
        """Retransmit ``seq`` while within the R bound, else report a flow error."""
        sv = self.sv
        entry = sv.retransmission_queue.get(seq)
        if entry is None or not self.active:
            return None
        now = self.sim.now
        if now - entry.first_sent_at <= self.policy.timers.r_timer:
            entry.retries += 1
            self.stats["rtx"] += 1
            sv.last_send_activity = now
            self._trace("EFCP_RTX", seq=seq, retry=entry.retries)
            entry.timer = self.sim.schedule_in(self.policy.retransmission_timeout,
                                               self.on_rto, seq, kind="efcp-rto")
            self.tx(entry.pdu.copy())
            return entry
        del sv.retransmission_queue[seq]
        self.stats["flow_errors"] += 1
        self._arm_idle()
        err = FlowError(seq)
        self._trace("EFCP_FLOW_ERROR", seq=seq, retries=entry.retries)
        if self.accounting is not None:
            self.accounting.lose(entry.pdu.carried)
        if self.on_flow_error is not None:
            self.on_flow_error(self, err)
        return err

    def _schedule_ack(self):
        sv = self.sv
        if sv.ack_timer is None or not sv.ack_timer.pending:
            sv.ack_timer = self.sim.schedule_in(self.policy.timers.a_timer, self._send_ack,
                                                kind="efcp-ack")

    def _send_ack(self):
        sv = self.sv
        if not self.active or sv.next_expected_seq is None:
            return
        ack = Pdu(self.src_addr, self.dst_addr, self.conn.src_cep, self.conn.dst_cep,
                  self.conn.qos_id, PduKind.ACK, sv.next_expected_seq - 1)
        ack.rank = self.rank
        self._trace("EFCP_SEND", seq=ack.seq, kind="ACK", bytes=0)
        self.tx(ack)

    # -- receiving -------------------------------------------------------

    def receive(self, pdu: Pdu) -> list[Sdu]:
        if pdu.kind == PduKind.ACK:
            if self.reliable:
                self.on_ack(pdu)
            return []
        return self.dtp_receive(pdu)

    def dtp_receive(self, pdu: Pdu) -> list[Sdu]:
        sv = self.sv
        now = self.sim.now
        if sv.next_expected_seq is None:
            if sv.receiver_discarded:
                if not pdu.first:
                    self._abandon(pdu)
                    raise StaleState(f"seq {pdu.seq} cannot open a new run on {self.conn}")
                sv.next_expected_seq = pdu.seq
            else:
                sv.next_expected_seq = 1
        sv.receiver_open = True
        sv.last_recv_activity = now
        self._arm_idle()
        self._trace("EFCP_RECV", seq=pdu.seq, bytes=len(pdu.payload))
        delivered: list[Sdu] = []
        if pdu.seq < sv.next_expected_seq:
            self.stats["dups"] += 1
            self._trace("EFCP_DUP", seq=pdu.seq)
            if self.reliable:
                self._schedule_ack()
            return delivered
        if self.reliable:
            if pdu.seq in sv.out_of_order:
                self.stats["dups"] += 1
                self._trace("EFCP_DUP", seq=pdu.seq)
            else:
                sv.out_of_order[pdu.seq] = pdu
            while sv.next_expected_seq in sv.out_of_order:
                p = sv.out_of_order.pop(sv.next_expected_seq)
                sv.next_expected_seq += 1
                self._in_order(p, delivered)
            self._schedule_ack()
        else:
            if pdu.seq > sv.next_expected_seq:
                # gap on an unreliable flow: the skipped PDUs are gone
                self._drop_partial()
            sv.next_expected_seq = pdu.seq + 1
            self._in_order(pdu, delivered)
        for sdu in delivered:
            self.stats["delivered"] += 1
            self.deliver(sdu)
        return delivered

    def _in_order(self, pdu: Pdu, out: list):
        sv = self.sv
        if pdu.first:
            self._drop_partial()
            sv.reassembly[pdu.sdu_id] = [pdu]
        else:
            frags = sv.reassembly.get(pdu.sdu_id)
            expected = frags[-1].offset + len(frags[-1].payload) if frags else None
            if frags is None or pdu.offset != expected:
                self._drop_partial()
                self._abandon(pdu)
                return
            frags.append(pdu)
        if pdu.last:
            frags = sv.reassembly.pop(pdu.sdu_id)
            out.append(Sdu(b"".join(p.payload for p in frags), pdu.carried))

    def _drop_partial(self):
        sv = self.sv
        for frags in sv.reassembly.values():
            for p in frags:
                self._abandon(p)
        sv.reassembly.clear()

    def _abandon(self, pdu):
        if self.accounting is not None:
            self.accounting.lose(pdu.carried)

    # -- delta-t state discard --------------------------------------------

    def _thresholds(self):
        dt = delta_t(self.policy.timers)
        return (self.policy.timers.sender_discard_multiple * dt,
                self.policy.timers.receiver_discard_multiple * dt)

    def _arm_idle(self):
        due = self._next_idle_check()
        if due is None:
            return
        timer = self._idle_timer
        if timer is not None and timer.pending:
            if timer.fire_at <= due:
                return
            self.sim.cancel(timer)
        self._idle_timer = self.sim.schedule(due, self._idle_check, kind="efcp-idle")

    def _next_idle_check(self):
        sv = self.sv
        s_thr, r_thr = self._thresholds()
        due = []
        # A sender holding unacked or paced PDUs is re-armed by on_ack/_release_held.
        if sv.sender_open and not sv.retransmission_queue and not sv.held:
            due.append(sv.last_send_activity + s_thr)
        if sv.receiver_open:
            due.append(sv.last_recv_activity + r_thr)
        if not due:
            return None
        return max(self.sim.now, min(due))

    def _idle_check(self):
        if not self.active:
            return
        self.check_state_discard(self.sim.now)
        self._arm_idle()

    def check_state_discard(self, now: int) -> dict:
        """Apply the idle rules to each side; returns ``{side: keep|discard}``."""
        sv = self.sv
        s_thr, r_thr = self._thresholds()
        result = {}
        if sv.sender_open:
            if now - sv.last_send_activity >= s_thr and not sv.retransmission_queue and not sv.held:
                self._discard_sender()
                result["sender"] = "discard"
            else:
                result["sender"] = "keep"
        if sv.receiver_open:
            if now - sv.last_recv_activity >= r_thr:
                self._discard_receiver()
                result["receiver"] = "discard"
            else:
                result["receiver"] = "keep"
        return result

    def _discard_sender(self):
        sv = self.sv
        sv.sender_open = False
        sv.next_send_seq = 1
        sv.highest_acked = 0
        sv.next_sdu_id = 1
        sv.next_allowed = 0
        self._trace("EFCP_STATE_DISCARD", side="sender", idle_ns=self.sim.now - sv.last_send_activity)

    def _discard_receiver(self):
        sv = self.sv
        self._drop_partial()
        for p in sv.out_of_order.values():
            self._abandon(p)
        sv.out_of_order.clear()
        sv.receiver_open = False
        sv.receiver_discarded = True
        sv.next_expected_seq = None
        self.sim.cancel(sv.ack_timer)
        sv.ack_timer = None
        self._trace("EFCP_STATE_DISCARD", side="receiver", idle_ns=self.sim.now - sv.last_recv_activity)

    # -- teardown ---------------------------------------------------------

    def destroy(self):
        if not self.active:
            return
        self.active = False
        sv = self.sv
        for entry in sv.retransmission_queue.values():
            self.sim.cancel(entry.timer)
            self._abandon(entry.pdu)
        sv.retransmission_queue.clear()
        for p in sv.held:
            self._abandon(p)
        sv.held.clear()
        self._drop_partial()
        for p in sv.out_of_order.values():
            self._abandon(p)
        sv.out_of_order.clear()
        self.sim.cancel(sv.ack_timer)
        self.sim.cancel(self._idle_timer)
        self.sim.cancel(self._limiter_timer)
