"""Relay and multiplexing task.

Each (N-1)-port owns an input and an output FIFO with tail drop. PDUs for the
local address go up to EFCP or the RIB daemon; everything else is relayed by
forwarding-table lookup without touching connection state.
"""

from __future__ import annotations

import hashlib
from collections import deque

from .pdu import Pdu, Sdu

ANY_QOS = None


class ForwardingTable:
    """``(dst, qos) -> port`` with an any-qos fallback and optional default."""

    def __init__(self, entries=None, default=None):
        self.entries: dict = dict(entries or {})
        self.default = default

    def lookup(self, dst, qos):
        port = self.entries.get((dst, qos))
        if port is not None:
            return port
        port = self.entries.get((dst, ANY_QOS))
        if port is not None:
            return port
        # any entry for dst regardless of qos
        for (d, _q), p in self.entries.items():
            if d == dst:
                return p
        return self.default

    def __len__(self):
        return len(self.entries)

    def as_dict(self) -> dict:
        return dict(self.entries)

    def digest(self) -> str:
        items = sorted((d, -1 if q is None else q, str(p)) for (d, q), p in self.entries.items())
        text = ";".join(f"{d},{q}->{p}" for d, q, p in items)
        return hashlib.sha1(text.encode()).hexdigest()[:12]


def rmt_forward(pdu: Pdu, table: ForwardingTable):
    """Port for ``pdu`` or None, meaning the PDU has no route."""
    return table.lookup(pdu.dst_addr, pdu.qos_id)


def mux(pdu: Pdu) -> Sdu:
    """Encapsulate an (N)-PDU as the SDU of an (N-1)-flow."""
    return Sdu(pdu.encode(), pdu)


def demux(sdu: Sdu) -> Pdu:
    pdu = Pdu.decode(sdu.data)
    upper = sdu.carried
    if upper is not None:
        pdu.uid = upper.uid
        pdu.rank = upper.rank
        pdu.carried = upper.carried
        pdu.recoverable = upper.recoverable
    return pdu


class RmtPort:
    def __init__(self, key, name, capacity, sink=None):
        if capacity <= 0:
            raise ValueError("queue capacity must be positive")
        self.key = key
        self.name = name
        self.capacity = capacity
        self.sink = sink  # callable(pdu) -> ns the port stays busy
        self.in_queue: deque = deque()
        self.out_queue: deque = deque()
        self.busy = False
        self.failed = False
        self.policy = "fifo"

    @property
    def bound(self) -> bool:
        return self.sink is not None

    def queue(self, direction):
        return self.out_queue if direction == "out" else self.in_queue


class Rmt:
    def __init__(self, sim, node, comp, local_addr, tracer=None, accounting=None,
                 capacity=100, scheduler="fifo"):
        if scheduler != "fifo":
            raise ValueError(f"unsupported scheduling policy {scheduler!r}")
        self.sim = sim
        self.node = node
        self.comp = comp
        self.local_addr = local_addr
        self.tracer = tracer
        self.accounting = accounting
        self.capacity = capacity
        self.scheduler = scheduler
        self.table = ForwardingTable()
        self.ports: dict = {}
        # wired by the owning IPCP
        self.resolve_port = None  # (next_hop, qos) -> RmtPort
        self.deliver_local = None  # (pdu) -> None
        self.relay_hook = None  # (pdu, next_hop) -> bool, True if it took the PDU
        self.on_occupancy = None  # (port, direction, length) -> None
        self.stats = {"enq": 0, "queue_drop": 0, "no_route": 0, "relayed": 0, "local": 0}

    def _trace(self, ev, **kw):
        if self.tracer is not None:
            self.tracer.emit(self.node, self.comp, ev, **kw)

    def add_port(self, key, name, sink=None, capacity=None) -> RmtPort:
        port = RmtPort(key, name, capacity or self.capacity, sink)
        port.policy = self.scheduler
        self.ports[key] = port
        return port

    def bind(self, port: RmtPort, sink):
        port.sink = sink
        port.failed = False
        self._kick(port)

    def fail_port(self, port: RmtPort, reason):
        """The (N-1)-flow behind a pending port could not be allocated."""
        port.failed = True
        while port.out_queue:
            pdu = port.out_queue.popleft()
            self._no_route(pdu, reason=reason)
        if self.ports.get(port.key) is port:
            del self.ports[port.key]

    # -- outbound ---------------------------------------------------------

    def send(self, pdu: Pdu, via=None):
        """Originate ``pdu`` at this IPCP; ``via`` forces the next hop."""
        if self.accounting is not None and pdu.uid == 0:
            self.accounting.sent(pdu)
        if pdu.dst_addr == self.local_addr and via is None:
            self.stats["local"] += 1
            self.sim.call_soon(self._local, pdu)
            return
        if via is not None:
            self.forward_to(pdu, via)
        else:
            self.forward(pdu)

    def forward(self, pdu: Pdu):
        nh = rmt_forward(pdu, self.table)
        if nh is None:
            self._no_route(pdu)
            return None
        return self.forward_to(pdu, nh)

    def forward_to(self, pdu: Pdu, next_hop):
        port = self.resolve_port(next_hop, pdu.qos_id) if self.resolve_port else self.ports.get(next_hop)
        if port is None:
            self._no_route(pdu, next_hop=next_hop)
            return None
        self.enqueue(pdu, port, "out")
        return port

    def _no_route(self, pdu, next_hop=None, reason="no-route"):
        self.stats["no_route"] += 1
        self._trace("RMT_NO_ROUTE", dst=pdu.dst_addr, qos=pdu.qos_id, kind=pdu.kind.name,
                    seq=pdu.seq, reason=reason)
        if self.accounting is not None:
            self.accounting.dropped(pdu, "noroute")

    def enqueue(self, pdu: Pdu, port: RmtPort, direction: str) -> bool:
        q = port.queue(direction)
        if len(q) >= port.capacity:
            self.stats["queue_drop"] += 1
            self._trace("RMT_QUEUE_DROP", port=port.name, dir=direction, qlen=len(q),
                        kind=pdu.kind.name, seq=pdu.seq)
            if self.accounting is not None:
                self.accounting.dropped(pdu, "queue")
            return False
        q.append(pdu)
        self.stats["enq"] += 1
        self._trace("RMT_ENQ", port=port.name, dir=direction, qlen=len(q),
                    kind=pdu.kind.name, seq=pdu.seq)
        if self.on_occupancy is not None:
            self.on_occupancy(port, direction, len(q))
        if direction == "out":
            self._kick(port)
        else:
            self.sim.call_soon(self._process_in, port)
        return True

    def dequeue(self, port: RmtPort, direction: str):
        q = port.queue(direction)
        if not q:
            return None
        pdu = q.popleft()
        self._trace("RMT_DEQ", port=port.name, dir=direction, qlen=len(q),
                    kind=pdu.kind.name, seq=pdu.seq)
        if self.on_occupancy is not None:
            self.on_occupancy(port, direction, len(q))
        return pdu

    def _kick(self, port: RmtPort):
        # work conservation: an idle bound port with queued PDUs always departs
        if port.busy or not port.bound or not port.out_queue:
            return
        port.busy = True
        self.sim.call_soon(self._depart, port)

    def _depart(self, port: RmtPort):
        pdu = self.dequeue(port, "out")
        if pdu is None or port.failed:
            port.busy = False
            return
        hold = port.sink(pdu) or 0
        if hold > 0:
            self.sim.schedule_in(hold, self._idle, port)
        else:
            self._idle(port)

    def _idle(self, port: RmtPort):
        port.busy = False
        self._kick(port)

    # -- inbound ----------------------------------------------------------

    def receive(self, pdu: Pdu, port: RmtPort):
        self.enqueue(pdu, port, "in")

    def receive_sdu(self, sdu: Sdu, port: RmtPort):
        self.receive(demux(sdu), port)

    def _process_in(self, port: RmtPort):
        pdu = self.dequeue(port, "in")
        if pdu is None:
            return
        if pdu.dst_addr == self.local_addr:
            self._local(pdu)
            return
        self.stats["relayed"] += 1
        nh = rmt_forward(pdu, self.table)
        if nh is None:
            self._no_route(pdu)
            return
        if self.relay_hook is not None and self.relay_hook(pdu, nh):
            return
        self.forward_to(pdu, nh)

    def _local(self, pdu: Pdu):
        if self.accounting is not None:
            self.accounting.delivered(pdu)
        if self.deliver_local is not None:
            self.deliver_local(pdu)

    def occupancy(self) -> dict:
        return {p.name: (len(p.in_queue), len(p.out_queue)) for p in self.ports.values()}
