"""Physical links under the bottom rank.

A link is a full-duplex latency + rate pipe. Corruption is drawn per PDU with
probability ``1 - (1 - ber) ** bits`` and a corrupted PDU is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import NS_PER_S
from .errors import NoSuchLink
from .identifiers import MGMT_QOS_ID


@dataclass
class Link:
    index: int
    endpoint_a: str
    endpoint_b: str
    rate: int  # bit/s
    delay: int  # ns
    ber: float = 0.0
    metric: int = 1
    name: str = ""
    _last_arrival: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("link rate must be positive")
        if self.delay < 0:
            raise ValueError("link delay must be non-negative")
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError("ber must lie in [0, 1]")
        if self.endpoint_a == self.endpoint_b:
            raise ValueError("a link needs two distinct endpoints")
        if not self.name:
            self.name = f"L{self.index}"

    def peer(self, endpoint: str) -> str:
        if endpoint == self.endpoint_a:
            return self.endpoint_b
        if endpoint == self.endpoint_b:
            return self.endpoint_a
        raise NoSuchLink(f"{endpoint} is not attached to {self.name}")

    def serialization_ns(self, bits: int) -> int:
        # ceil(bits / rate) in ns, exact integer arithmetic
        return -(-bits * NS_PER_S // self.rate)

    def corruption_probability(self, bits: int) -> float:
        return corruption_probability(self.ber, bits)


def corruption_probability(ber: float, bits: int) -> float:
    if ber <= 0.0:
        return 0.0
    if ber >= 1.0:
        return 1.0
    return 1.0 - (1.0 - ber) ** bits


def ber_for_loss(loss: float, bits: int) -> float:
    """Bit error rate that drops a PDU of ``bits`` bits with probability ``loss``."""
    return 1.0 - (1.0 - loss) ** (1.0 / bits)


class Medium:
    def __init__(self, sim, tracer=None, accounting=None):
        self.sim = sim
        self.tracer = tracer
        self.accounting = accounting
        self.links: list[Link] = []
        self._by_pair: dict[tuple, Link] = {}
        self._receivers: dict[str, object] = {}
        self.delivered = 0
        self.dropped = 0

    def add_link(self, endpoint_a, endpoint_b, rate, delay, ber=0.0, metric=1, name="") -> Link:
        link = Link(len(self.links), endpoint_a, endpoint_b, int(rate), int(delay), float(ber), metric, name)
        self.links.append(link)
        self._by_pair[(endpoint_a, endpoint_b)] = link
        self._by_pair[(endpoint_b, endpoint_a)] = link
        return link

    def attach(self, endpoint: str, receiver):
        """``receiver(pdu, link)`` is called on delivery at ``endpoint``."""
        self._receivers[endpoint] = receiver

    def find(self, a, b) -> Link:
        link = self._by_pair.get((a, b))
        if link is None:
            raise NoSuchLink(f"no link between {a} and {b}")
        return link

    def allocate(self, a, b) -> Link:
        """Flow allocation on the medium always succeeds at once."""
        return self.find(a, b)

    def transmit(self, link: Link, pdu, from_endpoint: str):
        """Schedule delivery at the far end, or drop a corrupted PDU.

        Returns the delivery event, or None when the PDU was dropped.
        """
        to = link.peer(from_endpoint)
        bits = pdu.size_bits
        now = self.sim.now
        arrival = now + link.delay + link.serialization_ns(bits)
        # FIFO per direction
        last = link._last_arrival.get(to, 0)
        if arrival < last:
            arrival = last
        link._last_arrival[to] = arrival
        # Management traffic is loss-free by construction; no draw is consumed.
        if pdu.qos_id != MGMT_QOS_ID and link.ber > 0.0:
            p = link.corruption_probability(bits)
            if p >= 1.0 or self.sim.rng(link.index).random() < p:
                self.dropped += 1
                if self.tracer is not None:
                    self.tracer.emit(from_endpoint.split("/")[0], "medium", "MEDIUM_DROP",
                                     link=link.name, src=from_endpoint, dst=to, bits=bits,
                                     qos=pdu.qos_id, seq=pdu.seq)
                if self.accounting is not None:
                    self.accounting.dropped(pdu, "medium")
                return None
        return self.sim.schedule(arrival, self._deliver, link, to, pdu, kind="medium")

    def _deliver(self, link, to, pdu):
        self.delivered += 1
        rx = self._receivers.get(to)
        if rx is not None:
            rx(pdu, link)
