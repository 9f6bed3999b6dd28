"""Per-rank PDU bookkeeping used by the run summary.

Every PDU handed to an RMT for transmission is a *send*. It ends as exactly
one of: delivered to the destination RMT, dropped (medium / queue / no-route),
or lost below (the lower-rank PDU carrying it was dropped or abandoned with no
retransmission possible). Anything else is still in flight.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

DROP_REASONS = ("medium", "queue", "noroute")


@dataclass
class RankCounters:
    sent: int = 0
    delivered: int = 0
    drop_medium: int = 0
    drop_queue: int = 0
    drop_noroute: int = 0
    lost_below: int = 0

    @property
    def dropped(self) -> int:
        return self.drop_medium + self.drop_queue + self.drop_noroute

    def as_dict(self) -> dict:
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "drop_medium": self.drop_medium,
            "drop_queue": self.drop_queue,
            "drop_noroute": self.drop_noroute,
            "lost_below": self.lost_below,
        }


class Accounting:
    def __init__(self):
        self.ranks: dict[int, RankCounters] = defaultdict(RankCounters)
        self._live: dict[int, object] = {}
        self._next_uid = 1

    def sent(self, pdu):
        pdu.uid = self._next_uid
        self._next_uid += 1
        self._live[pdu.uid] = pdu
        self.ranks[pdu.rank].sent += 1

    def delivered(self, pdu):
        if self._live.pop(pdu.uid, None) is not None:
            self.ranks[pdu.rank].delivered += 1

    def dropped(self, pdu, reason: str):
        if self._live.pop(pdu.uid, None) is None:
            return
        c = self.ranks[pdu.rank]
        setattr(c, "drop_" + reason, getattr(c, "drop_" + reason) + 1)
        if not pdu.recoverable:
            self.lose(pdu.carried)

    def lose(self, upper):
        """The upper-rank PDU ``upper`` can no longer arrive."""
        if upper is None or self._live.pop(upper.uid, None) is None:
            return
        self.ranks[upper.rank].lost_below += 1
        if not upper.recoverable:
            self.lose(upper.carried)

    def in_flight(self, rank=None) -> int:
        if rank is None:
            return len(self._live)
        return sum(1 for p in self._live.values() if p.rank == rank)

    def reconciles(self) -> bool:
        for rank, c in self.ranks.items():
            if c.sent != c.delivered + c.dropped + c.lost_below + self.in_flight(rank):
                return False
        return True

    def table(self) -> dict[int, dict]:
        out = {}
        for rank in sorted(self.ranks):
            d = self.ranks[rank].as_dict()
            d["in_flight"] = self.in_flight(rank)
            out[rank] = d
        return out
