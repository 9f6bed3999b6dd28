"""Names, local identifiers and QoS matching.

Port-ids are scoped to a node, CEP-ids to an IPCP. Both are allocated with a
smallest-free policy starting at 1 (0 means "unset").
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .errors import Exhausted


@dataclass(frozen=True, order=True)
class Apn:
    name: str
    instance: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("APN name must be non-empty")

    def __str__(self):
        return self.name if self.instance is None else f"{self.name}#{self.instance}"

    @classmethod
    def parse(cls, text: str) -> "Apn":
        name, sep, inst = text.partition("#")
        return cls(name, inst if sep else None)


@dataclass(frozen=True)
class Dan:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("DAN must be non-empty")

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Address:
    value: int
    dif: Dan

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class PortId:
    value: int
    owner_node: str


@dataclass(frozen=True)
class CepId:
    value: int
    owner_ipcp: str


@dataclass(frozen=True)
class ConnectionId:
    src_cep: int
    dst_cep: int
    qos_id: int

    def __str__(self):
        return f"{self.src_cep}-{self.dst_cep}-{self.qos_id}"


class IdAllocator:
    """Smallest-free integer allocator over ``1..capacity``."""

    def __init__(self, capacity: int = 65535, scope: str = ""):
        self.capacity = capacity
        self.scope = scope
        self._used: set[int] = set()
        self._released: list[int] = []  # min-heap of freed values below _next
        self._next = 1

    def allocate(self) -> int:
        while self._released:
            v = heapq.heappop(self._released)
            if v not in self._used:
                self._used.add(v)
                return v
        if self._next > self.capacity:
            raise Exhausted(f"identifier space of {self.scope or 'allocator'} exhausted")
        v = self._next
        self._next += 1
        self._used.add(v)
        return v

    def release(self, value: int) -> bool:
        if value not in self._used:
            return False
        self._used.remove(value)
        heapq.heappush(self._released, value)
        return True

    def __contains__(self, value) -> bool:
        return value in self._used

    def __len__(self) -> int:
        return len(self._used)

    def in_use(self) -> list[int]:
        return sorted(self._used)


@dataclass(frozen=True)
class QosRequirements:
    reliable: bool | None = None
    ordered: bool | None = None
    max_delay: int | None = None  # ns
    avg_bandwidth: int | None = None  # bit/s

    def __post_init__(self):
        if self.max_delay is not None and self.max_delay <= 0:
            raise ValueError("max_delay must be positive")

    def is_empty(self) -> bool:
        return (self.reliable is None and self.ordered is None
                and self.max_delay is None and self.avg_bandwidth is None)


@dataclass(frozen=True)
class QosCube:
    id: int
    reliable: bool = False
    ordered: bool = False
    max_delay: int | None = None
    avg_bandwidth: int | None = None

    def requirements(self) -> QosRequirements:
        return QosRequirements(self.reliable, self.ordered, self.max_delay, self.avg_bandwidth)


MGMT_QOS_ID = 0
MGMT_CUBE = QosCube(MGMT_QOS_ID, reliable=False, ordered=False)


def cube_satisfies(cube: QosCube, req: QosRequirements) -> bool:
    if req.reliable and not cube.reliable:
        return False
    if req.ordered and not cube.ordered:
        return False
    if req.max_delay is not None:
        if cube.max_delay is None or cube.max_delay > req.max_delay:
            return False
    if req.avg_bandwidth is not None:
        if cube.avg_bandwidth is None or cube.avg_bandwidth < req.avg_bandwidth:
            return False
    return True


def select_cube(req: QosRequirements, cubes) -> int | None:
    """Lowest-id cube meeting every requirement that is set, or None."""
    cubes = list(cubes)
    if not cubes:
        raise ValueError("cube set must be non-empty")
    for cube in sorted(cubes, key=lambda c: c.id):
        if cube.id == MGMT_QOS_ID:
            continue
        if cube_satisfies(cube, req):
            return cube.id
    return None
