"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for every error raised by the simulator."""


class SchedulingInPast(SimError):
    pass


class Exhausted(SimError):
    """An identifier space has no free value left."""


class NoSuchLink(SimError):
    pass


class FlowNotAllocated(SimError):
    pass


class StaleState(SimError):
    """A PDU arrived for a discarded state vector and cannot open a new run."""


class FlowError(SimError):
    """The retransmission holding bound was exhausted for a PDU."""

    def __init__(self, seq, reason="r-timer exhausted"):
        super().__init__(f"seq {seq}: {reason}")
        self.seq = seq
        self.reason = reason


class AllocationFailed(SimError):
    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


class NoQosCube(AllocationFailed):
    def __init__(self, reason="no-qos-cube"):
        super().__init__(reason)


class NoRoute(AllocationFailed):
    def __init__(self, reason="no-route"):
        super().__init__(reason)


class DuplicateRequest(SimError):
    pass


class NoSuchFlow(SimError):
    pass


class NoManagementFlow(SimError):
    pass


class NoUnderlyingFlow(SimError):
    pass


class ParseError(SimError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)


class ValidationError(SimError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)
