"""Trace checkers for the allocation and deallocation choreography.

Each checker takes a list of :class:`~ipcsim.trace.TraceEvent` and returns a
list of violation strings; an empty list means the trace conforms.
"""

from __future__ import annotations

from .flow_alloc import TRANSITIONS, FaiState
from .trace import TraceEvent


def _first(events, pred, after=-1):
    for te in events:
        if te.index > after and pred(te):
            return te
    return None


def _at(te: TraceEvent, node, comp) -> bool:
    return te.node == node and te.comp == comp


def _order(violations, steps):
    """``steps`` is a list of (label, event); each must exist and follow the last."""
    prev = None
    for label, te in steps:
        if te is None:
            violations.append(f"missing: {label}")
            return
        if prev is not None and te.index < prev[1].index:
            violations.append(f"order: {label} (#{te.index}) before {prev[0]} (#{prev[1].index})")
        prev = (label, te)


def data_create_request(events, node, ipcp):
    return _first(events, lambda e: _at(e, node, f"{ipcp}.ribd") and e.ev == "RIBD_SEND"
                  and e.get("msg") == "CreateFlowRequest" and str(e.get("qos")) != "0")


def check_allocation(events, node, ipcp) -> list[str]:
    """Five-phase order at the initiating IPCP ``node``/``ipcp``.

    management flow to the next hop -> enrollment (MConnect, MConnectResponse+)
    -> (N-1) data flow -> CreateFlowRequest -> CreateFlowResponse(+) -> first
    data PDU.
    """
    v: list[str] = []
    cfr = data_create_request(events, node, ipcp)
    if cfr is None:
        return ["missing: data CreateFlowRequest"]
    peer = str(cfr.get("via"))
    qos = str(cfr.get("qos"))
    scep = str(cfr.get("scep"))

    def ra_done(q):
        return _first(events, lambda e: _at(e, node, f"{ipcp}.ra") and e.ev == "RA_N1_ALLOC"
                      and e.get("status") == "done" and str(e.get("peer")) == peer and str(e.get("qos")) == q)

    mgmt = ra_done("0")
    connecting = _first(events, lambda e: _at(e, node, f"{ipcp}.enroll") and e.ev == "ENROLL_STATE"
                        and str(e.get("peer")) == peer and e.get("new") == "CONNECTING")
    mconnect = _first(events, lambda e: _at(e, node, f"{ipcp}.ribd") and e.ev == "RIBD_SEND"
                      and e.get("msg") == "MConnect" and str(e.get("via")) == peer)
    mresp = _first(events, lambda e: _at(e, node, f"{ipcp}.ribd") and e.ev == "RIBD_RECV"
                   and e.get("msg") == "MConnectResponse" and str(e.get("src")) == peer
                   and e.get("result") == "+")
    enrolled = _first(events, lambda e: _at(e, node, f"{ipcp}.enroll") and e.ev == "ENROLL_STATE"
                      and str(e.get("peer")) == peer and e.get("new") == "ENROLLED")
    n1 = ra_done(qos)
    resp = _first(events, lambda e: _at(e, node, f"{ipcp}.ribd") and e.ev == "RIBD_RECV"
                  and e.get("msg") == "CreateFlowResponse" and str(e.get("scep")) == scep
                  and str(e.get("qos")) == qos, after=cfr.index)
    positive = resp is not None and resp.get("result") == "+"
    if resp is not None and not positive:
        v.append("CreateFlowResponse was negative")
    first_data = _first(events, lambda e: _at(e, node, f"{ipcp}.efcp") and e.ev == "EFCP_SEND"
                        and e.get("kind") == "DATA" and str(e.get("conn", "")).startswith(f"{scep}-"))
    _order(v, [("management flow allocated", mgmt), ("enrollment started", connecting),
               ("MConnect sent", mconnect), ("MConnectResponse(+) received", mresp),
               ("enrolled", enrolled), ("data CreateFlowRequest", cfr)])
    _order(v, [("(N-1) data flow allocated", n1), ("data CreateFlowRequest", cfr)])
    _order(v, [("data CreateFlowRequest", cfr), ("CreateFlowResponse(+)", resp),
               ("first data PDU", first_data)])
    return v


def check_deallocation(events, init_node, init_ipcp, resp_node, resp_ipcp, app_apn) -> list[str]:
    """Three-phase teardown: release, request, peer teardown, response, local teardown."""
    v: list[str] = []
    release = _first(events, lambda e: e.node == init_node and e.comp == f"app.{app_apn}"
                     and e.ev == "APP_RELEASE")
    dreq = _first(events, lambda e: _at(e, init_node, f"{init_ipcp}.ribd") and e.ev == "RIBD_SEND"
                  and e.get("msg") == "DeleteFlowRequest")
    dreq_rx = _first(events, lambda e: _at(e, resp_node, f"{resp_ipcp}.ribd") and e.ev == "RIBD_RECV"
                     and e.get("msg") == "DeleteFlowRequest")
    after = dreq_rx.index if dreq_rx is not None else -1
    peer_gone = _first(events, lambda e: _at(e, resp_node, f"{resp_ipcp}.efcp") and e.ev == "EFCP_DESTROY",
                       after=after)
    dresp = _first(events, lambda e: _at(e, resp_node, f"{resp_ipcp}.ribd") and e.ev == "RIBD_SEND"
                   and e.get("msg") == "DeleteFlowResponse", after=after)
    dresp_rx = _first(events, lambda e: _at(e, init_node, f"{init_ipcp}.ribd") and e.ev == "RIBD_RECV"
                      and e.get("msg") == "DeleteFlowResponse")
    after = dresp_rx.index if dresp_rx is not None else -1
    local_gone = _first(events, lambda e: _at(e, init_node, f"{init_ipcp}.efcp") and e.ev == "EFCP_DESTROY",
                        after=after)
    _order(v, [("application release", release), ("DeleteFlowRequest sent", dreq),
               ("DeleteFlowRequest received", dreq_rx), ("peer EFCP removed", peer_gone),
               ("DeleteFlowResponse sent", dresp), ("DeleteFlowResponse received", dresp_rx),
               ("initiator EFCP removed", local_gone)])
    for te in (dresp, dresp_rx):
        if te is not None and te.get("result") != "+":
            v.append("DeleteFlowResponse was negative")
    return v


def check_fai_transitions(events) -> list[str]:
    """Every FAI_STATE line is a declared transition continuing that FAI's history."""
    v = []
    last: dict = {}
    for e in events:
        if e.ev != "FAI_STATE":
            continue
        key = (e.node, e.comp, str(e.get("fai")))
        try:
            old, new = FaiState(e.get("old")), FaiState(e.get("new"))
        except ValueError:
            v.append(f"#{e.index}: unknown state in {e.get('old')}->{e.get('new')}")
            continue
        if (old, new) not in TRANSITIONS:
            v.append(f"#{e.index}: {old.value}->{new.value} is not a declared transition")
        prev = last.get(key, FaiState.NULL)
        if prev == FaiState.DEALLOCATED and old == FaiState.NULL:
            prev = FaiState.NULL  # FAI ids are not reused, but tolerate a fresh record
        if old != prev:
            v.append(f"#{e.index}: FAI {key} leaves {old.value} but was in {prev.value}")
        last[key] = new
    return v


def check_enrollment_guard(events) -> list[str]:
    """No data CreateFlowRequest leaves toward a neighbour that is not enrolled."""
    v = []
    enrolled = set()
    for e in events:
        comp_ipcp = e.comp.rsplit(".", 1)[0]
        if e.ev == "ENROLL_STATE":
            key = (e.node, comp_ipcp, str(e.get("peer")))
            if e.get("new") == "ENROLLED":
                enrolled.add(key)
            else:
                enrolled.discard(key)
        elif e.ev == "RIBD_SEND" and e.get("msg") == "CreateFlowRequest":
            if (e.node, comp_ipcp, str(e.get("via"))) not in enrolled:
                v.append(f"#{e.index}: CreateFlowRequest from {e.node}.{comp_ipcp} via {e.get('via')} "
                         "before enrollment")
    return v


def check_monotone(events) -> list[str]:
    v = []
    for a, b in zip(events, events[1:]):
        if b.time < a.time:
            v.append(f"#{b.index}: time {b.time} < {a.time}")
    return v


def allocation_descent(events, node, ipcps) -> list[str]:
    """Check a chain of nested (N-1) allocations on one node, top first.

    ``ipcps`` lists the IPCP names from the top rank down to rank 0. Every
    rank above 0 must start an (N-1) allocation through the next IPCP, and the
    chain must end with the rank-0 IPCP taking a flow on the medium.
    """
    v: list[str] = []
    prev = None
    for upper in ipcps[:-1]:
        start = _first(events, lambda e, u=upper: _at(e, node, f"{u}.ra") and e.ev == "RA_N1_ALLOC"
                       and e.get("status") == "start", after=prev.index if prev else -1)
        if start is None:
            v.append(f"missing: (N-1) allocation started by {node}.{upper}")
            return v
        prev = start
    bottom = _first(events, lambda e: _at(e, node, f"{ipcps[-1]}.ra") and e.ev == "RA_N1_ALLOC"
                    and e.get("via") == "medium", after=prev.index if prev else -1)
    if bottom is None:
        v.append(f"missing: medium allocation at {node}.{ipcps[-1]}")
    return v


def descents(events, node) -> int:
    """Number of distinct IPCPs on ``node`` that started an (N-1) allocation."""
    return len({e.comp for e in events if e.node == node and e.ev == "RA_N1_ALLOC"
                and e.get("status") == "start"})
