from hypothesis import given, settings, strategies as st

from ipcsim.accounting import Accounting
from ipcsim.engine import Simulator
from ipcsim.pdu import FLAG_FIRST, FLAG_LAST, HEADER_BYTES, Pdu, PduKind
from ipcsim.rmt import ANY_QOS, ForwardingTable, Rmt, demux, mux, rmt_forward
from ipcsim.trace import Tracer

B = 7


def _pdu(dst=B, qos=1, seq=1, n=10):
    return Pdu(1, dst, 1, 1, qos, PduKind.DATA, seq, bytes(n))


def _rmt(capacity=100, hold=0):
    sim = Simulator()
    tr = Tracer(sim)
    acc = Accounting()
    r = Rmt(sim, "n", "x.rmt", 1, tr, acc, capacity)
    out = []

    def sink(pdu):
        out.append((sim.now, pdu.seq))
        return hold

    port = r.add_port(B, "p1", sink=sink)
    r.resolve_port = lambda nh, q: r.ports.get(nh)
    return sim, tr, acc, r, port, out


def test_forward_exact_and_fallback():
    table = ForwardingTable({(B, 1): "p1"})
    assert rmt_forward(_pdu(qos=1), table) == "p1"
    assert rmt_forward(_pdu(qos=2), table) == "p1"
    assert rmt_forward(_pdu(dst=9), table) is None
    assert ForwardingTable({(B, ANY_QOS): "p2"}).lookup(B, 5) == "p2"
    assert ForwardingTable(default="d").lookup(3, 1) == "d"


def test_no_route_is_dropped_and_traced():
    sim, tr, acc, r, port, out = _rmt()
    r.send(_pdu(dst=9))
    assert tr.select(ev="RMT_NO_ROUTE") and acc.ranks[0].drop_noroute == 1
    assert acc.reconciles()


def test_tail_drop_at_capacity():
    sim, tr, acc, r, port, out = _rmt(capacity=2)
    port.sink = None  # unbound: nothing drains
    assert r.enqueue(_pdu(seq=1), port, "out")
    assert r.enqueue(_pdu(seq=2), port, "out")
    assert not r.enqueue(_pdu(seq=3), port, "out")
    assert len(tr.select(ev="RMT_QUEUE_DROP")) == 1
    r.dequeue(port, "out")
    assert r.enqueue(_pdu(seq=4), port, "out")


def test_port_busy_for_hold_time_keeps_fifo():
    sim, tr, acc, r, port, out = _rmt(hold=1000)
    r.table = ForwardingTable({(B, 1): B})
    for s in (1, 2, 3):
        r.send(_pdu(seq=s))
    sim.run()
    assert out == [(0, 1), (1000, 2), (2000, 3)]


def test_local_delivery():
    sim, tr, acc, r, port, out = _rmt()
    got = []
    r.deliver_local = got.append
    r.send(_pdu(dst=1))
    sim.run()
    assert [p.seq for p in got] == [1]
    assert acc.ranks[0].delivered == 1


def test_relay_does_not_touch_payload():
    sim, tr, acc, r, port, out = _rmt()
    r.table = ForwardingTable({(B, 1): B})
    inbound = r.add_port("in", "in")
    pdu = _pdu(seq=5)
    r.receive(pdu, inbound)
    sim.run()
    assert out == [(0, 5)] and r.stats["relayed"] == 1


def test_two_upper_flows_share_one_lower_flow():
    # (N)-PDUs of two connections to the same next hop ride the same (N-1)-port
    sim, tr, acc, r, port, out = _rmt()
    r.table = ForwardingTable({(B, 1): B})
    a = Pdu(1, B, 1, 5, 1, PduKind.DATA, 1, b"a")
    b = Pdu(1, B, 2, 6, 1, PduKind.DATA, 1, b"b")
    r.send(a)
    r.send(b)
    sim.run()
    assert len(out) == 2 and len(r.ports) == 1


pdus = st.builds(
    Pdu,
    st.integers(0, 2**16 - 1), st.integers(0, 2**16 - 1), st.integers(0, 2**16 - 1),
    st.integers(0, 2**16 - 1), st.integers(0, 255), st.sampled_from(list(PduKind)),
    st.integers(0, 2**64 - 1), st.binary(max_size=300), st.integers(0, 2**32 - 1),
    st.integers(0, 2**32 - 1), st.sampled_from([0, FLAG_FIRST, FLAG_LAST, FLAG_FIRST | FLAG_LAST]),
    st.integers(0, 2**32 - 1))


@settings(max_examples=500)
@given(pdus)
def test_demux_inverts_mux(pdu):
    sdu = mux(pdu)
    assert len(sdu.data) == HEADER_BYTES + len(pdu.payload)
    assert demux(sdu) == pdu


@given(pdus, pdus)
def test_nested_encapsulation(inner, outer_template):
    lower = outer_template.copy(payload=mux(inner).data)
    back = demux(mux(lower))
    assert back == lower
    assert Pdu.decode(back.payload) == inner
