import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from helpers import build, line_doc, router_doc, run_doc
from ipcsim.errors import NoManagementFlow
from ipcsim.identifiers import MGMT_QOS_ID
from ipcsim.mgmt import EnrollState, MgmtMessage, MsgKind, shortest_next_hops
from ipcsim.pdu import Pdu, PduKind

MS = 1_000_000


def test_message_codec_round_trip():
    msg = MgmtMessage(MsgKind.CREATE_FLOW_REQUEST, 1, 3, {"src_apn": "A", "qos": 1})
    assert MgmtMessage.decode(msg.encode()) == msg
    rep = msg.reply(MsgKind.CREATE_FLOW_RESPONSE, True)
    assert (rep.src, rep.dst, rep.positive) == (3, 1, True)


def test_send_before_bootstrap_needs_management_flow():
    net = build(line_doc())
    top = net.ipcp("host1.top")
    with pytest.raises(NoManagementFlow):
        top.ribd.send(MgmtMessage(MsgKind.M_CONNECT, 1, 2, {}), via=2)


def test_malformed_kind_is_dropped():
    net = build(line_doc())
    bot = net.ipcp("sw.bot1")
    bad = Pdu(1, 2, 0, 0, MGMT_QOS_ID, PduKind.MGMT, 0, b'{"kind":"Bogus","src":1,"dst":2}')
    assert bot.ribd.deliver(bad) is None
    assert net.tracer.select(ev="RIBD_DROP", node="sw")


def test_management_message_arrives_after_delay_plus_serialization():
    net, _ = run_doc(line_doc(count=1))
    sent = net.tracer.select(ev="RIBD_SEND", node="host1", comp="bot.ribd", msg="MConnect")[0]
    recv = net.tracer.select(ev="RIBD_RECV", node="sw", comp="bot1.ribd", msg="MConnect")[0]
    body = MgmtMessage(MsgKind.M_CONNECT, 1, 2, {"dif": "link1", "auth": "", "src_apn": "host1.bot"})
    bits = (len(body.encode()) + 32) * 8
    assert recv.time - sent.time == MS + bits * 1000  # 1 bit = 1 us at 1 Mbit/s


def test_enrollment_is_symmetric():
    net, _ = run_doc(line_doc(count=1))
    for a, b in (("host1.top", "sw.top"), ("sw.top", "host2.top"), ("host1.bot", "sw.bot1")):
        pa, pb = net.ipcp(a), net.ipcp(b)
        assert pa.enrollment.state(pb.address) == EnrollState.ENROLLED
        assert pb.enrollment.state(pa.address) == EnrollState.ENROLLED


def test_dif_name_mismatch_is_refused():
    net = build(line_doc())
    sw = net.ipcp("sw.bot1")
    f = sw.enrollment.handle(MgmtMessage(MsgKind.M_CONNECT, 1, 2, {"dif": "elsewhere", "auth": ""}))
    assert f.state == EnrollState.FAILED
    net.sim.run_until(50 * MS)
    resp = net.tracer.select(ev="RIBD_RECV", node="host1", msg="MConnectResponse")
    assert resp and resp[0].get("result") == "-"


def test_auth_mismatch_blocks_data_allocation():
    doc = line_doc()
    doc["nodes"][2]["ipcps"][1]["auth"] = "secret"
    net, summary = run_doc(doc)
    ev = net.tracer.events
    assert any(e.ev == "ENROLL_STATE" and e.get("new") == "FAILED" and e.node == "sw" for e in ev)
    # nothing tries to cross the refused adjacency
    assert not [e for e in ev if e.ev == "RIBD_SEND" and e.node == "sw" and e.comp == "top.ribd"
                and e.get("msg") == "CreateFlowRequest"]
    app = net.app("A")
    assert app.state == "failed" and summary.samples == 0
    assert not summary.leaks


def test_line_topology_routes_through_the_router():
    net, _ = run_doc(line_doc(count=1))
    assert net.ipcp("host1.top").routing.next_hops() == {2: 2, 3: 2}
    assert net.ipcp("host2.top").routing.next_hops() == {1: 2, 2: 2}
    assert net.ipcp("sw.top").routing.next_hops() == {1: 1, 3: 3}


def test_equal_cost_tie_break_prefers_lowest_address():
    # square 1-5-4 / 1-3-4, all metric 1: the route from 1 to 4 leaves via 3
    addrs = [1, 5, 3, 4]
    edges = {(0, 1): 1, (0, 2): 1, (1, 3): 1, (2, 3): 1}
    net, _ = run_doc(router_doc(addrs, edges))
    assert net.nodes["r0"].ipcps["m"].rmt.table.lookup(4, 0) == 3


def test_stale_update_is_ignored_and_not_reflooded():
    addrs, edges = [1, 2, 3], {(0, 1): 1, (1, 2): 1}
    net, _ = run_doc(router_doc(addrs, edges))
    mid = net.nodes["r1"].ipcps["m"].routing
    before = (dict(mid.lsdb), mid.updates_sent)
    version, nbrs = mid.lsdb[1]
    mid.routing_step({"origin": 1, "version": version, "neighbors": [[9, 1]]}, sender=1)
    assert (dict(mid.lsdb), mid.updates_sent) == before
    assert net.tracer.select(ev="ROUTING_STALE")


def test_update_floods_once_per_neighbour():
    addrs, edges = [1, 2, 3], {(0, 1): 1, (1, 2): 1}
    net, _ = run_doc(router_doc(addrs, edges))
    mid = net.nodes["r1"].ipcps["m"]
    n0 = mid.ribd.sent
    mid.routing._originate()
    assert mid.ribd.sent - n0 == 2


def test_eager_bootstrap_enrolls_every_link():
    addrs, edges = [4, 2, 7], {(0, 1): 1, (1, 2): 2, (0, 2): 5}
    net, _ = run_doc(router_doc(addrs, edges))
    for node in net.nodes.values():
        m = node.ipcps["m"]
        assert m.enrollment.enrolled_peers() == sorted(m.adjacencies)


graphs = st.integers(2, 9).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.integers(1, 9)), max_size=25)))


@settings(max_examples=200)
@given(graphs)
def test_dijkstra_matches_networkx(spec):
    n, raw = spec
    g = {}
    G = nx.Graph()
    G.add_nodes_from(range(n))
    for u, v, w in raw:
        if u == v:
            continue
        w = min(w, g.get(u, {}).get(v, w))
        g.setdefault(u, {})[v] = w
        g.setdefault(v, {})[u] = w
        G.add_edge(u, v, weight=w)
    got = shortest_next_hops(g, 0)
    lengths = nx.single_source_dijkstra_path_length(G, 0)
    assert {d: c for d, (c, _nh) in got.items()} == {d: c for d, c in lengths.items() if d != 0}
    for dst, (cost, nh) in got.items():
        firsts = [v for v, w in g[0].items() if w + nx.dijkstra_path_length(G, v, dst) == cost]
        assert nh == min(firsts)
