"""Turn a validated scenario into a runnable network and run it."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .accounting import Accounting
from .daf import DaDirectory, Irm, PingInitiator, make_app
from .efcp import DeltaTParams
from .engine import Simulator
from .ipcp import Adjacency, DifConfig, Ipcp, Node
from .medium import Medium
from .scenario import Scenario
from .trace import Tracer

log = logging.getLogger(__name__)


def dif_config(spec) -> DifConfig:
    timers = DeltaTParams(spec.mpl, spec.a_timer, spec.r_timer,
                          spec.sender_discard_multiple, spec.receiver_discard_multiple)
    return DifConfig(spec.name, spec.rank, timers, rto=spec.rto, max_pdu_payload=spec.max_pdu_payload,
                     queue_capacity=spec.queue_capacity, scheduler=spec.scheduler, routing=spec.routing,
                     auth=spec.auth, bootstrap=spec.bootstrap, allocate_timeout=spec.allocate_timeout,
                     enroll_timeout=spec.enroll_timeout)


class Network:
    def __init__(self, scenario: Scenario, seed: int | None = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else int(seed)
        self.sim = Simulator(self.seed)
        self.tracer = Tracer(self.sim)
        self.accounting = Accounting()
        self.medium = Medium(self.sim, self.tracer, self.accounting)
        self.cubes = {c.id: c for c in scenario.qos_cubes}
        self.difs = {d.name: dif_config(d) for d in scenario.difs}
        self.nodes: dict[str, Node] = {}
        self.ipcps: list[Ipcp] = []
        self.ipcp_by_apn: dict[str, Ipcp] = {}
        self.directory = DaDirectory()
        self.apps = []
        self.flow_errors: list = []
        self._build()

    # -- assembly ---------------------------------------------------------------

    def _build(self):
        sc = self.scenario
        for ns in sc.nodes:
            node = Node(ns.name, ns.kind)
            node.irm = Irm(node, self)
            self.nodes[ns.name] = node
            for ip in ns.ipcps:
                ipcp = Ipcp(self, node, ip.name, self.difs[ip.dif], ip.address, auth=ip.auth)
                node.ipcps[ip.name] = ipcp
                self.ipcps.append(ipcp)
                self.ipcp_by_apn[str(ipcp.apn)] = ipcp
            for ip in ns.ipcps:
                ipcp = node.ipcps[ip.name]
                if ipcp.rank == 0:
                    continue
                names = ip.over if ip.over is not None else [
                    o.name for o in ns.ipcps if self.difs[o.dif].rank == ipcp.rank - 1]
                ipcp.over = [node.ipcps[n] for n in names]
                for lower in ipcp.over:
                    # an IPCP is an application of the DIFs it sits on
                    self.directory.register(ipcp.apn, lower.dif.name, node.name)

        for ls in sc.links:
            a = self._ipcp_ref(ls.a)
            b = self._ipcp_ref(ls.b)
            link = self.medium.add_link(a.endpoint, b.endpoint, ls.rate, ls.delay, ls.ber, ls.metric, ls.name)
            a.attach_link(link, Adjacency(b.address, b.apn, None, b.endpoint, ls.metric, link))
            b.attach_link(link, Adjacency(a.address, a.apn, None, a.endpoint, ls.metric, link))
        for ipcp in self.ipcps:
            if ipcp.rank == 0:
                self.medium.attach(ipcp.endpoint, ipcp.on_medium)

        # neighbours above rank 0 share a lower DIF
        by_dif: dict[str, list[Ipcp]] = {}
        for ipcp in self.ipcps:
            by_dif.setdefault(ipcp.dif.name, []).append(ipcp)
        for members in by_dif.values():
            for p in members:
                if p.rank == 0:
                    continue
                for q in members:
                    if q.node is p.node:
                        continue
                    for lower in p.over:
                        if any(l2.dif.name == lower.dif.name for l2 in q.over):
                            p.adjacencies[q.address] = Adjacency(q.address, q.apn, lower)
                            break

        declared = {e.apn: e.difs for e in sc.da_directory}
        for spec in sc.apps:
            node = self.nodes[spec.node]
            app = make_app(self, node, spec)
            node.apps[str(app.apn)] = app
            self.apps.append(app)
            difs = declared.get(spec.apn)
            if difs is None:
                top = max(i.rank for i in node.ipcps.values())
                difs = [i.dif.name for i in node.ipcps.values() if i.rank == top]
            for dif in difs:
                if node.ipcp_in(dif) is not None:
                    self.directory.register(app.apn, dif, node.name)

        for ipcp in self.ipcps:
            if ipcp.dif.bootstrap == "eager":
                self.sim.call_soon(ipcp.join)
        for app in self.apps:
            app.start()

    def _ipcp_ref(self, ref: str) -> Ipcp:
        node, _, name = ref.partition(".")
        return self.nodes[node].ipcps[name]

    def ipcp(self, ref: str) -> Ipcp:
        return self._ipcp_ref(ref)

    def resolve(self, apn, dif_name):
        """Address in ``dif_name`` where ``apn`` can be reached, or None."""
        for dif, node in self.directory.placements(apn):
            if dif == dif_name:
                ipcp = self.nodes[node].ipcp_in(dif)
                if ipcp is not None:
                    return ipcp.address
        return None

    def app(self, apn):
        return next((a for a in self.apps if str(a.apn) == str(apn)), None)

    def initiators(self) -> list[PingInitiator]:
        return [a for a in self.apps if isinstance(a, PingInitiator)]

    def samples(self) -> list:
        out = []
        for app in self.initiators():
            out.extend(app.samples)
        return out

    # -- running ------------------------------------------------------------------

    def run(self, until: int | None = None) -> "Summary":
        stop = self.scenario.stop_time if until is None else int(until)
        events = self.sim.run_until(stop)
        log.info("processed %d events up to t=%d", events, stop)
        return self.summary(events)

    def summary(self, events=0) -> "Summary":
        allocated = sum(i.fa.user_allocated for i in self.ipcps)
        deallocated = sum(i.fa.user_deallocated for i in self.ipcps)
        samples = self.samples()
        return Summary(self.scenario.name, self.seed, self.sim.now, events, allocated, deallocated,
                       len(self.flow_errors), self.accounting.table(), self.accounting.reconciles(),
                       leak_check(self), len(samples), sum(1 for s in samples if s.lost))


def leak_check(net: Network) -> list[str]:
    """Resources still held by user flows.

    Management flows and the (N-1)-flows that carry a DIF's traffic are
    infrastructure: they are created on first use and live for the whole run,
    so they are excluded.
    """
    problems = []
    for node in net.nodes.values():
        infra_ports = set()
        for ipcp in node.ipcps.values():
            live = ipcp.fa.live()
            users = [f for f in live if not f.infrastructure]
            if users:
                problems.append(f"{ipcp.label}: {len(users)} live FAI(s) "
                                + ",".join(f"{f.fai_id}:{f.state.value}" for f in users))
            infra_ceps = {f.cep for f in live if f.infrastructure and f.cep}
            stray = sorted(set(ipcp.efcp) - infra_ceps)
            if stray:
                problems.append(f"{ipcp.label}: live EFCP instance(s) on CEP-id(s) {stray}")
            ceps = sorted(set(ipcp.ceps.in_use()) - infra_ceps)
            if ceps:
                problems.append(f"{ipcp.label}: CEP-id(s) {ceps} still allocated")
            infra_ports |= {f.port_id for f in live if f.infrastructure and f.port_id}
        ports = sorted(set(node.ports.in_use()) - infra_ports)
        if ports:
            problems.append(f"{node.name}: port-id(s) {ports} still allocated")
        if node.irm is not None and node.irm.table:
            problems.append(f"{node.name}: IRM still lists port(s) {sorted(node.irm.table)}")
    return problems


@dataclass
class Summary:
    scenario: str
    seed: int
    end_time: int
    events: int
    flows_allocated: int
    flows_deallocated: int
    flow_errors: int
    pdus: dict = field(default_factory=dict)
    reconciles: bool = True
    leaks: list = field(default_factory=list)
    samples: int = 0
    lost: int = 0

    @property
    def clean(self) -> bool:
        return not self.leaks and self.flow_errors == 0 and self.reconciles

    def text(self) -> str:
        lines = [f"scenario={self.scenario} seed={self.seed} end_ns={self.end_time} events={self.events}",
                 f"flows allocated={self.flows_allocated} deallocated={self.flows_deallocated} "
                 f"flow_errors={self.flow_errors}",
                 f"ping samples={self.samples} lost={self.lost}"]
        for rank, c in self.pdus.items():
            lines.append("rank {} pdus sent={sent} delivered={delivered} drop_medium={drop_medium} "
                         "drop_queue={drop_queue} drop_noroute={drop_noroute} lost_below={lost_below} "
                         "in_flight={in_flight}".format(rank, **c))
        lines.append(f"counters reconcile={'yes' if self.reconciles else 'NO'}")
        lines.append("leak check=" + ("ok" if not self.leaks else "FAILED: " + "; ".join(self.leaks)))
        return "\n".join(lines)


def build_network(scenario: Scenario, seed: int | None = None) -> Network:
    return Network(scenario, seed)


def run(scenario: Scenario, seed: int | None = None, until: int | None = None):
    net = Network(scenario, seed)
    return net, net.run(until)
