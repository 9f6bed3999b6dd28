"""Scenario builders and independent oracles shared by the tests."""

from __future__ import annotations

import itertools
import math
import random

import yaml

from ipcsim import SCENARIO_DIR
from ipcsim.network import Network
from ipcsim.scenario import parse_scenario

HEADER = 32  # bytes added by every rank


def shipped(name):
    return SCENARIO_DIR / f"{name}.yaml"


def shipped_doc(name) -> dict:
    with open(shipped(name), encoding="utf-8") as fh:
        return yaml.safe_load(fh)


def build(doc: dict, seed=None) -> Network:
    return Network(parse_scenario(yaml.safe_dump(doc, sort_keys=False)), seed=seed)


def run_doc(doc: dict, seed=None, until=None):
    net = build(doc, seed)
    return net, net.run(until)


def line_doc(payload=100, count=10, interval_ms=20, rate=1_000_000, delay_ms=1, reliable=False,
             **app) -> dict:
    doc = shipped_doc("line_ping")
    for ln in doc["links"]:
        ln["rate_bps"] = rate
        ln["delay_ms"] = delay_ms
    a = doc["apps"][0]
    a.update(count=count, interval_ms=interval_ms, payload_bytes=payload, qos={"reliable": reliable})
    a.update(app)
    return doc


# -- latency oracle ---------------------------------------------------------------

def hop_ns(delay_ns, rate_bps, bits):
    return delay_ns + math.ceil(bits * 10**9 / rate_bps)


def analytic_rtt(payload, ranks, hops):
    """``hops`` is a list of (delay_ns, rate_bps); every rank adds one header."""
    bits = (payload + HEADER * ranks) * 8
    one_way = sum(hop_ns(d, r, bits) for d, r in hops)
    return one_way, 2 * one_way


# -- random router topologies ----------------------------------------------------

def random_topology(rng: random.Random, max_nodes=8):
    """Connected graph: ``(addresses, {(a, b): metric})`` with a < b by index."""
    n = rng.randint(2, max_nodes)
    addrs = rng.sample(range(1, 60), n)
    edges = {}
    order = list(range(n))
    rng.shuffle(order)
    for i in range(1, n):
        u, v = order[i], order[rng.randrange(i)]
        edges[tuple(sorted((u, v)))] = rng.randint(1, 5)
    for u, v in itertools.combinations(range(n), 2):
        if (u, v) not in edges and rng.random() < 0.3:
            edges[(u, v)] = rng.randint(1, 5)
    return addrs, edges


def router_doc(addrs, edges, seed=1, stop_s=2) -> dict:
    nodes = []
    for i, a in enumerate(addrs):
        nodes.append({"name": f"r{i}", "kind": "interior-router",
                      "ipcps": [{"name": "m", "dif": "mesh", "address": a},
                                {"name": "n", "dif": "net", "address": a}]})
    links = [{"a": f"r{u}.m", "b": f"r{v}.m", "rate_bps": 10_000_000, "delay_ms": 1, "metric": w}
             for (u, v), w in sorted(edges.items())]
    return {
        "name": "random-routers", "seed": seed, "stop_time_s": stop_s,
        "qos_cubes": [{"id": 1, "reliable": False, "ordered": False}],
        "difs": [{"name": "mesh", "rank": 0, "mpl_ms": 5, "a_timer_ms": 1, "r_timer_ms": 50,
                  "bootstrap": "eager"},
                 {"name": "net", "rank": 1, "mpl_ms": 10, "a_timer_ms": 2, "r_timer_ms": 100}],
        "nodes": nodes, "links": links, "apps": [],
    }


def floyd_warshall(addrs, edges):
    """All-pairs shortest path costs keyed by address, plain triple loop."""
    inf = float("inf")
    d = {(a, b): (0 if a == b else inf) for a in addrs for b in addrs}
    for (u, v), w in edges.items():
        a, b = addrs[u], addrs[v]
        d[a, b] = min(d[a, b], w)
        d[b, a] = min(d[b, a], w)
    for k in addrs:
        for i in addrs:
            for j in addrs:
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return d


def oracle_next_hop(addrs, edges, dist, src, dst):
    """Lowest-address neighbour that starts a shortest path."""
    nbrs = {}
    for (u, v), w in edges.items():
        a, b = addrs[u], addrs[v]
        if a == src:
            nbrs[b] = w
        if b == src:
            nbrs[a] = w
    return min(n for n, w in nbrs.items() if w + dist[n, dst] == dist[src, dst])
