"""Exhaustive depth-first placement search.

Services are placed one at a time in application order. A candidate node is
kept when it offers the service's software and IoT capabilities, enough free
hardware, and links that meet the latency and bandwidth of every flow to an
already placed service. Candidates are tried in lexicographic name order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Tuple

from .model import EMPTY_ALLOCATION, Allocation, Constants, KnowledgeBase, Placement

# A partial placement is a sequence of (service, node) pairs.
Partial = Sequence[Tuple[str, str]]


@dataclass(frozen=True)
class SearchContext:
    """Resources to discount (``prior_alloc``) and the thresholds to apply.

    A fresh placement uses an empty prior allocation.
    """

    constants: Constants = field(default_factory=Constants)
    prior_alloc: Allocation = EMPTY_ALLOCATION

    @classmethod
    def fresh(cls, kb: KnowledgeBase) -> "SearchContext":
        return cls(kb.constants)


def hw_ok(kb: KnowledgeBase, node: str, service: str, partial: Partial, ctx: SearchContext) -> bool:
    n = kb.node_map[node]
    svc = kb.service_map
    already = sum(svc[s].hardware_reqs for s, m in partial if m == node)
    current = ctx.prior_alloc.hw_on(node)
    return n.free_hw >= svc[service].hardware_reqs + ctx.constants.hw_threshold - current + already


def node_ok(kb: KnowledgeBase, service: str, node: str, partial: Partial, ctx: SearchContext) -> bool:
    s = kb.service_map[service]
    n = kb.node_map[node]
    return (s.software_reqs <= n.software_caps
            and s.iot_reqs <= n.iot_caps
            and hw_ok(kb, node, service, partial, ctx))


def _relevant(kb: KnowledgeBase, service: str, node: str, partial: Partial):
    """Distinct ``((n1, n2), max_latency)`` pairs for flows touching ``service``."""
    found = {}
    for s2, n2 in partial:
        if n2 == node:
            continue
        out = kb.flow_map.get((service, s2))
        if out is not None:
            found[((node, n2), out.max_latency)] = None
        back = kb.flow_map.get((s2, service))
        if back is not None:
            found[((n2, node), back.max_latency)] = None
    return list(found)


def links_ok(kb: KnowledgeBase, service: str, node: str, partial: Partial, ctx: SearchContext) -> bool:
    relevant = _relevant(kb, service, node, partial)
    if not relevant:
        return True
    links = kb.link_map
    for pair, max_latency in relevant:
        link = links.get(pair)
        if link is None or link.latency > max_latency:
            return False
    placed = dict(partial)
    placed[service] = node
    for pair in dict.fromkeys(p for p, _ in relevant):
        needed = sum(f.min_bandwidth for f in kb.flows
                     if placed.get(f.source) == pair[0] and placed.get(f.target) == pair[1])
        current = ctx.prior_alloc.bw_on(*pair)
        if links[pair].bandwidth < needed - current + ctx.constants.bw_threshold:
            return False
    return True


def _search(kb, services, ctx, partial: List[Tuple[str, str]]) -> Iterator[Placement]:
    if len(partial) == len(services):
        yield Placement(tuple(partial))
        return
    service = services[len(partial)]
    for node in kb.node_names:
        if node_ok(kb, service, node, partial, ctx) and links_ok(kb, service, node, partial, ctx):
            partial.append((service, node))
            yield from _search(kb, services, ctx, partial)
            partial.pop()


def iter_placements(kb: KnowledgeBase, app: str, ctx: SearchContext = None) -> Iterator[Placement]:
    services = kb.application(app).services
    ctx = ctx or SearchContext.fresh(kb)
    return _search(kb, services, ctx, [])


def enumerate_placements(kb: KnowledgeBase, app: str, ctx: SearchContext = None) -> List[Placement]:
    """Every eligible placement of ``app``, in deterministic depth-first order."""
    return list(iter_placements(kb, app, ctx))


def check_placement(kb: KnowledgeBase, app: str, placement: Placement,
                    ctx: SearchContext = None) -> bool:
    """Re-run the incremental checks over a complete assignment."""
    services = kb.application(app).services
    ctx = ctx or SearchContext.fresh(kb)
    mapping = placement.as_dict()
    if set(mapping) != set(services) or len(placement.assignments) != len(services):
        return False
    partial: List[Tuple[str, str]] = []
    for service in services:
        node = mapping[service]
        if node not in kb.node_map:
            return False
        if not (node_ok(kb, service, node, partial, ctx) and links_ok(kb, service, node, partial, ctx)):
            return False
        partial.append((service, node))
    return True


def allocated_resources(kb: KnowledgeBase, placement: Placement) -> Allocation:
    """Hardware per assignment and bandwidth per inter-node flow, sorted."""
    svc = kb.service_map
    hw = sorted((n, svc[s].hardware_reqs) for s, n in placement.assignments)
    where = placement.as_dict()
    bw = []
    for f in kb.flows:
        n1, n2 = where.get(f.source), where.get(f.target)
        if n1 is not None and n2 is not None and n1 != n2:
            bw.append((n1, n2, f.min_bandwidth))
    return Allocation(tuple(hw), tuple(sorted(bw)))
