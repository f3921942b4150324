"""Hourly energy, carbon and cost of a placement.

Hardware energy on a node is the PUE-scaled difference between the node's
energy profile after and before the placement's services are added. Carbon
weights that energy by the node's energy mix. Network energy is charged on
the total bandwidth required between distinct nodes.
"""
from __future__ import annotations

import logging
import math
from typing import Mapping, Optional, Tuple

from .engine import allocated_resources
from .model import (
    Allocation,
    Constants,
    DomainError,
    EnergyMix,
    EnergyProfile,
    Footprint,
    KnowledgeBase,
    NetworkFootprint,
    NodeDelta,
    Placement,
    UnknownSource,
)

log = logging.getLogger(__name__)


def eval_profile(profile: EnergyProfile, load: float) -> float:
    if not 0 <= load <= 100:
        raise DomainError(f"load {load!r} outside [0, 100]")
    return profile(load)


def node_delta(kb: KnowledgeBase, node: str, alloc: Allocation) -> NodeDelta:
    n = kb.node_map[node]
    placed = alloc.hw_on(node)
    old_load = 100 * (n.tot_hw - n.free_hw) / n.tot_hw
    new_load = 100 * (n.tot_hw - n.free_hw + placed) / n.tot_hw
    old_e = eval_profile(n.profile, old_load)
    new_e = eval_profile(n.profile, new_load)
    energy = (new_e - old_e) * n.pue
    if energy < 0:
        log.warning("negative hardware energy %.6g kWh on %s (decreasing profile)", energy, node)
    intensity = n.mix.intensity(kb.emissions)
    return NodeDelta(node, old_load, new_load, old_e, new_e, n.pue, energy,
                     hardware_emissions(n.mix, kb.emissions, energy), intensity)


def hardware_energy(kb: KnowledgeBase, node: str, alloc: Allocation) -> float:
    """kWh drawn on ``node`` by the hardware ``alloc`` places there."""
    return node_delta(kb, node, alloc).energy


def hardware_emissions(mix: EnergyMix, table: Mapping[str, float], energy: float) -> float:
    """kgCO2 for ``energy`` kWh drawn from ``mix``."""
    carbon = 0.0
    for share, src in mix.shares:
        if src not in table:
            raise UnknownSource(src)
        carbon += share * table[src] * energy
    return carbon


def network_footprint(alloc: Allocation, constants: Constants) -> NetworkFootprint:
    total = alloc.total_bw
    energy = constants.mb_per_mbps_hour * constants.kwh_per_mb * total
    return NetworkFootprint(total, energy, constants.avg_gci * energy)


def hourly_cost(kb: KnowledgeBase, placement: Placement) -> float:
    return math.fsum(cost_terms(kb, placement))


def cost_terms(kb: KnowledgeBase, placement: Placement) -> Tuple[float, ...]:
    """Per-assignment ``hardware_reqs * unit_cost``, in placement order."""
    svc, nodes = kb.service_map, kb.node_map
    return tuple(svc[s].hardware_reqs * nodes[n].unit_cost for s, n in placement.assignments)


def footprint(kb: KnowledgeBase, placement: Placement,
              alloc: Optional[Allocation] = None) -> Footprint:
    alloc = alloc or allocated_resources(kb, placement)
    per_node = tuple(node_delta(kb, n, alloc) for n in placement.deployment_nodes)
    network = network_footprint(alloc, kb.constants)
    energy = math.fsum([d.energy for d in per_node] + [network.energy])
    carbon = math.fsum([d.carbon for d in per_node] + [network.carbon])
    return Footprint(energy, carbon, hourly_cost(kb, placement), per_node, network)
