"""Structured (JSON) and tabular renderings of rankings, explanations and diffs."""
from __future__ import annotations

import json
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, List, Optional

from .footprint import cost_terms
from .model import Constants, Footprint, KnowledgeBase, Placement
from .ranking import Comparison, RankedPlacement

SIG_DIGITS = 6


def round_half_up(x: float, places: int) -> str:
    """Format ``x`` with ``places`` decimals, ties away from zero."""
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def _sig(x: float) -> float:
    y = float(f"{x:.{SIG_DIGITS}g}")
    return 0.0 if y == 0 else y


def normalize(doc):
    """Round every float to six significant digits, recursively."""
    if isinstance(doc, bool) or doc is None:
        return doc
    if isinstance(doc, float):
        return _sig(doc)
    if isinstance(doc, dict):
        return {k: normalize(v) for k, v in doc.items()}
    if isinstance(doc, (list, tuple)):
        return [normalize(v) for v in doc]
    return doc


def dumps(doc) -> str:
    return json.dumps(normalize(doc), indent=2, ensure_ascii=False) + "\n"


# ------------------------------------------------------------ documents


def _assignments(p: Placement) -> list:
    return [{"service": s, "node": n} for s, n in p.assignments]


def _constants(c: Constants) -> dict:
    return {k: float(v) if isinstance(v, float) else v for k, v in c.as_dict().items()}


def footprint_doc(fp: Footprint) -> dict:
    return {
        "carbon_kg": fp.carbon,
        "cost": fp.cost,
        "energy_kwh": fp.energy,
        "per_node": [
            {
                "node": d.node,
                "old_load": d.old_load,
                "new_load": d.new_load,
                "old_energy_kwh": d.old_e,
                "new_energy_kwh": d.new_e,
                "pue": float(d.pue),
                "energy_kwh": d.energy,
                "carbon_kg": d.carbon,
            }
            for d in fp.per_node
        ],
        "network": {
            "total_bw_mbps": float(fp.network.total_bw),
            "energy_kwh": fp.network.energy,
            "carbon_kg": fp.network.carbon,
        },
    }


def ranking_doc(kb: KnowledgeBase, app: str, ranked: Iterable[RankedPlacement]) -> dict:
    return {
        "application": app,
        "constants": _constants(kb.constants),
        "placements": [
            {"rank": r.rank, "assignments": _assignments(r.placement), **footprint_doc(r.footprint)}
            for r in ranked
        ],
    }


def explain_doc(kb: KnowledgeBase, app: str, r: RankedPlacement) -> dict:
    body = {"rank": r.rank, "assignments": _assignments(r.placement), **footprint_doc(r.footprint)}
    for entry in body["per_node"]:
        node = kb.node_map[entry["node"]]
        entry["mix"] = [{"fraction": float(p), "source": s, "factor": float(kb.emissions[s])}
                        for p, s in node.mix.shares]
    body["cost_terms"] = [
        {"service": s, "node": n, "hardware": kb.service_map[s].hardware_reqs,
         "unit_cost": float(kb.node_map[n].unit_cost), "cost": c}
        for (s, n), c in zip(r.placement.assignments, cost_terms(kb, r.placement))
    ]
    return {"application": app, "constants": _constants(kb.constants), "placement": body}


def _delta_entry(r: RankedPlacement) -> dict:
    return {"rank": r.rank, "assignments": _assignments(r.placement),
            "carbon_kg": r.footprint.carbon, "cost": r.footprint.cost,
            "energy_kwh": r.footprint.energy}


def comparison_doc(kb: KnowledgeBase, cmp: Comparison) -> dict:
    return {
        "application": cmp.application,
        "constants": _constants(kb.constants),
        "changed": cmp.changed,
        "placements": [
            {
                "assignments": _assignments(d.placement),
                "rank_before": d.rank_before,
                "rank_after": d.rank_after,
                "delta": {"carbon_kg": d.carbon, "cost": d.cost, "energy_kwh": d.energy},
                "per_node": [{"node": n, "energy_kwh": e, "carbon_kg": c}
                             for n, (e, c) in d.node_deltas.items()],
                "network": {"energy_kwh": d.network[0], "carbon_kg": d.network[1]},
            }
            for d in cmp.common
        ],
        "appeared": [_delta_entry(r) for r in cmp.appeared],
        "disappeared": [_delta_entry(r) for r in cmp.disappeared],
    }


# ---------------------------------------------------------------- tables


def _table(rows: List[List[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def ranking_table(ranked: Iterable[RankedPlacement]) -> str:
    rows = [["Id", "Placement", "Emissions", "Cost", "Energy Cons."]]
    for r in ranked:
        fp = r.footprint
        rows.append([
            f"P{r.rank}",
            str(r.placement),
            f"{round_half_up(fp.carbon, 2)} kgCO2",
            f"{round_half_up(fp.cost, 4)} /h",
            f"{round_half_up(fp.energy, 2)} kWh",
        ])
    return _table(rows)


def explain_text(kb: KnowledgeBase, r: RankedPlacement) -> str:
    fp = r.footprint
    c = kb.constants
    out = [f"P{r.rank}: {r.placement}", "", "hardware:"]
    for d in fp.per_node:
        node = kb.node_map[d.node]
        out.append(f"  {d.node}: load {d.old_load:.2f}% -> {d.new_load:.2f}%, "
                   f"profile {d.old_e:.6g} -> {d.new_e:.6g} kWh, "
                   f"x PUE {d.pue:g} = {d.energy:.6g} kWh")
        terms = " + ".join(f"{p:g} x {kb.emissions[s]:g} ({s})" for p, s in node.mix.shares)
        out.append(f"    carbon: {d.energy:.6g} kWh x ({terms} = {d.intensity:.6g} kgCO2/kWh)"
                   f" = {d.carbon:.6g} kgCO2")
    net = fp.network
    out += ["", "network:",
            f"  {net.total_bw:g} Mbit/s x {c.mb_per_mbps_hour:g} MB/h x {c.kwh_per_mb:g} kWh/MB"
            f" = {net.energy:.6g} kWh",
            f"  carbon: {net.energy:.6g} kWh x {c.avg_gci:g} kgCO2/kWh = {net.carbon:.6g} kgCO2",
            "", "cost:"]
    for (s, n), cost in zip(r.placement.assignments, cost_terms(kb, r.placement)):
        out.append(f"  {s} on {n}: {kb.service_map[s].hardware_reqs} x "
                   f"{kb.node_map[n].unit_cost:g} = {cost:.6g} /h")
    out += ["", f"total: {fp.carbon:.6g} kgCO2, {fp.cost:.6g} /h, {fp.energy:.6g} kWh"]
    return "\n".join(out) + "\n"


def _signed(x: float) -> str:
    return f"{x:+.6g}"


def comparison_text(cmp: Comparison) -> str:
    if not cmp.changed:
        return "no changes\n"
    out = []
    for d in cmp.common:
        move = f"rank {d.rank_before} -> {d.rank_after}" if d.moved else f"rank {d.rank_before}"
        out.append(f"{d.placement} ({move})")
        out.append(f"  carbon {_signed(d.carbon)} kgCO2, cost {_signed(d.cost)} /h, "
                   f"energy {_signed(d.energy)} kWh")
        for n, (e, c) in d.node_deltas.items():
            if e or c:
                out.append(f"    {n}: energy {_signed(e)} kWh, carbon {_signed(c)} kgCO2")
        if any(d.network):
            out.append(f"    network: energy {_signed(d.network[0])} kWh, "
                       f"carbon {_signed(d.network[1])} kgCO2")
    for label, group in (("appeared", cmp.appeared), ("disappeared", cmp.disappeared)):
        for r in group:
            out.append(f"{label}: {r.placement} (carbon {r.footprint.carbon:.6g} kgCO2, "
                       f"cost {r.footprint.cost:.6g} /h, energy {r.footprint.energy:.6g} kWh)")
    return "\n".join(out) + "\n"


def find_ranked(ranked: Iterable[RankedPlacement], placement: Placement) -> Optional[RankedPlacement]:
    for r in ranked:
        if r.placement == placement:
            return r
    return None
