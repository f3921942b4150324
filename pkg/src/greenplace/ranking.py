"""Lexicographic ranking of eligible placements and what-if comparison."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .engine import SearchContext, iter_placements
from .footprint import footprint
from .model import Footprint, KnowledgeBase, Placement

CRITERIA = ("carbon", "cost", "energy")
_ALIASES = {"c": "carbon", "k": "cost", "e": "energy",
            "carbon": "carbon", "cost": "cost", "energy": "energy"}


@dataclass(frozen=True)
class RankKey:
    priority: Tuple[str, ...] = CRITERIA

    def __post_init__(self):
        if sorted(self.priority) != sorted(CRITERIA):
            raise ValueError(f"rank key must order exactly {', '.join(CRITERIA)}; got {self.priority}")

    @classmethod
    def parse(cls, text: str) -> "RankKey":
        """Parse ``"cost,energy,carbon"`` or the short form ``"k,e,c"``."""
        try:
            names = tuple(_ALIASES[p.strip().lower()] for p in text.split(","))
        except KeyError as exc:
            raise ValueError(f"unknown ranking criterion {exc.args[0]!r}") from None
        return cls(names)

    def sort_key(self, ranked: Tuple[Placement, Footprint]):
        placement, fp = ranked
        return tuple(getattr(fp, c) for c in self.priority) + (placement.nodes,)

    def __str__(self) -> str:
        return ",".join(self.priority)


@dataclass(frozen=True)
class RankedPlacement:
    rank: int
    placement: Placement
    footprint: Footprint


def rank(kb: KnowledgeBase, app: str, key: RankKey = RankKey(),
         ctx: Optional[SearchContext] = None) -> List[RankedPlacement]:
    """Eligible placements of ``app`` sorted ascending by ``key``.

    Ties on every criterion fall back to the node names in service order.
    """
    scored = [(p, footprint(kb, p)) for p in iter_placements(kb, app, ctx)]
    assert len({p for p, _ in scored}) == len(scored), "duplicate placements"
    scored.sort(key=key.sort_key)
    return [RankedPlacement(i, p, fp) for i, (p, fp) in enumerate(scored, 1)]


# ---------------------------------------------------------------- what-if


@dataclass(frozen=True)
class PlacementDiff:
    placement: Placement
    rank_before: int
    rank_after: int
    before: Footprint
    after: Footprint

    @property
    def carbon(self) -> float:
        return self.after.carbon - self.before.carbon

    @property
    def cost(self) -> float:
        return self.after.cost - self.before.cost

    @property
    def energy(self) -> float:
        return self.after.energy - self.before.energy

    @property
    def node_deltas(self) -> Dict[str, Tuple[float, float]]:
        """``node -> (energy delta, carbon delta)`` over nodes in either footprint."""
        b = {d.node: d for d in self.before.per_node}
        a = {d.node: d for d in self.after.per_node}
        out = {}
        for n in sorted(set(a) | set(b)):
            be, bc = (b[n].energy, b[n].carbon) if n in b else (0.0, 0.0)
            ae, ac = (a[n].energy, a[n].carbon) if n in a else (0.0, 0.0)
            out[n] = (ae - be, ac - bc)
        return out

    @property
    def network(self) -> Tuple[float, float]:
        return (self.after.network.energy - self.before.network.energy,
                self.after.network.carbon - self.before.network.carbon)

    @property
    def moved(self) -> bool:
        return self.rank_before != self.rank_after

    @property
    def changed(self) -> bool:
        return self.moved or self.before != self.after


@dataclass(frozen=True)
class Comparison:
    application: str
    key: RankKey
    common: Tuple[PlacementDiff, ...]
    appeared: Tuple[RankedPlacement, ...]
    disappeared: Tuple[RankedPlacement, ...]

    @property
    def changed(self) -> bool:
        return bool(self.appeared or self.disappeared or any(d.changed for d in self.common))


def compare(kb_a: KnowledgeBase, kb_b: KnowledgeBase, app: str,
            key: RankKey = RankKey()) -> Comparison:
    """Pair the rankings of ``app`` under two knowledge bases by assignment."""
    before = {r.placement: r for r in rank(kb_a, app, key)}
    after = {r.placement: r for r in rank(kb_b, app, key)}
    common = tuple(
        PlacementDiff(p, before[p].rank, after[p].rank, before[p].footprint, after[p].footprint)
        for p in sorted(set(before) & set(after), key=lambda p: before[p].rank)
    )
    appeared = tuple(after[p] for p in sorted(set(after) - set(before), key=lambda p: after[p].rank))
    disappeared = tuple(before[p] for p in sorted(set(before) - set(after),
                                                   key=lambda p: before[p].rank))
    return Comparison(app, key, common, appeared, disappeared)


def percent_gap(a: float, b: float) -> float:
    """Relative gap between two values, as a percentage of the larger one."""
    hi = max(abs(a), abs(b))
    return 0.0 if hi == 0 else 100 * abs(a - b) / hi
