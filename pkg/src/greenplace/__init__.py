"""Carbon-, energy- and cost-aware placement of multi-service applications
onto Cloud-IoT infrastructures."""
from .engine import SearchContext, allocated_resources, check_placement, enumerate_placements
from .facts import apply_overlay, build_kb, parse_facts, parse_overlay
from .footprint import footprint
from .model import KnowledgeBase, Placement, validate
from .ranking import RankKey, compare, rank

__all__ = [
    "KnowledgeBase", "Placement", "RankKey", "SearchContext",
    "allocated_resources", "apply_overlay", "build_kb", "check_placement", "compare",
    "enumerate_placements", "footprint", "parse_facts", "parse_overlay", "rank", "validate",
]
__version__ = "0.1.0"
