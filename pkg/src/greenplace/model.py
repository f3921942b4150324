"""Domain types for applications, infrastructure and placements.

Everything here is immutable. A :class:`KnowledgeBase` is the single value
passed around by the engine, the estimator and the ranking code; it is built
from fact files by :mod:`greenplace.facts` and checked with :func:`validate`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Tuple, Union

IDENTIFIER_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")

# kgCO2 per kWh produced by each power source.
DEFAULT_EMISSIONS: Mapping[str, float] = {
    "gas": 0.610,
    "coal": 1.100,
    "onshorewind": 0.0097,
    "offshorewind": 0.0165,
    "solar": 0.05,
}

MIX_TOLERANCE = 1e-6


class GreenplaceError(Exception):
    """Base class for every error raised by this package."""


class UnknownApplication(GreenplaceError, KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown application {self.name!r}"


class UnknownSource(GreenplaceError, KeyError):
    def __str__(self) -> str:
        return f"unknown emission source {self.args[0]!r}"


class DomainError(GreenplaceError, ValueError):
    """A value fell outside the domain of a function (e.g. load > 100%)."""


@dataclass(frozen=True)
class SourcePos:
    line: int
    column: int
    source: str = "<string>"

    def __str__(self) -> str:
        return f"{self.source}:{self.line}:{self.column}"


def _pos_field():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class ConstProfile:
    value: float

    def __call__(self, load: float) -> float:
        return self.value


@dataclass(frozen=True)
class LinearProfile:
    """``intercept + slope * load``."""

    intercept: float
    slope: float

    def __call__(self, load: float) -> float:
        return self.intercept + self.slope * load


@dataclass(frozen=True)
class LogLinearProfile:
    """``intercept + slope * ln(load)``; the intercept alone at zero load."""

    intercept: float
    slope: float

    def __call__(self, load: float) -> float:
        if load == 0:
            return self.intercept
        return self.intercept + self.slope * math.log(load)


@dataclass(frozen=True)
class StepProfile:
    """Value of the first threshold ``>= load``, else ``default``."""

    steps: Tuple[Tuple[float, float], ...]
    default: float

    def __call__(self, load: float) -> float:
        for threshold, value in self.steps:
            if load <= threshold:
                return value
        return self.default


@dataclass(frozen=True)
class TableProfile:
    """Piecewise-linear interpolation through ``(load, kWh)`` points."""

    points: Tuple[Tuple[float, float], ...]

    def __call__(self, load: float) -> float:
        pts = self.points
        if load <= pts[0][0]:
            return pts[0][1]
        for (l0, e0), (l1, e1) in zip(pts, pts[1:]):
            if load <= l1:
                if l1 == l0:
                    return e1
                return e0 + (e1 - e0) * (load - l0) / (l1 - l0)
        return pts[-1][1]


EnergyProfile = Union[ConstProfile, LinearProfile, LogLinearProfile, StepProfile, TableProfile]


# ------------------------------------------------------------ fact types


@dataclass(frozen=True)
class Service:
    name: str
    software_reqs: frozenset = frozenset()
    hardware_reqs: int = 0
    iot_reqs: frozenset = frozenset()
    pos: Optional[SourcePos] = _pos_field()


@dataclass(frozen=True)
class Application:
    name: str
    services: Tuple[str, ...]
    pos: Optional[SourcePos] = _pos_field()


@dataclass(frozen=True)
class Flow:
    source: str
    target: str
    max_latency: float
    min_bandwidth: float
    pos: Optional[SourcePos] = _pos_field()

    @property
    def key(self) -> Tuple[str, str]:
        return (self.source, self.target)


@dataclass(frozen=True)
class EnergyMix:
    shares: Tuple[Tuple[float, str], ...]

    def intensity(self, table: Mapping[str, float]) -> float:
        """Weighted emission factor ``sum(p_i * mu_i)`` in kgCO2/kWh."""
        total = 0.0
        for share, src in self.shares:
            try:
                total += share * table[src]
            except KeyError:
                raise UnknownSource(src) from None
        return total


@dataclass(frozen=True)
class Node:
    name: str
    software_caps: frozenset
    free_hw: int
    iot_caps: frozenset
    unit_cost: float
    tot_hw: int
    pue: float
    profile: EnergyProfile
    mix: EnergyMix
    pos: Optional[SourcePos] = _pos_field()

    @property
    def used_hw(self) -> int:
        return self.tot_hw - self.free_hw


@dataclass(frozen=True)
class Link:
    source: str
    target: str
    latency: float
    bandwidth: float
    pos: Optional[SourcePos] = _pos_field()

    @property
    def key(self) -> Tuple[str, str]:
        return (self.source, self.target)


@dataclass(frozen=True)
class Constants:
    hw_threshold: int = 0
    bw_threshold: float = 0.0
    kwh_per_mb: float = 0.00008
    avg_gci: float = 0.475
    mb_per_mbps_hour: float = 450.0

    def replace(self, **overrides) -> "Constants":
        names = {f.name for f in fields(self)}
        unknown = set(overrides) - names
        if unknown:
            raise TypeError(f"unknown constants: {sorted(unknown)}")
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return Constants(**values)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


PRESETS: Mapping[str, Constants] = {
    "default": Constants(),
    # per-MB transmission energy quoted for the Internet at large, ~29x the default
    "preliminaries": Constants(kwh_per_mb=0.0023),
}


@dataclass(frozen=True)
class KnowledgeBase:
    applications: Tuple[Application, ...] = ()
    services: Tuple[Service, ...] = ()
    flows: Tuple[Flow, ...] = ()
    nodes: Tuple[Node, ...] = ()
    links: Tuple[Link, ...] = ()
    emissions: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_EMISSIONS))
    constants: Constants = Constants()

    @cached_property
    def application_map(self) -> dict:
        return {a.name: a for a in self.applications}

    @cached_property
    def service_map(self) -> dict:
        return {s.name: s for s in self.services}

    @cached_property
    def node_map(self) -> dict:
        return {n.name: n for n in self.nodes}

    @cached_property
    def link_map(self) -> dict:
        return {l.key: l for l in self.links}

    @cached_property
    def flow_map(self) -> dict:
        return {f.key: f for f in self.flows}

    @cached_property
    def node_names(self) -> Tuple[str, ...]:
        return tuple(sorted(self.node_map))

    def application(self, name: str) -> Application:
        try:
            return self.application_map[name]
        except KeyError:
            raise UnknownApplication(name) from None

    def with_constants(self, constants: Constants) -> "KnowledgeBase":
        return KnowledgeBase(
            self.applications, self.services, self.flows, self.nodes,
            self.links, dict(self.emissions), constants,
        )


# ------------------------------------------------------ derived values


@dataclass(frozen=True)
class Placement:
    """Total assignment of an application's services, in application order."""

    assignments: Tuple[Tuple[str, str], ...]

    @classmethod
    def from_mapping(cls, services: Sequence[str], mapping: Mapping[str, str]) -> "Placement":
        return cls(tuple((s, mapping[s]) for s in services))

    def as_dict(self) -> dict:
        return dict(self.assignments)

    @property
    def nodes(self) -> Tuple[str, ...]:
        return tuple(n for _, n in self.assignments)

    @property
    def deployment_nodes(self) -> Tuple[str, ...]:
        return tuple(sorted(set(self.nodes)))

    def __str__(self) -> str:
        return ", ".join(f"on({s}, {n})" for s, n in self.assignments)


@dataclass(frozen=True)
class Allocation:
    hw: Tuple[Tuple[str, int], ...] = ()
    bw: Tuple[Tuple[str, str, float], ...] = ()

    def hw_on(self, node: str) -> int:
        return sum(h for n, h in self.hw if n == node)

    def bw_on(self, source: str, target: str) -> float:
        return sum(b for n1, n2, b in self.bw if n1 == source and n2 == target)

    @property
    def total_bw(self) -> float:
        return math.fsum(b for _, _, b in self.bw)


EMPTY_ALLOCATION = Allocation()


@dataclass(frozen=True)
class NodeDelta:
    node: str
    old_load: float
    new_load: float
    old_e: float
    new_e: float
    pue: float
    energy: float
    carbon: float
    intensity: float


@dataclass(frozen=True)
class NetworkFootprint:
    total_bw: float
    energy: float
    carbon: float


@dataclass(frozen=True)
class Footprint:
    energy: float
    carbon: float
    cost: float
    per_node: Tuple[NodeDelta, ...]
    network: NetworkFootprint


# ------------------------------------------------------------ validation


@dataclass(frozen=True, order=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    location: str
    message: str

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def __str__(self) -> str:
        return f"{self.location}: {self.severity}: {self.message}"


def _where(kind: str, key, pos: Optional[SourcePos]) -> str:
    name = ",".join(key) if isinstance(key, tuple) else key
    label = f"{kind}({name})"
    return f"{pos} {label}" if pos is not None else label


def _is_int(x) -> bool:
    if isinstance(x, bool):
        return False
    if isinstance(x, int):
        return True
    return isinstance(x, float) and math.isfinite(x) and x.is_integer()


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def profile_problems(profile: EnergyProfile) -> Tuple[list, list]:
    """Return ``(errors, warnings)`` message lists for an energy profile."""
    errors: list = []
    warnings: list = []
    values: list = []
    if isinstance(profile, ConstProfile):
        values = [profile.value]
    elif isinstance(profile, (LinearProfile, LogLinearProfile)):
        values = [profile.intercept, profile.slope]
        if _is_real(profile.slope) and profile.slope < 0:
            warnings.append("energy profile not non-decreasing on [0,100]")
    elif isinstance(profile, StepProfile):
        thresholds = [t for t, _ in profile.steps]
        values = [v for _, v in profile.steps] + [profile.default] + thresholds
        if any(not (0 < t <= 100) for t in thresholds if _is_real(t)):
            errors.append("step thresholds must lie in (0, 100]")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            errors.append("step thresholds must be strictly increasing")
        seq = [v for _, v in profile.steps] + [profile.default]
        if any(b < a for a, b in zip(seq, seq[1:])):
            warnings.append("energy profile not non-decreasing on [0,100]")
    elif isinstance(profile, TableProfile):
        loads = [l for l, _ in profile.points]
        values = loads + [e for _, e in profile.points]
        if not loads or loads[0] != 0 or loads[-1] != 100:
            errors.append("table loads must start at 0 and end at 100")
        if any(b <= a for a, b in zip(loads, loads[1:])):
            errors.append("table loads must be strictly increasing")
        seq = [e for _, e in profile.points]
        if any(b < a for a, b in zip(seq, seq[1:])):
            warnings.append("energy profile not non-decreasing on [0,100]")
    else:
        errors.append(f"unsupported energy profile {type(profile).__name__}")
    if not all(_is_real(v) for v in values):
        errors.insert(0, "energy profile coefficients must be finite numbers")
    return errors, warnings


def validate(kb: KnowledgeBase) -> list:
    """Check every invariant of ``kb``; return diagnostics sorted canonically.

    An empty list means the knowledge base is fully valid. Warnings do not
    prevent use of the knowledge base.
    """
    out: list = []

    def err(where, msg):
        out.append(Diagnostic("error", where, msg))

    def warn(where, msg):
        out.append(Diagnostic("warning", where, msg))

    def check_ids(where, *names):
        for name in names:
            if not isinstance(name, str) or not IDENTIFIER_RE.match(name):
                err(where, f"invalid identifier {name!r}")

    def duplicates(kind, items, key):
        seen: dict = {}
        for item in items:
            k = key(item)
            if k in seen:
                err(_where(kind, k, item.pos), f"duplicate {kind} fact")
            seen[k] = item

    duplicates("application", kb.applications, lambda a: a.name)
    duplicates("service", kb.services, lambda s: s.name)
    duplicates("s2s", kb.flows, lambda f: f.key)
    duplicates("node", kb.nodes, lambda n: n.name)
    duplicates("link", kb.links, lambda l: l.key)

    services = kb.service_map
    nodes = kb.node_map

    for app in kb.applications:
        where = _where("application", app.name, app.pos)
        check_ids(where, app.name, *app.services)
        if not app.services:
            err(where, "application has no services")
        if len(set(app.services)) != len(app.services):
            err(where, "application lists a service twice")
        for s in sorted(set(app.services)):
            if s not in services:
                err(where, f"undeclared service {s!r}")

    for svc in kb.services:
        where = _where("service", svc.name, svc.pos)
        check_ids(where, svc.name, *svc.software_reqs, *svc.iot_reqs)
        if not _is_int(svc.hardware_reqs) or svc.hardware_reqs < 0:
            err(where, f"hardware requirement must be a non-negative integer, got {svc.hardware_reqs!r}")

    app_services = {s for a in kb.applications for s in a.services}
    for flow in kb.flows:
        where = _where("s2s", flow.key, flow.pos)
        check_ids(where, flow.source, flow.target)
        if flow.source == flow.target:
            err(where, "flow from a service to itself")
        for end in sorted({flow.source, flow.target}):
            if end not in app_services:
                err(where, f"flow endpoint {end!r} is not part of any application")
        if not _is_real(flow.max_latency) or flow.max_latency <= 0:
            err(where, "max latency must be positive")
        if not _is_real(flow.min_bandwidth) or flow.min_bandwidth <= 0:
            err(where, "min bandwidth must be positive")

    for node in kb.nodes:
        where = _where("node", node.name, node.pos)
        check_ids(where, node.name, *node.software_caps, *node.iot_caps)
        ints_ok = True
        if not _is_int(node.free_hw) or node.free_hw < 0:
            err(where, f"free hardware must be a non-negative integer, got {node.free_hw!r}")
            ints_ok = False
        if not _is_int(node.tot_hw) or node.tot_hw <= 0:
            err(where, f"total hardware must be a positive integer, got {node.tot_hw!r}")
            ints_ok = False
        if ints_ok and node.free_hw > node.tot_hw:
            err(where, f"free exceeds total hardware ({node.free_hw} > {node.tot_hw})")
        if not _is_real(node.unit_cost) or node.unit_cost < 0:
            err(where, "unit cost must be non-negative")
        if not _is_real(node.pue) or node.pue < 1:
            err(where, f"pue must be >= 1, got {node.pue!r}")
        perrs, pwarns = profile_problems(node.profile)
        for m in perrs:
            err(where, m)
        for m in pwarns:
            warn(where, m)
        if (isinstance(node.profile, LogLinearProfile) and ints_ok
                and node.free_hw == node.tot_hw):
            warn(where, "log profile evaluated at load 0; the intercept is used")
        _check_mix(node, kb.emissions, where, err, warn, check_ids)

    for link in kb.links:
        where = _where("link", link.key, link.pos)
        check_ids(where, link.source, link.target)
        if link.source == link.target:
            err(where, "link from a node to itself")
        for end in sorted({link.source, link.target}):
            if end not in nodes:
                err(where, f"link endpoint {end!r} is not a declared node")
        if not _is_real(link.latency) or link.latency < 0:
            err(where, "latency must be non-negative")
        if not _is_real(link.bandwidth) or link.bandwidth <= 0:
            err(where, "bandwidth must be positive")

    for src, mu in sorted(kb.emissions.items()):
        where = _where("emissions", src, None)
        check_ids(where, src)
        if not _is_real(mu) or mu < 0:
            err(where, f"emission factor must be non-negative, got {mu!r}")

    c = kb.constants
    if not _is_int(c.hw_threshold) or c.hw_threshold < 0:
        err("constants", "hw_threshold must be a non-negative integer")
    if not _is_real(c.bw_threshold) or c.bw_threshold < 0:
        err("constants", "bw_threshold must be non-negative")
    for name in ("kwh_per_mb", "avg_gci", "mb_per_mbps_hour"):
        v = getattr(c, name)
        if not _is_real(v) or v <= 0:
            err("constants", f"{name} must be positive")

    return sorted(out)


def _check_mix(node, table, where, err, warn, check_ids):
    shares = node.mix.shares
    if not shares:
        err(where, "energy mix is empty")
        return
    sources = [s for _, s in shares]
    check_ids(where, *sources)
    if len(set(sources)) != len(sources):
        err(where, "energy mix lists a source twice")
    for src in sorted(set(sources)):
        if src not in table:
            err(where, f"unknown emission source {src!r}")
    fractions = [p for p, _ in shares]
    if not all(_is_real(p) for p in fractions):
        err(where, "mix fractions must be finite numbers")
        return
    if any(p < 0 or p > 1 for p in fractions):
        err(where, "mix fractions must lie in [0, 1]")
    total = math.fsum(fractions)
    if abs(total - 1) > MIX_TOLERANCE:
        err(where, f"mix sums to {total:g}")
    elif total != 1:
        warn(where, f"mix fractions sum deviates by < {MIX_TOLERANCE:g} ({total!r})")


def errors_only(diagnostics: Iterable[Diagnostic]) -> list:
    return [d for d in diagnostics if d.is_error]
