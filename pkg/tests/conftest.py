import itertools
import random
from importlib import resources

import pytest
from hypothesis import strategies as st

from greenplace.engine import check_placement
from greenplace.facts import FactFile, build_kb, parse_facts
from greenplace.model import (
    Application,
    ConstProfile,
    Constants,
    EnergyMix,
    Flow,
    KnowledgeBase,
    LinearProfile,
    Link,
    LogLinearProfile,
    Node,
    Placement,
    Service,
    StepProfile,
)

DATA = resources.files("greenplace") / "data"
APP_FILE = DATA / "lights_app.facts"
INFRA_FILE = DATA / "lights_infra.facts"
SOLAR_OVERLAY = DATA / "solar_private_cloud.overlay"
NO_EDGE_OVERLAY = DATA / "without_edgenode.overlay"

P1 = Placement((("mlOptimiser", "privateCloud"), ("lightsDriver", "edgenode")))
P2 = Placement((("mlOptimiser", "privateCloud"), ("lightsDriver", "accesspoint")))


def fixture_text() -> str:
    return APP_FILE.read_text() + INFRA_FILE.read_text()


def fixture_facts() -> FactFile:
    return FactFile.concat([parse_facts(APP_FILE.read_text(), "app"),
                            parse_facts(INFRA_FILE.read_text(), "infra")])


@pytest.fixture(scope="session")
def lights_kb():
    return build_kb(fixture_facts())


@pytest.fixture
def fixture_paths():
    return [str(APP_FILE), str(INFRA_FILE)]


# ---------------------------------------------------- random instances

SW = ("a", "b", "c")
IOT = ("x", "y")


def _subset(rng, pool):
    return frozenset(p for p in pool if rng.random() < 0.5)


def random_kb(rng: random.Random) -> KnowledgeBase:
    """Small random instance: <= 4 nodes, <= 4 services, <= 4 flows."""
    node_names = rng.sample(["n0", "n1", "n2", "n3", "zeta", "alpha"], rng.randint(1, 4))
    nodes = []
    for name in node_names:
        free = rng.randint(0, 10)
        profile = rng.choice([
            ConstProfile(0.2),
            LinearProfile(0.05, 0.001),
            LogLinearProfile(0.1, 0.01),
            StepProfile(((50.0, 0.08),), 0.1),
        ])
        nodes.append(Node(
            name, _subset(rng, SW), free, _subset(rng, IOT),
            unit_cost=rng.choice([0.001, 0.002, 0.005]),
            tot_hw=free + rng.randint(1, 10), pue=rng.choice([1.0, 1.2, 1.5, 1.9]),
            profile=profile,
            mix=rng.choice([EnergyMix(((1.0, "solar"),)),
                            EnergyMix(((0.3, "solar"), (0.7, "coal"))),
                            EnergyMix(((0.5, "gas"), (0.5, "onshorewind")))]),
        ))
    svc_names = [f"s{i}" for i in range(rng.randint(1, 4))]
    services = [Service(s, _subset(rng, SW), rng.randint(0, 5), _subset(rng, IOT)) for s in svc_names]
    pairs = [(a, b) for a in svc_names for b in svc_names if a != b]
    flows = [Flow(a, b, rng.choice([5, 10, 20, 50]), rng.choice([0.5, 2, 8, 16]))
             for a, b in rng.sample(pairs, min(len(pairs), rng.randint(0, 4)))]
    npairs = [(a, b) for a in node_names for b in node_names if a != b]
    links = [Link(a, b, rng.choice([1, 5, 15, 30]), rng.choice([1, 10, 20, 1000]))
             for a, b in npairs if rng.random() < 0.7]
    app = Application("app", tuple(rng.sample(svc_names, len(svc_names))))
    constants = Constants(hw_threshold=rng.choice([0, 0, 1]), bw_threshold=rng.choice([0.0, 0.0, 1.0]))
    return KnowledgeBase(
        applications=(app,),
        services=tuple(sorted(services, key=lambda s: s.name)),
        flows=tuple(sorted(flows, key=lambda f: f.key)),
        nodes=tuple(sorted(nodes, key=lambda n: n.name)),
        links=tuple(sorted(links, key=lambda l: l.key)),
        constants=constants,
    )


instances = st.randoms(use_true_random=False).map(random_kb)


def all_assignments(kb: KnowledgeBase, app: str):
    services = kb.application(app).services
    for nodes in itertools.product(kb.node_names, repeat=len(services)):
        yield Placement(tuple(zip(services, nodes)))


def brute_force(kb: KnowledgeBase, app: str) -> set:
    return {p for p in all_assignments(kb, app) if check_placement(kb, app, p)}


def globally_feasible(kb: KnowledgeBase, app: str, p: Placement) -> bool:
    """Whole-assignment constraint check written without the incremental engine."""
    c = kb.constants
    where = p.as_dict()
    for s, n in p.assignments:
        svc, node = kb.service_map[s], kb.node_map[n]
        if not (svc.software_reqs <= node.software_caps and svc.iot_reqs <= node.iot_caps):
            return False
    for node in kb.nodes:
        hosted = [s for s, n in p.assignments if n == node.name]
        load = sum(kb.service_map[s].hardware_reqs for s in hosted)
        if hosted and node.free_hw < load + c.hw_threshold:
            return False
    per_pair = {}
    for f in kb.flows:
        n1, n2 = where[f.source], where[f.target]
        if n1 == n2:
            continue
        link = kb.link_map.get((n1, n2))
        if link is None or link.latency > f.max_latency:
            return False
        per_pair[(n1, n2)] = per_pair.get((n1, n2), 0) + f.min_bandwidth
    return all(kb.link_map[pair].bandwidth >= bw + c.bw_threshold for pair, bw in per_pair.items())


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    setattr(item, "rep_" + rep.when, rep)
