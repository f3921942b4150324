import random
from dataclasses import replace

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixture_facts, fixture_text
from greenplace.facts import FactFile, assemble, parse_facts
from greenplace.model import (
    ConstProfile,
    Constants,
    EnergyMix,
    KnowledgeBase,
    LinearProfile,
    LogLinearProfile,
    Node,
    StepProfile,
    TableProfile,
    validate,
)


def _node(**kw):
    base = dict(name="x", software_caps=frozenset(), free_hw=4, iot_caps=frozenset(),
                unit_cost=0.1, tot_hw=8, pue=1.2, profile=ConstProfile(0.1),
                mix=EnergyMix(((1.0, "solar"),)))
    base.update(kw)
    return Node(**base)


def _errors(kb):
    return [d for d in validate(kb) if d.is_error]


def test_fixture_is_clean(lights_kb):
    assert validate(lights_kb) == []


def test_free_exceeds_total():
    diags = validate(KnowledgeBase(nodes=(_node(free_hw=10, tot_hw=5),)))
    assert len(diags) == 1
    assert diags[0].is_error and "free exceeds total" in diags[0].message


def test_mix_sum():
    kb = KnowledgeBase(nodes=(_node(mix=EnergyMix(((0.5, "solar"), (0.4, "coal")))),))
    diags = validate(kb)
    assert len(diags) == 1 and "mix sums to 0.9" in diags[0].message


def test_tiny_mix_deviation_is_a_warning():
    kb = KnowledgeBase(nodes=(_node(mix=EnergyMix(((0.5, "solar"), (0.5 + 1e-9, "coal")))),))
    [d] = validate(kb)
    assert d.severity == "warning" and "deviates" in d.message


def test_unknown_source_is_an_error():
    kb = KnowledgeBase(nodes=(_node(mix=EnergyMix(((1.0, "peat"),))),))
    assert "unknown emission source 'peat'" in _errors(kb)[0].message


def test_decreasing_profiles_warn():
    for profile in (LinearProfile(1, -0.001), LogLinearProfile(0.2, -0.01),
                    StepProfile(((50, 0.1),), 0.05), TableProfile(((0, 0.2), (100, 0.1)))):
        [d] = validate(KnowledgeBase(nodes=(_node(profile=profile),)))
        assert d.severity == "warning" and "non-decreasing" in d.message


def test_profile_shape_errors():
    bad = [StepProfile(((60, 0.1), (50, 0.2)), 0.3), StepProfile(((0, 0.1),), 0.2),
           TableProfile(((0, 0.1), (50, 0.2))), TableProfile(((0, 0.1), (0, 0.1), (100, 0.2)))]
    for profile in bad:
        assert _errors(KnowledgeBase(nodes=(_node(profile=profile),))), profile


def test_log_profile_at_idle_node_warns():
    [d] = validate(KnowledgeBase(nodes=(_node(free_hw=8, profile=LogLinearProfile(0.1, 0.01)),)))
    assert d.severity == "warning" and "load 0" in d.message


def test_pue_below_one():
    assert "pue" in _errors(KnowledgeBase(nodes=(_node(pue=0.9),)))[0].message


def test_non_integral_hardware():
    assert _errors(KnowledgeBase(nodes=(_node(free_hw=2.5),)))


def test_bad_constants():
    kb = KnowledgeBase(constants=Constants(kwh_per_mb=0))
    assert any("kwh_per_mb" in d.message for d in _errors(kb))


def test_dangling_references(lights_kb):
    kb = replace(lights_kb, services=lights_kb.services[:1])
    msgs = [d.message for d in _errors(kb)]
    assert any("undeclared service" in m for m in msgs)


def test_validate_is_idempotent(lights_kb):
    kb = replace(lights_kb, nodes=(_node(free_hw=10, tot_hw=5),) + lights_kb.nodes)
    assert validate(kb) == validate(kb)


_BROKEN = fixture_text().replace("(0.3, solar)", "(0.2, solar)").replace(
    "totHW(edgenode, 12)", "totHW(edgenode, 7)") + "emissions(peat, -1).\n"


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False))
def test_diagnostics_independent_of_fact_order(rng):
    facts = list(parse_facts(_BROKEN).facts)
    _, expected = assemble(facts)
    rng.shuffle(facts)
    _, got = assemble(facts)
    assert sorted(d.message for d in got) == sorted(d.message for d in expected)
    assert len(expected) == 3


def test_kb_independent_of_fact_order():
    facts = list(fixture_facts().facts)
    kb1, _ = assemble(facts)
    random.Random(7).shuffle(facts)
    kb2, _ = assemble(FactFile(tuple(facts)).facts)
    assert kb1 == kb2
