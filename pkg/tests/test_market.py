import json
from fractions import Fraction as F

import pytest

from polyclinch.generate import GenParams, generate_instance, random_suite
from polyclinch.market import (
    AdditiveCapacity,
    Buyer,
    ConfigurationError,
    InstanceError,
    MarketInstance,
    RankCapacity,
    Seller,
    TableCapacity,
    default_epsilon,
    efficiency_bound,
    parse_instance,
    preprocess,
    serialize_instance,
    validate,
)
from polyclinch.polymatroid import verify_oracle
from polyclinch.rational import INF
from polyclinch.scenarios import sample_market, tight_lw_market

MINIMAL = """{
  "epsilon": "1/2",
  "buyers": [{"id": "b", "valuation": "2", "bid": "2", "budget": "3"}],
  "sellers": [{"id": "s", "valuation": "1", "bid": "1", "capacity": {"kind": "rank", "unit": "1", "cap": "1"}}],
  "edges": [["b", "s"]]
}"""


def doc(**over):
    d = json.loads(MINIMAL)
    d.update(over)
    return d


def test_minimal_document():
    inst = parse_instance(MINIMAL)
    assert inst.edges == (("b", "s"),)
    assert inst.buyer("b").budget == 3 and inst.epsilon == F(1, 2)
    assert validate(inst).ok


@pytest.mark.parametrize(
    "inst",
    [
        tight_lw_market(1, 3),
        sample_market(100, F(1, 1000), F(1, 1000), F(1, 500)),
        *random_suite(15, 11),
        *random_suite(15, 12, capacity="rank", allow_zero=True, samples=True),
    ],
)
def test_round_trip(inst):
    text = serialize_instance(inst)
    again = parse_instance(text)
    assert again == inst
    assert serialize_instance(again) == text


def test_additive_and_table_round_trip():
    buyers = (Buyer("a", F(1), F(1), F(2)), Buyer("b", F(2), F(2), INF))
    caps = AdditiveCapacity((("a", F(1, 2)), ("b", F(1))))
    table = TableCapacity.from_function(("a", "b"), lambda s: min(len(s), 1))
    sellers = (Seller("s", F(1), F(1), caps), Seller("t", F(1), F(1), table, F(2)))
    edges = (("a", "s"), ("b", "s"), ("a", "t"), ("b", "t"))
    inst = MarketInstance(buyers, sellers, edges, F(1))
    assert parse_instance(serialize_instance(inst)) == inst
    assert inst.supply("s") == F(3, 2) and inst.supply("t") == 1


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda d: d["buyers"][0].pop("budget"), "$.buyers[0].budget"),
        (lambda d: d["buyers"][0].update(valuation="x"), "$.buyers[0].valuation"),
        (lambda d: d["buyers"][0].update(valuation="inf"), "$.buyers[0].valuation"),
        (lambda d: d["sellers"][0]["capacity"].update(kind="cube"), "$.sellers[0].capacity.kind"),
        (lambda d: d.update(edges=[["b"]]), "$.edges[0]"),
        (lambda d: d["sellers"][0].update(capacity={"kind": "table", "table": [[[], "0"]]}), "$.sellers[0].capacity.table"),
    ],
)
def test_parse_errors_carry_path(mutate, path):
    d = doc()
    mutate(d)
    with pytest.raises(InstanceError) as err:
        parse_instance(json.dumps(d))
    assert err.value.path == path


def test_malformed_json_reports_line():
    with pytest.raises(InstanceError) as err:
        parse_instance("{\n  oops\n}")
    assert err.value.path.startswith("line 2")


def test_missing_epsilon_uses_default():
    d = doc()
    del d["epsilon"]
    inst = parse_instance(json.dumps(d))
    # bids 2 and 1 share the grid step 1; the efficiency bound 1/(2-1) allows it
    assert inst.epsilon == 1 == default_epsilon(inst)


def test_default_epsilon_respects_efficiency_bound():
    inst = tight_lw_market(1, 3, epsilon=F(1, 2))
    bound = efficiency_bound([1, 3, F(3, 2)])
    eps = default_epsilon(inst)
    assert eps <= bound
    assert all((b.bid / eps).denominator == 1 for b in inst.buyers)


# --- validation matrix ---------------------------------------------------------


def _errors(inst):
    return [who for who, _ in validate(inst).errors]


def test_example_instance_valid():
    rep = validate(tight_lw_market(1, 3, F(1, 2)))
    assert rep.ok
    assert rep.warnings == [("1", "real buyer has an unbounded budget")]


def test_bid_not_multiple_of_epsilon():
    inst = tight_lw_market(1, 3, F(1, 2)).replace_buyer("1", bid=F(3, 2))
    inst = MarketInstance(inst.buyers, inst.sellers, inst.edges, F(1, 3))
    assert _errors(inst) == ["1"]


def test_nonnormalized_capacity_rejected():
    table = TableCapacity(((frozenset(), F(1)), (frozenset({"b"}), F(1))))
    inst = parse_instance(MINIMAL)
    inst = inst.replace_seller("s", capacity=table)
    assert _errors(inst) == ["s"]
    assert "normalized" in validate(inst).errors[0][1]


def test_nonsubmodular_capacity_rejected():
    table = TableCapacity.from_function(("a", "b"), lambda s: len(s) ** 2)
    inst = MarketInstance(
        (Buyer("a", F(1), F(1), F(1)), Buyer("b", F(1), F(1), F(1))),
        (Seller("s", F(1), F(1), table),),
        (("a", "s"), ("b", "s")),
        F(1),
    )
    assert "submodular" in validate(inst).errors[0][1]


@pytest.mark.parametrize(
    "change, who",
    [
        (lambda i: i.replace_buyer("b", valuation=F(0)), "b"),
        (lambda i: i.replace_buyer("b", budget=F(-1)), "b"),
        (lambda i: i.replace_seller("s", sample=F(1, 3)), "s"),
        (lambda i: MarketInstance(i.buyers, i.sellers, i.edges + (("b", "zz"),), i.epsilon), "b-zz"),
        (lambda i: MarketInstance(i.buyers, i.sellers, i.edges * 2, i.epsilon), "b-s"),
        (lambda i: MarketInstance(i.buyers, i.sellers, (), i.epsilon), "s"),
        (lambda i: MarketInstance(i.buyers + (Buyer("s", F(1), F(1), F(1)),), i.sellers, i.edges, i.epsilon), "s"),
        (lambda i: MarketInstance(i.buyers, i.sellers, i.edges, F(0)), "epsilon"),
    ],
)
def test_validation_matrix(change, who):
    inst = change(parse_instance(MINIMAL))
    assert who in _errors(inst)


def test_generated_instances_always_validate():
    for k in range(1000):
        params = GenParams(buyers=1 + k % 4, sellers=1 + k % 3, capacity=("table", "rank")[k % 2], allow_zero=k % 5 == 0)
        assert validate(generate_instance(params, k)).ok


def test_generator_is_deterministic():
    p = GenParams(buyers=3, sellers=2)
    assert serialize_instance(generate_instance(p, 7)) == serialize_instance(generate_instance(p, 7))
    assert generate_instance(GenParams(buyers=1, sellers=1), 0).edges == (("b1", "s1"),)


# --- preprocessing -------------------------------------------------------------


def test_preprocess_adds_virtual_buyer():
    pm = preprocess(tight_lw_market(1, 3, F(1, 2)))
    assert pm.n == 3 and pm.n_real == 2
    v = pm.buyers[2]
    assert v.virtual and v.budget is INF and v.valuation == 1 and v.seller == 0
    f1 = pm.seller_oracle(0)
    assert verify_oracle(f1).ok
    vedge = ("virtual:s", "s")
    assert f1({vedge}) == 1 and f1({("1", "s"), vedge}) == 1


def test_modification_only_touches_virtual_sets():
    for inst in random_suite(20, 4):
        pm = preprocess(inst)
        for j, s in enumerate(inst.sellers):
            local = pm.local[j]
            real = [pm.buyers[pm.edges[k][0]].id for k in local[:-1]]
            full = s.capacity.value(frozenset(real))
            vbit = 1 << (len(local) - 1)
            for lm, value in enumerate(pm.ftab[j]):
                if lm & vbit:
                    assert value == full
                else:
                    assert value == s.capacity.value(frozenset(real[p] for p in range(len(real)) if lm >> p & 1))


def test_aggregate_oracles_are_polymatroids():
    for inst in random_suite(20, 5):
        pm = preprocess(inst)
        assert verify_oracle(pm.g).ok
        total = sum((inst.supply(s.id) for s in inst.sellers), F(0))
        assert pm.g.value(pm.full) == total
        assert pm.g.value(pm.real_mask) == total
        assert pm.g.value(pm.full & ~pm.real_mask) == total
        assert pm.f.value(pm.edge_ground.full) == total


def test_preprocess_without_sellers_is_identity():
    inst = MarketInstance((Buyer("a", F(1), F(1), F(1)),), (), (), F(1))
    pm = preprocess(inst)
    assert pm.n == pm.n_real == 1 and pm.m == 0 and pm.g.value(1) == 0


def test_samples_requested_but_absent():
    with pytest.raises(ConfigurationError):
        preprocess(tight_lw_market(), "samples")


def test_samples_become_virtual_values():
    pm = preprocess(sample_market(2, F(1, 100), F(1, 100), F(1, 50)), "samples")
    assert pm.buyers[-1].valuation == pm.buyers[-1].bid == F(1, 50)


def test_rank_capacity_formula():
    cap = RankCapacity(F(1, 2), F(1))
    assert [cap.value(frozenset(range(k))) for k in range(4)] == [0, F(1, 2), 1, 1]
