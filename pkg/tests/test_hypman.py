import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mebn.battlefield import build_domain_kb
from mebn.hypman import (
    MULTI,
    SINGLE,
    AssociationPolicy,
    CyclePolicy,
    GatePolicy,
    Nomination,
    SituationModel,
    Suggestor,
    count_ungated_candidates,
    distance_gate,
    enumerate_association_candidates,
    fire_suggestors,
    prune_by_star,
    refine_cycle,
)

KB = build_domain_kb()
TARGETS = {"Company": ("CoSubType", "CoActivity"), "Unit": ("PltSubType", "Activity")}


@dataclass(frozen=True)
class Pt:
    report_id: int
    x: float
    y: float

    @property
    def position(self):
        return (self.x, self.y)


def ids(clusters):
    return [[r.report_id for r in c] for c in clusters]


# -- gating -----------------------------------------------------------------------

def test_gate_policy_validation():
    with pytest.raises(ValueError):
        GatePolicy(radius=0)
    with pytest.raises(ValueError):
        GatePolicy(max_candidates=0)


def test_far_reports_are_separate():
    assert ids(distance_gate([Pt(1, 0, 0), Pt(2, 10000, 0)], GatePolicy())) == [[1], [2]]


def test_ten_close_reports_one_cluster():
    rng = random.Random(3)
    pts = [Pt(i, rng.uniform(0, 200), rng.uniform(0, 200)) for i in range(1, 11)]
    (c,) = distance_gate(pts, GatePolicy(500))
    assert len(c) == 10
    assert count_ungated_candidates(len(c), 4) == 210


def test_chain_links_single_linkage():
    chain = [Pt(i, 499.0 * i, 0.0) for i in range(6)]
    assert ids(distance_gate(chain, GatePolicy(500))) == [[0, 1, 2, 3, 4, 5]]
    broken = [Pt(i, 501.0 * i, 0.0) for i in range(3)]
    assert ids(distance_gate(broken, GatePolicy(500))) == [[0], [1], [2]]


def test_gate_empty_and_order_free():
    assert distance_gate([], GatePolicy()) == []
    pts = [Pt(i, (i % 3) * 2000.0, (i // 3) * 100.0) for i in range(9)]
    a = ids(distance_gate(pts, GatePolicy()))
    b = ids(distance_gate(list(reversed(pts)), GatePolicy()))
    assert a == b == [[0, 3, 6], [1, 4, 7], [2, 5, 8]]


def test_gate_rejects_non_finite():
    with pytest.raises(ValueError):
        distance_gate([Pt(1, math.nan, 0)], GatePolicy())


coords = st.floats(min_value=0, max_value=3000, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=25), st.floats(min_value=50, max_value=1500))
def test_gating_soundness(points, radius):
    pts = [Pt(i, x, y) for i, (x, y) in enumerate(points)]
    clusters = distance_gate(pts, GatePolicy(radius))
    members = [r.report_id for c in clusters for r in c]
    assert sorted(members) == list(range(len(pts)))  # a partition

    def near(a, b):
        return math.hypot(a.x - b.x, a.y - b.y) <= radius

    for c in clusters:
        # BFS over <=radius links from the first member reaches all members
        seen, frontier = {c[0].report_id}, [c[0]]
        while frontier:
            a = frontier.pop()
            for b in c:
                if b.report_id not in seen and near(a, b):
                    seen.add(b.report_id)
                    frontier.append(b)
        assert seen == {r.report_id for r in c}
    for c1, c2 in itertools.combinations(clusters, 2):
        assert not any(near(a, b) for a in c1 for b in c2)


# -- candidate counting -----------------------------------------------------------

def pairwise_comb(n, k):
    """C(n, k) as a product of ratios, no factorials."""
    out = Fraction(1)
    for i in range(k):
        out *= Fraction(n - i, i + 1)
    assert out.denominator == 1
    return int(out)


@pytest.mark.parametrize("n,k,expected", [(90, 4, 2555190), (86, 4, 2123555), (82, 4, 1749060), (10, 4, 210)])
def test_candidate_counts(n, k, expected):
    assert pairwise_comb(n, k) == expected
    assert count_ungated_candidates(n, k) == expected


def test_candidate_count_edges():
    assert count_ungated_candidates(5, 0) == 1
    assert count_ungated_candidates(119, 60) == pairwise_comb(119, 60)
    with pytest.raises(ValueError):
        count_ungated_candidates(3, 4)
    with pytest.raises(ValueError):
        count_ungated_candidates(-1, 0)


# -- situation ----------------------------------------------------------------------

def small_situation():
    sit = SituationModel.empty(KB)
    sit.add_instance("Company", "p1", pos=(0.0, 0.0))
    for u, x in (("u1", 0.0), ("u2", 300.0), ("u3", 5000.0)):
        sit.add_instance("Unit", u, pos=(x, 0.0))
    sit.add_instance("Report", "r1", pos=(0.0, 0.0), members=("a", "b"))
    sit.add_instance("Report", "r2", pos=(300.0, 0.0), members=("c",))
    sit.set_association("P", ["u1"], ["p1"], committed=True)
    sit.set_association("P", ["u2"], ["p1"])
    sit.set_association("U", ["r1"], ["u1"], committed=True)
    sit.set_association("U", ["r2"], ["u1", "u2"])
    sit.observe_likelihood("RepPltSubType(r1)", {"armor": 1.0, "*": 0.01})
    sit.observe("RepPltSubType(r2)", "armor")
    return sit


def test_situation_basics():
    sit = small_situation()
    assert sit.instances_of("Unit") == ["u1", "u2", "u3"]
    assert sit.has_instance("r2") and not sit.has_instance("r9")
    assert sit.association_candidates("U", ("r2",)).candidates == ("u1", "u2")
    assert sit.id_generator.peek("Unit") == "u4"
    assert sit.components() == [["p1", "r1", "r2", "u1", "u2"], ["u3"]]
    with pytest.raises(ValueError):
        sit.add_instance("Unit", "u1")
    with pytest.raises(ValueError):
        sit.set_association("U", ["r1"], ["u9"])
    with pytest.raises(ValueError):
        sit.observe("PltSubType(u9)", "armor")


def test_remove_is_transitive_and_leaves_no_dangling_refs():
    sit = small_situation()
    removed = sit.remove_instances(["p1"])
    # u1 committed to p1, r1 committed to u1; u2's only candidate was p1;
    # r2 then had no candidate left
    assert removed == ["p1", "u1", "r1", "u2", "r2"]
    assert sit.all_instances() == ["u3"]
    assert not sit.associations and not sit.evidence and not sit.likelihoods
    assert sorted(sit.unassociated) == ["a", "b", "c"]


def test_remove_shrinks_candidate_sets():
    sit = small_situation()
    sit.remove_instances(["u2"])
    assert sit.association_candidates("U", ("r2",)).candidates == ("u1",)
    assert sit.has_instance("r2")


def live_refs_ok(sit):
    live = set(sit.all_instances())
    for (label, ident), a in sit.associations.items():
        assert set(ident) <= live and set(a.candidates) <= live and a.candidates
    return True


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_pruning_never_dangles(seed):
    rng = random.Random(seed)
    sit = SituationModel.empty(KB)
    cos = [f"p{i}" for i in range(1, rng.randint(1, 3) + 1)]
    units = [f"u{i}" for i in range(1, rng.randint(1, 5) + 1)]
    reps = [f"r{i}" for i in range(1, rng.randint(1, 6) + 1)]
    for et, group in (("Company", cos), ("Unit", units), ("Report", reps)):
        for i in group:
            sit.add_instance(et, i)
    for u in units:
        c = rng.sample(cos, rng.randint(1, len(cos)))
        sit.set_association("P", [u], c, committed=len(c) == 1 and rng.random() < 0.5)
    for r in reps:
        c = rng.sample(units, rng.randint(1, len(units)))
        sit.set_association("U", [r], c, committed=len(c) == 1 and rng.random() < 0.5)
    for i in cos + units:
        sit.star_beliefs[i] = rng.random()
    prune_by_star(sit, 0.7)
    assert live_refs_ok(sit)
    assert all(p < 0.7 for i, p in sit.star_beliefs.items() if sit.has_instance(i))


def test_prune_by_star_threshold():
    sit = small_situation()
    sit.star_beliefs.update({"u3": 0.99, "u2": 0.5})
    out = prune_by_star(sit, 0.9)
    assert out == [("u3", 0.99)]
    assert sit.has_instance("u2")
    with pytest.raises(ValueError):
        prune_by_star(sit, 0.0)


def test_situation_dict_round_trip():
    sit = small_situation()
    sit.star_beliefs["p1"] = 0.25
    back = SituationModel.from_dict(sit.to_dict())
    assert back.to_dict() == sit.to_dict()
    assert back.association_candidates("U", ("r2",)) == sit.association_candidates("U", ("r2",))
    with pytest.raises(ValueError):
        SituationModel.from_dict({"instances": {}})


# -- candidate enumeration ------------------------------------------------------------

def test_enumerate_single_mode():
    sit = small_situation()
    pol = AssociationPolicy(SINGLE)
    assert enumerate_association_candidates(sit, "Unit", "u1", (0, 0), GatePolicy(), pol) == ["u1"]
    assert enumerate_association_candidates(sit, "Unit", None, (0, 0), GatePolicy(), pol) == []


def test_enumerate_multi_mode():
    sit = small_situation()
    got = enumerate_association_candidates(sit, "Unit", None, (100.0, 0.0), GatePolicy(500), AssociationPolicy(MULTI))
    assert got == ["u1", "u2", "u4"]  # nearest first, then the next fresh id
    none = enumerate_association_candidates(sit, "Unit", None, (9e4, 0.0), GatePolicy(500),
                                            AssociationPolicy(MULTI, new_instance_allowed=False))
    assert none == []


def test_enumerate_tie_break_and_cap():
    sit = SituationModel.empty(KB)
    for k in (3, 1, 2, 10):
        sit.add_instance("Unit", f"u{k}", pos=(100.0, 0.0))
    got = enumerate_association_candidates(sit, "Unit", None, (0.0, 0.0), GatePolicy(500, max_candidates=3),
                                           AssociationPolicy(MULTI))
    assert got == ["u1", "u2", "u3", "u11"]
    assert len(got) <= 3 + 1


def test_association_policy_mode_checked():
    with pytest.raises(ValueError):
        AssociationPolicy("both")


# -- suggestors and the cycle -----------------------------------------------------------

def make_company(name="maker"):
    def action(batch, sit, rng):
        p = sit.id_generator.peek("Company")
        return [Nomination(name, "instance", "Company", p, (("pos", (0.0, 0.0)),))]

    return Suggestor(name, lambda b, s: True, action)


def test_fire_suggestors_stages_and_tags():
    sit = SituationModel.empty(KB)
    seen = []

    def second(batch, staged, rng):
        seen.append(staged.instances_of("Company"))
        return []

    res = fire_suggestors(sit, [], [make_company("a"), Suggestor("b", lambda b, s: True, second)])
    assert [n.suggestor for n in res.nominations] == ["a"]
    assert res.fired == ["a"]
    assert seen == [["p1"]]  # the second suggestor saw the first one's work
    assert sit.instances_of("Company") == []  # input untouched


def test_empty_cycle_is_noop():
    sit = SituationModel.empty(KB)
    out, rep = refine_cycle(KB, sit, [], [], CyclePolicy(TARGETS))
    out.batch_index = sit.batch_index
    assert out.to_dict() == sit.to_dict()
    assert rep.n_nets == 0 and rep.pruned == [] and not rep.guard_exceeded
    assert rep.summary(with_time=False) == "CYCLE 1 | suggestors_fired=- | nets=0 | max_nodes=0 | pruned=0"


def test_guard_breach_is_reported():
    sit = SituationModel.empty(KB)
    out, rep = refine_cycle(KB, sit, [], [make_company()], CyclePolicy(TARGETS, max_iterations=3))
    assert rep.guard_exceeded and len(rep.iterations) == 3
    assert out.instances_of("Company") == ["p1", "p2", "p3"]
    assert any("GUARD" in line for line in rep.lines())


def test_cycle_prunes_unsupported_company():
    # a lone company with a strong clutter-like reading on its only report
    def seed(batch, sit, rng):
        return [
            Nomination("s", "instance", "Company", "p1"),
            Nomination("s", "instance", "Unit", "u1"),
            Nomination("s", "instance", "Report", "r1", (("members", ("x",)),)),
            Nomination("s", "association", label="P", ident=("u1",), candidates=("p1",), committed=True),
            Nomination("s", "association", label="U", ident=("r1",), candidates=("u1",), committed=True),
            Nomination("s", "evidence", node="RepPltSubType(r1)", weights=(("armor", 1.0), ("*", 80.0))),
        ]

    trig = [True]

    def once(batch, sit):
        return trig.pop() if trig else False

    out, rep = refine_cycle(KB, SituationModel.empty(KB), [], [Suggestor("s", once, seed)], CyclePolicy(TARGETS))
    assert rep.pruned == ["p1", "u1", "r1"]
    assert out.all_instances() == [] and out.unassociated == ["x"]
    assert any(line.strip().startswith("PRUNED p1(P*=0.99") for line in rep.lines())


def test_cycle_policy_validation():
    with pytest.raises(ValueError):
        CyclePolicy(TARGETS, prune_threshold=0.0)
    with pytest.raises(ValueError):
        CyclePolicy(TARGETS, max_iterations=0)
