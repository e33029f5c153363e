
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mebn import _ext
from mebn._ext import _fallback
from mebn.bn import (
    CptError,
    CycleError,
    DiscreteNode,
    InconsistentEvidenceError,
    NetworkError,
    brute_force_joint,
    build_network,
    d_separated,
    exact_query,
    oracle_posterior,
    prune_for_query,
)
from mebn.bn.factor import Factor, product_marginalize

from netgen import random_network, random_query

TF = ("t", "f")


def ab_net():
    return build_network([
        DiscreteNode("A", TF, (), [[0.3, 0.7]]),
        DiscreteNode("B", TF, ("A",), [[0.9, 0.1], [0.2, 0.8]]),
    ])


def binary(name, parents=(), cpt=None):
    rows = 2 ** len(parents)
    return DiscreteNode(name, TF, tuple(parents), cpt if cpt is not None else [[0.5, 0.5]] * rows)


class TestBuild:
    def test_single_node(self):
        net = build_network([DiscreteNode("A", TF, (), [0.5, 0.5])])
        assert net.node_ids == ("A",)
        assert net["A"].cpt.shape == (2,)

    def test_cycle(self):
        with pytest.raises(CycleError, match="cycle"):
            build_network([binary("A", ["B"]), binary("B", ["A"])])

    def test_row_count(self):
        with pytest.raises(CptError, match="row count 1, expected 2"):
            build_network([binary("A"), DiscreteNode("B", TF, ("A",), [[0.5, 0.5]])])

    def test_non_normalized_row_names_node_and_row(self):
        with pytest.raises(CptError) as err:
            build_network([binary("A"), DiscreteNode("B", TF, ("A",), [[0.5, 0.5], [0.6, 0.6]])])
        assert err.value.node_id == "B" and err.value.row == 1

    def test_renormalizes_within_tolerance(self):
        net = build_network([DiscreteNode("A", TF, (), [[0.5 + 4e-10, 0.5]])])
        assert abs(net["A"].cpt.sum() - 1.0) < 1e-15

    def test_dangling_parent(self):
        with pytest.raises(NetworkError, match="dangling"):
            build_network([binary("B", ["A"])])

    def test_duplicate_states(self):
        with pytest.raises(NetworkError):
            build_network([DiscreteNode("A", ("t", "t"), (), [[0.5, 0.5]])])

    def test_immutable_cpt(self):
        net = ab_net()
        with pytest.raises(ValueError):
            net["A"].cpt[0, 0] = 1.0


class TestBruteForce:
    def test_product(self):
        j = brute_force_joint(ab_net())
        assert j.prob({"A": "t", "B": "t"}) == pytest.approx(0.3 * 0.9, abs=1e-15)
        assert j.table.sum() == pytest.approx(1.0, abs=1e-12)

    def test_uniform(self):
        j = brute_force_joint(build_network([binary("A")]))
        np.testing.assert_allclose(j.table, [0.5, 0.5])

    def test_deterministic_chain(self):
        net = build_network([
            DiscreteNode("A", TF, (), [[0.3, 0.7]]),
            DiscreteNode("B", TF, ("A",), [[1, 0], [0, 1]]),
        ])
        assert brute_force_joint(net).prob({"A": "t", "B": "t"}) == pytest.approx(0.3)

    def test_cap(self):
        with pytest.raises(NetworkError, match="cap"):
            brute_force_joint(ab_net(), cap=3)


class TestExactQuery:
    def test_posterior(self):
        r = exact_query(ab_net(), ["A"], {"B": "t"})
        # enumeration oracle: 0.27 / (0.27 + 0.7 * 0.2)
        assert r.marginal("A")["t"] == pytest.approx(0.27 / 0.41, abs=1e-12)

    def test_target_is_evidence(self):
        with pytest.raises(NetworkError, match="target is evidence"):
            exact_query(ab_net(), ["A"], {"A": "t"})

    def test_root_prior(self):
        r = exact_query(ab_net(), ["A"])
        np.testing.assert_allclose(r.table, [0.3, 0.7], atol=1e-15)

    def test_inconsistent_evidence(self):
        net = build_network([
            DiscreteNode("A", TF, (), [[1.0, 0.0]]),
            DiscreteNode("B", TF, ("A",), [[1, 0], [0, 1]]),
        ])
        with pytest.raises(InconsistentEvidenceError):
            exact_query(net, ["A"], {"B": "f"})

    def test_unknown_node(self):
        with pytest.raises(NetworkError):
            exact_query(ab_net(), ["Z"])

    def test_joint_target_order(self):
        net = ab_net()
        r = exact_query(net, ["B", "A"])
        j = brute_force_joint(net)
        np.testing.assert_allclose(r.table, j.table.T, atol=1e-15)

    def test_likelihood_evidence(self):
        net = ab_net()
        r = exact_query(net, ["A"], likelihoods={"B": [1.0, 0.0]})
        assert r.marginal("A")["t"] == pytest.approx(0.27 / 0.41, abs=1e-12)
        r = exact_query(net, ["A"], likelihoods={"B": [0.5, 0.25]})
        num = 0.3 * (0.9 * 0.5 + 0.1 * 0.25)
        den = num + 0.7 * (0.2 * 0.5 + 0.8 * 0.25)
        assert r.marginal("A")["t"] == pytest.approx(num / den, abs=1e-12)

    @pytest.mark.parametrize("seed", range(60))
    def test_matches_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        net = random_network(rng, int(rng.integers(2, 9)), zeros=seed % 3 == 0)
        targets, evidence = random_query(rng, net)
        try:
            expected = oracle_posterior(net, targets, evidence)
        except InconsistentEvidenceError:
            with pytest.raises(InconsistentEvidenceError):
                exact_query(net, targets, evidence)
            return
        got = exact_query(net, targets, evidence)
        assert np.abs(got.table - expected.table).max() <= 1e-9

    def test_bitwise_deterministic(self):
        rng = np.random.default_rng(11)
        net = random_network(rng, 9)
        targets, evidence = random_query(rng, net)
        a = exact_query(net, targets, evidence).table
        b = exact_query(net, targets, evidence).table
        assert a.tobytes() == b.tobytes()

    def test_backends_agree(self, monkeypatch):
        rng = np.random.default_rng(5)
        net = random_network(rng, 9)
        targets, evidence = random_query(rng, net)
        a = exact_query(net, targets, evidence).table
        monkeypatch.setattr(_ext, "product_sum", _fallback.product_sum)
        b = exact_query(net, targets, evidence).table
        np.testing.assert_allclose(a, b, atol=1e-14)


class TestFactorKernel:
    @pytest.mark.parametrize("kernel", ["compiled", "fallback"])
    def test_product_sum_matches_einsum(self, kernel, monkeypatch):
        if kernel == "fallback":
            monkeypatch.setattr(_ext, "product_sum", _fallback.product_sum)
        rng = np.random.default_rng(0)
        a = Factor(("x", "y", "w"), rng.random((2, 3, 1)))
        b = Factor(("z", "y"), rng.random((4, 3)))
        c = Factor(("x",), rng.random(2))
        r = product_marginalize([a, b, c], "y")
        assert r.variables == ("x", "w", "z")
        ref = np.einsum("xyw,zy,x->xwz", a.values, b.values, c.values)
        np.testing.assert_allclose(r.values, ref, rtol=1e-13)
        full = product_marginalize([a, b, c])
        np.testing.assert_allclose(full.values.sum(axis=1), ref, rtol=1e-13)


def ci_holds(net, xs, ys, zs, tol=1e-9):
    """Conditional independence check on the brute-force joint."""
    j = brute_force_joint(net)
    ids = list(j.target_ids)
    keep = list(xs) + list(ys) + list(zs)
    drop = tuple(i for i, n in enumerate(ids) if n not in keep)
    t = j.table.sum(axis=drop) if drop else j.table
    order = [n for n in ids if n in keep]
    t = t.transpose([order.index(n) for n in keep])
    nx, ny = len(xs), len(ys)
    sx = t.shape[:nx]
    sy = t.shape[nx:nx + ny]
    t = t.reshape(int(np.prod(sx)), int(np.prod(sy)), -1)
    pz = t.sum(axis=(0, 1))
    for k in range(t.shape[2]):
        if pz[k] <= 1e-15:
            continue
        pxy = t[:, :, k] / pz[k]
        if np.abs(pxy - np.outer(pxy.sum(1), pxy.sum(0))).max() > tol:
            return False
    return True


class TestDSeparation:
    def chain(self):
        return build_network([binary("A"), binary("B", ["A"]), binary("C", ["B"])])

    def test_chain_blocked(self):
        assert d_separated(self.chain(), {"A"}, {"C"}, {"B"})
        assert not d_separated(self.chain(), {"A"}, {"C"}, set())

    def test_collider(self):
        net = build_network([binary("A"), binary("B"), binary("C", ["A", "B"])])
        assert d_separated(net, {"A"}, {"B"}, set())
        assert not d_separated(net, {"A"}, {"B"}, {"C"})

    def test_collider_descendant_opens(self):
        net = build_network([binary("A"), binary("B"), binary("C", ["A", "B"]), binary("D", ["C"])])
        assert not d_separated(net, {"A"}, {"B"}, {"D"})

    def test_common_cause(self):
        net = build_network([binary("A"), binary("B", ["A"]), binary("C", ["A"])])
        assert not d_separated(net, {"B"}, {"C"}, set())
        assert d_separated(net, {"B"}, {"C"}, {"A"})

    def test_overlap_rejected(self):
        with pytest.raises(NetworkError):
            d_separated(self.chain(), {"A"}, {"A"}, set())

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**6), st.integers(3, 8))
    def test_dsep_implies_independence(self, seed, n):
        rng = np.random.default_rng(seed)
        net = random_network(rng, n, max_card=2)
        ids = list(net.node_ids)
        rng.shuffle(ids)
        x, y = ids[0], ids[1]
        zs = [z for z in ids[2:] if rng.random() < 0.4]
        if d_separated(net, {x}, {y}, zs):
            assert ci_holds(net, [x], [y], zs)


class TestPrune:
    def test_barren(self):
        pruned = prune_for_query(ab_net(), ["A"], {})
        assert pruned.node_ids == ("A",)

    def test_dseparated_ancestor(self):
        net = build_network([binary("A"), binary("B", ["A"], [[0.9, 0.1], [0.3, 0.7]]),
                             binary("C", ["B"], [[0.8, 0.2], [0.1, 0.9]])])
        pruned = prune_for_query(net, ["C"], {"B": "t"})
        assert set(pruned.node_ids) == {"B", "C"}
        np.testing.assert_allclose(exact_query(pruned, ["C"], {"B": "t"}).table,
                                   exact_query(net, ["C"], {"B": "t"}).table, atol=1e-12)

    def test_all_targets_unchanged(self):
        net = ab_net()
        assert prune_for_query(net, ["A", "B"], {}) is net

    @pytest.mark.parametrize("seed", range(40))
    def test_posterior_preserving_and_idempotent(self, seed):
        rng = np.random.default_rng(1000 + seed)
        net = random_network(rng, int(rng.integers(2, 11)))
        targets, evidence = random_query(rng, net)
        pruned = prune_for_query(net, targets, evidence)
        ev = {k: v for k, v in evidence.items() if k in pruned}
        a = oracle_posterior(net, targets, evidence).table
        b = exact_query(pruned, targets, ev).table
        assert np.abs(a - b).max() <= 1e-9
        again = prune_for_query(pruned, targets, ev)
        assert again == pruned

    def test_soft_evidence_kept(self):
        net = ab_net()
        pruned = prune_for_query(net, ["A"], {}, soft={"B"})
        assert set(pruned.node_ids) == {"A", "B"}
