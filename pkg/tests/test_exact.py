import numpy as np
import pytest

import pgmkit as pk

import _helpers as H


# ---------------------------------------------------------------------------
# elimination order


def test_chain_order_prefers_low_ids():
    net = H.chain3_network()
    assert pk.elimination_order(net, {2}) == [0, 1]


def test_single_node_order_is_empty():
    vs = H.make_variables(1, [2])
    net = pk.Network(vs, [[]], [pk.cpt_from_rows(vs, 0, [], [[0.4, 0.6]])])
    assert pk.elimination_order(net, {0}) == []


def test_star_eliminates_leaves_first():
    # X -> {Y1..Y4}; querying X leaves the leaves with no fill anywhere
    parents = [[]] + [[0]] * 4
    prob_one = [[0.5]] + [[0.3, 0.7]] * 4
    net = H.binary_net(parents, prob_one, "star")
    assert pk.elimination_order(net, {0}) == [1, 2, 3, 4]


# ---------------------------------------------------------------------------
# variable elimination


def test_prior_of_child(ab_net):
    out = pk.variable_elimination(ab_net, 1)
    np.testing.assert_allclose(out.values, [0.59, 0.41], atol=1e-12)


def test_posterior_given_child(ab_net):
    out = pk.variable_elimination(ab_net, 0, {1: 1})
    np.testing.assert_allclose(out.values, [0.14 / 0.41, 0.27 / 0.41], atol=1e-12)


def test_query_on_evidence_variable_is_one_hot(ab_net):
    out = pk.variable_elimination(ab_net, 0, {0: 1})
    np.testing.assert_array_equal(out.values, [0.0, 1.0])


def test_impossible_evidence_raises(ab_net):
    vs = H.make_variables(2, [2, 2])
    det = pk.Network(
        vs,
        [[], [0]],
        [
            pk.cpt_from_rows(vs, 0, [], [[1.0, 0.0]]),
            pk.cpt_from_rows(vs, 1, [0], [[1.0, 0.0], [0.0, 1.0]]),
        ],
    )
    with pytest.raises(pk.ImpossibleEvidenceError, match="impossible evidence"):
        pk.variable_elimination(det, 0, {1: 1})


def test_ve_matches_enumeration_oracle(rng):
    for _ in range(25):
        net = H.random_network(rng, int(rng.integers(2, 8)), cards=(2, 3))
        ev_vars = rng.choice(net.n, size=min(net.n - 1, 2), replace=False)
        ev = {}
        for v in ev_vars:
            ev[int(v)] = int(rng.integers(0, net.cardinality(int(v))))
        if H.evidence_prob(net, ev) == 0:
            continue
        query = next(v for v in range(net.n) if v not in ev)
        got = pk.variable_elimination(net, query, ev)
        np.testing.assert_allclose(
            got.values, H.enum_posterior(net, query, ev), atol=1e-9
        )


# ---------------------------------------------------------------------------
# junction tree construction


def test_chain_tree_structure(chain3):
    tree = pk.build_junction_tree(chain3)
    assert [c for c in tree.cliques] == [(0, 1), (1, 2)]
    assert tree.sep_vars == [(1,)]
    assert tree.root == 0


def test_collider_single_clique():
    net = H.binary_net([[], [], [0, 1]], [[0.4], [0.6], [0.1, 0.2, 0.3, 0.4]], "v")
    tree = pk.build_junction_tree(net)
    assert tree.cliques == [(0, 1, 2)]


def test_every_family_is_covered(rng):
    for _ in range(20):
        net = H.random_network(rng, 10, cards=(2, 3), p_edge=0.3)
        tree = pk.build_junction_tree(net)
        for i in range(net.n):
            fam = set(net.family(i))
            assert any(fam <= set(c) for c in tree.cliques)


def test_running_intersection_property(rng):
    for _ in range(50):
        net = H.random_network(rng, 10, cards=(2,), p_edge=0.35)
        tree = pk.build_junction_tree(net)
        adj = {i: set() for i in range(len(tree.cliques))}
        for (i, j) in tree.edges:
            adj[i].add(j)
            adj[j].add(i)
        for v in range(net.n):
            holding = [k for k, c in enumerate(tree.cliques) if v in c]
            # BFS within the induced subgraph must reach every holder
            seen = {holding[0]}
            frontier = [holding[0]]
            while frontier:
                nxt = []
                for k in frontier:
                    for m in adj[k]:
                        if m in set(holding) and m not in seen:
                            seen.add(m)
                            nxt.append(m)
                frontier = nxt
            assert seen == set(holding)


def test_separators_are_clique_intersections(rng):
    net = H.random_network(rng, 9, cards=(2, 3), p_edge=0.3)
    tree = pk.build_junction_tree(net)
    for (i, j), sep in zip(tree.edges, tree.sep_vars):
        assert set(sep) == set(tree.cliques[i]) & set(tree.cliques[j])


# ---------------------------------------------------------------------------
# junction tree propagation


def test_chain_clique_table_before_evidence(chain3):
    net = H.ab_network()
    tree = pk.build_junction_tree(net)
    calibrated = pk.jt_propagate(tree, {})
    ab = calibrated.clique_tables[0]
    np.testing.assert_allclose(ab.values, [0.56, 0.14, 0.03, 0.27], atol=1e-12)


def test_adjacent_cliques_agree_on_separators(rng):
    for _ in range(10):
        net = H.random_network(rng, 9, cards=(2, 3), p_edge=0.35)
        ev = {0: 0}
        if H.evidence_prob(net, ev) == 0:
            continue
        tree = pk.build_junction_tree(net)
        calibrated = pk.jt_propagate(tree, ev)
        for (i, j), sep in zip(tree.edges, tree.sep_vars):
            a = pk.table_marginalize(calibrated.clique_tables[i], sep)
            b = pk.table_marginalize(calibrated.clique_tables[j], sep)
            np.testing.assert_allclose(a.values, b.values, atol=1e-9)


def test_jt_query_matches_ve(rng):
    for _ in range(20):
        net = H.random_network(rng, 10, cards=(2, 3), p_edge=0.3)
        ev_vars = rng.choice(net.n, size=2, replace=False)
        ev = {int(v): int(rng.integers(0, net.cardinality(int(v)))) for v in ev_vars}
        if H.evidence_prob(net, ev) == 0:
            continue
        jt = pk.jt_marginals(net, ev=ev)
        ve = pk.ve_marginals(net, ev=ev)
        for v in range(net.n):
            np.testing.assert_allclose(jt[v].values, ve[v].values, atol=1e-9)


def test_jt_impossible_evidence(ab_net):
    vs = H.make_variables(2, [2, 2])
    det = pk.Network(
        vs,
        [[], [0]],
        [
            pk.cpt_from_rows(vs, 0, [], [[1.0, 0.0]]),
            pk.cpt_from_rows(vs, 1, [0], [[1.0, 0.0], [0.0, 1.0]]),
        ],
    )
    with pytest.raises(pk.ImpossibleEvidenceError):
        pk.jt_marginals(det, ev={1: 1})


def test_jt_evidence_query_is_one_hot(bench8):
    marg = pk.jt_marginals(bench8, ev={3: 1})
    np.testing.assert_array_equal(marg[3].values, [0.0, 1.0])


def test_jt_worker_invariance_bitwise(bench8):
    ev = {0: 1, 7: 0}
    runs = [pk.jt_marginals(bench8, ev=ev, workers=w) for w in (1, 2, 8)]
    for other in runs[1:]:
        for v in range(bench8.n):
            np.testing.assert_array_equal(runs[0][v].values, other[v].values)


def test_reusing_a_prebuilt_tree(bench8):
    tree = pk.build_junction_tree(bench8)
    a = pk.jt_marginals(bench8, ev={7: 1}, tree=tree)
    b = pk.jt_marginals(bench8, ev={7: 1})
    for v in range(bench8.n):
        np.testing.assert_array_equal(a[v].values, b[v].values)


def test_calibrated_tree_query_unknown_variable(chain3):
    tree = pk.build_junction_tree(chain3)
    calibrated = pk.jt_propagate(tree, {})
    with pytest.raises(pk.ValidationError):
        calibrated.query(17)


def test_root_choice_minimizes_height():
    # a long chain: the root should sit mid-tree, not at an end
    n = 9
    parents = [[]] + [[i] for i in range(n - 1)]
    prob_one = [[0.5]] + [[0.2, 0.8]] * (n - 1)
    net = H.binary_net(parents, prob_one, "chain9")
    tree = pk.build_junction_tree(net)
    assert tree.height() <= (len(tree.cliques) + 1) // 2
