import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import pgmkit as pk

import _helpers as H


TWO_VAR_BIF = """\
network ab {
}
variable A {
  type discrete [ 2 ] { false, true };
}
variable B {
  type discrete [ 2 ] { false, true };
}
probability ( A ) {
  table 0.7, 0.3;
}
probability ( B | A ) {
  (false) 0.8, 0.2;
  (true) 0.1, 0.9;
}
"""


# ---------------------------------------------------------------------------
# BIF parsing


def test_parse_two_variable_bif(ab_net):
    net = pk.parse_bif(TWO_VAR_BIF)
    assert net.name == "ab"
    assert [v.name for v in net.variables] == ["A", "B"]
    assert net.parents == [(), (0,)]
    assert net.equals(ab_net)


def test_parse_accepts_table_form_for_child():
    text = TWO_VAR_BIF.replace(
        "(false) 0.8, 0.2;\n  (true) 0.1, 0.9;", "table 0.8, 0.2, 0.1, 0.9;"
    )
    assert pk.parse_bif(text).equals(H.ab_network())


def test_parse_ignores_property_lines():
    text = TWO_VAR_BIF.replace(
        "network ab {\n}", 'network ab {\n  property author nobody;\n}'
    )
    assert pk.parse_bif(text).name == "ab"


def test_row_sum_violation_message():
    bad = TWO_VAR_BIF.replace("0.8, 0.2", "0.5, 0.6")
    with pytest.raises(pk.FormatError, match=r"row sum 1\.1 exceeds tolerance"):
        pk.parse_bif(bad)


def test_row_with_small_drift_is_renormalized():
    drifted = TWO_VAR_BIF.replace("0.8, 0.2", "0.8000004, 0.2")
    net = pk.parse_bif(drifted)
    np.testing.assert_allclose(net.cpts[1].nd[0].sum(), 1.0, atol=1e-15)


def test_unknown_parent_name_rejected():
    bad = TWO_VAR_BIF.replace("( B | A )", "( B | Z )")
    with pytest.raises(pk.ParseError):
        pk.parse_bif(bad)


def test_wrong_entry_count_rejected():
    bad = TWO_VAR_BIF.replace("table 0.7, 0.3;", "table 0.7, 0.2, 0.1;")
    with pytest.raises(pk.ParseError):
        pk.parse_bif(bad)


def test_missing_parent_row_rejected():
    bad = TWO_VAR_BIF.replace("(true) 0.1, 0.9;", "")
    with pytest.raises(pk.ParseError):
        pk.parse_bif(bad)


def test_duplicate_parent_row_rejected():
    bad = TWO_VAR_BIF.replace("(false) 0.8, 0.2;", "(false) 0.8, 0.2;\n  (false) 0.8, 0.2;")
    with pytest.raises(pk.ParseError):
        pk.parse_bif(bad)


def test_cyclic_bif_rejected():
    text = """\
network loop {
}
variable A { type discrete [ 2 ] { f, t }; }
variable B { type discrete [ 2 ] { f, t }; }
probability ( A | B ) { (f) 0.5, 0.5; (t) 0.5, 0.5; }
probability ( B | A ) { (f) 0.5, 0.5; (t) 0.5, 0.5; }
"""
    with pytest.raises(pk.PgmError):
        pk.parse_bif(text)


# ---------------------------------------------------------------------------
# BIF writing


def test_write_bif_round_trip(ab_net):
    again = pk.parse_bif(pk.write_bif(ab_net))
    assert again.equals(ab_net)
    assert again.name == ab_net.name


def test_write_bif_deterministic(bench8):
    assert pk.write_bif(bench8) == pk.write_bif(bench8)


def test_write_bif_single_node_table_line():
    vs = H.make_variables(1, [2])
    net = pk.Network(vs, [[]], [pk.cpt_from_rows(vs, 0, [], [[0.5, 0.5]])])
    assert "table 0.5 0.5;" in pk.write_bif(net)


def test_write_parse_write_is_a_fixpoint(bench8, rng):
    nets = [bench8, H.ab_network(), H.random_network(rng, 6, cards=(2, 3))]
    for net in nets:
        once = pk.write_bif(net)
        twice = pk.write_bif(pk.parse_bif(once))
        assert once == twice


def test_bif_preserves_probabilities_to_the_bit(rng):
    net = H.random_network(rng, 5, cards=(2, 3, 4))
    again = pk.parse_bif(pk.write_bif(net))
    for a, b in zip(net.cpts, again.cpts):
        np.testing.assert_array_equal(a.values, b.values)


# ---------------------------------------------------------------------------
# JSON


def test_json_round_trip(bench8):
    again = pk.parse_network_json(pk.network_to_json(bench8))
    assert again.equals(bench8)
    for a, b in zip(bench8.cpts, again.cpts):
        np.testing.assert_array_equal(a.values, b.values)


def test_json_document_shape(ab_net):
    doc = json.loads(pk.network_to_json(ab_net))
    assert doc["format"] == "pgmkit-network"
    assert doc["version"] == 1
    assert doc["variables"][0] == {"name": "A", "states": ["false", "true"]}
    assert doc["parents"] == [[], ["A"]]


def test_structure_json_round_trip(bench8):
    doc = pk.structure_to_json(bench8.variables, bench8.parents)
    vs, parents = pk.parse_structure_json(doc)
    assert [v.name for v in vs] == [v.name for v in bench8.variables]
    assert [tuple(p) for p in parents] == [tuple(p) for p in bench8.parents]


def test_structure_json_accepts_full_network_doc(ab_net):
    vs, parents = pk.parse_structure_json(pk.network_to_json(ab_net))
    assert [tuple(p) for p in parents] == [(), (0,)]


def test_read_network_text_sniffs_format(ab_net, tmp_path):
    assert pk.read_network_text(pk.write_bif(ab_net)).equals(ab_net)
    assert pk.read_network_text(pk.network_to_json(ab_net)).equals(ab_net)


# ---------------------------------------------------------------------------
# CSV


def test_load_csv_single_column():
    ds = pk.load_csv("a\n0\n1\n0\n")
    assert ds.variables[0].name == "a"
    assert ds.variables[0].cardinality == 2
    np.testing.assert_array_equal(ds.columns[0], [0, 1, 0])


def test_load_csv_states_sorted_lexicographically():
    ds = pk.load_csv("x,y\nno,yes\nyes,no\nno,no\n")
    assert ds.variables[0].state_names == ("no", "yes")
    np.testing.assert_array_equal(ds.columns[0], [0, 1, 0])
    np.testing.assert_array_equal(ds.columns[1], [1, 0, 0])


def test_load_csv_ragged_row_reports_line():
    with pytest.raises(pk.ParseError, match="line 3"):
        pk.load_csv("a,b\n0,1\n0\n")


def test_load_csv_rejects_constant_column():
    with pytest.raises(pk.ParseError, match="constant"):
        pk.load_csv("a,b\n0,1\n0,0\n")


def test_load_csv_rejects_empty_input():
    with pytest.raises(pk.ParseError):
        pk.load_csv("")
    with pytest.raises(pk.ParseError):
        pk.load_csv("a,b\n")


def test_load_csv_rejects_missing_values():
    with pytest.raises(pk.ParseError):
        pk.load_csv("a,b\n0,1\n,1\n")


def test_load_csv_rejects_duplicate_header():
    with pytest.raises(pk.ParseError):
        pk.load_csv("a,a\n0,1\n1,0\n")


def test_csv_round_trip(rng):
    net = H.random_network(rng, 4, cards=(2, 3))
    ds = pk.generate_dataset(net, 50, seed=3)
    again = pk.load_csv(pk.write_csv(ds))
    assert [v.name for v in again.variables] == [v.name for v in ds.variables]
    np.testing.assert_array_equal(again.columns, ds.columns)


def test_load_csv_row_permutation_equivariant():
    text = "a,b\n0,x\n1,y\n0,y\n1,x\n"
    ds = pk.load_csv(text)
    lines = text.strip().split("\n")
    permuted = "\n".join([lines[0], lines[3], lines[1], lines[4], lines[2]]) + "\n"
    ds2 = pk.load_csv(permuted)
    perm = [2, 0, 3, 1]
    np.testing.assert_array_equal(ds2.columns[:, :], ds.columns[:, perm])


# ---------------------------------------------------------------------------
# convert / dot


def test_convert_json_round_trip(ab_net):
    out = pk.convert(ab_net, "json")
    assert pk.parse_network_json(out).equals(ab_net)


def test_convert_dot_contains_edge(ab_net):
    assert "A -> B" in pk.convert(ab_net, "dot")


def test_convert_unknown_target(ab_net):
    with pytest.raises(pk.ValidationError, match="xml"):
        pk.convert(ab_net, "xml")


def test_dot_quotes_awkward_names():
    vs = [
        pk.DiscreteVariable(0, "node one", 2, ("f", "t")),
        pk.DiscreteVariable(1, "B", 2, ("f", "t")),
    ]
    net = pk.Network(
        vs,
        [[], [0]],
        [
            pk.cpt_from_rows(vs, 0, [], [[0.5, 0.5]]),
            pk.cpt_from_rows(vs, 1, [0], [[0.5, 0.5], [0.5, 0.5]]),
        ],
    )
    dot = pk.write_dot(net)
    assert '"node one"' in dot


# ---------------------------------------------------------------------------
# Dataset validation


def test_dataset_rejects_out_of_range_entries():
    vs = H.make_variables(1, [2])
    with pytest.raises(pk.ValidationError):
        pk.Dataset(vs, np.array([[0, 2]], dtype=np.int32))


def test_dataset_var_id_lookup():
    vs = H.make_variables(2, [2, 2])
    ds = pk.Dataset(vs, np.zeros((2, 3), dtype=np.int32) + np.array([[0], [1]], dtype=np.int32))
    assert ds.var_id("V1") == 1
    with pytest.raises(pk.ValidationError):
        ds.var_id("nope")


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_bif_fixpoint_on_random_networks(seed):
    rng = np.random.default_rng(seed)
    net = H.random_network(rng, int(rng.integers(1, 7)), cards=(2, 3))
    once = pk.write_bif(net)
    assert pk.write_bif(pk.parse_bif(once)) == once
