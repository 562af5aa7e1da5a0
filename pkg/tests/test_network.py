import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import line_doc, star_doc
from slnet.network import (BoundaryCondition, NetworkError, build_grid, bundled_scenarios, geodesic_distance,
                           load_network, load_scenario, network_from_dict, network_to_dict)
from slnet.traffic import rouen_like


def test_bundled_scenarios_load():
    assert {"test1", "test2", "counterexample", "rouen"} <= set(bundled_scenarios())
    for name in bundled_scenarios():
        scen = load_scenario(name)
        assert scen.name == name
        assert scen.net.arcs


def test_test1_grid_counts():
    grid = build_grid(load_network("test1"), 0.01)
    assert grid.n_samples == 201
    assert list(grid.arc_n) == [100, 100]


def test_grid_counts_and_commensurability():
    net = network_from_dict(line_doc(length=1.0))
    assert build_grid(net, 0.25).n_samples == 5
    with pytest.raises(NetworkError):
        build_grid(net, 0.3)
    fit = build_grid(net, 0.3, policy="fit")
    assert fit.arc_n[0] == 4 and fit.arc_h[0] == pytest.approx(0.25)
    with pytest.raises(NetworkError):
        build_grid(net, 2.0)


def test_grid_ends_exactly_at_length():
    grid = build_grid(load_network("test2"), 0.01, policy="fit")
    for a, arc in enumerate(grid.net.arcs):
        s, _ = grid.arc_samples(a)
        assert s[0] == 0.0 and s[-1] == arc.length


def test_shared_node_sample():
    grid = build_grid(load_network("test1"), 0.1)
    g = grid.node_sample("O")
    for a in range(2):
        assert grid.arc_g[grid.arc_ptr[a]] == g


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: d["nodes"].append(dict(d["nodes"][0])), "duplicate"),
    (lambda d: d["arcs"][0].update({"to": "nowhere"}), "unknown"),
    (lambda d: d["arcs"][0].update({"length": -1.0}), "length"),
    (lambda d: d["nodes"].append({"id": "lonely", "kind": "junction", "A": 0}), "isolated"),
    (lambda d: d["arcs"].append(dict(d["arcs"][0], id="extra")), "exactly 1"),
    (lambda d: d["nodes"][1]["bc"].update({"kind": "robin"}), "kind"),
    (lambda d: d["arcs"][0].pop("lagrangian"), "malformed"),
])
def test_validation_errors(mutate, msg):
    doc = star_doc()
    mutate(doc)
    with pytest.raises(NetworkError, match=msg):
        network_from_dict(doc)


def test_disconnected_network():
    doc = star_doc()
    extra = line_doc(length=1.0)
    for n in extra["nodes"]:
        n["id"] += "x"
    extra["arcs"][0].update({"id": "Ex", "from": "Lx", "to": "Rx"})
    doc["nodes"] += extra["nodes"]
    doc["arcs"] += extra["arcs"]
    with pytest.raises(NetworkError, match="connected"):
        network_from_dict(doc)


def test_unbounded_arc_needs_truncation():
    doc = star_doc()
    doc["arcs"][0]["length"] = "inf"
    with pytest.raises(NetworkError, match="truncate"):
        network_from_dict(doc)
    doc["arcs"][0]["truncate"] = 3.0
    assert network_from_dict(doc).arc("J0").length == 3.0


def test_round_trip_and_file_formats(tmp_path):
    net = load_network("test2")
    doc = network_to_dict(net)
    assert network_from_dict(doc) == net
    path = tmp_path / "net.json"
    path.write_text(json.dumps(doc))
    assert load_network(path) == net


def test_missing_scenario():
    with pytest.raises(NetworkError):
        load_scenario("no-such-scenario")


def test_boundary_condition_table():
    bc = BoundaryCondition("dirichlet", ((0.0, 1.0), (0.0, 2.0)))
    assert bc.at(0.5) == pytest.approx(1.0)
    assert bc.at(3.0) == pytest.approx(2.0)
    assert BoundaryCondition("neumann", 0.3).at(7.0) == 0.3


def test_geodesic_examples():
    net = load_network("test2")
    assert geodesic_distance(net, ("J1", 0.5), ("J1", 0.2)) == pytest.approx(0.3)
    assert geodesic_distance(net, ("J1", 0.5), ("J2", 1.0)) == pytest.approx(1.5)
    assert geodesic_distance(net, ("J2", 0.0), ("J3", 0.0)) == 0.0


def _nx_distance(net, x, y):
    """Oracle: split both arcs at the points and run networkx Dijkstra."""
    g = nx.Graph()
    for arc in net.arcs:
        g.add_edge(arc.tail, arc.head, weight=arc.length, key=arc.id)
    for tag, (aid, s) in (("X", x), ("Y", y)):
        arc = net.arc(aid)
        g.add_edge(tag, arc.tail, weight=s)
        g.add_edge(tag, arc.head, weight=arc.length - s)
    same = x[0] == y[0]
    direct = abs(x[1] - y[1]) if same else np.inf
    return min(direct, nx.dijkstra_path_length(g, "X", "Y"))


CITY = network_from_dict(rouen_like())
points = st.tuples(st.sampled_from([a.id for a in CITY.arcs]), st.floats(0, 1))


def _on_arc(p):
    return p[0], p[1] * CITY.arc(p[0]).length


@settings(max_examples=80, deadline=None)
@given(points, points, points)
def test_geodesic_metric(p, q, r):
    x, y, z = _on_arc(p), _on_arc(q), _on_arc(r)
    dxy = geodesic_distance(CITY, x, y)
    assert dxy == pytest.approx(geodesic_distance(CITY, y, x), abs=1e-12)
    assert geodesic_distance(CITY, x, x) == 0.0
    assert dxy <= geodesic_distance(CITY, x, z) + geodesic_distance(CITY, z, y) + 1e-12


@settings(max_examples=80, deadline=None)
@given(points, points)
def test_geodesic_matches_networkx(p, q):
    x, y = _on_arc(p), _on_arc(q)
    if x[0] == y[0]:
        # networkx oracle cannot hold both split points on one edge
        return
    assert geodesic_distance(CITY, x, y) == pytest.approx(_nx_distance(CITY, x, y), abs=1e-12)
