"""Smoke tests for the python bindings: the main operations run end to end
and agree with the documented invariants."""

import math

import pytest

import oasis


@pytest.fixture(scope="module")
def graph_and_arms():
    g = oasis.generate_clustered_graph(3, 80, 6, 0.25, 1.0, seed=11)
    ts = oasis.generate_attributes(g, seed=12)
    return g, ts


def test_graph_shape(graph_and_arms):
    g, ts = graph_and_arms
    assert g.n_nodes == 240
    assert g.n_edges > 0
    assert abs(g.mean_in_degree - 7.0) / 7.0 < 0.25
    assert ts.n_arms == 2
    assert oasis.validate(g, ts) == []


def test_edges_are_simplex_normalized(graph_and_arms):
    g, _ = graph_and_arms
    sums = {}
    for src, dst, p_base, alpha in g.edges():
        sums[dst] = sums.get(dst, 0.0) + p_base
        assert alpha > 0
    for total in sums.values():
        assert abs(total - 1.0) < 1e-9


def test_design_restores_simplices(graph_and_arms):
    g, ts = graph_and_arms
    part = oasis.sample_partition(g, 2, 0.1, 0.1, 0.5, seed=13)
    assert len(part.omega[0]) == 24
    design = oasis.assemble_design(g, ts, part, {"r_min": 0, "r_max": 10,
                                                 "s_min": 0.2, "s_max": 5},
                                   {"alpha_override": 1.0})
    sums = {}
    for (src, dst, _, _), p in zip(g.edges(), design.p_star):
        sums[dst] = sums.get(dst, 0.0) + p
    for total in sums.values():
        assert abs(total - 1.0) < 1e-9
    trace = design.objective_trace
    assert all(b <= a + 1e-6 for a, b in zip(trace, trace[1:]))
    assert set(design.provenance()) <= {"consumer-exact", "optimized",
                                        "renormalized", "base"}


def test_estimate_report_shape(graph_and_arms):
    g, ts = graph_and_arms
    part = oasis.sample_partition(g, 2, 0.1, 0.1, 0.5, seed=14)
    design = oasis.assemble_design(g, ts, part, {}, {"alpha_override": 1.0})
    truth = oasis.ground_truth(g, ts, 0.5)
    # crude synthetic responses: anything finite works for the smoke test
    responses = [5.0 + 0.01 * (v % 7) for v in range(g.n_nodes)]
    report = oasis.run_estimate(g, ts, design, 0.5, responses,
                                {"bootstrap_b": 120, "seed": 3})
    assert {a["r"] for a in report["arms"]} == {0, 1}
    assert len(report["effects"]) == 1
    lo, hi = report["effects"][0]["ci"]
    assert lo <= report["effects"][0]["diff"] <= hi
    assert report["diagnostics"]["ess"] > 0
    assert len(truth["diff"]) == 1


def test_solve_qp_clamps_to_the_box():
    out = oasis.solve_qp(
        1,
        [(0, 0, 2.0)],
        [-4.0],
        [(0, 0, 1.0)],
        [0.0],
        [1.5],
        objective_const=4.0,
    )
    assert out["status"] == "solved"
    assert math.isclose(out["x"][0], 1.5, abs_tol=1e-5)
    assert math.isclose(out["objective"], 0.25, abs_tol=1e-5)


def test_simulate_summary():
    result = oasis.simulate({
        "n_clusters": 3, "cluster_size": 60, "d_ba": 4, "d_er": 1,
        "delta": 1.0, "repeats": 3, "seed": 5, "threads": 1,
        "estimator": {"bootstrap_b": 120},
    })
    methods = {row["method"] for row in result["summary"]}
    assert methods == {"oasis", "cb"}
    assert len(result["results"]) == 6
    for row in result["results"]:
        assert row["covered"] in (True, False)
        assert math.isfinite(row["estimate"])


def test_save_load_round_trip(tmp_path, graph_and_arms):
    g, ts = graph_and_arms
    oasis.save(g, ts, str(tmp_path / "g"))
    g2, ts2 = oasis.load(str(tmp_path / "g"))
    assert g2.n_nodes == g.n_nodes
    assert g2.n_edges == g.n_edges
    assert ts2.n_arms == ts.n_arms
    assert ts2.weights(1) == ts.weights(1)


def test_errors_surface_as_python_exceptions():
    with pytest.raises(oasis.OasisError):
        oasis.generate_clustered_graph(0, 10, 2, 0.25, 0.0, seed=1)
