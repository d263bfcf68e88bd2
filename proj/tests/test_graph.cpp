#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "oasis/error.hpp"
#include "oasis/graph.hpp"
#include "oasis/sim.hpp"

using namespace oasis;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("single cluster with no overlay is symmetric and pure") {
    const MarketplaceGraph g = generate_clustered_graph(1, 10, 2, 0.25, 0.0, 42);
    CHECK(g.n_nodes() == 10);
    std::set<std::pair<NodeId, NodeId>> arcs;
    for (const Edge& e : g.edges()) {
        CHECK(g.cluster_of(e.src) == g.cluster_of(e.dst));
        arcs.insert({e.src, e.dst});
    }
    for (const auto& [s, d] : arcs) CHECK(arcs.count({d, s}) == 1);
    for (NodeId v = 0; v < g.n_nodes(); ++v) CHECK(g.in_degree(v) == g.out_degree(v));
}

TEST_CASE("determinism per seed") {
    const MarketplaceGraph a = generate_clustered_graph(3, 60, 4, 0.25, 1.0, 9);
    const MarketplaceGraph b = generate_clustered_graph(3, 60, 4, 0.25, 1.0, 9);
    const MarketplaceGraph c = generate_clustered_graph(3, 60, 4, 0.25, 1.0, 10);
    REQUIRE(a.n_edges() == b.n_edges());
    bool all_equal = true;
    for (EdgeId e = 0; e < a.n_edges(); ++e)
        all_equal = all_equal && a.edge(e).src == b.edge(e).src && a.edge(e).dst == b.edge(e).dst;
    CHECK(all_equal);
    CHECK((c.n_edges() != a.n_edges() || [&] {
              for (EdgeId e = 0; e < a.n_edges(); ++e)
                  if (a.edge(e).src != c.edge(e).src || a.edge(e).dst != c.edge(e).dst)
                      return true;
              return false;
          }()));
}

TEST_CASE("degree scaling across seeds") {
    double total = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s)
        total += generate_clustered_graph(4, 150, 8, 0.25, 2.0, 100 + s).mean_in_degree();
    const double mean = total / seeds;
    CHECK(mean > 0.9 * 10.0);
    CHECK(mean < 1.1 * 10.0);
}

TEST_CASE("inter-cluster edges come from the overlay") {
    // With k clusters, a fraction (1 - 1/k) of overlay pairs straddles
    // clusters, so the expected inter-cluster edge share is
    //   (1 - 1/k) d_er / (d_ba_eff + d_er)  with  d_ba_eff = 2 s (n_c - s)/n_c.
    auto measured = [](int clusters, int size, double d_ba, double d_er) {
        double frac = 0.0;
        const int seeds = 50;
        for (int s = 0; s < seeds; ++s) {
            const MarketplaceGraph g =
                generate_clustered_graph(clusters, size, d_ba, 0.25, d_er, 500 + s);
            std::size_t inter = 0;
            for (const Edge& e : g.edges())
                if (g.cluster_of(e.src) != g.cluster_of(e.dst)) ++inter;
            frac += static_cast<double>(inter) / static_cast<double>(g.n_edges());
        }
        return frac / seeds;
    };

    SUBCASE("two clusters") {
        const double frac = measured(2, 200, 4, 2.0);
        const int stubs = 2;
        const double d_ba_eff = 2.0 * stubs * (200.0 - stubs) / 200.0;
        const double expected = 0.5 * (1.0 + 1.0 / 399.0) * 2.0 / (d_ba_eff + 2.0);
        CHECK(std::abs(frac - expected) < 0.05);
    }
    SUBCASE("ten clusters approach the d_er/(d_ba + d_er) share") {
        const double frac = measured(10, 60, 4, 2.0);
        CHECK(std::abs(frac - 1.0 / 3.0) < 0.05);
    }
}

TEST_CASE("full-scale generation hits the advertised mean in-degree") {
    const MarketplaceGraph g = generate_clustered_graph(10, 5000, 20, 0.25, 1.0, 7);
    CHECK(g.n_nodes() == 50000);
    CHECK(g.mean_in_degree() == doctest::Approx(21.0).epsilon(0.10));
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(generate_clustered_graph(0, 10, 2, 0.25, 0, 1), ParameterError);
    CHECK_THROWS_AS(generate_clustered_graph(1, 1, 2, 0.25, 0, 1), ParameterError);
    CHECK_THROWS_AS(generate_clustered_graph(1, 10, 0.5, 0.25, 0, 1), ParameterError);
    CHECK_THROWS_AS(generate_clustered_graph(1, 10, 2, 0.25, -1, 1), ParameterError);
    CHECK_THROWS_AS(generate_clustered_graph(1, 4, 12, 0.25, 0, 1), ParameterError);
}

TEST_CASE("attribute fill restores per-consumer simplices") {
    MarketplaceGraph g = generate_clustered_graph(2, 80, 4, 0.25, 1.0, 3);
    const TreatmentSet ts = generate_attributes(g, 4);
    for (NodeId j = 0; j < g.n_nodes(); ++j) {
        if (g.in_degree(j) == 0) continue;
        double base = 0.0, arm1 = 0.0;
        for (EdgeId e : g.in_edges(j)) {
            base += g.edge(e).p_base;
            arm1 += ts.p(1, e);
            const double d = static_cast<double>(g.in_degree(g.edge(e).dst));
            CHECK(g.edge(e).alpha >= 10.0 / d);
            CHECK(g.edge(e).alpha <= 100.0 / d);
        }
        CHECK(std::abs(base - 1.0) <= 1e-12);
        CHECK(std::abs(arm1 - 1.0) <= 1e-12);
    }
    CHECK(validate(g, ts).ok());
}

TEST_CASE("validation reports simplex deficits with magnitude") {
    std::vector<Edge> edges{{0, 1, 0.4, 1.0}, {2, 1, 0.5, 1.0}, {1, 0, 1.0, 1.0},
                            {1, 2, 1.0, 1.0}};
    const MarketplaceGraph g(3, edges, {0, 0, 0});
    TreatmentSet ts;
    ts.n_arms = 1;
    ts.weights.push_back({});
    for (EdgeId e = 0; e < g.n_edges(); ++e) ts.weights[0].push_back(g.edge(e).p_base);
    const ValidationReport rep = validate(g, ts);
    // node 1 sums to 0.9 under p_base and under arm 0
    REQUIRE(rep.violations.size() == 2);
    CHECK(rep.violations[0].kind == Violation::Kind::SimplexSum);
    CHECK(rep.violations[0].node == 1);
    CHECK(rep.violations[0].magnitude == doctest::Approx(-0.1));
    CHECK(rep.violations[0].describe().find("SimplexViolation") != std::string::npos);
}

TEST_CASE("nodes without parents are vacuous") {
    // node 2 has no incoming edge: no constraint to violate
    std::vector<Edge> edges{{0, 1, 1.0, 1.0}, {2, 0, 1.0, 2.0}};
    const MarketplaceGraph g(3, edges, {0, 0, 0});
    TreatmentSet ts;
    ts.n_arms = 1;
    ts.weights.push_back({1.0, 1.0});
    CHECK(validate(g, ts).ok());
}

TEST_CASE("alpha must be positive and arm zero must match the baseline") {
    std::vector<Edge> edges{{0, 1, 1.0, 0.0}};
    const MarketplaceGraph g(2, edges, {0, 0});
    TreatmentSet ts;
    ts.n_arms = 1;
    ts.weights.push_back({0.5});
    const ValidationReport rep = validate(g, ts);
    bool saw_alpha = false, saw_arm0 = false, saw_simplex = false;
    for (const Violation& v : rep.violations) {
        saw_alpha |= v.kind == Violation::Kind::NonPositiveAlpha;
        saw_arm0 |= v.kind == Violation::Kind::ArmZeroMismatch;
        saw_simplex |= v.kind == Violation::Kind::SimplexSum;
    }
    CHECK(saw_alpha);
    CHECK(saw_arm0);
    CHECK(saw_simplex);
}

TEST_CASE("constructor rejects self-loops and duplicates") {
    CHECK_THROWS_AS(MarketplaceGraph(2, {{0, 0, 1.0, 1.0}}, {0, 0}), ParameterError);
    CHECK_THROWS_AS(MarketplaceGraph(2, {{0, 1, 0.5, 1.0}, {0, 1, 0.5, 1.0}}, {0, 0}),
                    ParameterError);
}

TEST_CASE("save/load round trip is exact") {
    MarketplaceGraph g = generate_clustered_graph(2, 30, 2, 0.25, 1.0, 11);
    const TreatmentSet ts = generate_attributes(g, 12);
    const fs::path dir = temp_dir("oasis_graph_rt");
    save(g, ts, dir);
    const auto [g2, ts2] = load(dir);
    REQUIRE(g2.n_nodes() == g.n_nodes());
    REQUIRE(g2.n_edges() == g.n_edges());
    for (EdgeId e = 0; e < g.n_edges(); ++e) {
        CHECK(g2.edge(e).src == g.edge(e).src);
        CHECK(g2.edge(e).dst == g.edge(e).dst);
        CHECK(g2.edge(e).p_base == g.edge(e).p_base);  // bit-exact
        CHECK(g2.edge(e).alpha == g.edge(e).alpha);
    }
    for (NodeId v = 0; v < g.n_nodes(); ++v) CHECK(g2.cluster_of(v) == g.cluster_of(v));
    REQUIRE(ts2.n_arms == ts.n_arms);
    for (int r = 0; r < ts.n_arms; ++r)
        for (EdgeId e = 0; e < g.n_edges(); ++e) CHECK(ts2.p(r, e) == ts.p(r, e));
    fs::remove_all(dir);
}

TEST_CASE("parse errors carry the line number") {
    const fs::path dir = temp_dir("oasis_graph_bad");
    {
        std::ofstream nodes(dir / "nodes.tsv");
        nodes << "node\tcluster\n0\t0\n1\t0\n";
        std::ofstream edges(dir / "graph.tsv");
        edges << "src\tdst\tp_base\talpha\n0\t1\tnot_a_number\t1\n";
    }
    try {
        load_graph(dir / "graph.tsv", dir / "nodes.tsv");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
        CHECK(std::string(e.what()).find("not_a_number") != std::string::npos);
    }
    {
        std::ofstream edges(dir / "graph.tsv");
        edges << "src\tdst\tp_base\talpha\n0\t1\t1\t1\n0\t1\t1\t1\n";
    }
    try {
        load_graph(dir / "graph.tsv", dir / "nodes.tsv");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("duplicate edge 0->1") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("treatment loader requires complete arms") {
    const fs::path dir = temp_dir("oasis_treat_bad");
    std::vector<Edge> edges{{0, 1, 1.0, 1.0}, {1, 0, 1.0, 1.0}};
    const MarketplaceGraph g(2, edges, {0, 0});
    {
        std::ofstream t(dir / "treatments.tsv");
        t << "src\tdst\tarm\tp\n0\t1\t0\t1\n1\t0\t0\t1\n0\t1\t1\t1\n";
    }
    CHECK_THROWS_AS(load_treatments(g, dir / "treatments.tsv"), ParseError);
    fs::remove_all(dir);
}
