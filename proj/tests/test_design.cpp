#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oasis/design.hpp"
#include "oasis/error.hpp"
#include "oasis/graph.hpp"
#include "oasis/sim.hpp"

using namespace oasis;

namespace {

// Six-node toy: two measurement producers sharing one exposure-set consumer.
struct Toy {
    MarketplaceGraph graph;
    TreatmentSet treatments;
    Partition partition;
};

Toy make_toy() {
    // arcs: 0->4 0->1 0->2 2->5 5->2 3->0 3->5 1->2 4->0 4->3
    std::vector<Edge> edges{
        {0, 4, 1.0, 1.0}, {0, 1, 1.0, 1.0}, {0, 2, 0.3, 1.0}, {2, 5, 0.5, 1.0},
        {5, 2, 0.3, 1.0}, {3, 0, 0.4, 1.0}, {3, 5, 0.5, 1.0}, {1, 2, 0.4, 1.0},
        {4, 0, 0.6, 1.0}, {4, 3, 1.0, 1.0},
    };
    Toy toy{MarketplaceGraph(6, std::move(edges), {0, 0, 0, 0, 0, 0}), {}, {}};
    const MarketplaceGraph& g = toy.graph;

    TreatmentSet& ts = toy.treatments;
    ts.n_arms = 2;
    ts.weights.assign(2, std::vector<double>(g.n_edges()));
    for (EdgeId e = 0; e < g.n_edges(); ++e) ts.weights[0][e] = g.edge(e).p_base;
    ts.weights[1] = ts.weights[0];
    auto set1 = [&](NodeId s, NodeId d, double v) {
        ts.weights[1][static_cast<EdgeId>(g.find_edge(s, d))] = v;
    };
    set1(4, 0, 0.2);
    set1(3, 0, 0.8);
    set1(0, 2, 0.5);
    set1(5, 2, 0.2);
    set1(1, 2, 0.3);
    set1(2, 5, 0.7);
    set1(3, 5, 0.3);

    Partition& part = toy.partition;
    part.n_arms = 2;
    part.q = 1.0;
    part.omega = {{0}, {5}};
    part.lambda = {{4}, {1}};
    part.c_prime = {2};
    part.role.assign(6, Partition::Role::Rest);
    part.arm_of.assign(6, -1);
    part.role[0] = Partition::Role::Omega;
    part.arm_of[0] = 0;
    part.role[5] = Partition::Role::Omega;
    part.arm_of[5] = 1;
    part.role[4] = Partition::Role::Lambda;
    part.arm_of[4] = 0;
    part.role[1] = Partition::Role::Lambda;
    part.arm_of[1] = 1;
    part.role[2] = Partition::Role::CPrime;
    return toy;
}

}  // namespace

TEST_CASE("sum-bound arithmetic") {
    // one consumer with two Omega' parents carrying 0.9 of the base mass
    std::vector<Edge> edges{{0, 2, 0.5, 1.0}, {1, 2, 0.4, 1.0}, {3, 2, 0.1, 1.0}};
    const MarketplaceGraph g(4, std::move(edges), {0, 0, 0, 0});
    Partition part;
    part.n_arms = 1;
    part.omega = {{0, 1}};
    part.lambda = {{}};
    part.c_prime = {2};
    part.role.assign(4, Partition::Role::Rest);
    part.arm_of.assign(4, -1);
    part.role[0] = part.role[1] = Partition::Role::Omega;
    part.arm_of[0] = part.arm_of[1] = 0;
    part.role[2] = Partition::Role::CPrime;

    SUBCASE("generic bounds") {
        const RiskBounds b = compute_sum_bounds(g, part, {0.0, 10.0, 0.2, 5.0});
        CHECK(b.sum_lo[0] == doctest::Approx(0.5));
        CHECK(b.sum_hi[0] == doctest::Approx(0.98));
        CHECK_FALSE(b.degenerate[0]);
    }
    SUBCASE("pinned to the baseline mass") {
        const RiskBounds b = compute_sum_bounds(g, part, {0.0, 10.0, 1.0, 1.0});
        CHECK(b.sum_lo[0] == doctest::Approx(0.9));
        CHECK(b.sum_hi[0] == doctest::Approx(0.9));
    }
    SUBCASE("no outside mass pins the sum to one") {
        part.role[3] = Partition::Role::Omega;
        part.arm_of[3] = 0;
        part.omega[0] = {0, 1, 3};
        const RiskBounds b = compute_sum_bounds(g, part, {0.0, 10.0, 0.2, 5.0});
        CHECK(b.sum_lo[0] == 1.0);
        CHECK(b.sum_hi[0] == 1.0);
        CHECK(b.degenerate[0]);
    }
    SUBCASE("parameter checks") {
        CHECK_THROWS_AS(compute_sum_bounds(g, part, {0.0, 0.5, 0.2, 5.0}), ParameterError);
        CHECK_THROWS_AS(compute_sum_bounds(g, part, {0.0, 10.0, 0.2, 0.9}), ParameterError);
    }
}

TEST_CASE("toy full problem matches the hand-built objective") {
    const Toy toy = make_toy();
    const RiskBounds bounds = compute_sum_bounds(toy.graph, toy.partition, RiskParams{});
    const FullProblem full =
        build_full_problem(toy.graph, toy.treatments, toy.partition, bounds, 1.0);
    REQUIRE(full.qp.n_vars == 2);
    // variables are the arcs 0->2 and 5->2; residual targets 0.3 and 0.2
    // give min (0.3 - p02)^2 + (0.2 - p52)^2 up to the constant.
    std::vector<double> q_sorted = full.qp.q;
    std::sort(q_sorted.begin(), q_sorted.end());
    CHECK(q_sorted[0] == doctest::Approx(-0.6));
    CHECK(q_sorted[1] == doctest::Approx(-0.4));
    CHECK(full.qp.objective_const == doctest::Approx(0.13));
    const QpSolution sol = solve_qp(full.qp, QpConfig{});
    CHECK(sol.objective_value == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("toy design assembles all four provenance classes") {
    const Toy toy = make_toy();
    const DesignOutput d =
        assemble_design(toy.graph, toy.treatments, toy.partition, RiskParams{});
    const MarketplaceGraph& g = toy.graph;
    auto at = [&](NodeId s, NodeId t) { return static_cast<EdgeId>(g.find_edge(s, t)); };

    // interior optimum: targets are reachable exactly
    CHECK(d.p_star[at(0, 2)] == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(d.p_star[at(5, 2)] == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(d.provenance[at(0, 2)] == Provenance::Optimized);
    // line-6 rescale: 0.4 * (1 - 0.5)/(1 - 0.6)
    CHECK(d.p_star[at(1, 2)] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(d.provenance[at(1, 2)] == Provenance::Renormalized);
    // consumer-exact arms: node 0 sits in arm 0, so it keeps the baseline
    CHECK(d.p_star[at(4, 0)] == doctest::Approx(0.6));
    CHECK(d.p_star[at(3, 0)] == doctest::Approx(0.4));
    CHECK(d.provenance[at(4, 0)] == Provenance::ConsumerExact);
    CHECK(d.p_star[at(2, 5)] == doctest::Approx(0.7));
    CHECK(d.p_star[at(3, 5)] == doctest::Approx(0.3));
    // untouched consumer keeps the baseline
    CHECK(d.p_star[at(4, 3)] == 1.0);
    CHECK(d.provenance[at(4, 3)] == Provenance::Base);

    // simplex restored everywhere
    for (NodeId j = 0; j < g.n_nodes(); ++j) {
        if (g.in_degree(j) == 0) continue;
        double s = 0.0;
        for (EdgeId e : g.in_edges(j)) s += d.p_star[e];
        CHECK(std::abs(s - 1.0) <= 1e-9);
    }
    CHECK(evaluate_allocation_objective(g, toy.treatments, d.partition, d.p_star, 1.0) ==
          doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("identical treatments keep the baseline weights") {
    MarketplaceGraph g = generate_clustered_graph(2, 60, 4, 0.25, 1.0, 17);
    TreatmentSet ts = generate_attributes(g, 18);
    ts.weights[1] = ts.weights[0];
    const Partition part = sample_partition(g, 2, 0.1, 0.1, 0.5, 19);
    const DesignOutput d = assemble_design(g, ts, part, RiskParams{});
    for (EdgeId e = 0; e < g.n_edges(); ++e)
        CHECK(std::abs(d.p_star[e] - g.edge(e).p_base) <= 1e-5);
    CHECK(d.objective_trace.front() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("partition sampling respects sizes, disjointness and q") {
    const MarketplaceGraph g = generate_clustered_graph(4, 250, 6, 0.25, 1.0, 23);
    const Partition p = sample_partition(g, 2, 0.1, 0.05, 0.5, 29);
    CHECK(p.omega[0].size() == 100);
    CHECK(p.omega[1].size() == 100);
    CHECK(p.lambda[0].size() == 50);
    CHECK(p.lambda[1].size() == 50);

    std::set<NodeId> seen;
    std::size_t total = 0;
    for (const auto& v : p.omega) {
        seen.insert(v.begin(), v.end());
        total += v.size();
    }
    for (const auto& v : p.lambda) {
        seen.insert(v.begin(), v.end());
        total += v.size();
    }
    seen.insert(p.c_prime.begin(), p.c_prime.end());
    total += p.c_prime.size();
    CHECK(seen.size() == total);  // pairwise disjoint

    // C' is a subset of the eligible children
    for (NodeId j : p.c_prime) {
        bool has_omega_parent = false;
        for (EdgeId e : g.in_edges(j))
            has_omega_parent |= p.in_omega_prime(g.edge(e).src);
        CHECK(has_omega_parent);
    }

    SUBCASE("q = 0 empties the exposure set") {
        const Partition p0 = sample_partition(g, 2, 0.1, 0.05, 0.0, 29);
        CHECK(p0.c_prime.empty());
        TreatmentSet ts = generate_attributes(const_cast<MarketplaceGraph&>(g), 31);
        const DesignOutput d = assemble_design(g, ts, p0, RiskParams{});
        CHECK(d.objective_trace.empty());
        for (EdgeId e = 0; e < g.n_edges(); ++e)
            CHECK((d.provenance[e] == Provenance::Base ||
                   d.provenance[e] == Provenance::ConsumerExact));
    }
    SUBCASE("q = 1 takes every eligible child") {
        const Partition p1 = sample_partition(g, 2, 0.1, 0.05, 1.0, 29);
        std::set<NodeId> eligible;
        for (const auto& arm : p1.omega)
            for (NodeId i : arm)
                for (EdgeId e : g.out_edges(i)) {
                    const NodeId j = g.edge(e).dst;
                    if (p1.role[j] == Partition::Role::CPrime ||
                        p1.role[j] == Partition::Role::Rest)
                        eligible.insert(j);
                }
        CHECK(p1.c_prime.size() == eligible.size());
    }
    SUBCASE("determinism") {
        const Partition p2 = sample_partition(g, 2, 0.1, 0.05, 0.5, 29);
        CHECK(p2.omega[0] == p.omega[0]);
        CHECK(p2.c_prime == p.c_prime);
    }
    SUBCASE("infeasible fractions are rejected") {
        CHECK_THROWS_AS(sample_partition(g, 2, 0.3, 0.3, 0.5, 1), ParameterError);
        CHECK_THROWS_AS(sample_partition(g, 1, 0.1, 0.1, 1.5, 1), ParameterError);
    }
}

TEST_CASE("gamma mode intersects the pool with the children of the arms") {
    const MarketplaceGraph g = generate_clustered_graph(2, 200, 6, 0.25, 1.0, 41);
    const Partition p = sample_partition(g, 2, 0.05, 0.05, 0.0, 43,
                                         ExposureMode::GammaIntersect, 0.1);
    CHECK(!p.c_prime.empty());
    CHECK(p.c_prime.size() <= 40);  // at most |Gamma|
}

TEST_CASE("boost factors: hand arithmetic and identity") {
    std::vector<Edge> edges{{0, 2, 0.2, 1.0}, {1, 2, 0.8, 1.0}};
    const MarketplaceGraph g(3, std::move(edges), {0, 0, 0});
    DesignOutput d;
    d.partition.n_arms = 1;
    d.partition.omega = {{0}};
    d.partition.lambda = {{}};
    d.partition.c_prime = {2};
    d.partition.role.assign(3, Partition::Role::Rest);
    d.partition.arm_of.assign(3, -1);
    d.partition.role[0] = Partition::Role::Omega;
    d.partition.arm_of[0] = 0;
    d.partition.role[2] = Partition::Role::CPrime;
    d.provenance.assign(2, Provenance::Base);
    const std::vector<double> scores{2.0, 8.0};  // induce p0 = (0.2, 0.8)

    SUBCASE("doubled optimized edge") {
        d.p_star = {0.4, 0.6};
        const BoostTable b = compute_boost_factors(g, d, scores);
        CHECK(b.b[0] == doctest::Approx(8.0 / 3.0));
        CHECK(b.b[1] == 1.0);
        const std::vector<double> recovered = apply_boost(g, d, scores, b);
        CHECK(recovered[0] == doctest::Approx(0.4).epsilon(1e-12));
        CHECK(recovered[1] == doctest::Approx(0.6).epsilon(1e-12));
    }
    SUBCASE("identity design gives unit factors") {
        d.p_star = {0.2, 0.8};
        const BoostTable b = compute_boost_factors(g, d, scores);
        CHECK(b.b[0] == doctest::Approx(1.0));
        CHECK(b.b[1] == doctest::Approx(1.0));
    }
    SUBCASE("saturated optimized mass is reported per consumer") {
        d.p_star = {1.0, 0.0};
        try {
            compute_boost_factors(g, d, scores);
            FAIL("expected DivisionByZeroError");
        } catch (const DivisionByZeroError& e) {
            CHECK(std::string(e.what()).find("2") != std::string::npos);
        }
    }
    SUBCASE("zero score on an optimized edge") {
        d.p_star = {0.4, 0.6};
        CHECK_THROWS_AS(compute_boost_factors(g, d, {0.0, 8.0}), DegenerateScoreError);
    }
}

TEST_CASE("boost round trip on sampled designs") {
    MarketplaceGraph g = generate_clustered_graph(3, 100, 6, 0.25, 1.0, 57);
    const TreatmentSet ts = generate_attributes(g, 58);
    const Partition part = sample_partition(g, 2, 0.1, 0.1, 0.5, 59);
    const DesignOutput d = assemble_design(g, ts, part, RiskParams{});
    // scores proportional to the baseline reproduce the design after boosting
    std::vector<double> scores(g.n_edges());
    Rng rng(60);
    std::vector<double> consumer_scale(g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) consumer_scale[v] = rng.uniform(1.0, 20.0);
    for (EdgeId e = 0; e < g.n_edges(); ++e)
        scores[e] = g.edge(e).p_base * consumer_scale[g.edge(e).dst];
    const BoostTable b = compute_boost_factors(g, d, scores);
    const std::vector<double> recovered = apply_boost(g, d, scores, b);
    for (NodeId j : d.partition.c_prime)
        for (EdgeId e : g.in_edges(j))
            CHECK(std::abs(recovered[e] - d.p_star[e]) <= 1e-9);
}

TEST_CASE("design invariants hold across random instances") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        MarketplaceGraph g = generate_clustered_graph(3, 120, 6, 0.25, 2.0, 700 + seed);
        const TreatmentSet ts = generate_attributes(g, 800 + seed);
        const Partition part = sample_partition(g, 2, 0.1, 0.1, 0.5, 900 + seed);
        const RiskParams risk{0.0, 10.0, 0.2, 5.0};
        const DesignOutput d = assemble_design(g, ts, part, risk);
        const RiskBounds bounds = compute_sum_bounds(g, d.partition, risk);

        for (NodeId j = 0; j < g.n_nodes(); ++j) {
            if (g.in_degree(j) == 0) continue;
            double s = 0.0;
            for (EdgeId e : g.in_edges(j)) s += d.p_star[e];
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
        // untouched consumers keep p_base edge-for-edge; arms are exact
        for (NodeId j = 0; j < g.n_nodes(); ++j) {
            for (EdgeId e : g.in_edges(j)) {
                switch (d.partition.role[j]) {
                    case Partition::Role::Rest:
                        CHECK(d.p_star[e] == g.edge(e).p_base);
                        break;
                    case Partition::Role::Omega:
                    case Partition::Role::Lambda:
                        CHECK(d.p_star[e] == ts.p(d.partition.arm_of[j], e));
                        break;
                    case Partition::Role::CPrime:
                        break;
                }
            }
        }
        // optimized edges obey the box and ranged-sum rows
        for (std::size_t idx = 0; idx < d.partition.c_prime.size(); ++idx) {
            const NodeId j = d.partition.c_prime[idx];
            double opt_sum = 0.0;
            for (EdgeId e : g.in_edges(j)) {
                if (!d.partition.in_omega_prime(g.edge(e).src)) continue;
                opt_sum += d.p_star[e];
                CHECK(d.p_star[e] >= risk.r_min * g.edge(e).p_base - 1e-6);
                CHECK(d.p_star[e] <= risk.r_max * g.edge(e).p_base + 1e-6);
            }
            CHECK(opt_sum >= bounds.sum_lo[idx] - 1e-6);
            CHECK(opt_sum <= bounds.sum_hi[idx] + 1e-6);
        }
        // trace is non-increasing
        for (std::size_t i = 1; i < d.objective_trace.size(); ++i)
            CHECK(d.objective_trace[i] <= d.objective_trace[i - 1] + 1e-6);
    }
}

TEST_CASE("design and partition files round trip") {
    MarketplaceGraph g = generate_clustered_graph(2, 80, 4, 0.25, 1.0, 71);
    const TreatmentSet ts = generate_attributes(g, 72);
    const Partition part = sample_partition(g, 2, 0.1, 0.1, 0.5, 73);
    const DesignOutput d = assemble_design(g, ts, part, RiskParams{});

    const auto dir = std::filesystem::temp_directory_path() / "oasis_design_rt";
    std::filesystem::create_directories(dir);
    save_design(g, d, dir / "design.tsv");
    save_partition(d.partition, dir / "partition.tsv");
    std::vector<Provenance> prov;
    const std::vector<double> p2 = load_design(g, dir / "design.tsv", &prov);
    const Partition part2 = load_partition(g, dir / "partition.tsv");
    for (EdgeId e = 0; e < g.n_edges(); ++e) {
        CHECK(p2[e] == d.p_star[e]);
        CHECK(prov[e] == d.provenance[e]);
    }
    CHECK(part2.omega == d.partition.omega);
    CHECK(part2.lambda == d.partition.lambda);
    CHECK(part2.c_prime == d.partition.c_prime);
    std::filesystem::remove_all(dir);
}

TEST_CASE("objective evaluation rejects incomplete weight maps") {
    const Toy toy = make_toy();
    std::vector<double> weights(toy.graph.n_edges(), 0.5);
    // first sorted edge is 0 -> 1, an outgoing edge of measured producer 0
    weights[0] = std::nan("");
    CHECK_THROWS_AS(evaluate_allocation_objective(toy.graph, toy.treatments, toy.partition,
                                                  weights, 1.0),
                    InputError);
    CHECK_THROWS_AS(evaluate_allocation_objective(toy.graph, toy.treatments, toy.partition,
                                                  {0.1, 0.2}, 1.0),
                    InputError);
}
