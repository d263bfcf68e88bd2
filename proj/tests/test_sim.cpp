#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oasis/error.hpp"
#include "oasis/sim.hpp"
#include "oasis/stats.hpp"

using namespace oasis;

namespace {

// Directed 4-cycle with both arcs per link: every node has degree 2.
MarketplaceGraph four_cycle() {
    std::vector<Edge> edges;
    for (NodeId v = 0; v < 4; ++v) {
        const NodeId w = (v + 1) % 4;
        edges.push_back({v, w, 0.0, 1.0});
        edges.push_back({w, v, 0.0, 1.0});
    }
    return MarketplaceGraph(4, std::move(edges), {0, 0, 0, 0});
}

SimConfig tiny_config() {
    SimConfig cfg;
    cfg.graph = {4, 80, 6.0, 0.25, 1.0};
    cfg.delta = 0.5;
    cfg.repeats = 4;
    cfg.estimator.bootstrap_b = 120;
    cfg.seed = 42;
    cfg.threads = 2;
    return cfg;
}

}  // namespace

TEST_CASE("equal relationships and degrees make the reweighted arm a no-op") {
    MarketplaceGraph g = four_cycle();
    // equal alpha, arbitrary simplex weights per consumer
    for (NodeId j = 0; j < 4; ++j) {
        double share = 0.3;
        for (EdgeId e : g.in_edges(j)) {
            g.set_edge_attrs(e, share, 7.0 / 2.0);
            share = 0.7;
        }
    }
    const std::vector<double> arm1 = treatment_arm_one(g);
    for (EdgeId e = 0; e < g.n_edges(); ++e)
        CHECK(arm1[e] == doctest::Approx(g.edge(e).p_base).epsilon(1e-12));
}

TEST_CASE("heterogeneous degrees move the reweighted arm off the baseline") {
    MarketplaceGraph g = generate_clustered_graph(1, 60, 4, 0.25, 0.0, 3);
    const TreatmentSet ts = generate_attributes(g, 4);
    double max_diff = 0.0;
    for (EdgeId e = 0; e < g.n_edges(); ++e)
        max_diff = std::max(max_diff, std::abs(ts.p(1, e) - ts.p(0, e)));
    CHECK(max_diff > 1e-4);
}

TEST_CASE("exposures follow the definitions") {
    // 0 -> 1 (alpha 2, weight 0.5); 1 has no children
    std::vector<Edge> edges{{0, 1, 1.0, 2.0}};
    MarketplaceGraph g(2, std::move(edges), {0, 0});
    std::vector<double> w{0.5};
    SUBCASE("delta = 1 matches the linear form") {
        const NodeExposures ex = compute_exposures(g, w, 1.0);
        CHECK(ex.z[0] == doctest::Approx(1.0));  // 2 * 0.5
        CHECK(ex.z[1] == 0.0);                   // no children
        CHECK(ex.w[1] == doctest::Approx(1.0));  // (1/1) * 2 * 0.5
        CHECK(ex.w[0] == 0.0);                   // no parents
    }
    SUBCASE("halving an edge at delta = 1/2 shrinks its term by sqrt(2)") {
        const NodeExposures a = compute_exposures(g, {0.5}, 0.5);
        const NodeExposures b = compute_exposures(g, {0.25}, 0.5);
        CHECK(a.z[0] / b.z[0] == doctest::Approx(std::sqrt(2.0)));
    }
    SUBCASE("Z is non-increasing in delta for weights inside (0,1)") {
        MarketplaceGraph big = generate_clustered_graph(2, 50, 4, 0.25, 1.0, 5);
        generate_attributes(big, 6);
        std::vector<double> weights(big.n_edges());
        for (EdgeId e = 0; e < big.n_edges(); ++e) weights[e] = big.edge(e).p_base;
        const NodeExposures lo = compute_exposures(big, weights, 0.25);
        const NodeExposures mid = compute_exposures(big, weights, 0.5);
        const NodeExposures hi = compute_exposures(big, weights, 1.0);
        for (NodeId v = 0; v < big.n_nodes(); ++v) {
            CHECK(lo.z[v] >= mid.z[v] - 1e-12);
            CHECK(mid.z[v] >= hi.z[v] - 1e-12);
        }
    }
}

TEST_CASE("responses pass through the bounded link") {
    NodeExposures ex;
    ex.w = {0.0, 1.0};
    ex.z = {0.0, 3.0};
    ResponseModel model;
    SUBCASE("noise-free midpoint") {
        model.noise_sd = 0.0;
        const std::vector<double> y = generate_responses(ex, model, Rng(1));
        CHECK(y[0] == doctest::Approx(5.0));  // g(0)
        CHECK(y[1] == doctest::Approx(model.link(1.0 + 3.0 * 2.0)));
    }
    SUBCASE("noisy responses stay within the shifted band") {
        const std::vector<double> y = generate_responses(ex, model, Rng(2));
        const std::vector<double> y0 = generate_responses(ex, ResponseModel{0.0}, Rng(2));
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double eps = y[i] - y0[i];
            CHECK(y[i] > eps);
            CHECK(y[i] < 10.0 + eps);
        }
    }
}

TEST_CASE("ground truth is deterministic and vanishes for identical arms") {
    MarketplaceGraph g = generate_clustered_graph(2, 60, 4, 0.25, 1.0, 7);
    TreatmentSet ts = generate_attributes(g, 8);
    SUBCASE("identical arms") {
        ts.weights[1] = ts.weights[0];
        const GroundTruth gt = ground_truth(g, ts, 0.5, ResponseModel{});
        CHECK(gt.diff[0] == 0.0);
    }
    SUBCASE("bitwise reproducible") {
        const GroundTruth a = ground_truth(g, ts, 0.5, ResponseModel{});
        const GroundTruth b = ground_truth(g, ts, 0.5, ResponseModel{});
        CHECK(a.tau[0] == b.tau[0]);
        CHECK(a.tau[1] == b.tau[1]);
    }
}

TEST_CASE("cluster trial requires at least two clusters") {
    MarketplaceGraph g = generate_clustered_graph(1, 50, 4, 0.25, 0.0, 9);
    const TreatmentSet ts = generate_attributes(g, 10);
    const GroundTruth gt = ground_truth(g, ts, 1.0, ResponseModel{});
    SimConfig cfg = tiny_config();
    CHECK_THROWS_AS(run_cb_trial(g, ts, cfg, gt, 0), ParameterError);
}

TEST_CASE("cluster trial is unbiased without inter-cluster edges") {
    SimConfig cfg;
    cfg.graph = {6, 90, 6.0, 0.25, 0.0};  // isolated clusters
    cfg.delta = 1.0;
    cfg.seed = 77;
    MarketplaceGraph g = generate_clustered_graph(cfg.graph.n_clusters, cfg.graph.cluster_size,
                                                  cfg.graph.d_ba, cfg.graph.ba_power,
                                                  cfg.graph.d_er, 770);
    const TreatmentSet ts = generate_attributes(g, 771);
    const GroundTruth gt = ground_truth(g, ts, cfg.delta, ResponseModel{});
    std::vector<double> errors;
    for (int rep = 0; rep < 200; ++rep)
        errors.push_back(run_cb_trial(g, ts, cfg, gt, rep).error());
    const double mc_se = stats::sample_sd(errors) / std::sqrt(200.0);
    CHECK(std::abs(stats::mean(errors)) <= 3.0 * mc_se);
}

TEST_CASE("summaries aggregate coverage and quartiles") {
    std::vector<TrialResult> results;
    for (int i = 0; i < 10; ++i) {
        TrialResult t;
        t.method = TrialMethod::Oasis;
        t.repeat = i;
        t.estimate = static_cast<double>(i);
        t.truth = 0.0;
        t.covered = i % 2 == 0;
        results.push_back(t);
    }
    const auto summary = summarize(results);
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].coverage == doctest::Approx(0.5));
    CHECK(summary[0].n == 10);
    CHECK(summary[0].median_error == doctest::Approx(4.5));
    CHECK(summary[0].q1_error == doctest::Approx(2.25));
    CHECK(summary[0].q3_error == doctest::Approx(6.75));

    for (auto& t : results) t.covered = true;
    CHECK(summarize(results)[0].coverage == doctest::Approx(1.0));
}

TEST_CASE("simulation runs are reproducible and thread-count invariant") {
    const SimConfig cfg = tiny_config();
    const SimOutput a = run_simulation(cfg);
    SimConfig cfg_single = cfg;
    cfg_single.threads = 1;
    const SimOutput b = run_simulation(cfg_single);
    REQUIRE(a.results.size() == b.results.size());
    for (std::size_t i = 0; i < a.results.size(); ++i) {
        CHECK(a.results[i].estimate == b.results[i].estimate);
        CHECK(a.results[i].ci_lo == b.results[i].ci_lo);
        CHECK(a.results[i].covered == b.results[i].covered);
    }
}

TEST_CASE("null configuration ties the arms") {
    SimConfig cfg = tiny_config();
    cfg.identical_arms = true;
    cfg.delta = 1.0;
    cfg.graph.d_er = 0.0;
    const SimOutput out = run_simulation(cfg);
    CHECK(out.truth.diff[0] == 0.0);
    for (const TrialResult& t : out.results) CHECK(t.truth == 0.0);
}

TEST_CASE("results CSV round trips") {
    SimConfig cfg = tiny_config();
    cfg.repeats = 3;
    const SimOutput out = run_simulation(cfg);
    const auto path = std::filesystem::temp_directory_path() / "oasis_results_rt.csv";
    save_results_csv(out.results, path);
    const std::vector<TrialResult> loaded = load_results_csv(path);
    REQUIRE(loaded.size() == out.results.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].estimate == out.results[i].estimate);
        CHECK(loaded[i].method == out.results[i].method);
        CHECK(loaded[i].covered == out.results[i].covered);
    }
    std::filesystem::remove(path);
}

TEST_CASE("known alphas and a linear mediator leave weights near one") {
    SimConfig cfg;
    cfg.graph = {4, 120, 8.0, 0.25, 1.0};
    cfg.delta = 1.0;
    cfg.alpha_override_one = false;  // construct with the true alphas
    cfg.seed = 31;
    MarketplaceGraph g = generate_clustered_graph(cfg.graph.n_clusters, cfg.graph.cluster_size,
                                                  cfg.graph.d_ba, cfg.graph.ba_power,
                                                  cfg.graph.d_er, 310);
    const TreatmentSet ts = generate_attributes(g, 311);
    const GroundTruth gt = ground_truth(g, ts, cfg.delta, ResponseModel{});
    const TrialResult tr = run_oasis_trial(g, ts, cfg, gt, 0);
    CHECK(std::isfinite(tr.estimate));
    // with an exactly matchable design the source and target exposures
    // coincide, so the correction should be mild
    CHECK(tr.ci_hi - tr.ci_lo < 2.0);
}
