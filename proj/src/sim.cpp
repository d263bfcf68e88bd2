#include "oasis/sim.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "oasis/error.hpp"
#include "oasis/stats.hpp"
#include "oasis/tsv.hpp"

namespace oasis {

namespace {

double pow_clamped(double w, double delta) {
    return w <= 0.0 ? 0.0 : std::pow(w, delta);
}

// Per-trial stream layout: one substream per (kind, repeat), so repeats are
// independent and execution order is immaterial.
enum StreamTag : std::uint64_t {
    kGraphStream = 1,
    kAttrStream = 2,
    kOasisStream = 3,
    kCbStream = 4,
};

Rng trial_stream(std::uint64_t seed, StreamTag tag, int repeat) {
    return Rng(seed).split(tag).split(static_cast<std::uint64_t>(repeat));
}

}  // namespace

const char* trial_method_name(TrialMethod m) {
    return m == TrialMethod::Oasis ? "oasis" : "cb";
}

TreatmentSet generate_attributes(MarketplaceGraph& graph, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n_edges = graph.n_edges();
    std::vector<double> u(n_edges), v(n_edges);
    for (EdgeId e = 0; e < n_edges; ++e) {
        u[e] = rng.uniform(10.0, 100.0);
        v[e] = rng.uniform(1.0, 2.0);
    }

    for (EdgeId e = 0; e < n_edges; ++e) {
        const double d_dst = static_cast<double>(graph.in_degree(graph.edge(e).dst));
        graph.set_edge_attrs(e, 0.0, u[e] / d_dst);
    }
    for (NodeId j = 0; j < graph.n_nodes(); ++j) {
        if (graph.in_degree(j) == 0) continue;
        double total = 0.0;
        for (EdgeId e : graph.in_edges(j)) total += v[e];
        for (EdgeId e : graph.in_edges(j))
            graph.set_edge_attrs(e, v[e] / total, graph.edge(e).alpha);
    }

    TreatmentSet ts;
    ts.n_arms = 2;
    ts.weights.resize(2);
    ts.weights[0].resize(n_edges);
    for (EdgeId e = 0; e < n_edges; ++e) ts.weights[0][e] = graph.edge(e).p_base;
    ts.weights[1] = treatment_arm_one(graph);
    return ts;
}

// Arm 1 shifts exposure toward strong relationships between unpopular
// endpoints, renormalized per consumer.
std::vector<double> treatment_arm_one(const MarketplaceGraph& graph) {
    std::vector<double> w1(graph.n_edges(), 0.0);
    for (NodeId j = 0; j < graph.n_nodes(); ++j) {
        if (graph.in_degree(j) == 0) continue;
        double total = 0.0;
        for (EdgeId e : graph.in_edges(j)) {
            const Edge& ed = graph.edge(e);
            const double d_i = static_cast<double>(graph.in_degree(ed.src));
            const double d_j = static_cast<double>(graph.in_degree(ed.dst));
            const double w = ed.p_base * std::sqrt(ed.alpha / std::log(1.0 + d_i * d_j));
            w1[e] = w;
            total += w;
        }
        for (EdgeId e : graph.in_edges(j)) w1[e] /= total;
    }
    return w1;
}

NodeExposures compute_exposures(const MarketplaceGraph& graph, const std::vector<double>& weights,
                                double delta) {
    if (weights.size() != graph.n_edges())
        throw InputError("weight map does not cover the edge set");
    NodeExposures out;
    out.w.assign(graph.n_nodes(), 0.0);
    out.z.assign(graph.n_nodes(), 0.0);
    for (NodeId i = 0; i < graph.n_nodes(); ++i) {
        const auto d_i = graph.in_degree(i);
        if (d_i > 0) {
            double acc = 0.0;
            for (EdgeId e : graph.in_edges(i)) acc += graph.edge(e).alpha * weights[e];
            out.w[i] = acc / static_cast<double>(d_i);
        }
        double z = 0.0;
        for (EdgeId e : graph.out_edges(i))
            z += graph.edge(e).alpha * pow_clamped(weights[e], delta);
        out.z[i] = z;
    }
    return out;
}

std::vector<double> generate_responses(const NodeExposures& exposures, const ResponseModel& model,
                                       Rng rng) {
    std::vector<double> y(exposures.w.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double signal = exposures.w[i] + exposures.z[i] * (1.0 + exposures.w[i]);
        y[i] = model.link(signal) + model.noise_sd * rng.normal();
    }
    return y;
}

GroundTruth ground_truth(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                         double delta, const ResponseModel& model) {
    GroundTruth gt;
    for (int r = 0; r < treatments.n_arms; ++r) {
        const NodeExposures ex = compute_exposures(graph, treatments.weights[r], delta);
        double total = 0.0;
        for (NodeId i = 0; i < graph.n_nodes(); ++i)
            total += model.link(ex.w[i] + ex.z[i] * (1.0 + ex.w[i]));
        gt.tau.push_back(total / static_cast<double>(graph.n_nodes()));
    }
    for (int r = 1; r < treatments.n_arms; ++r) gt.diff.push_back(gt.tau[r] - gt.tau[0]);
    return gt;
}

TrialResult run_oasis_trial(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                            const SimConfig& config, const GroundTruth& truth, int repeat) {
    Rng stream = trial_stream(config.seed, kOasisStream, repeat);
    const std::uint64_t partition_seed = stream.next();
    const std::uint64_t noise_seed = stream.next();
    const std::uint64_t bootstrap_seed = stream.next();

    const Partition partition = sample_partition(graph, treatments.n_arms, config.frac_omega,
                                                 config.frac_lambda, config.q, partition_seed);
    DesignConfig design_config = config.design;
    if (config.alpha_override_one) design_config.alpha_override = 1.0;
    const DesignOutput design =
        assemble_design(graph, treatments, partition, config.risk, design_config);

    const NodeExposures deployed = compute_exposures(graph, design.p_star, config.delta);
    const std::vector<double> responses =
        generate_responses(deployed, config.response, Rng(noise_seed));

    MediatorValues mediators;
    mediators.z_star_edge.resize(graph.n_edges());
    mediators.z_arm_edge.assign(treatments.n_arms, std::vector<double>(graph.n_edges()));
    for (EdgeId e = 0; e < graph.n_edges(); ++e) {
        const double a = graph.edge(e).alpha;
        mediators.z_star_edge[e] = a * pow_clamped(design.p_star[e], config.delta);
        for (int r = 0; r < treatments.n_arms; ++r)
            mediators.z_arm_edge[r][e] = a * pow_clamped(treatments.p(r, e), config.delta);
    }
    const ExposureSample exposures =
        collect_exposures(graph, design.partition, mediators);

    EstimatorConfig est = config.estimator;
    est.seed = bootstrap_seed;
    const EstimateReport report = bootstrap_ci(design.partition, exposures, responses, est);

    TrialResult tr;
    tr.method = TrialMethod::Oasis;
    tr.repeat = repeat;
    tr.estimate = report.effects.at(0).diff;
    tr.ci_lo = report.effects.at(0).ci_lo;
    tr.ci_hi = report.effects.at(0).ci_hi;
    tr.truth = truth.diff.at(0);
    tr.covered = tr.ci_lo <= tr.truth && tr.truth <= tr.ci_hi;
    return tr;
}

TrialResult run_cb_trial(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                         const SimConfig& config, const GroundTruth& truth, int repeat) {
    std::int32_t n_clusters = 0;
    for (NodeId v = 0; v < graph.n_nodes(); ++v)
        n_clusters = std::max(n_clusters, graph.cluster_of(v) + 1);
    if (n_clusters < 2) throw ParameterError("cluster-based trial needs at least 2 clusters");

    Rng stream = trial_stream(config.seed, kCbStream, repeat);
    const auto h0 = static_cast<std::int32_t>(stream.below(n_clusters));
    auto h1 = static_cast<std::int32_t>(stream.below(n_clusters - 1));
    if (h1 >= h0) ++h1;
    const std::uint64_t noise_seed = stream.next();

    std::vector<double> weights = treatments.weights[0];
    for (NodeId j = 0; j < graph.n_nodes(); ++j) {
        const std::int32_t c = graph.cluster_of(j);
        if (c != h0 && c != h1) continue;
        const int r = c == h1 ? 1 : 0;
        for (EdgeId e : graph.in_edges(j)) weights[e] = treatments.p(r, e);
    }

    const NodeExposures ex = compute_exposures(graph, weights, config.delta);
    const std::vector<double> responses = generate_responses(ex, config.response, Rng(noise_seed));

    double sum[2] = {0.0, 0.0};
    double sumsq[2] = {0.0, 0.0};
    std::size_t n[2] = {0, 0};
    for (NodeId v = 0; v < graph.n_nodes(); ++v) {
        const std::int32_t c = graph.cluster_of(v);
        if (c != h0 && c != h1) continue;
        const int r = c == h1 ? 1 : 0;
        sum[r] += responses[v];
        sumsq[r] += responses[v] * responses[v];
        ++n[r];
    }
    const double mean0 = sum[0] / static_cast<double>(n[0]);
    const double mean1 = sum[1] / static_cast<double>(n[1]);
    const double var0 = (sumsq[0] - sum[0] * mean0) / static_cast<double>(n[0] - 1);
    const double var1 = (sumsq[1] - sum[1] * mean1) / static_cast<double>(n[1] - 1);
    const double se = std::sqrt(var1 / static_cast<double>(n[1]) +
                                var0 / static_cast<double>(n[0]));
    const double zq = stats::inv_normal_cdf(1.0 - config.estimator.alpha / 2.0);

    TrialResult tr;
    tr.method = TrialMethod::Cb;
    tr.repeat = repeat;
    tr.estimate = mean1 - mean0;
    tr.ci_lo = tr.estimate - zq * se;
    tr.ci_hi = tr.estimate + zq * se;
    tr.truth = truth.diff.at(0);
    tr.covered = tr.ci_lo <= tr.truth && tr.truth <= tr.ci_hi;
    return tr;
}

std::vector<MethodSummary> summarize(const std::vector<TrialResult>& results) {
    std::vector<MethodSummary> out;
    for (TrialMethod method : {TrialMethod::Oasis, TrialMethod::Cb}) {
        std::vector<double> errors;
        int covered = 0;
        for (const TrialResult& r : results) {
            if (r.method != method) continue;
            errors.push_back(r.error());
            covered += r.covered ? 1 : 0;
        }
        if (errors.empty()) continue;
        MethodSummary s;
        s.method = method;
        s.n = static_cast<int>(errors.size());
        s.coverage = static_cast<double>(covered) / static_cast<double>(errors.size());
        s.mean_error = stats::mean(errors);
        s.sd_error = errors.size() >= 2 ? stats::sample_sd(errors) : 0.0;
        s.min_error = stats::quantile(errors, 0.0);
        s.q1_error = stats::quantile(errors, 0.25);
        s.median_error = stats::quantile(errors, 0.5);
        s.q3_error = stats::quantile(errors, 0.75);
        s.max_error = stats::quantile(errors, 1.0);
        out.push_back(s);
    }
    return out;
}

SimOutput run_simulation(const SimConfig& config) {
    if (config.repeats < 1) throw ParameterError("repeats must be >= 1");
    MarketplaceGraph graph = generate_clustered_graph(
        config.graph.n_clusters, config.graph.cluster_size, config.graph.d_ba,
        config.graph.ba_power, config.graph.d_er, Rng(config.seed).split(kGraphStream).next());
    TreatmentSet treatments =
        generate_attributes(graph, Rng(config.seed).split(kAttrStream).next());
    if (config.identical_arms) treatments.weights[1] = treatments.weights[0];

    SimOutput out;
    out.truth = ground_truth(graph, treatments, config.delta, config.response);
    out.results.resize(static_cast<std::size_t>(config.repeats) * 2);

    const unsigned hw = std::thread::hardware_concurrency();
    const int n_threads = std::max(1, config.threads > 0 ? config.threads
                                                         : static_cast<int>(hw ? hw : 1));
    std::atomic<int> next_repeat{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const int rep = next_repeat.fetch_add(1);
            if (rep >= config.repeats) return;
            try {
                out.results[2 * rep] = run_oasis_trial(graph, treatments, config, out.truth, rep);
                out.results[2 * rep + 1] = run_cb_trial(graph, treatments, config, out.truth, rep);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    out.summary = summarize(out.results);
    return out;
}

void save_results_csv(const std::vector<TrialResult>& results,
                      const std::filesystem::path& path) {
    tsv::Writer w(path);
    w.line("repeat,method,estimate,truth,error,ci_lo,ci_hi,covered");
    for (const TrialResult& r : results) {
        w.line(std::to_string(r.repeat) + "," + trial_method_name(r.method) + "," +
               tsv::fmt17(r.estimate) + "," + tsv::fmt17(r.truth) + "," + tsv::fmt17(r.error()) +
               "," + tsv::fmt17(r.ci_lo) + "," + tsv::fmt17(r.ci_hi) + "," +
               (r.covered ? "1" : "0"));
    }
    w.close();
}

std::vector<TrialResult> load_results_csv(const std::filesystem::path& path) {
    std::vector<TrialResult> out;
    tsv::Reader r(path);
    r.expect_header("repeat,method,estimate,truth,error,ci_lo,ci_hi,covered");
    std::string line;
    while (r.next(line)) {
        std::vector<std::string_view> f;
        std::string_view sv(line);
        std::size_t start = 0;
        while (true) {
            const std::size_t pos = sv.find(',', start);
            if (pos == std::string_view::npos) {
                f.push_back(sv.substr(start));
                break;
            }
            f.push_back(sv.substr(start, pos - start));
            start = pos + 1;
        }
        if (f.size() != 8) r.fail("expected 8 fields");
        TrialResult tr;
        tr.repeat = static_cast<int>(tsv::parse_int(f[0], r.path(), r.lineno()));
        if (f[1] == "oasis") tr.method = TrialMethod::Oasis;
        else if (f[1] == "cb") tr.method = TrialMethod::Cb;
        else r.fail("unknown method '" + std::string(f[1]) + "'");
        tr.estimate = tsv::parse_double(f[2], r.path(), r.lineno());
        tr.truth = tsv::parse_double(f[3], r.path(), r.lineno());
        tr.ci_lo = tsv::parse_double(f[5], r.path(), r.lineno());
        tr.ci_hi = tsv::parse_double(f[6], r.path(), r.lineno());
        tr.covered = f[7] == "1";
        out.push_back(tr);
    }
    return out;
}

}  // namespace oasis
