#include "oasis/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "oasis/design.hpp"
#include "oasis/error.hpp"
#include "oasis/estimator.hpp"
#include "oasis/graph.hpp"
#include "oasis/sim.hpp"
#include "oasis/svg.hpp"
#include "oasis/tsv.hpp"

namespace oasis {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kSchemaVersion = 1;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("OASIS_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw ParameterError("OASIS_SEED is not a valid integer");
        }
    }
    return 1;
}

json solver_to_json(const DesignConfig& d) {
    return json{{"rho", d.qp.rho},           {"sigma", d.qp.sigma},
                {"relax_alpha", d.qp.relax_alpha}, {"eps_abs", d.qp.eps_abs},
                {"eps_rel", d.qp.eps_rel},   {"max_iter", d.qp.max_iter},
                {"k_blocks", d.k_blocks},    {"max_outer", d.max_outer}};
}

void solver_from_json(const json& j, DesignConfig& d) {
    if (j.contains("rho")) d.qp.rho = j["rho"];
    if (j.contains("sigma")) d.qp.sigma = j["sigma"];
    if (j.contains("relax_alpha")) d.qp.relax_alpha = j["relax_alpha"];
    if (j.contains("eps_abs")) d.qp.eps_abs = j["eps_abs"];
    if (j.contains("eps_rel")) d.qp.eps_rel = j["eps_rel"];
    if (j.contains("max_iter")) d.qp.max_iter = j["max_iter"];
    if (j.contains("k_blocks")) d.k_blocks = j["k_blocks"];
    if (j.contains("max_outer")) d.max_outer = j["max_outer"];
}

json estimator_to_json(const EstimatorConfig& e) {
    return json{{"bootstrap_b", e.bootstrap_b},
                {"alpha", e.alpha},
                {"clip", e.clip},
                {"self_normalized", e.mode == EstimateMode::SelfNormalized},
                {"kde_grid", e.kde_grid},
                {"bootstrap_kde_grid", e.bootstrap_kde_grid},
                {"bandwidth_scale", e.bandwidth_scale}};
}

void estimator_from_json(const json& j, EstimatorConfig& e) {
    if (j.contains("bootstrap_b")) e.bootstrap_b = j["bootstrap_b"];
    if (j.contains("alpha")) e.alpha = j["alpha"];
    if (j.contains("clip")) e.clip = j["clip"];
    if (j.contains("self_normalized"))
        e.mode = j["self_normalized"].get<bool>() ? EstimateMode::SelfNormalized
                                                  : EstimateMode::Plain;
    if (j.contains("kde_grid")) e.kde_grid = j["kde_grid"];
    if (j.contains("bootstrap_kde_grid")) e.bootstrap_kde_grid = j["bootstrap_kde_grid"];
    if (j.contains("bandwidth_scale")) e.bandwidth_scale = j["bandwidth_scale"];
}

json sim_config_to_json(const SimConfig& c) {
    return json{{"schema_version", kSchemaVersion},
                {"graph",
                 {{"n_clusters", c.graph.n_clusters},
                  {"cluster_size", c.graph.cluster_size},
                  {"d_ba", c.graph.d_ba},
                  {"ba_power", c.graph.ba_power},
                  {"d_er", c.graph.d_er}}},
                {"delta", c.delta},
                {"frac_omega", c.frac_omega},
                {"frac_lambda", c.frac_lambda},
                {"q", c.q},
                {"risk",
                 {{"r_min", c.risk.r_min},
                  {"r_max", c.risk.r_max},
                  {"s_min", c.risk.s_min},
                  {"s_max", c.risk.s_max}}},
                {"solver", solver_to_json(c.design)},
                {"alpha_override_one", c.alpha_override_one},
                {"identical_arms", c.identical_arms},
                {"estimator", estimator_to_json(c.estimator)},
                {"noise_sd", c.response.noise_sd},
                {"repeats", c.repeats},
                {"seed", c.seed},
                {"threads", c.threads}};
}

SimConfig sim_config_from_json(const json& j) {
    SimConfig c;
    if (j.contains("graph")) {
        const json& g = j["graph"];
        if (g.contains("n_clusters")) c.graph.n_clusters = g["n_clusters"];
        if (g.contains("cluster_size")) c.graph.cluster_size = g["cluster_size"];
        if (g.contains("d_ba")) c.graph.d_ba = g["d_ba"];
        if (g.contains("ba_power")) c.graph.ba_power = g["ba_power"];
        if (g.contains("d_er")) c.graph.d_er = g["d_er"];
    }
    if (j.contains("delta")) c.delta = j["delta"];
    if (j.contains("frac_omega")) c.frac_omega = j["frac_omega"];
    if (j.contains("frac_lambda")) c.frac_lambda = j["frac_lambda"];
    if (j.contains("q")) c.q = j["q"];
    if (j.contains("risk")) {
        const json& r = j["risk"];
        if (r.contains("r_min")) c.risk.r_min = r["r_min"];
        if (r.contains("r_max")) c.risk.r_max = r["r_max"];
        if (r.contains("s_min")) c.risk.s_min = r["s_min"];
        if (r.contains("s_max")) c.risk.s_max = r["s_max"];
    }
    if (j.contains("solver")) solver_from_json(j["solver"], c.design);
    if (j.contains("alpha_override_one")) c.alpha_override_one = j["alpha_override_one"];
    if (j.contains("identical_arms")) c.identical_arms = j["identical_arms"];
    if (j.contains("estimator")) estimator_from_json(j["estimator"], c.estimator);
    if (j.contains("noise_sd")) c.response.noise_sd = j["noise_sd"];
    if (j.contains("repeats")) c.repeats = j["repeats"];
    if (j.contains("seed")) c.seed = j["seed"];
    if (j.contains("threads")) c.threads = j["threads"];
    return c;
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return j;
}

json report_to_json(const EstimateReport& r) {
    json arms = json::array();
    for (const ArmEstimate& a : r.arms)
        arms.push_back({{"r", a.arm},
                        {"tau_hat", a.tau_hat},
                        {"sigma_hat", a.sigma_hat},
                        {"ci", {a.ci_lo, a.ci_hi}}});
    json effects = json::array();
    for (const EffectEstimate& e : r.effects)
        effects.push_back({{"r", e.arm}, {"diff", e.diff}, {"ci", {e.ci_lo, e.ci_hi}}});
    json warnings = json::array();
    if (r.weight_fallback) warnings.push_back("degenerate source density; weights forced to 1");
    if (r.variance_fallback) warnings.push_back("non-positive target variance; source sd reused");
    if (r.clipped_weights > 0)
        warnings.push_back(std::to_string(r.clipped_weights) + " weights clipped");
    json out{{"arms", arms},
             {"effects", effects},
             {"diagnostics",
              {{"max_weight", r.max_weight},
               {"ess", r.ess},
               {"dropped_replicates", r.dropped_replicates}}},
             {"warnings", warnings}};
    if (r.has_shadow)
        out["shadow"] = {{"diff", r.shadow_diff}, {"ci", {r.shadow_ci_lo, r.shadow_ci_hi}}};
    else
        out["shadow"] = nullptr;
    return out;
}

// --- subcommand payloads -------------------------------------------------

struct GenArgs {
    int clusters = 10;
    int cluster_size = 500;
    double d_ba = 10.0;
    double ba_power = 0.25;
    double d_er = 1.0;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_gen_graph(const GenArgs& a) {
    const std::uint64_t seed = a.seed.value_or(default_seed());
    MarketplaceGraph graph = generate_clustered_graph(a.clusters, a.cluster_size, a.d_ba,
                                                      a.ba_power, a.d_er,
                                                      Rng(seed).split(1).next());
    const TreatmentSet ts = generate_attributes(graph, Rng(seed).split(2).next());
    fs::create_directories(a.out);
    save(graph, ts, a.out);
    write_json(json{{"schema_version", kSchemaVersion},
                    {"subcommand", "gen-graph"},
                    {"n_clusters", a.clusters},
                    {"cluster_size", a.cluster_size},
                    {"d_ba", a.d_ba},
                    {"ba_power", a.ba_power},
                    {"d_er", a.d_er},
                    {"seed", seed},
                    {"n_nodes", graph.n_nodes()},
                    {"n_edges", graph.n_edges()},
                    {"mean_in_degree", graph.mean_in_degree()}},
               fs::path(a.out) / "config-resolved.json");
    std::cout << "wrote " << a.out << ": " << graph.n_nodes() << " nodes, " << graph.n_edges()
              << " edges\n";
    return 0;
}

struct DesignArgs {
    std::string graph, nodes, treatments, out, config, dump_qp;
    double frac_omega = 0.1, frac_lambda = 0.1, q = 0.5, frac_gamma = 0.0;
    bool gamma_mode = false;
    RiskParams risk;
    DesignConfig solver;
    bool alpha_override_one = false;
    std::optional<std::uint64_t> seed;
};

int cmd_design(DesignArgs& a) {
    if (!a.config.empty()) solver_from_json(load_json(a.config), a.solver);
    const std::uint64_t seed = a.seed.value_or(default_seed());
    const MarketplaceGraph graph = load_graph(a.graph, a.nodes);
    const TreatmentSet ts = load_treatments(graph, a.treatments);
    const ValidationReport vr = validate(graph, ts);
    if (!vr.ok()) {
        std::cerr << "net-graph: validation failed with " << vr.violations.size()
                  << " violations; first: " << vr.violations.front().describe() << "\n";
        return 1;
    }
    const Partition part = sample_partition(
        graph, ts.n_arms, a.frac_omega, a.frac_lambda, a.q, seed,
        a.gamma_mode ? ExposureMode::GammaIntersect : ExposureMode::IndependentQ, a.frac_gamma);
    if (a.alpha_override_one) a.solver.alpha_override = 1.0;
    const DesignOutput design = assemble_design(graph, ts, part, a.risk, a.solver);

    fs::create_directories(a.out);
    save_design(graph, design, fs::path(a.out) / "design.tsv");
    save_partition(design.partition, fs::path(a.out) / "partition.tsv");
    {
        tsv::Writer w(fs::path(a.out) / "trace.tsv");
        w.line("solve\tobjective");
        for (std::size_t i = 0; i < design.objective_trace.size(); ++i)
            w.line(std::to_string(i) + "\t" + tsv::fmt17(design.objective_trace[i]));
        w.close();
    }
    if (!a.dump_qp.empty()) {
        const RiskBounds bounds = compute_sum_bounds(graph, design.partition, a.risk);
        build_full_problem(graph, ts, design.partition, bounds, a.solver.alpha_override)
            .qp.dump(a.dump_qp);
    }
    json resolved{{"schema_version", kSchemaVersion},
                  {"subcommand", "design"},
                  {"frac_omega", a.frac_omega},
                  {"frac_lambda", a.frac_lambda},
                  {"q", a.q},
                  {"gamma_mode", a.gamma_mode},
                  {"frac_gamma", a.frac_gamma},
                  {"risk",
                   {{"r_min", a.risk.r_min},
                    {"r_max", a.risk.r_max},
                    {"s_min", a.risk.s_min},
                    {"s_max", a.risk.s_max}}},
                  {"solver", solver_to_json(a.solver)},
                  {"alpha_override_one", a.alpha_override_one},
                  {"seed", seed},
                  {"c_prime_size", design.partition.c_prime.size()},
                  {"block_solves", design.block_solves},
                  {"final_objective",
                   design.objective_trace.empty() ? nullptr
                                                  : json(design.objective_trace.back())}};
    write_json(resolved, fs::path(a.out) / "config-resolved.json");
    std::cout << "design written to " << a.out << " (|C'| = " << design.partition.c_prime.size()
              << ")\n";
    return 0;
}

struct EstimateArgs {
    std::string graph, nodes, partition, exposures, targets, responses, out;
    EstimatorConfig est;
    bool plain = false;
    std::optional<std::uint64_t> seed;
};

int cmd_estimate(EstimateArgs& a) {
    const MarketplaceGraph graph = load_graph(a.graph, a.nodes);
    const Partition part = load_partition(graph, a.partition);
    a.est.seed = a.seed.value_or(default_seed());
    if (a.plain) a.est.mode = EstimateMode::Plain;

    // Per-node z* keyed by (node, arm); per-edge target samples.
    std::vector<double> z_star_node(graph.n_nodes(), std::nan(""));
    {
        tsv::Reader r(a.exposures);
        r.expect_header("node\tarm\tz_star");
        std::string line;
        while (r.next(line)) {
            const auto f = tsv::split_tabs(line);
            if (f.size() != 3) r.fail("expected 3 fields");
            const auto node = tsv::parse_int(f[0], r.path(), r.lineno());
            const auto arm = tsv::parse_int(f[1], r.path(), r.lineno());
            if (node < 0 || node >= graph.n_nodes()) r.fail("node out of range");
            if (part.role[node] != Partition::Role::Omega || part.arm_of[node] != arm)
                r.fail("node " + std::to_string(node) + " is not a measurement member of arm " +
                       std::to_string(arm));
            z_star_node[node] = tsv::parse_double(f[2], r.path(), r.lineno());
        }
    }
    std::vector<std::vector<double>> z_arm(part.n_arms,
                                           std::vector<double>(graph.n_edges(), std::nan("")));
    {
        tsv::Reader r(a.targets);
        r.expect_header("src\tdst\tarm\tz");
        std::string line;
        while (r.next(line)) {
            const auto f = tsv::split_tabs(line);
            if (f.size() != 4) r.fail("expected 4 fields");
            const auto src = tsv::parse_int(f[0], r.path(), r.lineno());
            const auto dst = tsv::parse_int(f[1], r.path(), r.lineno());
            const auto arm = tsv::parse_int(f[2], r.path(), r.lineno());
            if (arm < 0 || arm >= part.n_arms) r.fail("arm out of range");
            const auto e = src >= 0 && src < graph.n_nodes() && dst >= 0 && dst < graph.n_nodes()
                               ? graph.find_edge(static_cast<NodeId>(src),
                                                 static_cast<NodeId>(dst))
                               : -1;
            if (e < 0) r.fail("unknown edge " + std::to_string(src) + "->" + std::to_string(dst));
            z_arm[arm][static_cast<EdgeId>(e)] = tsv::parse_double(f[3], r.path(), r.lineno());
        }
    }
    std::vector<double> responses(graph.n_nodes(), std::nan(""));
    {
        tsv::Reader r(a.responses);
        r.expect_header("node\ty");
        std::string line;
        while (r.next(line)) {
            const auto f = tsv::split_tabs(line);
            if (f.size() != 2) r.fail("expected 2 fields");
            const auto node = tsv::parse_int(f[0], r.path(), r.lineno());
            if (node < 0 || node >= graph.n_nodes()) r.fail("node out of range");
            responses[node] = tsv::parse_double(f[1], r.path(), r.lineno());
        }
    }

    // Assemble the exposure sample directly from per-node totals; the edge
    // split of z* is not needed once the totals are known.
    ExposureSample sample;
    sample.n_arms = part.n_arms;
    sample.arms.resize(part.n_arms);
    for (int r = 0; r < part.n_arms; ++r) {
        for (NodeId i : part.omega[r]) {
            const auto deg = graph.out_degree(i);
            if (deg == 0) continue;
            if (std::isnan(z_star_node[i]))
                throw InputError("exposure file is missing z_star for node " +
                                 std::to_string(i));
            ProducerExposure rec;
            rec.node = i;
            rec.z_star = z_star_node[i];
            std::size_t selected = 0;
            for (EdgeId e : graph.out_edges(i)) {
                const NodeId j = graph.edge(e).dst;
                const bool in_arm = (part.role[j] == Partition::Role::Omega ||
                                     part.role[j] == Partition::Role::Lambda) &&
                                    part.arm_of[j] == r;
                if (!in_arm) continue;
                if (std::isnan(z_arm[r][e]))
                    throw InputError("target sample missing for edge " +
                                     std::to_string(graph.edge(e).src) + "->" +
                                     std::to_string(j));
                rec.target_samples.push_back(z_arm[r][e]);
                ++selected;
            }
            rec.rho = static_cast<double>(selected) / static_cast<double>(deg);
            rec.rho_prime = deg == 1 ? 1.0
                                     : (selected >= 1 ? (static_cast<double>(selected) - 1.0) /
                                                            (static_cast<double>(deg) - 1.0)
                                                      : 0.0);
            sample.arms[r].push_back(std::move(rec));
        }
    }

    const EstimateReport report = bootstrap_ci(part, sample, responses, a.est);
    fs::create_directories(a.out);
    write_json(report_to_json(report), fs::path(a.out) / "report.json");
    json resolved{{"schema_version", kSchemaVersion},
                  {"subcommand", "estimate"},
                  {"estimator", estimator_to_json(a.est)},
                  {"seed", a.est.seed}};
    write_json(resolved, fs::path(a.out) / "config-resolved.json");
    for (const EffectEstimate& e : report.effects)
        std::cout << "arm " << e.arm << " vs 0: " << e.diff << "  [" << e.ci_lo << ", "
                  << e.ci_hi << "]\n";
    return 0;
}

struct SimulateArgs {
    std::string config, out;
    std::optional<int> repeats;
    std::optional<std::uint64_t> seed;
    std::optional<double> delta, d_ba, d_er, q;
    std::optional<int> clusters, cluster_size, threads;
    std::optional<bool> alpha_override_one;
    bool identical_arms = false;
    bool full_scale = false;
    bool plots = false;
};

int cmd_simulate(const SimulateArgs& a) {
    SimConfig cfg;
    if (!a.config.empty()) cfg = sim_config_from_json(load_json(a.config));
    if (a.full_scale) {
        cfg.graph.n_clusters = 10;
        cfg.graph.cluster_size = 5000;
        cfg.graph.d_ba = 20.0;
        cfg.graph.d_er = 1.0;
        cfg.design.k_blocks = 1000;
    }
    if (a.repeats) cfg.repeats = *a.repeats;
    if (a.seed) cfg.seed = *a.seed;
    if (a.delta) cfg.delta = *a.delta;
    if (a.d_ba) cfg.graph.d_ba = *a.d_ba;
    if (a.d_er) cfg.graph.d_er = *a.d_er;
    if (a.q) cfg.q = *a.q;
    if (a.clusters) cfg.graph.n_clusters = *a.clusters;
    if (a.cluster_size) cfg.graph.cluster_size = *a.cluster_size;
    if (a.threads) cfg.threads = *a.threads;
    if (a.alpha_override_one) cfg.alpha_override_one = *a.alpha_override_one;
    if (a.identical_arms) cfg.identical_arms = true;
    if (!a.seed && a.config.empty()) cfg.seed = default_seed();

    const SimOutput out = run_simulation(cfg);
    fs::create_directories(a.out);
    save_results_csv(out.results, fs::path(a.out) / "results.csv");
    write_json(sim_config_to_json(cfg), fs::path(a.out) / "config-resolved.json");

    json summary{{"schema_version", kSchemaVersion},
                 {"truth", {{"tau", out.truth.tau}, {"diff", out.truth.diff}}},
                 {"methods", json::array()}};
    for (const MethodSummary& s : out.summary) {
        summary["methods"].push_back({{"method", trial_method_name(s.method)},
                                      {"n", s.n},
                                      {"coverage", s.coverage},
                                      {"mean_error", s.mean_error},
                                      {"sd_error", s.sd_error},
                                      {"min_error", s.min_error},
                                      {"q1_error", s.q1_error},
                                      {"median_error", s.median_error},
                                      {"q3_error", s.q3_error},
                                      {"max_error", s.max_error}});
        std::cout << trial_method_name(s.method) << ": coverage " << s.coverage << " over "
                  << s.n << " repeats (mean error " << s.mean_error << ")\n";
    }
    write_json(summary, fs::path(a.out) / "summary.json");

    if (a.plots) {
        char label[96];
        std::snprintf(label, sizeof(label), "delta=%g, d=%g", cfg.delta,
                      cfg.graph.d_ba + cfg.graph.d_er);
        const std::vector<PlotCell> cells{{label, out.results}};
        emit_box_plots(cells, fs::path(a.out) / "errors.svg");
        emit_coverage_chart(cells, 1.0 - cfg.estimator.alpha,
                            fs::path(a.out) / "coverage.svg");
    }
    return 0;
}

struct BoostArgs {
    std::string graph, nodes, design, partition, scores, out;
};

int cmd_boost(const BoostArgs& a) {
    const MarketplaceGraph graph = load_graph(a.graph, a.nodes);
    DesignOutput design;
    design.partition = load_partition(graph, a.partition);
    std::vector<Provenance> prov;
    design.p_star = load_design(graph, a.design, &prov);
    design.provenance = std::move(prov);

    std::vector<double> scores(graph.n_edges(), std::nan(""));
    tsv::Reader r(a.scores);
    r.expect_header("src\tdst\ts");
    std::string line;
    while (r.next(line)) {
        const auto f = tsv::split_tabs(line);
        if (f.size() != 3) r.fail("expected 3 fields");
        const auto src = tsv::parse_int(f[0], r.path(), r.lineno());
        const auto dst = tsv::parse_int(f[1], r.path(), r.lineno());
        const auto e = src >= 0 && src < graph.n_nodes() && dst >= 0 && dst < graph.n_nodes()
                           ? graph.find_edge(static_cast<NodeId>(src), static_cast<NodeId>(dst))
                           : -1;
        if (e < 0) r.fail("unknown edge " + std::to_string(src) + "->" + std::to_string(dst));
        scores[static_cast<EdgeId>(e)] = tsv::parse_double(f[2], r.path(), r.lineno());
    }

    const BoostTable table = compute_boost_factors(graph, design, scores);
    save_boost(graph, table, a.out);
    std::cout << "boost table written to " << a.out << "\n";
    return 0;
}

struct ReportArgs {
    std::vector<std::string> results;  // path or path:label
    double nominal = 0.95;
    std::string out;
};

int cmd_report(const ReportArgs& a) {
    std::vector<PlotCell> cells;
    for (const std::string& spec : a.results) {
        PlotCell cell;
        const std::size_t sep = spec.rfind(':');
        // A lone path has no ':' past index 1 (allowing windows-style C:\).
        if (sep != std::string::npos && sep > 1) {
            cell.label = spec.substr(sep + 1);
            cell.results = load_results_csv(spec.substr(0, sep));
        } else {
            cell.label = fs::path(spec).stem().string();
            cell.results = load_results_csv(spec);
        }
        cells.push_back(std::move(cell));
    }
    fs::create_directories(a.out);
    emit_box_plots(cells, fs::path(a.out) / "errors.svg");
    emit_coverage_chart(cells, a.nominal, fs::path(a.out) / "coverage.svg");
    json summary = json::array();
    for (const PlotCell& cell : cells)
        for (const MethodSummary& s : summarize(cell.results))
            summary.push_back({{"cell", cell.label},
                               {"method", trial_method_name(s.method)},
                               {"n", s.n},
                               {"coverage", s.coverage},
                               {"q1_error", s.q1_error},
                               {"median_error", s.median_error},
                               {"q3_error", s.q3_error}});
    write_json(summary, fs::path(a.out) / "summary.json");
    std::cout << "plots written to " << a.out << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Interference-aware experiment design and estimation on marketplace graphs"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cmd_gen = app.add_subcommand("gen-graph",
                                       "Generate a clustered graph with attributes and arms");
    cmd_gen->add_option("--clusters", gen.clusters);
    cmd_gen->add_option("--cluster-size", gen.cluster_size);
    cmd_gen->add_option("--d-ba", gen.d_ba);
    cmd_gen->add_option("--ba-power", gen.ba_power);
    cmd_gen->add_option("--d-er", gen.d_er);
    cmd_gen->add_option("--seed", gen.seed);
    cmd_gen->add_option("--out", gen.out)->required();

    DesignArgs des;
    auto* cmd_des = app.add_subcommand("design", "Sample a partition and solve the allocation");
    cmd_des->add_option("--graph", des.graph)->required();
    cmd_des->add_option("--nodes", des.nodes)->required();
    cmd_des->add_option("--treatments", des.treatments)->required();
    cmd_des->add_option("--config", des.config);
    cmd_des->add_option("--frac-omega", des.frac_omega);
    cmd_des->add_option("--frac-lambda", des.frac_lambda);
    cmd_des->add_option("--q", des.q);
    cmd_des->add_flag("--gamma-mode", des.gamma_mode);
    cmd_des->add_option("--frac-gamma", des.frac_gamma);
    cmd_des->add_option("--r-min", des.risk.r_min);
    cmd_des->add_option("--r-max", des.risk.r_max);
    cmd_des->add_option("--s-min", des.risk.s_min);
    cmd_des->add_option("--s-max", des.risk.s_max);
    cmd_des->add_option("--rho", des.solver.qp.rho);
    cmd_des->add_option("--sigma", des.solver.qp.sigma);
    cmd_des->add_option("--relax-alpha", des.solver.qp.relax_alpha);
    cmd_des->add_option("--eps-abs", des.solver.qp.eps_abs);
    cmd_des->add_option("--eps-rel", des.solver.qp.eps_rel);
    cmd_des->add_option("--max-iter", des.solver.qp.max_iter);
    cmd_des->add_option("--k-blocks", des.solver.k_blocks);
    cmd_des->add_option("--max-outer", des.solver.max_outer);
    cmd_des->add_flag("--alpha-override-one", des.alpha_override_one);
    cmd_des->add_option("--seed", des.seed);
    cmd_des->add_option("--dump-qp", des.dump_qp);
    cmd_des->add_option("--out", des.out)->required();

    EstimateArgs est;
    auto* cmd_est = app.add_subcommand("estimate", "Importance-sampling effect estimates");
    cmd_est->add_option("--graph", est.graph)->required();
    cmd_est->add_option("--nodes", est.nodes)->required();
    cmd_est->add_option("--partition", est.partition)->required();
    cmd_est->add_option("--exposures", est.exposures)->required();
    cmd_est->add_option("--targets", est.targets)->required();
    cmd_est->add_option("--responses", est.responses)->required();
    cmd_est->add_option("--bootstrap", est.est.bootstrap_b);
    cmd_est->add_option("--alpha", est.est.alpha);
    cmd_est->add_option("--clip", est.est.clip);
    cmd_est->add_flag("--plain", est.plain);
    cmd_est->add_option("--seed", est.seed);
    cmd_est->add_option("--out", est.out)->required();

    SimulateArgs sim;
    auto* cmd_sim = app.add_subcommand("simulate", "Monte Carlo benchmark against the oracle"
                                                   " cluster baseline");
    cmd_sim->add_option("--config", sim.config);
    cmd_sim->add_option("--repeats", sim.repeats);
    cmd_sim->add_option("--seed", sim.seed);
    cmd_sim->add_option("--delta", sim.delta);
    cmd_sim->add_option("--d-ba", sim.d_ba);
    cmd_sim->add_option("--d-er", sim.d_er);
    cmd_sim->add_option("--q", sim.q);
    cmd_sim->add_option("--clusters", sim.clusters);
    cmd_sim->add_option("--cluster-size", sim.cluster_size);
    cmd_sim->add_option("--threads", sim.threads);
    cmd_sim->add_flag("--alpha-override-one,!--no-alpha-override-one",
                      sim.alpha_override_one);
    cmd_sim->add_flag("--identical-arms", sim.identical_arms);
    cmd_sim->add_flag("--full-scale", sim.full_scale);
    cmd_sim->add_flag("--plots", sim.plots);
    cmd_sim->add_option("--out", sim.out)->required();

    BoostArgs boost;
    auto* cmd_bst = app.add_subcommand("boost", "Convert a design into score boost factors");
    cmd_bst->add_option("--graph", boost.graph)->required();
    cmd_bst->add_option("--nodes", boost.nodes)->required();
    cmd_bst->add_option("--design", boost.design)->required();
    cmd_bst->add_option("--partition", boost.partition)->required();
    cmd_bst->add_option("--scores", boost.scores)->required();
    cmd_bst->add_option("--out", boost.out)->required();

    ReportArgs rep;
    auto* cmd_rep = app.add_subcommand("report", "Render box plots and coverage charts");
    cmd_rep->add_option("--results", rep.results)->required();
    cmd_rep->add_option("--nominal", rep.nominal);
    cmd_rep->add_option("--out", rep.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);  // prints usage; returns 0 for --help
    }

    try {
        if (cmd_gen->parsed()) return cmd_gen_graph(gen);
        if (cmd_des->parsed()) return cmd_design(des);
        if (cmd_est->parsed()) return cmd_estimate(est);
        if (cmd_sim->parsed()) return cmd_simulate(sim);
        if (cmd_bst->parsed()) return cmd_boost(boost);
        if (cmd_rep->parsed()) return cmd_report(rep);
    } catch (const ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace oasis
