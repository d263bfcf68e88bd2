#include "oasis/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "oasis/error.hpp"
#include "oasis/rng.hpp"
#include "oasis/tsv.hpp"

namespace oasis {

namespace {

constexpr double kDegenerateMass = 1e-12;

double alpha_of(const Edge& e, const std::optional<double>& override_value) {
    return override_value ? *override_value : e.alpha;
}

std::vector<NodeId> sorted_copy(std::vector<NodeId> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::ConsumerExact: return "consumer-exact";
        case Provenance::Optimized: return "optimized";
        case Provenance::Renormalized: return "renormalized";
        case Provenance::Base: return "base";
    }
    return "base";
}

Partition sample_partition(const MarketplaceGraph& graph, int n_arms, double frac_omega,
                           double frac_lambda, double q, std::uint64_t seed, ExposureMode mode,
                           double frac_gamma) {
    const NodeId n = graph.n_nodes();
    if (n_arms < 1) throw ParameterError("n_arms must be >= 1");
    if (frac_omega < 0.0 || frac_lambda < 0.0 || frac_gamma < 0.0)
        throw ParameterError("fractions must be non-negative");
    if (q < 0.0 || q > 1.0) throw ParameterError("q must lie in [0, 1]");
    const double used = n_arms * (frac_omega + frac_lambda) +
                        (mode == ExposureMode::GammaIntersect ? frac_gamma : 0.0);
    if (used >= 1.0) throw ParameterError("population fractions must sum to < 1");
    const auto n_om = static_cast<std::size_t>(std::llround(frac_omega * n));
    const auto n_lam = static_cast<std::size_t>(std::llround(frac_lambda * n));
    const auto n_gam = mode == ExposureMode::GammaIntersect
                           ? static_cast<std::size_t>(std::llround(frac_gamma * n))
                           : 0u;
    if (static_cast<std::size_t>(n_arms) * (n_om + n_lam) + n_gam > n)
        throw ParameterError("fractions infeasible for graph size");

    Rng rng(seed);
    // One key per node, drawn in ascending NodeId order; the sorted order is
    // the sampling permutation.
    std::vector<double> key(n);
    for (NodeId v = 0; v < n; ++v) key[v] = rng.uniform01();
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    std::sort(order.begin(), order.end(),
              [&](NodeId a, NodeId b) { return key[a] != key[b] ? key[a] < key[b] : a < b; });

    Partition part;
    part.n_arms = n_arms;
    part.q = q;
    part.role.assign(n, Partition::Role::Rest);
    part.arm_of.assign(n, -1);
    part.omega.resize(n_arms);
    part.lambda.resize(n_arms);

    std::size_t cursor = 0;
    for (int r = 0; r < n_arms; ++r) {
        for (std::size_t k = 0; k < n_om; ++k) {
            const NodeId v = order[cursor++];
            part.role[v] = Partition::Role::Omega;
            part.arm_of[v] = static_cast<std::int16_t>(r);
            part.omega[r].push_back(v);
        }
        part.omega[r] = sorted_copy(std::move(part.omega[r]));
    }
    for (int r = 0; r < n_arms; ++r) {
        for (std::size_t k = 0; k < n_lam; ++k) {
            const NodeId v = order[cursor++];
            part.role[v] = Partition::Role::Lambda;
            part.arm_of[v] = static_cast<std::int16_t>(r);
            part.lambda[r].push_back(v);
        }
        part.lambda[r] = sorted_copy(std::move(part.lambda[r]));
    }

    std::vector<bool> in_gamma(n, false);
    for (std::size_t k = 0; k < n_gam; ++k) in_gamma[order[cursor++]] = true;

    // Children of Omega' that fall in no arm are eligible for C'.
    std::vector<bool> eligible(n, false);
    for (int r = 0; r < n_arms; ++r)
        for (NodeId i : part.omega[r])
            for (EdgeId e : graph.out_edges(i)) {
                const NodeId j = graph.edge(e).dst;
                if (part.role[j] == Partition::Role::Rest) eligible[j] = true;
            }
    for (NodeId v = 0; v < n; ++v) {
        if (!eligible[v]) continue;
        const bool take = mode == ExposureMode::GammaIntersect ? in_gamma[v]
                                                               : rng.uniform01() < q;
        if (take) {
            part.role[v] = Partition::Role::CPrime;
            part.c_prime.push_back(v);
        }
    }
    return part;
}

RiskBounds compute_sum_bounds(const MarketplaceGraph& graph, const Partition& partition,
                              const RiskParams& risk) {
    if (!(risk.s_min >= 0.0 && risk.s_min <= 1.0 && risk.s_max >= 1.0))
        throw ParameterError("require 0 <= s_min <= 1 <= s_max");
    if (!(risk.r_min >= 0.0 && risk.r_min <= 1.0 && risk.r_max >= 1.0))
        throw ParameterError("require 0 <= r_min <= 1 <= r_max");
    RiskBounds out;
    out.params = risk;
    out.sum_lo.reserve(partition.c_prime.size());
    out.sum_hi.reserve(partition.c_prime.size());
    out.degenerate.reserve(partition.c_prime.size());
    for (NodeId j : partition.c_prime) {
        double base_in = 0.0;
        for (EdgeId e : graph.in_edges(j))
            if (partition.in_omega_prime(graph.edge(e).src)) base_in += graph.edge(e).p_base;
        const double outside = 1.0 - base_in;
        if (outside <= kDegenerateMass) {
            // All baseline mass sits on Omega' parents; the only simplex
            // completion pins the optimized sum to 1.
            out.sum_lo.push_back(1.0);
            out.sum_hi.push_back(1.0);
            out.degenerate.push_back(true);
        } else {
            out.sum_lo.push_back(std::max(0.0, 1.0 - risk.s_max * outside));
            out.sum_hi.push_back(std::min(1.0, 1.0 - risk.s_min * outside));
            out.degenerate.push_back(false);
        }
    }
    return out;
}

AllocationBuild build_allocation(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                                 const Partition& partition, const RiskBounds& bounds,
                                 std::optional<double> alpha_override) {
    if (partition.role.size() != graph.n_nodes())
        throw ParameterError("partition does not match graph");
    if (treatments.n_arms != partition.n_arms)
        throw ParameterError("treatment arm count does not match partition");
    if (bounds.sum_lo.size() != partition.c_prime.size())
        throw ParameterError("bounds not aligned with partition");

    AllocationBuild build;
    AllocationProblem& prob = build.problem;

    // Producers in arm-major order; every Omega' member contributes an
    // objective row (possibly constant).
    std::vector<int> producer_id(graph.n_nodes(), -1);
    for (int r = 0; r < partition.n_arms; ++r)
        for (NodeId i : partition.omega[r]) {
            producer_id[i] = prob.n_producers++;
            build.producer_node.push_back(i);
            double z_target = 0.0;
            double z_assigned = 0.0;
            for (EdgeId e : graph.out_edges(i)) {
                const Edge& ed = graph.edge(e);
                const double a = alpha_of(ed, alpha_override);
                z_target += a * treatments.p(r, e);
                switch (partition.role[ed.dst]) {
                    case Partition::Role::Omega:
                    case Partition::Role::Lambda:
                        z_assigned += a * treatments.p(partition.arm_of[ed.dst], e);
                        break;
                    case Partition::Role::CPrime:
                        break;  // optimization variable
                    case Partition::Role::Rest:
                        z_assigned += a * ed.p_base;
                        break;
                }
            }
            prob.target.push_back(z_target - z_assigned);
        }

    for (std::size_t idx = 0; idx < partition.c_prime.size(); ++idx) {
        const NodeId j = partition.c_prime[idx];
        int n_vars_before = static_cast<int>(prob.vars.size());
        for (EdgeId e : graph.in_edges(j)) {
            const Edge& ed = graph.edge(e);
            if (producer_id[ed.src] < 0) continue;
            AllocationVar v;
            v.producer = producer_id[ed.src];
            v.consumer = prob.n_consumers;
            v.alpha = alpha_of(ed, alpha_override);
            v.p_base = ed.p_base;
            v.lo = bounds.params.r_min * ed.p_base;
            v.hi = bounds.params.r_max * ed.p_base;
            prob.vars.push_back(v);
            build.var_edge.push_back(e);
        }
        if (static_cast<int>(prob.vars.size()) == n_vars_before) continue;  // dropped member
        build.consumer_node.push_back(j);
        prob.sum_lo.push_back(bounds.sum_lo[idx]);
        prob.sum_hi.push_back(bounds.sum_hi[idx]);
        ++prob.n_consumers;
    }
    return build;
}

FullProblem build_full_problem(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                               const Partition& partition, const RiskBounds& bounds,
                               std::optional<double> alpha_override) {
    AllocationBuild build = build_allocation(graph, treatments, partition, bounds, alpha_override);
    return {build_qp(build.problem), std::move(build.var_edge)};
}

double evaluate_allocation_objective(const MarketplaceGraph& graph,
                                     const TreatmentSet& treatments, const Partition& partition,
                                     const std::vector<double>& weights,
                                     std::optional<double> alpha_override) {
    if (weights.size() != graph.n_edges())
        throw InputError("weight map does not cover the edge set");
    double j = 0.0;
    for (int r = 0; r < partition.n_arms; ++r)
        for (NodeId i : partition.omega[r]) {
            double z_target = 0.0;
            double z_star = 0.0;
            for (EdgeId e : graph.out_edges(i)) {
                const Edge& ed = graph.edge(e);
                const double a = alpha_of(ed, alpha_override);
                if (std::isnan(weights[e]))
                    throw InputError("missing weight for edge " + std::to_string(ed.src) + "->" +
                                     std::to_string(ed.dst));
                z_target += a * treatments.p(r, e);
                z_star += a * weights[e];
            }
            const double d = z_target - z_star;
            j += d * d;
        }
    return j;
}

DesignOutput assemble_design(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                             const Partition& partition, const RiskParams& risk,
                             const DesignConfig& config) {
    if (partition.role.size() != graph.n_nodes())
        throw ParameterError("partition does not match graph");
    if (treatments.n_arms != partition.n_arms)
        throw ParameterError("treatment arm count does not match partition");

    DesignOutput out;
    out.partition = partition;

    // Drop C' members with no Omega' parent: they carry no variables.
    {
        std::vector<NodeId> kept;
        for (NodeId j : partition.c_prime) {
            bool has_omega_parent = false;
            for (EdgeId e : graph.in_edges(j))
                if (partition.in_omega_prime(graph.edge(e).src)) {
                    has_omega_parent = true;
                    break;
                }
            if (has_omega_parent)
                kept.push_back(j);
            else
                out.partition.role[j] = Partition::Role::Rest;
        }
        out.partition.c_prime = std::move(kept);
    }
    const Partition& part = out.partition;

    // Step 7 default, overwritten below where other steps apply.
    out.p_star.resize(graph.n_edges());
    out.provenance.assign(graph.n_edges(), Provenance::Base);
    for (EdgeId e = 0; e < graph.n_edges(); ++e) out.p_star[e] = graph.edge(e).p_base;

    // Step 3: consumer-exact arms.
    for (NodeId j = 0; j < graph.n_nodes(); ++j) {
        if (part.role[j] != Partition::Role::Omega && part.role[j] != Partition::Role::Lambda)
            continue;
        const int r = part.arm_of[j];
        for (EdgeId e : graph.in_edges(j)) {
            out.p_star[e] = treatments.p(r, e);
            out.provenance[e] = Provenance::ConsumerExact;
        }
    }

    const RiskBounds bounds = compute_sum_bounds(graph, part, risk);

    // Step 5: exposure-matching QP over Omega' -> C'.
    if (!part.c_prime.empty()) {
        AllocationBuild build = build_allocation(graph, treatments, part, bounds,
                                                 config.alpha_override);
        const int k = config.k_blocks > 0
                          ? config.k_blocks
                          : static_cast<int>((build.problem.n_consumers + 999) / 1000);
        const BlockPlan plan = make_block_plan(build.problem.n_consumers, std::max(1, k),
                                               config.max_outer);
        AllocationResult result = solve_allocation(build.problem, plan, config.qp);
        for (std::size_t v = 0; v < build.var_edge.size(); ++v) {
            // Solver tolerance can leave a weight a hair outside its box;
            // project exactly so downstream algebra never sees p* < 0.
            out.p_star[build.var_edge[v]] =
                std::clamp(result.x[v], build.problem.vars[v].lo, build.problem.vars[v].hi);
            out.provenance[build.var_edge[v]] = Provenance::Optimized;
        }
        out.objective_trace = std::move(result.objective_trace);
        out.block_solves = result.block_solves;
    }

    // Step 6: rescale the remaining incoming mass of each C' consumer so the
    // simplex is restored exactly.
    for (std::size_t idx = 0; idx < part.c_prime.size(); ++idx) {
        const NodeId j = part.c_prime[idx];
        double base_in = 0.0;
        double star_in = 0.0;
        for (EdgeId e : graph.in_edges(j)) {
            if (!part.in_omega_prime(graph.edge(e).src)) continue;
            base_in += graph.edge(e).p_base;
            star_in += out.p_star[e];
        }
        const double denom = 1.0 - base_in;
        const double factor = denom <= kDegenerateMass ? 0.0 : (1.0 - star_in) / denom;
        for (EdgeId e : graph.in_edges(j)) {
            if (part.in_omega_prime(graph.edge(e).src)) continue;
            out.p_star[e] = graph.edge(e).p_base * factor;
            out.provenance[e] = Provenance::Renormalized;
        }
    }
    return out;
}

BoostTable compute_boost_factors(const MarketplaceGraph& graph, const DesignOutput& design,
                                 const std::vector<double>& baseline_scores) {
    if (baseline_scores.size() != graph.n_edges())
        throw InputError("baseline score map does not cover the edge set");
    const Partition& part = design.partition;
    BoostTable table;
    table.b.assign(graph.n_edges(), 1.0);
    std::string saturated;

    for (NodeId j : part.c_prime) {
        double score_sum = 0.0;
        for (EdgeId e : graph.in_edges(j)) {
            const double s = baseline_scores[e];
            if (std::isnan(s) || s < 0.0)
                throw InputError("invalid baseline score on edge " +
                                 std::to_string(graph.edge(e).src) + "->" + std::to_string(j));
            score_sum += s;
        }
        if (score_sum <= 0.0)
            throw DegenerateScoreError("consumer " + std::to_string(j) +
                                       " has zero total baseline score");
        double sum0 = 0.0;
        double sum_star = 0.0;
        for (EdgeId e : graph.in_edges(j)) {
            if (!part.in_omega_prime(graph.edge(e).src)) continue;
            sum0 += baseline_scores[e] / score_sum;
            sum_star += design.p_star[e];
        }
        if (1.0 - sum_star <= 1e-15) {
            saturated += (saturated.empty() ? "" : ", ") + std::to_string(j);
            continue;
        }
        for (EdgeId e : graph.in_edges(j)) {
            if (!part.in_omega_prime(graph.edge(e).src)) continue;
            const double p0 = baseline_scores[e] / score_sum;
            if (p0 == 0.0)
                throw DegenerateScoreError("zero baseline score on optimized edge " +
                                           std::to_string(graph.edge(e).src) + "->" +
                                           std::to_string(j));
            const double b = design.p_star[e] * (1.0 - sum0) / (p0 * (1.0 - sum_star));
            table.b[e] = std::max(0.0, b);
        }
    }
    if (!saturated.empty())
        throw DivisionByZeroError("optimized mass saturates the simplex for consumers: " +
                                  saturated);
    return table;
}

std::vector<double> apply_boost(const MarketplaceGraph& graph, const DesignOutput& design,
                                const std::vector<double>& baseline_scores,
                                const BoostTable& boost) {
    std::vector<double> weights = design.p_star;
    for (NodeId j : design.partition.c_prime) {
        double total = 0.0;
        for (EdgeId e : graph.in_edges(j)) total += boost.b[e] * baseline_scores[e];
        if (total <= 0.0) throw DegenerateScoreError("boosted scores sum to zero for consumer " +
                                                     std::to_string(j));
        for (EdgeId e : graph.in_edges(j)) weights[e] = boost.b[e] * baseline_scores[e] / total;
    }
    return weights;
}

void save_design(const MarketplaceGraph& graph, const DesignOutput& design,
                 const std::filesystem::path& path) {
    tsv::Writer w(path);
    w.line("src\tdst\tp_star\tprovenance");
    for (EdgeId e = 0; e < graph.n_edges(); ++e)
        w.line(std::to_string(graph.edge(e).src) + "\t" + std::to_string(graph.edge(e).dst) +
               "\t" + tsv::fmt17(design.p_star[e]) + "\t" + provenance_name(design.provenance[e]));
    w.close();
}

void save_partition(const Partition& partition, const std::filesystem::path& path) {
    tsv::Writer w(path);
    w.line("node\trole");
    for (NodeId v = 0; v < partition.role.size(); ++v) {
        std::string role;
        switch (partition.role[v]) {
            case Partition::Role::Omega:
                role = "omega:" + std::to_string(partition.arm_of[v]);
                break;
            case Partition::Role::Lambda:
                role = "lambda:" + std::to_string(partition.arm_of[v]);
                break;
            case Partition::Role::CPrime: role = "cprime"; break;
            case Partition::Role::Rest: role = "rest"; break;
        }
        w.line(std::to_string(v) + "\t" + role);
    }
    w.close();
}

void save_boost(const MarketplaceGraph& graph, const BoostTable& boost,
                const std::filesystem::path& path) {
    tsv::Writer w(path);
    w.line("src\tdst\tb");
    for (EdgeId e = 0; e < graph.n_edges(); ++e)
        w.line(std::to_string(graph.edge(e).src) + "\t" + std::to_string(graph.edge(e).dst) +
               "\t" + tsv::fmt17(boost.b[e]));
    w.close();
}

std::vector<double> load_design(const MarketplaceGraph& graph, const std::filesystem::path& path,
                                std::vector<Provenance>* provenance) {
    std::vector<double> p_star(graph.n_edges(), std::nan(""));
    if (provenance) provenance->assign(graph.n_edges(), Provenance::Base);
    tsv::Reader r(path);
    r.expect_header("src\tdst\tp_star\tprovenance");
    std::string line;
    while (r.next(line)) {
        const auto f = tsv::split_tabs(line);
        if (f.size() != 4) r.fail("expected 4 fields");
        const auto src = tsv::parse_int(f[0], r.path(), r.lineno());
        const auto dst = tsv::parse_int(f[1], r.path(), r.lineno());
        const auto e = src >= 0 && src < graph.n_nodes() && dst >= 0 && dst < graph.n_nodes()
                           ? graph.find_edge(static_cast<NodeId>(src), static_cast<NodeId>(dst))
                           : -1;
        if (e < 0) r.fail("unknown edge " + std::to_string(src) + "->" + std::to_string(dst));
        p_star[static_cast<EdgeId>(e)] = tsv::parse_double(f[2], r.path(), r.lineno());
        if (provenance) {
            const std::string_view tag = f[3];
            Provenance p;
            if (tag == "consumer-exact") p = Provenance::ConsumerExact;
            else if (tag == "optimized") p = Provenance::Optimized;
            else if (tag == "renormalized") p = Provenance::Renormalized;
            else if (tag == "base") p = Provenance::Base;
            else { r.fail("unknown provenance '" + std::string(tag) + "'"); return {}; }
            (*provenance)[static_cast<EdgeId>(e)] = p;
        }
    }
    for (EdgeId e = 0; e < graph.n_edges(); ++e)
        if (std::isnan(p_star[e]))
            throw ParseError(path.string() + ": missing weight for edge " +
                             std::to_string(graph.edge(e).src) + "->" +
                             std::to_string(graph.edge(e).dst));
    return p_star;
}

Partition load_partition(const MarketplaceGraph& graph, const std::filesystem::path& path) {
    Partition part;
    part.role.assign(graph.n_nodes(), Partition::Role::Rest);
    part.arm_of.assign(graph.n_nodes(), -1);
    tsv::Reader r(path);
    r.expect_header("node\trole");
    std::string line;
    int max_arm = -1;
    std::vector<std::pair<NodeId, std::pair<char, int>>> entries;  // (node, (kind, arm))
    while (r.next(line)) {
        const auto f = tsv::split_tabs(line);
        if (f.size() != 2) r.fail("expected 2 fields");
        const auto node = tsv::parse_int(f[0], r.path(), r.lineno());
        if (node < 0 || node >= graph.n_nodes()) r.fail("node out of range");
        const std::string role(f[1]);
        if (role == "rest") {
            entries.push_back({static_cast<NodeId>(node), {'r', -1}});
        } else if (role == "cprime") {
            entries.push_back({static_cast<NodeId>(node), {'c', -1}});
        } else if (role.rfind("omega:", 0) == 0 || role.rfind("lambda:", 0) == 0) {
            const char kind = role[0] == 'o' ? 'o' : 'l';
            const auto arm = tsv::parse_int(role.substr(role.find(':') + 1), r.path(), r.lineno());
            if (arm < 0 || arm > 255) r.fail("arm out of range");
            max_arm = std::max(max_arm, static_cast<int>(arm));
            entries.push_back({static_cast<NodeId>(node), {kind, static_cast<int>(arm)}});
        } else {
            r.fail("unknown role '" + role + "'");
        }
    }
    part.n_arms = max_arm + 1;
    part.omega.resize(part.n_arms);
    part.lambda.resize(part.n_arms);
    for (const auto& [node, spec] : entries) {
        switch (spec.first) {
            case 'o':
                part.role[node] = Partition::Role::Omega;
                part.arm_of[node] = static_cast<std::int16_t>(spec.second);
                part.omega[spec.second].push_back(node);
                break;
            case 'l':
                part.role[node] = Partition::Role::Lambda;
                part.arm_of[node] = static_cast<std::int16_t>(spec.second);
                part.lambda[spec.second].push_back(node);
                break;
            case 'c':
                part.role[node] = Partition::Role::CPrime;
                part.c_prime.push_back(node);
                break;
            default: break;
        }
    }
    for (auto& v : part.omega) std::sort(v.begin(), v.end());
    for (auto& v : part.lambda) std::sort(v.begin(), v.end());
    std::sort(part.c_prime.begin(), part.c_prime.end());
    return part;
}

}  // namespace oasis
