#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "oasis/graph.hpp"
#include "oasis/qp.hpp"

namespace oasis {

// Disjoint node sets of the allocation strategy: measurement arms Omega_r,
// shadow arms Lambda_r (consumer-side treatment only) and the exposure set
// C' whose incoming weights get re-optimized.
struct Partition {
    enum class Role : std::uint8_t { Rest, Omega, Lambda, CPrime };

    int n_arms = 0;
    double q = 0.0;
    std::vector<std::vector<NodeId>> omega;   // per arm, ascending
    std::vector<std::vector<NodeId>> lambda;  // per arm, ascending
    std::vector<NodeId> c_prime;              // ascending
    std::vector<Role> role;                   // per node
    std::vector<std::int16_t> arm_of;         // arm for Omega/Lambda nodes, -1 otherwise

    bool in_omega_prime(NodeId v) const { return role[v] == Role::Omega; }
    bool in_lambda_prime(NodeId v) const { return role[v] == Role::Lambda; }
};

enum class ExposureMode {
    IndependentQ,   // each eligible child enters C' independently with probability q
    GammaIntersect  // C' = Gamma  intersect  children(Omega'); Gamma pre-sampled
};

struct RiskParams {
    double r_min = 0.0;
    double r_max = 10.0;
    double s_min = 0.2;
    double s_max = 5.0;
};

// Per-consumer ranged-sum bounds derived from the residual-mass limits.
struct RiskBounds {
    RiskParams params;
    // Aligned with Partition::c_prime.
    std::vector<double> sum_lo;
    std::vector<double> sum_hi;
    std::vector<bool> degenerate;  // no baseline mass outside Omega' parents
};

enum class Provenance : std::uint8_t { ConsumerExact, Optimized, Renormalized, Base };

const char* provenance_name(Provenance p);

struct DesignOutput {
    std::vector<double> p_star;           // per edge
    std::vector<Provenance> provenance;   // per edge
    Partition partition;                  // effective (unusable C' members dropped)
    std::vector<double> objective_trace;  // J before any solve, then after each block solve
    int block_solves = 0;
};

struct DesignConfig {
    QpConfig qp;
    int k_blocks = 0;    // 0: one block per ~1000 C' consumers
    int max_outer = 10;
    std::optional<double> alpha_override;  // e.g. 1.0 when alphas are unknown
    DesignConfig() {
        // Tighter than the solver default so optimized edges sit within the
        // 1e-6 feasibility band demanded of designs.
        qp.eps_abs = 1e-7;
        qp.eps_rel = 1e-7;
    }
};

Partition sample_partition(const MarketplaceGraph& graph, int n_arms, double frac_omega,
                           double frac_lambda, double q, std::uint64_t seed,
                           ExposureMode mode = ExposureMode::IndependentQ,
                           double frac_gamma = 0.0);

RiskBounds compute_sum_bounds(const MarketplaceGraph& graph, const Partition& partition,
                              const RiskParams& risk);

// Exposure-matching problem over the edges Omega' -> C', with residual
// targets per measurement producer. Returns the problem plus the edge id of
// each variable.
struct AllocationBuild {
    AllocationProblem problem;
    std::vector<EdgeId> var_edge;       // per variable
    std::vector<NodeId> producer_node;  // per dense producer id
    std::vector<NodeId> consumer_node;  // per dense consumer id
};

AllocationBuild build_allocation(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                                 const Partition& partition, const RiskBounds& bounds,
                                 std::optional<double> alpha_override = std::nullopt);

// Full QP over all exposure-set edges (one variable per edge).
struct FullProblem {
    QpProblem qp;
    std::vector<EdgeId> var_edge;
};
FullProblem build_full_problem(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                               const Partition& partition, const RiskBounds& bounds,
                               std::optional<double> alpha_override = std::nullopt);

// J(E*) = sum_r sum_{i in Omega_r} (Z_i(T^(r)) - Z_i(T*))^2, recomputed from
// an explicit per-edge weight map (weights must cover every edge).
double evaluate_allocation_objective(const MarketplaceGraph& graph,
                                     const TreatmentSet& treatments, const Partition& partition,
                                     const std::vector<double>& weights,
                                     std::optional<double> alpha_override = std::nullopt);

DesignOutput assemble_design(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                             const Partition& partition, const RiskParams& risk,
                             const DesignConfig& config = DesignConfig());

// Multiplicative score modifiers reproducing p_star inside a score-and-rank
// system: b = p*(1 - sum0)/(p0 (1 - sum*)) on Omega'->C' edges, 1 elsewhere.
struct BoostTable {
    std::vector<double> b;  // per edge, 1.0 where not applicable
};

BoostTable compute_boost_factors(const MarketplaceGraph& graph, const DesignOutput& design,
                                 const std::vector<double>& baseline_scores);

// Re-derives the consumer-side weights implied by boosted scores; used to
// verify the boost round trip.
std::vector<double> apply_boost(const MarketplaceGraph& graph, const DesignOutput& design,
                                const std::vector<double>& baseline_scores,
                                const BoostTable& boost);

// TSV emission (design: src/dst/p_star/provenance; partition: node/role;
// boost: src/dst/b).
void save_design(const MarketplaceGraph& graph, const DesignOutput& design,
                 const std::filesystem::path& path);
void save_partition(const Partition& partition, const std::filesystem::path& path);
void save_boost(const MarketplaceGraph& graph, const BoostTable& boost,
                const std::filesystem::path& path);
std::vector<double> load_design(const MarketplaceGraph& graph, const std::filesystem::path& path,
                                std::vector<Provenance>* provenance = nullptr);
Partition load_partition(const MarketplaceGraph& graph, const std::filesystem::path& path);

}  // namespace oasis
