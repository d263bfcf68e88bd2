#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oasis/design.hpp"
#include "oasis/estimator.hpp"
#include "oasis/graph.hpp"
#include "oasis/rng.hpp"

namespace oasis {

// Bounded logistic link; g(0) = 5, range (0, 10).
struct ResponseModel {
    double noise_sd = 1.0;
    double link(double x) const { return 10.0 / (1.0 + std::exp(-x / 10.0)); }
};

struct GraphParams {
    int n_clusters = 10;
    int cluster_size = 500;
    double d_ba = 10.0;
    double ba_power = 0.25;
    double d_er = 1.0;
};

struct SimConfig {
    GraphParams graph;
    double delta = 0.5;  // exposure exponent; 1 is the linear mediator case
    double frac_omega = 0.1;
    double frac_lambda = 0.1;
    double q = 0.5;
    RiskParams risk;
    DesignConfig design;
    bool alpha_override_one = true;  // build the design as if all alphas were 1
    bool identical_arms = false;     // null experiment: arm 1 copies the baseline
    EstimatorConfig estimator;
    ResponseModel response;
    int repeats = 200;
    std::uint64_t seed = 1;
    int threads = 0;  // 0: hardware concurrency
};

enum class TrialMethod { Oasis, Cb };

const char* trial_method_name(TrialMethod m);

struct TrialResult {
    TrialMethod method = TrialMethod::Oasis;
    int repeat = 0;
    double estimate = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double truth = 0.0;
    bool covered = false;
    double error() const { return estimate - truth; }
};

struct NodeExposures {
    std::vector<double> w;  // consumer-side mean weighted exposure
    std::vector<double> z;  // producer-side total exposure at exponent delta
};

// Fills per-edge alpha and p_base on the graph and returns the two-arm
// treatment set (arm 0 = baseline, arm 1 reweighted by relationship
// strength against popularity).
TreatmentSet generate_attributes(MarketplaceGraph& graph, std::uint64_t seed);

// Arm-1 weights from already-set attributes:
// p^(1) proportional to p_base * sqrt(alpha / log(1 + d_src d_dst)),
// renormalized per consumer.
std::vector<double> treatment_arm_one(const MarketplaceGraph& graph);

NodeExposures compute_exposures(const MarketplaceGraph& graph, const std::vector<double>& weights,
                                double delta);

std::vector<double> generate_responses(const NodeExposures& exposures, const ResponseModel& model,
                                       Rng rng);

struct GroundTruth {
    std::vector<double> tau;   // per arm
    std::vector<double> diff;  // tau_r - tau_0 for r >= 1
};

// Deterministic population mean response per arm (noise is zero-mean).
GroundTruth ground_truth(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                         double delta, const ResponseModel& model);

TrialResult run_oasis_trial(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                            const SimConfig& config, const GroundTruth& truth, int repeat);

TrialResult run_cb_trial(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                         const SimConfig& config, const GroundTruth& truth, int repeat);

struct MethodSummary {
    TrialMethod method;
    int n = 0;
    double coverage = 0.0;
    double mean_error = 0.0;
    double sd_error = 0.0;
    double min_error = 0.0;
    double q1_error = 0.0;
    double median_error = 0.0;
    double q3_error = 0.0;
    double max_error = 0.0;
};

std::vector<MethodSummary> summarize(const std::vector<TrialResult>& results);

struct SimOutput {
    GroundTruth truth;
    std::vector<TrialResult> results;
    std::vector<MethodSummary> summary;
};

// Graph and attributes are generated once from the master seed; repeats vary
// only the partition, noise and bootstrap streams and run in parallel.
SimOutput run_simulation(const SimConfig& config);

void save_results_csv(const std::vector<TrialResult>& results, const std::filesystem::path& path);
std::vector<TrialResult> load_results_csv(const std::filesystem::path& path);

}  // namespace oasis
