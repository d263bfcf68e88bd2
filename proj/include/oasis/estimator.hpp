#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "oasis/density.hpp"
#include "oasis/design.hpp"
#include "oasis/graph.hpp"

namespace oasis {

// Observed exposure data for one measurement producer: the realized total
// exposure under the deployed design, plus the per-edge samples restricted to
// children inside the producer's own arm populations, with the observed
// selection fractions rho and rho'.
struct ProducerExposure {
    NodeId node = 0;
    double z_star = 0.0;
    std::vector<double> target_samples;
    double rho = 0.0;
    double rho_prime = 0.0;
};

struct ExposureSample {
    int n_arms = 0;
    std::vector<std::vector<ProducerExposure>> arms;  // per arm, ascending by node
};

// Per-edge mediator observations; NaN marks a missing value.
struct MediatorValues {
    std::vector<double> z_star_edge;               // under the deployed design
    std::vector<std::vector<double>> z_arm_edge;   // [arm][edge], under T^(r)
};

// Producers with no children are excluded. Throws InputError (naming the
// edge) when a required mediator value is missing.
ExposureSample collect_exposures(const MarketplaceGraph& graph, const Partition& partition,
                                 const MediatorValues& mediators);

DensityModel estimate_source_density(std::span<const double> z_stars,
                                     const KdeConfig& config = KdeConfig());

struct Moments {
    double mean = 0.0;
    double second = 0.0;  // estimate of E[Z^2]
    double variance = 0.0;  // second - mean^2, may be <= 0 at small samples
};

// Moment estimators built from V1/V2/V3 and the selection fractions.
Moments estimate_target_moments(const ExposureSample& sample, int arm);

struct TargetDensity {
    DensityModel model;
    bool variance_fallback = false;  // target variance was <= 0; source sd reused
};

TargetDensity target_density(const DensityModel& source, double mu_source, double sd_source,
                             double mu_target, double var_target);

struct WeightSet {
    std::vector<double> w;
    double max_weight = 0.0;
    int clipped = 0;
};

// w_i = f_target(z_i) / f_source(z_i); both densities are floored internally.
// clip <= 0 disables clipping.
WeightSet importance_weights(std::span<const double> z_stars, const DensityModel& target,
                             const DensityModel& source, double clip);

enum class EstimateMode { Plain, SelfNormalized };

double estimate_arm(std::span<const double> responses, std::span<const double> weights,
                    EstimateMode mode);

struct EffectSummary {
    std::vector<double> tau;   // per arm
    std::vector<double> diff;  // tau_r - tau_0 for r >= 1
};

// Per-arm estimates and pairwise effects against arm 0.
EffectSummary estimate_effects(const std::vector<std::vector<double>>& responses,
                               const std::vector<std::vector<double>>& weights,
                               EstimateMode mode);

struct EstimatorConfig {
    int bootstrap_b = 1000;
    double alpha = 0.05;
    double clip = 50.0;           // <= 0 disables
    EstimateMode mode = EstimateMode::SelfNormalized;
    int kde_grid = 1024;          // point estimates
    int bootstrap_kde_grid = 256; // per-replicate densities
    double bandwidth_scale = 1.0;
    std::uint64_t seed = 0;
};

struct ArmEstimate {
    int arm = 0;
    double tau_hat = 0.0;
    double sigma_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

struct EffectEstimate {
    int arm = 0;  // effect of arm vs arm 0
    double diff = 0.0;
    double sigma_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

struct EstimateReport {
    std::vector<ArmEstimate> arms;
    std::vector<EffectEstimate> effects;
    double max_weight = 0.0;
    double ess = 0.0;  // smallest effective sample size across arms
    int clipped_weights = 0;
    int dropped_replicates = 0;
    bool weight_fallback = false;    // degenerate density; weights forced to 1
    bool variance_fallback = false;  // target variance <= 0 in the point estimate
    bool has_shadow = false;
    double shadow_diff = 0.0;        // Lambda_1 vs Lambda_0 unweighted difference
    double shadow_ci_lo = 0.0;
    double shadow_ci_hi = 0.0;
};

// Full pipeline: point estimates, B bootstrap replicates over resampled
// Omega' (and Lambda' for the shadow comparison), normal-quantile CIs.
// `responses` holds Y per node (NaN where unobserved).
EstimateReport bootstrap_ci(const Partition& partition, const ExposureSample& exposures,
                            const std::vector<double>& responses, const EstimatorConfig& config);

}  // namespace oasis
