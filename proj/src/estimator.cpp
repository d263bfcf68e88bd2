#include "oasis/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "oasis/error.hpp"
#include "oasis/rng.hpp"
#include "oasis/stats.hpp"

namespace oasis {

namespace {

double require_value(const std::vector<double>& values, EdgeId e, const MarketplaceGraph& graph,
                     const char* what) {
    if (e >= values.size() || std::isnan(values[e]))
        throw InputError(std::string(what) + " missing for edge " +
                         std::to_string(graph.edge(e).src) + "->" +
                         std::to_string(graph.edge(e).dst));
    return values[e];
}

}  // namespace

ExposureSample collect_exposures(const MarketplaceGraph& graph, const Partition& partition,
                                 const MediatorValues& mediators) {
    ExposureSample sample;
    sample.n_arms = partition.n_arms;
    sample.arms.resize(partition.n_arms);
    for (int r = 0; r < partition.n_arms; ++r) {
        if (static_cast<int>(mediators.z_arm_edge.size()) <= r)
            throw InputError("mediator values missing for arm " + std::to_string(r));
        for (NodeId i : partition.omega[r]) {
            const auto deg = graph.out_degree(i);
            if (deg == 0) continue;  // no producer-side exposure to measure
            ProducerExposure rec;
            rec.node = i;
            std::size_t selected = 0;
            for (EdgeId e : graph.out_edges(i)) {
                rec.z_star += require_value(mediators.z_star_edge, e, graph, "design mediator");
                const NodeId j = graph.edge(e).dst;
                const bool in_arm_pop = (partition.role[j] == Partition::Role::Omega ||
                                         partition.role[j] == Partition::Role::Lambda) &&
                                        partition.arm_of[j] == r;
                if (in_arm_pop) {
                    rec.target_samples.push_back(
                        require_value(mediators.z_arm_edge[r], e, graph, "target mediator"));
                    ++selected;
                }
            }
            rec.rho = static_cast<double>(selected) / static_cast<double>(deg);
            if (deg == 1)
                rec.rho_prime = 1.0;  // single child: the V3-V2 term vanishes anyway
            else
                rec.rho_prime = selected >= 1
                                    ? (static_cast<double>(selected) - 1.0) /
                                          (static_cast<double>(deg) - 1.0)
                                    : 0.0;
            sample.arms[r].push_back(std::move(rec));
        }
    }
    return sample;
}

DensityModel estimate_source_density(std::span<const double> z_stars, const KdeConfig& config) {
    return DensityModel::kde(z_stars, config);
}

Moments estimate_target_moments(const ExposureSample& sample, int arm) {
    if (arm < 0 || arm >= sample.n_arms) throw ParameterError("arm out of range");
    double v1 = 0.0, v2 = 0.0, v3 = 0.0, sum_rho = 0.0, sum_rho_rho = 0.0;
    for (const ProducerExposure& rec : sample.arms[arm]) {
        double zi = 0.0;
        for (double z : rec.target_samples) {
            v1 += z;
            v2 += z * z;
            zi += z;
        }
        v3 += zi * zi;
        sum_rho += rec.rho;
        sum_rho_rho += rec.rho * rec.rho_prime;
    }
    if (sum_rho <= 0.0)
        throw InsufficientOverlapError("no observed target exposure in arm " +
                                       std::to_string(arm));
    Moments m;
    m.mean = v1 / sum_rho;
    double cross = v3 - v2;
    if (cross != 0.0) {
        if (sum_rho_rho <= 0.0)
            throw InsufficientOverlapError("sum rho*rho' is zero in arm " + std::to_string(arm));
        cross /= sum_rho_rho;
    }
    m.second = v2 / sum_rho + cross;
    m.variance = m.second - m.mean * m.mean;
    return m;
}

TargetDensity target_density(const DensityModel& source, double mu_source, double sd_source,
                             double mu_target, double var_target) {
    TargetDensity out{source, false};
    double sd_target;
    if (var_target > 0.0) {
        sd_target = std::sqrt(var_target);
    } else {
        sd_target = sd_source;
        out.variance_fallback = true;
    }
    out.model = source.location_scale(mu_source, sd_source, mu_target, sd_target);
    return out;
}

WeightSet importance_weights(std::span<const double> z_stars, const DensityModel& target,
                             const DensityModel& source, double clip) {
    WeightSet ws;
    ws.w.reserve(z_stars.size());
    for (double z : z_stars) {
        double w = target(z) / source(z);
        if (clip > 0.0 && w > clip) {
            w = clip;
            ++ws.clipped;
        }
        ws.w.push_back(w);
        ws.max_weight = std::max(ws.max_weight, w);
    }
    return ws;
}

double estimate_arm(std::span<const double> responses, std::span<const double> weights,
                    EstimateMode mode) {
    if (responses.size() != weights.size()) throw InputError("responses/weights size mismatch");
    if (responses.empty()) throw EstimationError("empty arm");
    double swy = 0.0, sw = 0.0;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        swy += weights[i] * responses[i];
        sw += weights[i];
    }
    if (mode == EstimateMode::Plain) return swy / static_cast<double>(responses.size());
    if (sw <= 0.0) throw EstimationError("self-normalized weights sum to zero");
    return swy / sw;
}

EffectSummary estimate_effects(const std::vector<std::vector<double>>& responses,
                               const std::vector<std::vector<double>>& weights,
                               EstimateMode mode) {
    if (responses.size() != weights.size() || responses.empty())
        throw InputError("need matching per-arm responses and weights");
    EffectSummary out;
    for (std::size_t r = 0; r < responses.size(); ++r)
        out.tau.push_back(estimate_arm(responses[r], weights[r], mode));
    for (std::size_t r = 1; r < out.tau.size(); ++r) out.diff.push_back(out.tau[r] - out.tau[0]);
    return out;
}

namespace {

struct ArmDiagnostics {
    double max_weight = 0.0;
    double ess = 0.0;
    int clipped = 0;
    bool weight_fallback = false;
    bool variance_fallback = false;
};

// One arm's estimate from a (possibly resampled) multiset of record indices.
double arm_tau(const std::vector<ProducerExposure>& records, std::span<const std::size_t> idx,
               const std::vector<double>& y_by_record, const EstimatorConfig& config,
               int grid_cells, ArmDiagnostics* diag) {
    const std::size_t n = idx.size();
    std::vector<double> zs(n), ys(n);
    for (std::size_t k = 0; k < n; ++k) {
        zs[k] = records[idx[k]].z_star;
        ys[k] = y_by_record[idx[k]];
    }

    std::vector<double> w(n, 1.0);
    bool fallback = false;
    double max_w = 1.0;
    int clipped = 0;
    bool var_fallback = false;
    try {
        if (n < 2) throw DegenerateDensityError("fewer than 2 producers");
        const double mu_src = stats::mean(zs);
        const double sd_src = stats::sample_sd(zs);
        if (!(sd_src > 0.0)) throw DegenerateDensityError("zero variance");

        KdeConfig kc;
        kc.grid_cells = grid_cells;
        kc.bandwidth_scale = config.bandwidth_scale;
        const DensityModel source = DensityModel::kde(zs, kc);

        // Selection-fraction moment accumulation over the resampled multiset.
        double v1 = 0.0, v2 = 0.0, v3 = 0.0, sum_rho = 0.0, sum_rho_rho = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const ProducerExposure& rec = records[idx[k]];
            double zi = 0.0;
            for (double z : rec.target_samples) {
                v1 += z;
                v2 += z * z;
                zi += z;
            }
            v3 += zi * zi;
            sum_rho += rec.rho;
            sum_rho_rho += rec.rho * rec.rho_prime;
        }
        if (sum_rho <= 0.0) throw InsufficientOverlapError("no target exposure data");
        const double mu_t = v1 / sum_rho;
        double cross = v3 - v2;
        if (cross != 0.0) {
            if (sum_rho_rho <= 0.0) throw InsufficientOverlapError("sum rho*rho' is zero");
            cross /= sum_rho_rho;
        }
        const double var_t = v2 / sum_rho + cross - mu_t * mu_t;

        const TargetDensity target = target_density(source, mu_src, sd_src, mu_t, var_t);
        var_fallback = target.variance_fallback;
        WeightSet ws = importance_weights(zs, target.model, source, config.clip);
        w = std::move(ws.w);
        max_w = ws.max_weight;
        clipped = ws.clipped;
    } catch (const DegenerateDensityError&) {
        fallback = true;
        std::fill(w.begin(), w.end(), 1.0);
        max_w = 1.0;
        clipped = 0;
    } catch (const InsufficientOverlapError&) {
        fallback = true;
        std::fill(w.begin(), w.end(), 1.0);
        max_w = 1.0;
        clipped = 0;
    }

    if (diag) {
        diag->max_weight = max_w;
        diag->ess = stats::effective_sample_size(w);
        diag->clipped = clipped;
        diag->weight_fallback = fallback;
        diag->variance_fallback = var_fallback;
    }
    return estimate_arm(ys, w, config.mode);
}

}  // namespace

EstimateReport bootstrap_ci(const Partition& partition, const ExposureSample& exposures,
                            const std::vector<double>& responses,
                            const EstimatorConfig& config) {
    if (config.bootstrap_b < 100) throw ParameterError("bootstrap_b must be >= 100");
    const int m = exposures.n_arms;
    if (m < 1) throw ParameterError("need at least one arm");

    // Responses aligned with each arm's records.
    std::vector<std::vector<double>> y(m);
    for (int r = 0; r < m; ++r) {
        if (exposures.arms[r].size() < 2)
            throw EstimationError("arm " + std::to_string(r) + " has fewer than 2 producers");
        y[r].reserve(exposures.arms[r].size());
        for (const ProducerExposure& rec : exposures.arms[r]) {
            if (rec.node >= responses.size() || std::isnan(responses[rec.node]))
                throw InputError("response missing for node " + std::to_string(rec.node));
            y[r].push_back(responses[rec.node]);
        }
    }

    EstimateReport report;

    // Point estimates on the original sample.
    std::vector<double> tau_point(m);
    report.ess = std::numeric_limits<double>::infinity();
    for (int r = 0; r < m; ++r) {
        std::vector<std::size_t> all(exposures.arms[r].size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        ArmDiagnostics diag;
        tau_point[r] = arm_tau(exposures.arms[r], all, y[r], config, config.kde_grid, &diag);
        report.max_weight = std::max(report.max_weight, diag.max_weight);
        report.ess = std::min(report.ess, diag.ess);
        report.clipped_weights += diag.clipped;
        report.weight_fallback = report.weight_fallback || diag.weight_fallback;
        report.variance_fallback = report.variance_fallback || diag.variance_fallback;
    }

    // Shadow point estimate: unweighted Lambda_1 vs Lambda_0 means.
    std::vector<std::vector<double>> lambda_y(m);
    bool shadow_ok = m >= 2 && static_cast<int>(partition.lambda.size()) >= 2;
    if (shadow_ok) {
        for (int r = 0; r < 2 && shadow_ok; ++r) {
            for (NodeId v : partition.lambda[r]) {
                if (v >= responses.size() || std::isnan(responses[v])) {
                    shadow_ok = false;
                    break;
                }
                lambda_y[r].push_back(responses[v]);
            }
            if (lambda_y[r].empty()) shadow_ok = false;
        }
    }

    // Bootstrap over Omega' (and Lambda' for the shadow), replicates keyed by
    // derived streams so the loop order is immaterial.
    std::vector<std::pair<int, std::size_t>> pool;
    for (int r = 0; r < m; ++r)
        for (std::size_t k = 0; k < exposures.arms[r].size(); ++k) pool.push_back({r, k});
    std::vector<std::pair<int, std::size_t>> lambda_pool;
    if (shadow_ok)
        for (int r = 0; r < 2; ++r)
            for (std::size_t k = 0; k < lambda_y[r].size(); ++k) lambda_pool.push_back({r, k});

    std::vector<std::vector<double>> rep_tau(m);
    std::vector<std::vector<double>> rep_diff(m);  // index r>=1 used
    std::vector<double> rep_shadow;
    const Rng boot_base(config.seed);

    std::vector<std::vector<std::size_t>> draw(m);
    for (int t = 0; t < config.bootstrap_b; ++t) {
        Rng rt = boot_base.split(static_cast<std::uint64_t>(t) + 1);
        for (int r = 0; r < m; ++r) draw[r].clear();
        for (std::size_t k = 0; k < pool.size(); ++k) {
            const auto& pick = pool[rt.below(pool.size())];
            draw[pick.first].push_back(pick.second);
        }
        bool dropped = false;
        for (int r = 0; r < m; ++r)
            if (draw[r].empty()) dropped = true;
        if (dropped) {
            ++report.dropped_replicates;
        } else {
            std::vector<double> taus(m);
            for (int r = 0; r < m; ++r)
                taus[r] = arm_tau(exposures.arms[r], draw[r], y[r], config,
                                  config.bootstrap_kde_grid, nullptr);
            for (int r = 0; r < m; ++r) rep_tau[r].push_back(taus[r]);
            for (int r = 1; r < m; ++r) rep_diff[r].push_back(taus[r] - taus[0]);
        }

        if (shadow_ok) {
            Rng rs = rt.split(2);
            double sum[2] = {0.0, 0.0};
            std::size_t cnt[2] = {0, 0};
            for (std::size_t k = 0; k < lambda_pool.size(); ++k) {
                const auto& pick = lambda_pool[rs.below(lambda_pool.size())];
                sum[pick.first] += lambda_y[pick.first][pick.second];
                ++cnt[pick.first];
            }
            if (cnt[0] > 0 && cnt[1] > 0)
                rep_shadow.push_back(sum[1] / static_cast<double>(cnt[1]) -
                                     sum[0] / static_cast<double>(cnt[0]));
        }
    }

    for (int r = 0; r < m; ++r)
        if (rep_tau[r].empty()) throw EstimationError("all bootstrap replicates were dropped");

    const double zq = stats::inv_normal_cdf(1.0 - config.alpha / 2.0);
    for (int r = 0; r < m; ++r) {
        ArmEstimate a;
        a.arm = r;
        a.tau_hat = tau_point[r];
        a.sigma_hat = rep_tau[r].size() >= 2 ? stats::sample_sd(rep_tau[r]) : 0.0;
        a.ci_lo = a.tau_hat - zq * a.sigma_hat;
        a.ci_hi = a.tau_hat + zq * a.sigma_hat;
        report.arms.push_back(a);
    }
    for (int r = 1; r < m; ++r) {
        EffectEstimate e;
        e.arm = r;
        e.diff = tau_point[r] - tau_point[0];
        e.sigma_hat = rep_diff[r].size() >= 2 ? stats::sample_sd(rep_diff[r]) : 0.0;
        e.ci_lo = e.diff - zq * e.sigma_hat;
        e.ci_hi = e.diff + zq * e.sigma_hat;
        report.effects.push_back(e);
    }
    if (shadow_ok && !rep_shadow.empty()) {
        report.has_shadow = true;
        report.shadow_diff = stats::mean(lambda_y[1]) - stats::mean(lambda_y[0]);
        const double sd = rep_shadow.size() >= 2 ? stats::sample_sd(rep_shadow) : 0.0;
        report.shadow_ci_lo = report.shadow_diff - zq * sd;
        report.shadow_ci_hi = report.shadow_diff + zq * sd;
    }
    return report;
}

}  // namespace oasis
