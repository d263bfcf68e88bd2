#include "oasis/density.hpp"

#include <algorithm>
#include <cmath>

#include "oasis/error.hpp"
#include "oasis/stats.hpp"

namespace oasis {

DensityModel DensityModel::gaussian(double mean, double sd) {
    if (!(sd > 0.0)) throw DegenerateDensityError("gaussian density needs sd > 0");
    DensityModel m;
    m.kind_ = Kind::Gaussian;
    m.mean_ = mean;
    m.sd_ = sd;
    m.floor_ = 1e-12 * stats::normal_pdf(mean, mean, sd);
    return m;
}

DensityModel DensityModel::kde(std::span<const double> samples, const KdeConfig& config) {
    const auto n = samples.size();
    if (n < 2) throw DegenerateDensityError("kde needs at least 2 samples");
    const double sd = stats::sample_sd(samples);
    if (!(sd > 0.0)) throw DegenerateDensityError("kde needs positive sample variance");

    const double h = config.bandwidth_scale * 1.06 * sd *
                     std::pow(static_cast<double>(n), -0.2);  // Silverman

    double lo = samples[0], hi = samples[0];
    for (double x : samples) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double cushion = 5.0 * h;
    lo -= cushion;
    hi += cushion;

    auto grid = std::make_shared<Grid>();
    const int cells = std::max(64, config.grid_cells);
    grid->lo = lo;
    grid->step = (hi - lo) / cells;
    grid->values.assign(cells + 1, 0.0);

    // Linear binning, then convolution with the kernel sampled at grid
    // offsets; O(n + cells * kernel_width) instead of O(n * evals).
    std::vector<double> bin(cells + 1, 0.0);
    for (double x : samples) {
        const double pos = (x - lo) / grid->step;
        const auto i = static_cast<int>(pos);
        const double frac = pos - i;
        bin[i] += 1.0 - frac;
        bin[i + 1] += frac;
    }
    const int half = static_cast<int>(std::ceil(5.0 * h / grid->step));
    std::vector<double> kernel(half + 1);
    const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * 3.14159265358979323846));
    for (int o = 0; o <= half; ++o) {
        const double t = o * grid->step / h;
        kernel[o] = norm * std::exp(-0.5 * t * t);
    }
    for (int b = 0; b <= cells; ++b) {
        if (bin[b] == 0.0) continue;
        const int c0 = std::max(0, b - half);
        const int c1 = std::min(cells, b + half);
        for (int c = c0; c <= c1; ++c) grid->values[c] += bin[b] * kernel[std::abs(c - b)];
    }
    double peak = 0.0;
    for (double v : grid->values) peak = std::max(peak, v);

    DensityModel m;
    m.kind_ = Kind::Kde;
    m.bandwidth_ = h;
    m.floor_ = config.floor_fraction * peak;
    m.grid_ = std::move(grid);
    return m;
}

double DensityModel::base_eval(double z) const {
    if (kind_ == Kind::Gaussian) return stats::normal_pdf(z, mean_, sd_);
    const Grid& g = *grid_;
    const double pos = (z - g.lo) / g.step;
    if (pos <= 0.0 || pos >= static_cast<double>(g.values.size() - 1)) return 0.0;
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return g.values[i] + frac * (g.values[i + 1] - g.values[i]);
}

double DensityModel::operator()(double z) const {
    double v;
    if (transformed_) {
        const double t = t_mu_src_ + t_sd_src_ * (z - t_mu_dst_) / t_sd_dst_;
        v = (t_sd_src_ / t_sd_dst_) * base_eval(t);
    } else {
        v = base_eval(z);
    }
    return std::max(v, floor_);
}

DensityModel DensityModel::location_scale(double mu_src, double sd_src, double mu_dst,
                                          double sd_dst) const {
    if (!(sd_src > 0.0) || !(sd_dst > 0.0))
        throw DegenerateDensityError("location_scale needs positive standard deviations");
    DensityModel out = *this;
    out.t_mu_src_ = mu_src;
    out.t_sd_src_ = sd_src;
    out.t_mu_dst_ = mu_dst;
    out.t_sd_dst_ = sd_dst;
    out.transformed_ = true;
    out.floor_ = floor_ * (sd_src / sd_dst);
    return out;
}

}  // namespace oasis
