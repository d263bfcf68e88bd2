#pragma once

#include <memory>
#include <span>
#include <vector>

namespace oasis {

struct KdeConfig {
    int grid_cells = 1024;
    double bandwidth_scale = 1.0;  // multiplies the Silverman bandwidth
    double floor_fraction = 1e-12; // floor = fraction * peak density
};

// One-dimensional density estimate: either an exact Gaussian or a
// Gaussian-kernel KDE with Silverman bandwidth 1.06 * sd * n^(-1/5),
// pre-evaluated on a uniform grid (linear binning + kernel convolution) and
// interpolated at query time. Evaluation is floored at a small positive
// value so likelihood ratios cannot blow up.
//
// A location-scale view re-targets the density to new moments:
//   f(z) = (sd_src/sd_dst) * base((z - mu_dst) * sd_src / sd_dst + mu_src)
// which keeps the integral at 1 and moves mean/sd to (mu_dst, sd_dst).
class DensityModel {
  public:
    enum class Kind { Kde, Gaussian };

    static DensityModel gaussian(double mean, double sd);
    // Throws DegenerateDensityError when fewer than 2 samples or zero variance.
    static DensityModel kde(std::span<const double> samples, const KdeConfig& config = KdeConfig());

    double operator()(double z) const;

    DensityModel location_scale(double mu_src, double sd_src, double mu_dst, double sd_dst) const;

    Kind kind() const { return kind_; }
    double bandwidth() const { return bandwidth_; }
    double floor() const { return floor_; }

  private:
    struct Grid {
        double lo = 0.0;
        double step = 1.0;
        std::vector<double> values;
    };

    DensityModel() = default;
    double base_eval(double z) const;

    Kind kind_ = Kind::Gaussian;
    double mean_ = 0.0;
    double sd_ = 1.0;
    double bandwidth_ = 0.0;
    double floor_ = 0.0;
    std::shared_ptr<const Grid> grid_;  // shared so transformed views stay cheap

    // Location-scale transform (identity by default).
    double t_mu_src_ = 0.0, t_sd_src_ = 1.0, t_mu_dst_ = 0.0, t_sd_dst_ = 1.0;
    bool transformed_ = false;
};

}  // namespace oasis
