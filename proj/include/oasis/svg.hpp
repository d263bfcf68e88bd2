#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oasis/sim.hpp"

namespace oasis {

struct PlotCell {
    std::string label;
    std::vector<TrialResult> results;
};

// One panel per cell, OASIS and CB box plots side by side (quartile boxes,
// 1.5 IQR whiskers, outlier dots). Panels are laid out three per row.
void emit_box_plots(const std::vector<PlotCell>& cells, const std::filesystem::path& path);

// Grouped bars of empirical coverage per cell and method, with the nominal
// level marked.
void emit_coverage_chart(const std::vector<PlotCell>& cells, double nominal,
                         const std::filesystem::path& path);

}  // namespace oasis
