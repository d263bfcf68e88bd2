#include "oasis/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oasis/error.hpp"
#include "oasis/stats.hpp"
#include "oasis/tsv.hpp"

namespace oasis {

namespace {

constexpr double kPanelW = 260.0;
constexpr double kPanelH = 230.0;
constexpr double kMarginL = 52.0;
constexpr double kMarginB = 34.0;
constexpr double kMarginT = 26.0;

struct BoxStats {
    double q1, median, q3, whisker_lo, whisker_hi;
    std::vector<double> outliers;
};

BoxStats box_stats(const std::vector<double>& values) {
    BoxStats b{};
    b.q1 = stats::quantile(values, 0.25);
    b.median = stats::quantile(values, 0.5);
    b.q3 = stats::quantile(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_lo = b.q3;
    b.whisker_hi = b.q1;
    bool any = false;
    for (double v : values) {
        if (v < lo_fence || v > hi_fence) {
            b.outliers.push_back(v);
        } else {
            b.whisker_lo = any ? std::min(b.whisker_lo, v) : v;
            b.whisker_hi = any ? std::max(b.whisker_hi, v) : v;
            any = true;
        }
    }
    if (!any) {
        b.whisker_lo = b.q1;
        b.whisker_hi = b.q3;
    }
    return b;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void draw_box(std::ostringstream& svg, double cx, const BoxStats& b, const char* color,
              double x0, double y0, double ymin, double ymax, double plot_h) {
    auto ypix = [&](double v) { return y0 + plot_h - (v - ymin) / (ymax - ymin) * plot_h; };
    const double half = 18.0;
    svg << "<line x1='" << num(x0 + cx) << "' y1='" << num(ypix(b.whisker_lo)) << "' x2='"
        << num(x0 + cx) << "' y2='" << num(ypix(b.whisker_hi)) << "' stroke='" << color
        << "' stroke-width='1'/>\n";
    for (double w : {b.whisker_lo, b.whisker_hi})
        svg << "<line x1='" << num(x0 + cx - half / 2) << "' y1='" << num(ypix(w)) << "' x2='"
            << num(x0 + cx + half / 2) << "' y2='" << num(ypix(w)) << "' stroke='" << color
            << "' stroke-width='1'/>\n";
    svg << "<rect x='" << num(x0 + cx - half) << "' y='" << num(ypix(b.q3)) << "' width='"
        << num(2 * half) << "' height='" << num(ypix(b.q1) - ypix(b.q3)) << "' fill='" << color
        << "' fill-opacity='0.35' stroke='" << color << "'/>\n";
    svg << "<line x1='" << num(x0 + cx - half) << "' y1='" << num(ypix(b.median)) << "' x2='"
        << num(x0 + cx + half) << "' y2='" << num(ypix(b.median)) << "' stroke='" << color
        << "' stroke-width='2'/>\n";
    for (double o : b.outliers)
        svg << "<circle cx='" << num(x0 + cx) << "' cy='" << num(ypix(o))
            << "' r='2' fill='none' stroke='" << color << "'/>\n";
}

}  // namespace

void emit_box_plots(const std::vector<PlotCell>& cells, const std::filesystem::path& path) {
    if (cells.empty()) throw NoDataError("no result cells to plot");
    const int cols = static_cast<int>(std::min<std::size_t>(3, cells.size()));
    const int rows = static_cast<int>((cells.size() + cols - 1) / cols);
    const double width = cols * kPanelW;
    const double height = rows * kPanelH;

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' font-family='sans-serif' font-size='11'>\n";

    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<double> oasis_err, cb_err;
        for (const TrialResult& r : cells[c].results)
            (r.method == TrialMethod::Oasis ? oasis_err : cb_err).push_back(r.error());
        if (oasis_err.empty() && cb_err.empty())
            throw NoDataError("cell '" + cells[c].label + "' has no results");

        const double px = static_cast<double>(c % cols) * kPanelW;
        const double py = static_cast<double>(c / cols) * kPanelH;
        const double x0 = px + kMarginL;
        const double y0 = py + kMarginT;
        const double plot_w = kPanelW - kMarginL - 14.0;
        const double plot_h = kPanelH - kMarginT - kMarginB;

        double ymin = 0.0, ymax = 0.0;
        for (const auto* v : {&oasis_err, &cb_err})
            for (double e : *v) {
                ymin = std::min(ymin, e);
                ymax = std::max(ymax, e);
            }
        const double pad = std::max(1e-12, (ymax - ymin) * 0.08);
        ymin -= pad;
        ymax += pad;

        svg << "<rect x='" << num(x0) << "' y='" << num(y0) << "' width='" << num(plot_w)
            << "' height='" << num(plot_h) << "' fill='none' stroke='#888'/>\n";
        svg << "<text x='" << num(px + kPanelW / 2) << "' y='" << num(py + 15)
            << "' text-anchor='middle'>" << cells[c].label << "</text>\n";

        // zero-error reference
        const double yz = y0 + plot_h - (0.0 - ymin) / (ymax - ymin) * plot_h;
        svg << "<line x1='" << num(x0) << "' y1='" << num(yz) << "' x2='" << num(x0 + plot_w)
            << "' y2='" << num(yz) << "' stroke='#bbb' stroke-dasharray='4,3'/>\n";
        for (double tick : {ymin + pad, 0.0, ymax - pad}) {
            const double ty = y0 + plot_h - (tick - ymin) / (ymax - ymin) * plot_h;
            svg << "<text x='" << num(x0 - 4) << "' y='" << num(ty + 3)
                << "' text-anchor='end' font-size='9'>" << num(std::round(tick * 1e4) / 1e4)
                << "</text>\n";
        }

        if (!oasis_err.empty())
            draw_box(svg, plot_w * 0.3, box_stats(oasis_err), "#1f77b4", x0, y0, ymin, ymax,
                     plot_h);
        if (!cb_err.empty())
            draw_box(svg, plot_w * 0.7, box_stats(cb_err), "#d62728", x0, y0, ymin, ymax, plot_h);
        svg << "<text x='" << num(x0 + plot_w * 0.3) << "' y='" << num(y0 + plot_h + 14)
            << "' text-anchor='middle'>oasis</text>\n";
        svg << "<text x='" << num(x0 + plot_w * 0.7) << "' y='" << num(y0 + plot_h + 14)
            << "' text-anchor='middle'>cb</text>\n";
    }
    svg << "</svg>\n";

    tsv::Writer w(path);
    w.line(svg.str());
    w.close();
}

void emit_coverage_chart(const std::vector<PlotCell>& cells, double nominal,
                         const std::filesystem::path& path) {
    if (cells.empty()) throw NoDataError("no result cells to plot");
    const double bar_w = 34.0;
    const double group_w = bar_w * 2 + 36.0;
    const double width = kMarginL + cells.size() * group_w + 20.0;
    const double height = 260.0;
    const double plot_h = height - kMarginT - kMarginB;

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' font-family='sans-serif' font-size='11'>\n";
    auto ypix = [&](double v) { return kMarginT + plot_h * (1.0 - v); };

    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto summary = summarize(cells[c].results);
        const double gx = kMarginL + static_cast<double>(c) * group_w;
        for (const MethodSummary& s : summary) {
            const bool is_oasis = s.method == TrialMethod::Oasis;
            const double bx = gx + (is_oasis ? 0.0 : bar_w + 6.0);
            const char* color = is_oasis ? "#1f77b4" : "#d62728";
            svg << "<rect x='" << num(bx) << "' y='" << num(ypix(s.coverage)) << "' width='"
                << num(bar_w) << "' height='" << num(plot_h * s.coverage) << "' fill='" << color
                << "' fill-opacity='0.7'/>\n";
            svg << "<text x='" << num(bx + bar_w / 2) << "' y='" << num(ypix(s.coverage) - 3)
                << "' text-anchor='middle' font-size='9'>" << num(std::round(s.coverage * 1000) / 1000)
                << "</text>\n";
        }
        svg << "<text x='" << num(gx + bar_w) << "' y='" << num(height - 12)
            << "' text-anchor='middle'>" << cells[c].label << "</text>\n";
    }
    svg << "<line x1='" << num(kMarginL - 6) << "' y1='" << num(ypix(nominal)) << "' x2='"
        << num(width - 10) << "' y2='" << num(ypix(nominal))
        << "' stroke='#444' stroke-dasharray='5,3'/>\n";
    svg << "<text x='" << num(kMarginL - 8) << "' y='" << num(ypix(nominal) + 3)
        << "' text-anchor='end' font-size='9'>" << num(nominal) << "</text>\n";
    svg << "</svg>\n";

    tsv::Writer w(path);
    w.line(svg.str());
    w.close();
}

}  // namespace oasis
