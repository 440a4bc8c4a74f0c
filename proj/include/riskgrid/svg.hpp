#ifndef RISKGRID_SVG_HPP
#define RISKGRID_SVG_HPP

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "riskgrid/dataset.hpp"
#include "riskgrid/explain.hpp"
#include "riskgrid/schema.hpp"

namespace riskgrid {

// Force plot: signed attribution segments pushing the score from the base
// value to the prediction. Positive pushes are red and applied first (by
// magnitude), negative pulls blue. SVG 1.1, fixed viewport, top-6 labels.
inline std::string force_plot_svg(const ForceData& fd, const FeatureSchema& schema,
                                  const std::vector<std::size_t>& feature_indices,
                                  const std::string& title) {
    const double width = 920.0, height = 190.0;
    const double x0 = 50.0, x1 = 870.0;
    const double bar_top = 70.0, bar_h = 34.0;

    // walk: base -> apply positives (|phi| desc) -> apply negatives
    struct Seg {
        double from, to;
        bool up;
        std::size_t feature;
        double value, phi;
    };
    std::vector<Seg> segs;
    double cur = fd.base_value;
    for (const auto& e : fd.entries)
        if (e.increases) {
            segs.push_back({cur, cur + e.phi, true, e.feature, e.value, e.phi});
            cur += e.phi;
        }
    for (const auto& e : fd.entries)
        if (!e.increases) {
            segs.push_back({cur, cur + e.phi, false, e.feature, e.value, e.phi});
            cur += e.phi;
        }

    double lo = std::min(fd.base_value, fd.prediction);
    double hi = std::max(fd.base_value, fd.prediction);
    for (const auto& s : segs) {
        lo = std::min({lo, s.from, s.to});
        hi = std::max({hi, s.from, s.to});
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto sx = [&](double v) { return x0 + (v - lo) / (hi - lo) * (x1 - x0); };
    auto fmt = [](double v) { return detail::format_double(v); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << x0 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" "
        << "font-weight=\"bold\">" << title << "</text>\n";

    for (const auto& s : segs) {
        double a = sx(s.from), b = sx(s.to);
        if (b < a) std::swap(a, b);
        svg << "<rect x=\"" << fmt(a) << "\" y=\"" << bar_top << "\" width=\""
            << fmt(std::max(0.75, b - a)) << "\" height=\"" << bar_h << "\" fill=\""
            << (s.up ? "#d62728" : "#1f77b4") << "\" fill-opacity=\"0.85\"/>\n";
    }

    // base and prediction markers
    for (auto [v, label] : {std::pair<double, const char*>{fd.base_value, "base"},
                            std::pair<double, const char*>{fd.prediction, "prediction"}}) {
        double x = sx(v);
        svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << (bar_top - 16) << "\" x2=\"" << fmt(x)
            << "\" y2=\"" << (bar_top + bar_h + 12) << "\" stroke=\"#333\" "
            << "stroke-dasharray=\"3,2\"/>\n";
        svg << "<text x=\"" << fmt(x + 3) << "\" y=\"" << (bar_top - 20)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << label << " = " << fmt(v)
            << "</text>\n";
    }

    // top-6 labels by magnitude
    std::size_t labels = std::min<std::size_t>(6, segs.size());
    std::vector<Seg> by_mag = segs;
    std::stable_sort(by_mag.begin(), by_mag.end(), [](const Seg& a, const Seg& b) {
        return std::fabs(a.phi) > std::fabs(b.phi);
    });
    double ly = bar_top + bar_h + 34.0;
    for (std::size_t i = 0; i < labels; ++i) {
        const Seg& s = by_mag[i];
        const std::string& abbrev = schema[feature_indices[s.feature]].abbrev;
        svg << "<text x=\"" << x0 + double(i) * 138.0 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
            << (s.up ? "#d62728" : "#1f77b4") << "\">" << abbrev << "=" << fmt(s.value) << " ("
            << (s.phi > 0 ? "+" : "") << fmt(s.phi) << ")</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace riskgrid

#endif
