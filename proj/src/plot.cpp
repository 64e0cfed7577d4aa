#include "econoport/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "econoport/errors.hpp"

namespace econoport {

namespace {

constexpr double kWidth = 720.0;
constexpr double kPanelHeight = 240.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kGap = 50.0;
constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

/// Round the range outward to a tidy step.
std::pair<double, double> nice_range(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) return {-1.0, 1.0};
    if (hi - lo < 1e-9) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double step = std::pow(10.0, std::floor(std::log10(hi - lo)));
    return {std::floor(lo / step) * step, std::ceil(hi / step) * step};
}

void panel(std::ostringstream& os, const char* id, const char* ylabel, double y0, const Spectrum& sp,
           const std::vector<std::vector<double>>& data, double lf0, double lf1) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& col : data) {
        for (std::size_t i = 0; i < col.size(); ++i) {
            if (!sp.gaps[i].empty() || !std::isfinite(col[i])) continue;
            lo = std::min(lo, col[i]);
            hi = std::max(hi, col[i]);
        }
    }
    const auto [ymin, ymax] = nice_range(lo, hi);
    const double plot_w = kWidth - kLeft - kRight;
    auto px = [&](double f) { return kLeft + (std::log10(f) - lf0) / (lf1 - lf0) * plot_w; };
    auto py = [&](double v) { return y0 + kPanelHeight - (v - ymin) / (ymax - ymin) * kPanelHeight; };

    os << "<g id=\"" << id << "\">\n";
    os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(y0) << "\" width=\"" << num(plot_w) << "\" height=\""
       << num(kPanelHeight) << "\" fill=\"none\" stroke=\"#000\"/>\n";
    for (int dec = static_cast<int>(std::ceil(lf0)); dec <= static_cast<int>(std::floor(lf1)); ++dec) {
        const double x = px(std::pow(10.0, dec));
        os << "<line x1=\"" << num(x) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x) << "\" y2=\""
           << num(y0 + kPanelHeight) << "\" stroke=\"#ccc\"/>\n";
        os << "<text x=\"" << num(x) << "\" y=\"" << num(y0 + kPanelHeight + 16) << "\" text-anchor=\"middle\""
           << " font-size=\"11\">1e" << dec << "</text>\n";
    }
    for (int k = 0; k <= 4; ++k) {
        const double v = ymin + (ymax - ymin) * k / 4.0;
        const double y = py(v);
        os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kWidth - kRight) << "\" y2=\""
           << num(y) << "\" stroke=\"#eee\"/>\n";
        os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
           << num(v) << "</text>\n";
    }
    os << "<text x=\"14\" y=\"" << num(y0 + kPanelHeight / 2) << "\" font-size=\"12\" transform=\"rotate(-90 14 "
       << num(y0 + kPanelHeight / 2) << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";

    for (std::size_t c = 0; c < data.size(); ++c) {
        const char* color = kColors[c % kColors.size()];
        std::ostringstream pts;
        auto flush = [&] {
            if (!pts.str().empty()) {
                os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
                   << "\"/>\n";
            }
            pts.str("");
        };
        for (std::size_t i = 0; i < sp.freqs.size(); ++i) {
            if (!sp.gaps[i].empty() || !std::isfinite(data[c][i])) {
                flush();
                continue;
            }
            if (!pts.str().empty()) pts << ' ';
            pts << num(px(sp.freqs[i])) << ',' << num(py(data[c][i]));
        }
        flush();
    }
    os << "</g>\n";
}

}  // namespace

std::string bode_svg(const Spectrum& sp, const std::string& title) {
    if (sp.freqs.empty()) throw Error("bode plot needs at least one frequency");
    const double fmin = *std::min_element(sp.freqs.begin(), sp.freqs.end());
    const double fmax = *std::max_element(sp.freqs.begin(), sp.freqs.end());
    if (fmin <= 0.0) throw Error("bode plot needs strictly positive frequencies for a log axis");
    double lf0 = std::log10(fmin);
    double lf1 = std::log10(fmax);
    if (lf1 - lf0 < 1e-9) {
        lf0 -= 0.5;
        lf1 += 0.5;
    }
    const double height = kTop + 2 * kPanelHeight + kGap + 60.0;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(height)
       << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(height) << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\"" << num(height) << "\" fill=\"#fff\"/>\n";
    if (!title.empty()) {
        os << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
           << "</text>\n";
    }
    panel(os, "magnitude", "magnitude [dB]", kTop, sp, sp.magnitude_db, lf0, lf1);
    panel(os, "phase", "phase [deg]", kTop + kPanelHeight + kGap, sp, sp.phase_deg, lf0, lf1);
    os << "<g id=\"legend\">\n";
    for (std::size_t c = 0; c < sp.columns.size(); ++c) {
        const double y = height - 14.0;
        const double x = kLeft + 160.0 * static_cast<double>(c);
        os << "<line x1=\"" << num(x) << "\" y1=\"" << num(y - 4) << "\" x2=\"" << num(x + 20) << "\" y2=\""
           << num(y - 4) << "\" stroke=\"" << kColors[c % kColors.size()] << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(x + 26) << "\" y=\"" << num(y) << "\" font-size=\"11\">"
           << escape(sp.columns[c].label) << "</text>\n";
    }
    os << "</g>\n";
    os << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(height - 30) << "\" text-anchor=\"middle\" font-size=\"12\">"
       << "frequency [cycles/yr]</text>\n";
    os << "</svg>\n";
    return os.str();
}

bool svg_subset_element(const std::string& name) {
    static const std::array<const char*, 6> kAllowed{"svg", "g", "rect", "line", "polyline", "text"};
    return std::any_of(kAllowed.begin(), kAllowed.end(), [&](const char* a) { return name == a; });
}

}  // namespace econoport
