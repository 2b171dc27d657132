#include "splitfed/svg.hpp"

#include "splitfed/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace splitfed::svg {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 480;
constexpr double kLeft = 80;
constexpr double kRight = 30;
constexpr double kTop = 40;
constexpr double kBottom = 60;

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                   "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& text)
{
    std::string out;
    for (const char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

// Whole decades [lo, hi] covering the data, at least one decade wide.
std::pair<int, int> decades(double min, double max)
{
    int lo = static_cast<int>(std::floor(std::log10(min)));
    int hi = static_cast<int>(std::ceil(std::log10(max)));
    if (hi <= lo)
        hi = lo + 1;
    return {lo, hi};
}

} // namespace

std::string render_break_even(const std::vector<cost::BreakEvenCurve>& curves, const std::string& title)
{
    double k_min = INFINITY, k_max = 0, n_min = INFINITY, n_max = 0;
    for (const auto& curve : curves)
        for (const auto& [k, n] : curve.points) {
            k_min = std::min(k_min, static_cast<double>(k));
            k_max = std::max(k_max, static_cast<double>(k));
            n_min = std::min(n_min, n);
            n_max = std::max(n_max, n);
        }
    if (!(k_max > 0) || !(n_max > 0) || !(n_min > 0))
        throw InvalidParam("nothing to plot");

    const auto [kx_lo, kx_hi] = decades(k_min, k_max);
    const auto [ny_lo, ny_hi] = decades(n_min, n_max);
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto x_of = [&](double k) { return kLeft + (std::log10(k) - kx_lo) / (kx_hi - kx_lo) * plot_w; };
    auto y_of = [&](double n) {
        return kTop + plot_h - (std::log10(n) - ny_lo) / (ny_hi - ny_lo) * plot_h;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\">"
        << escape(title) << "</text>\n";

    // Axes, decade ticks and grid lines.
    svg << "<g stroke=\"#cccccc\" stroke-width=\"1\">\n";
    for (int d = kx_lo; d <= kx_hi; ++d) {
        const double x = x_of(std::pow(10.0, d));
        svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(x) << "\" y2=\""
            << num(kTop + plot_h) << "\"/>\n";
    }
    for (int d = ny_lo; d <= ny_hi; ++d) {
        const double y = y_of(std::pow(10.0, d));
        svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft + plot_w)
            << "\" y2=\"" << num(y) << "\"/>\n";
    }
    svg << "</g>\n";
    svg << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(plot_w)
        << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";

    svg << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (int d = kx_lo; d <= kx_hi; ++d)
        svg << "<text x=\"" << num(x_of(std::pow(10.0, d))) << "\" y=\"" << num(kTop + plot_h + 18)
            << "\" text-anchor=\"middle\">1e" << d << "</text>\n";
    for (int d = ny_lo; d <= ny_hi; ++d)
        svg << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y_of(std::pow(10.0, d)) + 4)
            << "\" text-anchor=\"end\">1e" << d << "</text>\n";
    svg << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 15)
        << "\" text-anchor=\"middle\">number of clients K</text>\n";
    svg << "<text transform=\"translate(20 " << num(kTop + plot_h / 2)
        << ") rotate(-90)\" text-anchor=\"middle\">model parameters N</text>\n";
    svg << "</g>\n";

    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& curve = curves[i];
        const char* color = kColors[i % std::size(kColors)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [k, n] : curve.points)
            svg << num(x_of(static_cast<double>(k))) << ',' << num(y_of(n)) << ' ';
        svg << "\"/>\n";
        for (const auto& [k, n] : curve.points)
            svg << "<circle cx=\"" << num(x_of(static_cast<double>(k))) << "\" cy=\"" << num(y_of(n))
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        svg << "<text x=\"" << num(kLeft + plot_w - 8) << "\" y=\"" << num(kTop + 18 + 16.0 * i)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << color
            << "\">" << cost::to_string(curve.method) << " p=" << curve.dataset_size
            << " q=" << curve.smashed_size << " eta=" << escape(curve.client_fraction.to_string())
            << "</text>\n";
    }

    svg << "<g font-family=\"sans-serif\" font-size=\"13\" font-style=\"italic\">\n";
    svg << "<text x=\"" << num(kLeft + plot_w - 10) << "\" y=\"" << num(kTop + plot_h * 0.35)
        << "\" text-anchor=\"end\" fill=\"#444444\">split learning more efficient</text>\n";
    svg << "<text x=\"" << num(kLeft + 10) << "\" y=\"" << num(kTop + plot_h - 12)
        << "\" fill=\"#444444\">federated learning more efficient</text>\n";
    svg << "</g>\n</svg>\n";
    return svg.str();
}

} // namespace splitfed::svg
