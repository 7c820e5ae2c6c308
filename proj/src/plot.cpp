#include "mptx/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mptx/error.hpp"

namespace mptx {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
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

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string text(double x, double y, const std::string& body, const char* anchor = "start", int size = 12) {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
           "\" text-anchor=\"" + anchor + "\">" + escape(body) + "</text>\n";
}

std::string line(double x1, double y1, double x2, double y2, const char* stroke = "#444") {
    return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
           "\" stroke=\"" + stroke + "\" stroke-width=\"1\"/>\n";
}

std::string header(double width, double height, const std::string& title) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
           "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + text(width / 2, 24, title, "middle", 15);
}

}  // namespace

std::string bar_chart_svg(const std::string& title, std::span<const Bar> bars) {
    const double label_width = 260, plot_width = 420, row = 22, top = 44, margin = 20;
    const double height = top + row * static_cast<double>(std::max<std::size_t>(bars.size(), 1)) + 40;
    const double width = label_width + plot_width + 2 * margin;

    double lo = 0.0, hi = 0.0;
    for (const auto& b : bars) {
        lo = std::min(lo, b.value);
        hi = std::max(hi, b.value);
    }
    if (hi - lo <= 0.0) hi = lo + 1.0;
    const double x0 = margin + label_width;
    auto sx = [&](double v) { return x0 + (v - lo) / (hi - lo) * plot_width; };

    std::string svg = header(width, height, title);
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double y = top + row * static_cast<double>(i);
        const double a = sx(std::min(0.0, bars[i].value));
        const double b = sx(std::max(0.0, bars[i].value));
        svg += text(x0 - 6, y + row * 0.7, bars[i].label, "end", 11);
        svg += "<rect x=\"" + num(a) + "\" y=\"" + num(y + 3) + "\" width=\"" + num(std::max(b - a, 0.5)) +
               "\" height=\"" + num(row - 6) + "\" fill=\"" + (bars[i].value >= 0 ? kPalette[0] : kPalette[1]) +
               "\"/>\n";
    }
    const double axis_y = top + row * static_cast<double>(bars.size()) + 4;
    svg += line(sx(0.0), top, sx(0.0), axis_y);
    svg += line(x0, axis_y, x0 + plot_width, axis_y);
    svg += text(x0, axis_y + 16, tick(lo), "middle", 10);
    svg += text(x0 + plot_width, axis_y + 16, tick(hi), "middle", 10);
    svg += "</svg>\n";
    return svg;
}

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           std::span<const Series> series) {
    const double width = 640, height = 420, left = 70, right = 150, top = 44, bottom = 60;
    const double pw = width - left - right, ph = height - top - bottom;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) fail(ErrorCode::invalid_argument, "series '" + s.name + "' has mismatched axes");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax - xmin <= 0) xmax = xmin + 1;
    if (ymax - ymin <= 0) ymax = ymin + 1;
    auto sx = [&](double v) { return left + (v - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double v) { return top + ph - (v - ymin) / (ymax - ymin) * ph; };

    std::string svg = header(width, height, title);
    svg += line(left, top + ph, left + pw, top + ph);
    svg += line(left, top, left, top + ph);
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        svg += text(sx(fx), top + ph + 16, tick(fx), "middle", 10);
        svg += text(left - 6, sy(fy) + 4, tick(fy), "end", 10);
    }
    svg += text(left + pw / 2, height - 18, x_label, "middle");
    svg += "<text x=\"18\" y=\"" + num(top + ph / 2) + "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
           num(top + ph / 2) + ")\">" + escape(y_label) + "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* colour = kPalette[k % std::size(kPalette)];
        std::string points;
        for (std::size_t i = 0; i < series[k].x.size(); ++i) {
            points += num(sx(series[k].x[i])) + "," + num(sy(series[k].y[i])) + " ";
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"2\" points=\"" + points +
               "\"/>\n";
        const double ly = top + 14 + 18 * static_cast<double>(k);
        svg += line(left + pw + 12, ly - 4, left + pw + 32, ly - 4, colour);
        svg += text(left + pw + 36, ly, series[k].name, "start", 11);
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace mptx
