#pragma once

#include <span>
#include <string>
#include <vector>

namespace mptx {

struct Bar {
    std::string label;
    double value = 0.0;
};

/// Horizontal bars, first bar on top; negative values extend left of the axis.
std::string bar_chart_svg(const std::string& title, std::span<const Bar> bars);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           std::span<const Series> series);

}  // namespace mptx
