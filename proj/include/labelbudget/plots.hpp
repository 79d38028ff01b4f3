#pragma once

#include <span>
#include <string>

#include "labelbudget/analysis.hpp"
#include "labelbudget/effort_model.hpp"
#include "labelbudget/experiment_runner.hpp"
#include "labelbudget/trajectory.hpp"

namespace labelbudget {

/// Data-to-pixel mapping of one plot area. SVG y grows downwards.
struct PlotFrame {
    double x_min = 0.0;
    double x_max = 1.0;
    double y_min = 0.0;
    double y_max = 1.0;
    double left = 70.0;
    double top = 40.0;
    double width = 560.0;
    double height = 400.0;

    [[nodiscard]] double px(double x) const noexcept { return left + (x - x_min) / (x_max - x_min) * width; }
    [[nodiscard]] double py(double y) const noexcept { return top + height - (y - y_min) / (y_max - y_min) * height; }
    [[nodiscard]] double data_x(double px) const noexcept { return x_min + (px - left) / width * (x_max - x_min); }
    [[nodiscard]] double data_y(double py) const noexcept {
        return y_min + (top + height - py) / height * (y_max - y_min);
    }
};

/// Effort/performance scatter with the optimal trajectory. For the
/// quality-diversity axis quality is encoded by color and diversity by marker
/// shape; for diversity-completeness diversity is the color and completeness
/// the marker. Each data point is one element with class="marker"; the
/// trajectory is one <polyline class="trajectory">.
[[nodiscard]] std::string render_trajectory_svg(std::span<const ExperimentPoint> points, EffortAxis axis,
                                                const Trajectory& trajectory);

/// Virtue value (fraction scale; quality / 100) against normalized performance.
[[nodiscard]] std::string render_importance_svg(std::span<const ImportanceSeries> series, EffortAxis axis);

/// Performance against diversity, one line per virtue group, detected
/// saturation points ringed.
[[nodiscard]] std::string render_saturation_svg(std::span<const SaturationResult> rows);

struct PlotSet {
    std::string trajectory;
    std::string importance;
    std::string saturation;
};

/// All three documents from aggregated results alone.
[[nodiscard]] PlotSet render_plots(std::span<const ExperimentPoint> points, EffortAxis axis, double epsilon = 0.01,
                                   int window = 2);

}  // namespace labelbudget
