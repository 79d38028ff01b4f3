#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelbudget/effort_model.hpp"

namespace labelbudget {

struct PerfPoint {
    double effort = 0.0;
    double perf_norm = 0.0;
    std::optional<VirtueSnapshot> virtues;
    std::string id;
};

/// perf_raw / baseline_perf; not clamped, so values above 1 are possible.
[[nodiscard]] double normalize(double perf_raw, double baseline_perf);

/// Upper convex hull by monotone chain, after collapsing equal efforts to the
/// best-performing point. Collinear interior points are dropped.
[[nodiscard]] std::vector<PerfPoint> upper_hull(std::span<const PerfPoint> points);

struct Trajectory {
    std::vector<PerfPoint> vertices;  // strictly increasing effort, non-decreasing perf
};

/// Upper hull truncated at its first global-maximum vertex.
[[nodiscard]] Trajectory optimal_trajectory(std::span<const PerfPoint> points);

/// Height of the trajectory polyline at `effort`, or nullopt outside its span.
[[nodiscard]] std::optional<double> trajectory_height(const Trajectory& t, double effort);

/// True when no point with effort inside the trajectory's span lies more than
/// `tolerance` above it.
[[nodiscard]] bool no_point_above(const Trajectory& t, std::span<const PerfPoint> points, double tolerance = 1e-9);

enum class Virtue { diversity, completeness, quality };

[[nodiscard]] std::string_view to_string(Virtue v) noexcept;
[[nodiscard]] double virtue_value(const VirtueSnapshot& s, Virtue v) noexcept;

struct ImportancePoint {
    double perf_norm = 0.0;
    double value = 0.0;
};

struct ImportanceSeries {
    Virtue virtue = Virtue::quality;
    std::vector<ImportancePoint> points;  // sorted by perf_norm
};

/// One (perf_norm, virtue value) point per trajectory vertex and virtue.
[[nodiscard]] std::vector<ImportanceSeries> importance_curves(const Trajectory& t, std::span<const Virtue> virtues);

/// perf_norm at which `series` first reaches `threshold`, or nullopt.
[[nodiscard]] std::optional<double> first_reaching(const ImportanceSeries& series, double threshold);

struct CurvePoint {
    double value = 0.0;  // virtue value, ascending
    double perf_norm = 0.0;
};

/// Smallest virtue value v_i such that each of the next `window` forward
/// differences of perf_norm is below epsilon * max(perf_norm); nullopt if none.
[[nodiscard]] std::optional<double> detect_saturation(std::span<const CurvePoint> curve, double epsilon = 0.01,
                                                      int window = 2);

}  // namespace labelbudget
