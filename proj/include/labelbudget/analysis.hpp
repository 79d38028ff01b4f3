#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelbudget/effort_model.hpp"
#include "labelbudget/experiment_runner.hpp"
#include "labelbudget/trajectory.hpp"

namespace labelbudget {

/// Valid aggregated cells as (effort, perf_norm) points for one effort axis.
[[nodiscard]] std::vector<PerfPoint> perf_points(std::span<const ExperimentPoint> points, EffortAxis axis);

/// The two virtues compared on an effort axis: (quality, diversity) or (completeness, diversity).
[[nodiscard]] std::vector<Virtue> compared_virtues(EffortAxis axis);

/// One performance-vs-diversity line with the other virtues held at one level.
struct DiversityCurve {
    double completeness = 1.0;
    int quality_rank = 0;        // 0 = lowest quality level present at each diversity
    double quality_level = 0.0;  // median achieved quality of the members
    std::vector<CurvePoint> points;
};

/// Groups valid cells by completeness and by quality rank within each
/// (diversity, completeness) bucket, then orders each group by diversity.
[[nodiscard]] std::vector<DiversityCurve> diversity_curves(std::span<const ExperimentPoint> points);

struct SaturationResult {
    DiversityCurve curve;
    std::optional<double> saturation;
};

/// detect_saturation per curve; curves shorter than window + 1 are skipped.
[[nodiscard]] std::vector<SaturationResult> saturation_table(std::span<const ExperimentPoint> points, double epsilon,
                                                             int window);

[[nodiscard]] std::string trajectory_csv(const Trajectory& t);
[[nodiscard]] std::string importance_csv(std::span<const ImportanceSeries> series);
[[nodiscard]] std::string saturation_csv(std::span<const SaturationResult> rows);

struct TrajectoryRow {
    double effort = 0.0;
    double perf_norm = 0.0;
    VirtueSnapshot virtues;
};
[[nodiscard]] std::vector<TrajectoryRow> parse_trajectory_csv(std::string_view text);

}  // namespace labelbudget
