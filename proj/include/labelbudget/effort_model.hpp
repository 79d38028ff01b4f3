#pragma once

#include <string_view>

namespace labelbudget {

enum class EffortAxis { quality_diversity, diversity_completeness };

[[nodiscard]] std::string_view to_string(EffortAxis axis) noexcept;
/// Accepts "qd", "quality-diversity", "dc", "diversity-completeness".
[[nodiscard]] EffortAxis effort_axis_from_string(std::string_view s);

struct VirtueSnapshot {
    double diversity = 1.0;
    double completeness = 1.0;
    double quality_pct = 100.0;
};

struct EffortPoint {
    double effort = 0.0;
    EffortAxis axis = EffortAxis::quality_diversity;
    VirtueSnapshot virtues;
};

/// Portion of volumes times label quality: diversity * quality_pct / 100.
[[nodiscard]] double effort_qd(double diversity, double quality_pct);

/// Portion of all labeled slices segmented: diversity * completeness.
[[nodiscard]] double effort_dc(double diversity, double completeness);

[[nodiscard]] EffortPoint effort_point(EffortAxis axis, const VirtueSnapshot& v);

}  // namespace labelbudget
