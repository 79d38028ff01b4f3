#include "labelbudget/effort_model.hpp"

#include <fmt/format.h>

#include "labelbudget/error.hpp"

namespace labelbudget {

std::string_view to_string(EffortAxis axis) noexcept {
    return axis == EffortAxis::quality_diversity ? "quality-diversity" : "diversity-completeness";
}

EffortAxis effort_axis_from_string(std::string_view s) {
    if (s == "qd" || s == "quality-diversity") return EffortAxis::quality_diversity;
    if (s == "dc" || s == "diversity-completeness") return EffortAxis::diversity_completeness;
    throw DomainError(fmt::format("unknown effort axis '{}' (expected qd or dc)", s));
}

double effort_qd(double diversity, double quality_pct) {
    if (!(diversity > 0.0 && diversity <= 1.0))
        throw DomainError(fmt::format("effort_qd: diversity must be in (0, 1], got {}", diversity));
    if (!(quality_pct >= 0.0 && quality_pct <= 100.0))
        throw DomainError(fmt::format("effort_qd: quality must be in [0, 100], got {}", quality_pct));
    return diversity * quality_pct / 100.0;
}

double effort_dc(double diversity, double completeness) {
    if (!(diversity > 0.0 && diversity <= 1.0))
        throw DomainError(fmt::format("effort_dc: diversity must be in (0, 1], got {}", diversity));
    if (!(completeness > 0.0 && completeness <= 1.0))
        throw DomainError(fmt::format("effort_dc: completeness must be in (0, 1], got {}", completeness));
    return diversity * completeness;
}

EffortPoint effort_point(EffortAxis axis, const VirtueSnapshot& v) {
    const double e = axis == EffortAxis::quality_diversity ? effort_qd(v.diversity, v.quality_pct)
                                                           : effort_dc(v.diversity, v.completeness);
    return {e, axis, v};
}

}  // namespace labelbudget
