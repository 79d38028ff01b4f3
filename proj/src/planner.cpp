#include "labelbudget/planner.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "labelbudget/analysis.hpp"
#include "labelbudget/error.hpp"

namespace labelbudget {

std::string_view to_string(PlanAction a) noexcept {
    switch (a) {
        case PlanAction::raise_quality: return "raise_quality";
        case PlanAction::add_diverse_volumes: return "add_diverse_volumes";
        case PlanAction::increase_completeness: return "increase_completeness";
    }
    return "raise_quality";
}

Recommendation recommend_next(const PlanState& state, const PlanOptions& options) {
    Recommendation r;
    r.achieved_quality_pct = state.achieved_quality_pct;
    if (state.achieved_quality_pct < options.quality_threshold_pct) {
        r.action = PlanAction::raise_quality;
        r.rationale = fmt::format(
            "rule 1: label quality {}% is below the {}% threshold; segment slices without interpolation and raise "
            "quality before adding volumes or slices",
            format_number(state.achieved_quality_pct), format_number(options.quality_threshold_pct));
        return r;
    }
    if (!state.diversity_curve || state.diversity_curve->size() < static_cast<std::size_t>(options.window) + 1)
        throw DomainError(fmt::format(
            "quality is {}% (>= {}%), but deciding between more volumes and more slices needs a diversity sweep with "
            "at least {} diversity levels; train models early and run a diversity-sweep grid first",
            format_number(state.achieved_quality_pct), format_number(options.quality_threshold_pct),
            options.window + 1));
    r.saturation_checked = true;
    r.saturation_point = detect_saturation(*state.diversity_curve, options.epsilon, options.window);
    if (!r.saturation_point) {
        r.action = PlanAction::add_diverse_volumes;
        r.rationale = fmt::format(
            "rule 2: quality {}% meets the threshold and performance has not saturated w.r.t. diversity "
            "(epsilon {}, window {}); distribute slices over more diverse volumes",
            format_number(state.achieved_quality_pct), format_number(options.epsilon), options.window);
    } else {
        r.action = PlanAction::increase_completeness;
        r.rationale = fmt::format(
            "rule 3: quality {}% meets the threshold and performance saturates at diversity {}; increase "
            "completeness (currently {}) by adding more volumes or by interpolating more slices",
            format_number(state.achieved_quality_pct), format_number(*r.saturation_point),
            format_number(state.completeness));
    }
    return r;
}

std::optional<std::vector<CurvePoint>> plan_diversity_curve(std::span<const ExperimentPoint> points,
                                                            double completeness) {
    std::vector<ExperimentPoint> selected;
    for (const auto& p : points)
        if (p.axis == GridAxis::diversity_sweep) selected.push_back(p);
    if (selected.empty()) selected.assign(points.begin(), points.end());
    auto curves = diversity_curves(selected);
    std::erase_if(curves, [](const DiversityCurve& c) { return c.points.size() < 2; });
    if (curves.empty()) return std::nullopt;
    const auto best = std::min_element(curves.begin(), curves.end(), [&](const DiversityCurve& a, const DiversityCurve& b) {
        const double da = std::abs(a.completeness - completeness);
        const double db = std::abs(b.completeness - completeness);
        if (da != db) return da < db;
        return a.quality_rank > b.quality_rank;
    });
    return best->points;
}

std::string format_recommendation(const Recommendation& r) {
    std::string out = fmt::format("action: {}\nrationale: {}\nachieved_quality: {}\n", to_string(r.action),
                                  r.rationale, format_number(r.achieved_quality_pct));
    if (r.saturation_checked)
        out += fmt::format("diversity_saturation: {}\n",
                           r.saturation_point ? format_number(*r.saturation_point) : std::string("none"));
    return out;
}

}  // namespace labelbudget
