#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelbudget/experiment_runner.hpp"
#include "labelbudget/trajectory.hpp"

namespace labelbudget {

enum class PlanAction { raise_quality, add_diverse_volumes, increase_completeness };

[[nodiscard]] std::string_view to_string(PlanAction a) noexcept;

struct PlanState {
    double achieved_quality_pct = 0.0;
    std::optional<std::vector<CurvePoint>> diversity_curve;  // perf_norm vs diversity, ascending
    double completeness = 1.0;
};

struct PlanOptions {
    double quality_threshold_pct = 90.0;
    double epsilon = 0.01;
    int window = 2;
};

struct Recommendation {
    PlanAction action = PlanAction::raise_quality;
    std::string rationale;
    double achieved_quality_pct = 0.0;
    bool saturation_checked = false;
    std::optional<double> saturation_point;
};

/// Rule cascade: quality below threshold -> raise_quality; otherwise an
/// unsaturated diversity curve -> add_diverse_volumes; otherwise
/// increase_completeness. Throws DomainError when the cascade needs a
/// diversity curve that is missing or too short.
[[nodiscard]] Recommendation recommend_next(const PlanState& state, const PlanOptions& options = {});

/// Diversity curve from aggregated results: prefers diversity-sweep rows, takes
/// the curve at the completeness level nearest `completeness` and the highest
/// quality rank. nullopt when no curve has more than one point.
[[nodiscard]] std::optional<std::vector<CurvePoint>> plan_diversity_curve(std::span<const ExperimentPoint> points,
                                                                          double completeness);

[[nodiscard]] std::string format_recommendation(const Recommendation& r);

}  // namespace labelbudget
