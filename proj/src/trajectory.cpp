#include "labelbudget/trajectory.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "labelbudget/error.hpp"

namespace labelbudget {

double normalize(double perf_raw, double baseline_perf) {
    if (!(baseline_perf > 0.0))
        throw DomainError(fmt::format("baseline performance is {}; the unaltered run failed, grid is invalid",
                                      baseline_perf));
    return perf_raw / baseline_perf;
}

namespace {

// > 0 for a counter-clockwise turn o -> a -> b.
double cross(const PerfPoint& o, const PerfPoint& a, const PerfPoint& b) noexcept {
    return (a.effort - o.effort) * (b.perf_norm - o.perf_norm) - (a.perf_norm - o.perf_norm) * (b.effort - o.effort);
}

}  // namespace

std::vector<PerfPoint> upper_hull(std::span<const PerfPoint> points) {
    if (points.empty()) throw DomainError("upper_hull: no points");
    std::vector<PerfPoint> sorted(points.begin(), points.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const PerfPoint& a, const PerfPoint& b) {
        return a.effort < b.effort || (a.effort == b.effort && a.perf_norm < b.perf_norm);
    });
    // Equal efforts: the last of each run has the highest perf.
    std::vector<PerfPoint> unique;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (i + 1 == sorted.size() || sorted[i + 1].effort != sorted[i].effort) unique.push_back(sorted[i]);

    std::vector<PerfPoint> hull;
    for (auto& p : unique) {
        while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) >= 0.0) hull.pop_back();
        hull.push_back(std::move(p));
    }
    return hull;
}

Trajectory optimal_trajectory(std::span<const PerfPoint> points) {
    auto hull = upper_hull(points);
    const auto top = std::max_element(hull.begin(), hull.end(),
                                      [](const PerfPoint& a, const PerfPoint& b) { return a.perf_norm < b.perf_norm; });
    hull.erase(top + 1, hull.end());
    return {std::move(hull)};
}

std::optional<double> trajectory_height(const Trajectory& t, double effort) {
    const auto& v = t.vertices;
    if (v.empty() || effort < v.front().effort || effort > v.back().effort) return std::nullopt;
    if (v.size() == 1) return v.front().perf_norm;
    const auto it = std::lower_bound(v.begin(), v.end(), effort,
                                     [](const PerfPoint& p, double e) { return p.effort < e; });
    if (it->effort == effort) return it->perf_norm;
    const auto& right = *it;
    const auto& left = *(it - 1);
    const double s = (effort - left.effort) / (right.effort - left.effort);
    return left.perf_norm + s * (right.perf_norm - left.perf_norm);
}

bool no_point_above(const Trajectory& t, std::span<const PerfPoint> points, double tolerance) {
    for (const auto& p : points) {
        const auto h = trajectory_height(t, p.effort);
        if (h && p.perf_norm > *h + tolerance) return false;
    }
    return true;
}

std::string_view to_string(Virtue v) noexcept {
    switch (v) {
        case Virtue::diversity: return "diversity";
        case Virtue::completeness: return "completeness";
        case Virtue::quality: return "quality";
    }
    return "quality";
}

double virtue_value(const VirtueSnapshot& s, Virtue v) noexcept {
    switch (v) {
        case Virtue::diversity: return s.diversity;
        case Virtue::completeness: return s.completeness;
        case Virtue::quality: return s.quality_pct;
    }
    return 0.0;
}

std::vector<ImportanceSeries> importance_curves(const Trajectory& t, std::span<const Virtue> virtues) {
    if (t.vertices.empty()) throw DomainError("importance_curves: empty trajectory");
    for (const auto& v : t.vertices)
        if (!v.virtues)
            throw DomainError(fmt::format("importance_curves: vertex '{}' has no virtue snapshot", v.id));
    std::vector<ImportanceSeries> out;
    for (const auto virtue : virtues) {
        ImportanceSeries s{virtue, {}};
        for (const auto& v : t.vertices) s.points.push_back({v.perf_norm, virtue_value(*v.virtues, virtue)});
        std::stable_sort(s.points.begin(), s.points.end(),
                         [](const ImportancePoint& a, const ImportancePoint& b) { return a.perf_norm < b.perf_norm; });
        out.push_back(std::move(s));
    }
    return out;
}

std::optional<double> first_reaching(const ImportanceSeries& series, double threshold) {
    for (const auto& p : series.points)
        if (p.value >= threshold) return p.perf_norm;
    return std::nullopt;
}

std::optional<double> detect_saturation(std::span<const CurvePoint> curve, double epsilon, int window) {
    if (window < 1) throw DomainError(fmt::format("saturation window must be >= 1, got {}", window));
    if (curve.size() < static_cast<std::size_t>(window) + 1)
        throw DomainError(fmt::format("saturation curve has {} points, needs at least window + 1 = {}", curve.size(),
                                      window + 1));
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (curve[i].value < curve[i - 1].value) throw DomainError("saturation curve must be sorted by virtue value");
    double top = curve.front().perf_norm;
    for (const auto& p : curve) top = std::max(top, p.perf_norm);
    const double limit = epsilon * top;
    const auto w = static_cast<std::size_t>(window);
    for (std::size_t i = 0; i + w < curve.size(); ++i) {
        bool flat = true;
        for (std::size_t k = 1; k <= w && flat; ++k) flat = curve[i + k].perf_norm - curve[i + k - 1].perf_norm < limit;
        if (flat) return curve[i].value;
    }
    return std::nullopt;
}

}  // namespace labelbudget
