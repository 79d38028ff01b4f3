#include "labelbudget/analysis.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "labelbudget/error.hpp"

namespace labelbudget {

std::vector<PerfPoint> perf_points(std::span<const ExperimentPoint> points, EffortAxis axis) {
    std::vector<PerfPoint> out;
    for (const auto& p : points) {
        if (!p.perf_norm) continue;
        PerfPoint pp;
        pp.effort = axis == EffortAxis::quality_diversity ? p.effort_qd : p.effort_dc;
        pp.perf_norm = *p.perf_norm;
        pp.virtues = VirtueSnapshot{p.diversity, p.completeness, p.quality_achieved};
        pp.id = fmt::format("d={};c={};q={}", format_number(p.diversity), format_number(p.completeness),
                            format_number(p.quality_achieved));
        out.push_back(std::move(pp));
    }
    return out;
}

std::vector<Virtue> compared_virtues(EffortAxis axis) {
    if (axis == EffortAxis::quality_diversity) return {Virtue::quality, Virtue::diversity};
    return {Virtue::completeness, Virtue::diversity};
}

std::vector<DiversityCurve> diversity_curves(std::span<const ExperimentPoint> points) {
    // bucket (diversity, completeness) -> cells sorted by achieved quality
    std::map<std::pair<double, double>, std::vector<const ExperimentPoint*>> buckets;
    for (const auto& p : points)
        if (p.perf_norm) buckets[{p.diversity, p.completeness}].push_back(&p);
    std::map<std::pair<double, int>, std::vector<const ExperimentPoint*>> groups;
    for (auto& [key, cells] : buckets) {
        std::stable_sort(cells.begin(), cells.end(), [](const ExperimentPoint* a, const ExperimentPoint* b) {
            return a->quality_achieved < b->quality_achieved;
        });
        for (std::size_t r = 0; r < cells.size(); ++r) groups[{key.second, static_cast<int>(r)}].push_back(cells[r]);
    }
    std::vector<DiversityCurve> out;
    for (const auto& [key, cells] : groups) {
        DiversityCurve c;
        c.completeness = key.first;
        c.quality_rank = key.second;
        std::vector<double> q;
        for (const auto* p : cells) {
            c.points.push_back({p->diversity, *p->perf_norm});
            q.push_back(p->quality_achieved);
        }
        c.quality_level = aggregate_median(q);
        std::sort(c.points.begin(), c.points.end(),
                  [](const CurvePoint& a, const CurvePoint& b) { return a.value < b.value; });
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<SaturationResult> saturation_table(std::span<const ExperimentPoint> points, double epsilon, int window) {
    std::vector<SaturationResult> out;
    for (auto& c : diversity_curves(points)) {
        if (c.points.size() < static_cast<std::size_t>(window) + 1) continue;
        auto s = detect_saturation(c.points, epsilon, window);
        out.push_back({std::move(c), s});
    }
    return out;
}

std::string trajectory_csv(const Trajectory& t) {
    std::string out = "effort,perf_norm,diversity,completeness,quality_achieved\n";
    for (const auto& v : t.vertices) {
        const auto s = v.virtues.value_or(VirtueSnapshot{});
        out += fmt::format("{},{},{},{},{}\n", format_number(v.effort), format_number(v.perf_norm),
                           format_number(s.diversity), format_number(s.completeness), format_number(s.quality_pct));
    }
    return out;
}

std::string importance_csv(std::span<const ImportanceSeries> series) {
    std::string out = "virtue,perf_norm,value\n";
    for (const auto& s : series)
        for (const auto& p : s.points)
            out += fmt::format("{},{},{}\n", to_string(s.virtue), format_number(p.perf_norm), format_number(p.value));
    return out;
}

std::string saturation_csv(std::span<const SaturationResult> rows) {
    std::string out = "completeness,quality_level,n_points,saturation_diversity\n";
    for (const auto& r : rows)
        out += fmt::format("{},{},{},{}\n", format_number(r.curve.completeness), format_number(r.curve.quality_level),
                           r.curve.points.size(), r.saturation ? format_number(*r.saturation) : std::string());
    return out;
}

std::vector<TrajectoryRow> parse_trajectory_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::getline(in, line);
    if (line.rfind("effort,perf_norm", 0) != 0) throw CorruptionError("not a trajectory CSV");
    std::vector<TrajectoryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string f;
        std::vector<double> v;
        while (std::getline(ls, f, ',')) v.push_back(std::stod(f));
        if (v.size() != 5) throw CorruptionError(fmt::format("trajectory row '{}' has {} fields", line, v.size()));
        rows.push_back({v[0], v[1], {v[2], v[3], v[4]}});
    }
    return rows;
}

}  // namespace labelbudget
