// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [work-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "hull_oracle.hpp"
#include "labelbudget/analysis.hpp"
#include "labelbudget/effort_model.hpp"
#include "labelbudget/experiment_runner.hpp"
#include "labelbudget/rng.hpp"
#include "labelbudget/trainer.hpp"
#include "labelbudget/trajectory.hpp"
#include "labelbudget/virtue_transforms.hpp"
#include "labelbudget/voxel_store.hpp"

namespace fs = std::filesystem;
using namespace labelbudget;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail, double seconds) {
    std::printf("%s %s: %s (%.2f s)\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
}

template <class F>
void criterion(const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        ok = false;
        detail = fmt::format("exception: {}", e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(ok, name, detail, s);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Set-based IoU over foreground voxel indices.
double oracle_iou(const LabelMask& a, const LabelMask& b) {
    std::set<std::size_t> sa;
    std::set<std::size_t> sb;
    for (std::size_t i = 0; i < a.voxels().size(); ++i) {
        if (a.voxels()[i]) sa.insert(i);
        if (b.voxels()[i]) sb.insert(i);
    }
    std::size_t inter = 0;
    for (const auto i : sa) inter += sb.count(i);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

LabelMask random_mask(SplitMix64& rng, double p) {
    LabelMask m({8, 8, 4});
    for (auto& v : m.voxels()) v = rng.uniform() < p ? 1 : 0;
    return m;
}

bool effort_formulas(std::string& detail) {
    const double a = effort_qd(0.1, 80);
    const double b = effort_dc(0.6, 0.1);
    detail = fmt::format("effort_qd(0.1, 80) = {}, effort_dc(0.6, 0.1) = {}", a, b);
    return a == 0.08 && b == 0.06;
}

bool iou_oracle(std::string& detail) {
    SplitMix64 rng(2024);
    double worst = 0.0;
    bool props = true;
    for (int i = 0; i < 500; ++i) {
        const auto a = random_mask(rng, rng.uniform());
        const auto b = random_mask(rng, rng.uniform());
        worst = std::max(worst, std::abs(iou(a, b) - oracle_iou(a, b)));
        props = props && iou(a, b) == iou(b, a) && iou(a, a) == 1.0;
        LabelMask inv(a.dims());
        for (std::size_t k = 0; k < a.voxels().size(); ++k) inv.voxels()[k] = a.voxels()[k] ? 0 : 1;
        props = props && (a.foreground_count() == 0 || iou(a, inv) == 0.0);
    }
    detail = fmt::format("500 pairs, max |iou - oracle| = {:.3g}, identity/disjoint/symmetry {}", worst,
                         props ? "hold" : "violated");
    return worst <= 1e-12 && props;
}

bool interpolation_oracle(std::string& detail) {
    std::vector<std::string> rows;
    bool ok = true;
    for (int v = 0; v < 10; ++v) {
        const auto ph = make_phantom({32, 32, 32}, 1000 + v, fmt::format("ph{}", v));
        const auto z = ph.mask.labeled_slices();
        double prev = 2.0;
        std::string row;
        for (const int step : {1, 2, 4, 8}) {
            const auto d = degrade_quality(ph.mask, z, step);
            const double recomputed = oracle_iou(d.mask, ph.mask);
            ok = ok && d.report.achieved_iou == iou(d.mask, ph.mask) &&
                 std::abs(recomputed - d.report.achieved_iou) <= 1e-12;
            if (step == 1) ok = ok && d.report.achieved_iou == 1.0;
            ok = ok && d.report.achieved_iou < prev;
            prev = d.report.achieved_iou;
            row += fmt::format("{}{:.4f}", row.empty() ? "" : "/", d.report.achieved_iou);
        }
        rows.push_back(row);
    }
    detail = fmt::format("10 phantoms, steps 1/2/4/8, e.g. {}; exact, 1.0 at step 1, strictly decreasing", rows[0]);
    return ok;
}

bool hull_oracle(std::string& detail) {
    SplitMix64 rng(77);
    int mismatches = 0;
    int violations = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.next() % 50);
        std::vector<PerfPoint> p;
        std::vector<testutil::XY> xy;
        for (int i = 0; i < n; ++i) {
            // half the instances on a coarse dyadic grid to exercise ties and collinearity
            const bool grid = trial % 2 == 0;
            const double e = grid ? static_cast<double>(1 + rng.next() % 8) / 8.0 : rng.uniform(0.01, 1.0);
            const double y = grid ? static_cast<double>(rng.next() % 16) / 16.0 : rng.uniform(0.0, 1.2);
            p.push_back({e, y, std::nullopt, {}});
            xy.emplace_back(e, y);
        }
        std::vector<testutil::XY> hull;
        for (const auto& v : upper_hull(p)) hull.emplace_back(v.effort, v.perf_norm);
        if (hull != testutil::brute_upper_hull(xy)) ++mismatches;
        const auto t = optimal_trajectory(p);
        std::vector<testutil::XY> chain;
        for (const auto& v : t.vertices) chain.emplace_back(v.effort, v.perf_norm);
        bool ok = testutil::no_point_above(chain, xy, 1e-9);
        for (std::size_t i = 1; i < chain.size(); ++i) ok = ok && chain[i].second >= chain[i - 1].second;
        if (!ok) ++violations;
    }
    detail = fmt::format("200 instances, {} hull mismatches, {} trajectory violations", mismatches, violations);
    return mismatches == 0 && violations == 0;
}

bool gradient_check(std::string& detail) {
    SplitMix64 rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<float> slice(256);
        std::vector<std::uint8_t> labels(256);
        for (std::size_t i = 0; i < 256; ++i) {
            slice[i] = static_cast<float>(rng.uniform());
            labels[i] = rng.uniform() < 0.3 ? 1 : 0;
        }
        const auto x = compute_slice_features(slice, 16, 16);
        Weights w;
        for (auto& v : w) v = rng.uniform(-1.0, 1.0);
        const auto g = slice_gradient(w, x, labels);
        for (int k = 0; k < kWeightCount; ++k) {
            const double h = 1e-5;
            auto wp = w;
            auto wm = w;
            wp[k] += h;
            wm[k] -= h;
            const double fd = (slice_loss(wp, x, labels) - slice_loss(wm, x, labels)) / (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(g[k]), 1e-8});
            worst = std::max(worst, std::abs(fd - g[k]) / denom);
        }
    }
    detail = fmt::format("20 random 16x16 slices, max relative error {:.3g}", worst);
    return worst < 1e-4;
}

GridSpec phantom_grid(const fs::path& dataset) {
    GridSpec s;
    s.dataset = dataset;
    s.axis = GridAxis::quality_diversity;
    s.diversity = {0.25, 0.5, 1.0};
    s.quality = {75, 90, 100};
    s.repeats = 5;
    s.seed = 1;
    s.parallelism = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return s;
}

bool end_to_end(const GridResult& r, std::string& detail) {
    std::optional<double> baseline;
    std::vector<std::pair<double, double>> d1;  // (quality achieved, perf_norm) at d = 1
    for (const auto& p : r.points) {
        if (p.diversity != 1.0 || !p.perf_norm) continue;
        d1.emplace_back(p.quality_achieved, *p.perf_norm);
        if (p.quality_achieved == 100.0 && *p.perf_norm == 1.0) baseline = 1.0;
    }
    std::sort(d1.begin(), d1.end());
    int inversions = 0;
    double worst_drop = 0.0;
    for (std::size_t i = 1; i < d1.size(); ++i)
        if (d1[i].second < d1[i - 1].second) {
            ++inversions;
            worst_drop = std::max(worst_drop, d1[i - 1].second - d1[i].second);
        }
    const bool monotone = d1.size() == 3 && inversions <= 1 && worst_drop <= 0.05;

    const auto traj = optimal_trajectory(perf_points(r.points, EffortAxis::quality_diversity));
    const auto series = importance_curves(traj, compared_virtues(EffortAxis::quality_diversity));
    std::optional<double> q90;
    std::optional<double> d05;
    for (const auto& s : series) {
        if (s.virtue == Virtue::quality) q90 = first_reaching(s, 90.0);
        if (s.virtue == Virtue::diversity) d05 = first_reaching(s, 0.5);
    }
    const bool importance = q90 && (!d05 || *q90 <= *d05);

    std::string cells;
    for (const auto& [q, perf] : d1) cells += fmt::format(" q{:.1f}->{:.3f}", q, perf);
    detail = fmt::format("baseline perf_norm {}; d=1:{} ({} inversions, max drop {:.3f}); quality reaches 90 at "
                         "perf {}, diversity reaches 0.5 at perf {}",
                         baseline ? "1.0" : "missing", cells, inversions, worst_drop,
                         q90 ? fmt::format("{:.3f}", *q90) : "never", d05 ? fmt::format("{:.3f}", *d05) : "never");
    return baseline.has_value() && monotone && importance;
}

bool saturation(std::string& detail) {
    const std::vector<CurvePoint> hand{{0.2, 0.5}, {0.4, 0.8}, {0.6, 0.9}, {0.8, 0.905}, {1.0, 0.907}};
    const std::vector<CurvePoint> rising{{0.2, 0.2}, {0.4, 0.4}, {0.6, 0.6}, {0.8, 0.8}, {1.0, 1.0}};
    const auto a = detect_saturation(hand, 0.01, 2);
    const auto b = detect_saturation(rising, 0.01, 2);
    detail = fmt::format("hand curve -> {}, rising curve -> {}", a ? format_number(*a) : "none",
                         b ? format_number(*b) : "none");
    return a && *a == 0.6 && !b;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "labelbudget-acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    criterion("effort formulas", effort_formulas);
    criterion("iou oracle equivalence", iou_oracle);
    criterion("interpolation oracle", interpolation_oracle);
    criterion("hull oracle equivalence", hull_oracle);
    criterion("learner gradient check", gradient_check);

    GridResult first;
    std::string aggregated;
    bool grid_ran = false;
    criterion("end-to-end phantom grid", [&](std::string& detail) {
        (void)generate_phantoms({20, {32, 32, 32}, 1}, work / "phantoms");
        first = run_grid(phantom_grid(work / "phantoms" / "manifest.json"), work / "grid");
        aggregated = slurp(work / "grid" / "aggregated.csv");
        grid_ran = true;
        return end_to_end(first, detail);
    });
    criterion("saturation detection", saturation);
    criterion("rerun determinism", [&](std::string& detail) {
        if (!grid_ran) {
            detail = "grid did not run";
            return false;
        }
        const auto second = run_grid(phantom_grid(work / "phantoms" / "manifest.json"), work / "grid");
        const bool same = slurp(work / "grid" / "aggregated.csv") == aggregated;
        detail = fmt::format("first run trained {}, rerun trained {} with {} cache hits, aggregated.csv {}",
                             first.trainings, second.trainings, second.cache_hits, same ? "identical" : "differs");
        return same && second.trainings == 0 && second.cache_hits == first.runs.size();
    });

    fs::remove_all(work);
    std::printf("%s: %d failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
