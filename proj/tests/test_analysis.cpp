#include <doctest.h>

#include "hull_oracle.hpp"
#include "labelbudget/analysis.hpp"
#include "labelbudget/error.hpp"
#include "labelbudget/planner.hpp"

using namespace labelbudget;

namespace {

ExperimentPoint cell(double d, double c, double q, std::optional<double> perf) {
    ExperimentPoint p;
    p.dataset_id = "t";
    p.axis = GridAxis::quality_diversity;
    p.diversity = d;
    p.completeness = c;
    p.quality_achieved = q;
    p.effort_qd = d * q / 100.0;
    p.effort_dc = d * c;
    p.perf_norm = perf;
    p.perf_raw_median = perf;
    p.n_seeds = perf ? 5 : 1;
    return p;
}

}  // namespace

TEST_CASE("perf_points uses the requested axis and skips invalid cells") {
    const std::vector<ExperimentPoint> pts{cell(0.5, 0.5, 80, 0.9), cell(1, 1, 100, 1.0), cell(0.5, 1, 90, {})};
    const auto qd = perf_points(pts, EffortAxis::quality_diversity);
    REQUIRE(qd.size() == 2);
    CHECK(qd[0].effort == 0.4);
    CHECK(perf_points(pts, EffortAxis::diversity_completeness)[0].effort == 0.25);
    CHECK(qd[0].virtues->quality_pct == 80);
    CHECK(compared_virtues(EffortAxis::quality_diversity) == std::vector<Virtue>{Virtue::quality, Virtue::diversity});
}

TEST_CASE("diversity curves group by completeness and quality rank") {
    std::vector<ExperimentPoint> pts;
    for (const double d : {0.25, 0.5, 1.0}) {
        pts.push_back(cell(d, 1.0, 76.0 + d, 0.8 + 0.1 * d));
        pts.push_back(cell(d, 1.0, 100.0, 0.9 + 0.1 * d));
    }
    pts.push_back(cell(0.5, 0.5, 100.0, 0.7));
    const auto curves = diversity_curves(pts);
    REQUIRE(curves.size() == 3);
    CHECK(curves[0].completeness == 0.5);
    CHECK(curves[0].points.size() == 1);
    CHECK(curves[1].quality_rank == 0);
    CHECK(curves[1].quality_level == doctest::Approx(76.5));
    CHECK(curves[2].quality_level == 100.0);
    CHECK(curves[2].points.size() == 3);
    CHECK(curves[2].points.front().value == 0.25);
    const auto sat = saturation_table(pts, 0.01, 2);
    CHECK(sat.size() == 2);  // the single-point curve is too short
}

TEST_CASE("analysis csv output") {
    std::vector<ExperimentPoint> pts{cell(0.25, 1, 100, 0.9), cell(0.5, 1, 100, 0.99), cell(1, 1, 100, 1.0),
                                     cell(0.25, 1, 80, 0.85), cell(0.5, 1, 80, 0.95), cell(1, 1, 80, 0.9)};
    const auto pp = perf_points(pts, EffortAxis::quality_diversity);
    const auto t = optimal_trajectory(pp);
    const auto csv = trajectory_csv(t);
    CHECK(csv.rfind("effort,perf_norm,diversity,completeness,quality_achieved\n", 0) == 0);
    const auto rows = parse_trajectory_csv(csv);
    REQUIRE(rows.size() == t.vertices.size());
    // rows reproduce the brute-force hull prefix and no point lies above them
    std::vector<testutil::XY> xy;
    for (const auto& p : pp) xy.emplace_back(p.effort, p.perf_norm);
    const auto hull = testutil::brute_upper_hull(xy);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].effort == hull[i].first);
        CHECK(rows[i].perf_norm == hull[i].second);
    }
    const auto series = importance_curves(t, compared_virtues(EffortAxis::quality_diversity));
    const auto imp = importance_csv(series);
    CHECK(imp.rfind("virtue,perf_norm,value\nquality,", 0) == 0);
    const auto sat = saturation_csv(saturation_table(pts, 0.01, 2));
    CHECK(sat.rfind("completeness,quality_level,n_points,saturation_diversity\n", 0) == 0);
    CHECK(sat.find("1.0,80.0,3,\n") != std::string::npos);
    CHECK(sat.find("1.0,100.0,3,\n") != std::string::npos);  // rising to the end
    CHECK_THROWS_AS((void)parse_trajectory_csv("x\n"), CorruptionError);
}

TEST_CASE("plan recommendations") {
    PlanState s;
    s.achieved_quality_pct = 75;
    s.diversity_curve = std::vector<CurvePoint>{{0.2, 0.5}, {0.4, 0.8}, {0.6, 0.9}};
    auto r = recommend_next(s);
    CHECK(r.action == PlanAction::raise_quality);
    CHECK(r.rationale.rfind("rule 1", 0) == 0);
    s.achieved_quality_pct = 85;
    CHECK(recommend_next(s).action == PlanAction::raise_quality);

    s.achieved_quality_pct = 99;
    s.diversity_curve = std::vector<CurvePoint>{{0.2, 0.2}, {0.4, 0.4}, {0.6, 0.6}, {0.8, 0.8}, {1.0, 1.0}};
    r = recommend_next(s);
    CHECK(r.action == PlanAction::add_diverse_volumes);
    CHECK(r.rationale.rfind("rule 2", 0) == 0);
    CHECK(format_recommendation(r).find("diversity_saturation: none\n") != std::string::npos);

    s.diversity_curve = std::vector<CurvePoint>{{0.2, 0.5}, {0.4, 0.8}, {0.6, 0.9}, {0.8, 0.905}, {1.0, 0.907}};
    r = recommend_next(s);
    CHECK(r.action == PlanAction::increase_completeness);
    CHECK(r.rationale.rfind("rule 3", 0) == 0);
    CHECK(*r.saturation_point == 0.6);
    CHECK(format_recommendation(r).rfind("action: increase_completeness\n", 0) == 0);

    s.diversity_curve.reset();
    CHECK_THROWS_AS((void)recommend_next(s), DomainError);
    s.diversity_curve = std::vector<CurvePoint>{{0.5, 0.9}};
    CHECK_THROWS_AS((void)recommend_next(s), DomainError);

    PlanOptions lenient;
    lenient.quality_threshold_pct = 70;
    s.achieved_quality_pct = 75;
    s.diversity_curve = std::vector<CurvePoint>{{0.2, 0.2}, {0.4, 0.4}, {0.6, 0.6}};
    CHECK(recommend_next(s, lenient).action == PlanAction::add_diverse_volumes);
}

TEST_CASE("plan diversity curve from results") {
    std::vector<ExperimentPoint> pts;
    for (const double d : {0.25, 0.5, 1.0}) {
        pts.push_back(cell(d, 1.0, 80, 0.7 + 0.1 * d));
        pts.push_back(cell(d, 1.0, 100, 0.9 + 0.1 * d));
        pts.push_back(cell(d, 0.5, 100, 0.5));
    }
    const auto curve = plan_diversity_curve(pts, 0.9);
    REQUIRE(curve.has_value());
    REQUIRE(curve->size() == 3);
    CHECK(curve->back().perf_norm == 1.0);  // c = 1.0, highest quality rank
    CHECK((*plan_diversity_curve(pts, 0.4))[0].perf_norm == 0.5);
    CHECK_FALSE(plan_diversity_curve(std::vector<ExperimentPoint>{cell(1, 1, 100, 1.0)}, 1.0).has_value());
}
