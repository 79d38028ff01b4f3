#include <doctest.h>

#include <regex>

#include "labelbudget/error.hpp"
#include "labelbudget/plots.hpp"

using namespace labelbudget;

namespace {

ExperimentPoint cell(double d, double q, double perf) {
    ExperimentPoint p;
    p.dataset_id = "t";
    p.diversity = d;
    p.quality_achieved = q;
    p.effort_qd = d * q / 100.0;
    p.effort_dc = d;
    p.perf_norm = perf;
    p.perf_raw_median = perf;
    p.n_seeds = 5;
    return p;
}

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
    return n;
}

double attr(const std::string& svg, const std::string& name) {
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, std::regex(name + "=\"([^\"]+)\"")));
    return std::stod(m[1].str());
}

}  // namespace

TEST_CASE("two-point result set") {
    const std::vector<ExperimentPoint> pts{cell(0.5, 100, 0.8), cell(1.0, 100, 1.0)};
    const auto set = render_plots(pts, EffortAxis::quality_diversity);
    CHECK(count(set.trajectory, "class=\"marker\"") == 2);
    CHECK(count(set.trajectory, "<polyline class=\"trajectory\"") == 1);
    std::smatch m;
    REQUIRE(std::regex_search(set.trajectory, m, std::regex("class=\"trajectory\" points=\"([^\"]*)\"")));
    CHECK(count(m[1].str(), " ") == 1);  // two vertices, one segment
    CHECK(set.trajectory.rfind("<?xml", 0) == 0);
    CHECK(set.trajectory.find("version=\"1.1\"") != std::string::npos);
}

TEST_CASE("rendering is deterministic") {
    std::vector<ExperimentPoint> pts;
    for (const double d : {0.25, 0.5, 1.0})
        for (const double q : {75.0, 90.0, 100.0}) pts.push_back(cell(d, q, d == 1.0 && q == 100.0 ? 1.0 : 0.5 + 0.3 * d + 0.002 * q));
    const auto a = render_plots(pts, EffortAxis::quality_diversity);
    const auto b = render_plots(pts, EffortAxis::quality_diversity);
    CHECK(a.trajectory == b.trajectory);
    CHECK(a.importance == b.importance);
    CHECK(a.saturation == b.saturation);
    CHECK(count(a.trajectory, "class=\"marker\"") == 9);
    // three diversity values: three marker shapes
    CHECK(count(a.trajectory, "<circle class=\"marker\"") == 3);
    CHECK(count(a.trajectory, "<rect class=\"marker\"") == 3);
    CHECK(count(a.trajectory, "<polygon class=\"marker\"") == 3);
}

TEST_CASE("trajectory vertices are recoverable from the svg") {
    std::vector<ExperimentPoint> pts{cell(0.25, 80, 0.7), cell(0.25, 100, 0.85), cell(0.5, 90, 0.95),
                                     cell(0.5, 100, 0.9), cell(1.0, 100, 1.0), cell(1.0, 80, 0.97)};
    const auto perf = perf_points(pts, EffortAxis::quality_diversity);
    const auto t = optimal_trajectory(perf);
    const auto svg = render_trajectory_svg(pts, EffortAxis::quality_diversity, t);
    PlotFrame f;
    f.x_min = attr(svg, "data-x-min");
    f.x_max = attr(svg, "data-x-max");
    f.y_min = attr(svg, "data-y-min");
    f.y_max = attr(svg, "data-y-max");
    f.left = attr(svg, "data-left");
    f.top = attr(svg, "data-top");
    f.width = attr(svg, "data-width");
    f.height = attr(svg, "data-height");
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, std::regex("class=\"trajectory\" points=\"([^\"]*)\"")));
    const std::string list = m[1].str();
    std::regex pair_re("([-0-9.]+),([-0-9.]+)");
    std::size_t i = 0;
    for (auto it = std::sregex_iterator(list.begin(), list.end(), pair_re); it != std::sregex_iterator(); ++it, ++i) {
        REQUIRE(i < t.vertices.size());
        // 3 decimals on a ~500 px canvas
        CHECK(f.data_x(std::stod((*it)[1].str())) == doctest::Approx(t.vertices[i].effort).epsilon(2e-3));
        CHECK(f.data_y(std::stod((*it)[2].str())) == doctest::Approx(t.vertices[i].perf_norm).epsilon(2e-3));
    }
    CHECK(i == t.vertices.size());
}

TEST_CASE("plot errors") {
    CHECK_THROWS_AS((void)render_plots(std::vector<ExperimentPoint>{}, EffortAxis::quality_diversity), DomainError);
    auto invalid = cell(1.0, 100, 1.0);
    invalid.perf_norm.reset();
    CHECK_THROWS_AS((void)render_plots(std::vector<ExperimentPoint>{invalid}, EffortAxis::quality_diversity),
                    DomainError);
}

TEST_CASE("saturation plot rings detected points") {
    std::vector<ExperimentPoint> pts;
    const double perf[] = {0.5, 0.8, 0.9, 0.905, 0.907};
    const double div[] = {0.2, 0.4, 0.6, 0.8, 1.0};
    for (int i = 0; i < 5; ++i) pts.push_back(cell(div[i], 100, perf[i] / 0.907));
    const auto set = render_plots(pts, EffortAxis::diversity_completeness);
    CHECK(count(set.saturation, "class=\"saturation\"") == 1);
    CHECK(count(set.saturation, "<polyline class=\"curve\"") == 1);
}
