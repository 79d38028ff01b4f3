#include <doctest.h>

#include <fmt/format.h>

#include "hull_oracle.hpp"
#include "labelbudget/analysis.hpp"
#include "labelbudget/experiment_runner.hpp"
#include "test_util.hpp"

using namespace labelbudget;
using testutil::TempDir;

namespace {

testutil::CommandResult cli(const std::string& args) {
    return testutil::run_command(fmt::format("'{}' {}", LB_CLI_PATH, args));
}

}  // namespace

TEST_CASE("cli pipeline: synth, run, analyze, plot, plan") {
    TempDir dir;
    const auto root = dir.path().string();
    auto r = cli(fmt::format("synth --n 8 --dims 16 --seed 3 --out '{}/ds'", root));
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("wrote 8 phantoms") != std::string::npos);

    testutil::spit(dir / "grid.toml", "dataset = \"ds\"\n"
                                      "axis = \"quality-diversity\"\n"
                                      "diversity = [0.25, 0.5, 1.0]\n"
                                      "quality = [80, 100]\n"
                                      "repeats = 1\n"
                                      "seed = 2\n"
                                      "max_epochs = 3\n"
                                      "patience = 2\n");
    r = cli(fmt::format("run --grid '{}/grid.toml' --quiet", root));
    REQUIRE(r.exit_code == 0);
    const auto out = dir / "grid-results";
    CHECK(std::filesystem::exists(out / "results.csv"));
    const auto points = read_aggregated_csv(out / "aggregated.csv");
    bool baseline = false;
    for (const auto& p : points)
        baseline |= p.diversity == 1.0 && p.completeness == 1.0 && p.quality_achieved == 100.0 && p.perf_norm &&
                    *p.perf_norm == 1.0;
    CHECK(baseline);

    r = cli(fmt::format("run --grid '{}/grid.toml'", root));
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("0 trained") != std::string::npos);

    r = cli(fmt::format("analyze --axis qd '{}'", (out / "results.csv").string()));
    REQUIRE(r.exit_code == 0);
    const auto rows = parse_trajectory_csv(testutil::slurp(out / "trajectory_qd.csv"));
    REQUIRE_FALSE(rows.empty());
    std::vector<testutil::XY> cloud;
    for (const auto& p : perf_points(points, EffortAxis::quality_diversity)) cloud.emplace_back(p.effort, p.perf_norm);
    std::vector<testutil::XY> chain;
    for (const auto& row : rows) chain.emplace_back(row.effort, row.perf_norm);
    CHECK(testutil::no_point_above(chain, cloud));
    CHECK(std::filesystem::exists(out / "importance_qd.csv"));
    CHECK(std::filesystem::exists(out / "saturation.csv"));

    r = cli(fmt::format("plot --axis qd '{}' --out '{}/svg'", out.string(), root));
    REQUIRE(r.exit_code == 0);
    for (const char* f : {"trajectory_qd.svg", "importance_qd.svg", "saturation.svg"})
        CHECK(testutil::slurp(dir / "svg" / f).find("<svg") != std::string::npos);

    r = cli("plan --quality 85");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("action: raise_quality") != std::string::npos);

    r = cli(fmt::format("plan --quality 99 --results '{}'", out.string()));
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("action: ") != std::string::npos);
    CHECK(r.output.find("diversity_saturation: ") != std::string::npos);
}

TEST_CASE("cli errors and exit codes") {
    TempDir dir;
    auto r = cli("--help");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("synth") != std::string::npos);

    r = cli("synth --out x --bogus 3");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("--bogus") != std::string::npos);

    r = cli("synth --out x --dims 4,4");
    CHECK(r.exit_code == 2);

    r = cli(fmt::format("analyze '{}/missing.csv'", dir.path().string()));
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("missing.csv") != std::string::npos);

    r = cli(fmt::format("run --grid '{}/none.toml'", dir.path().string()));
    CHECK(r.exit_code == 1);

    // above the threshold the diversity curve is required
    r = cli("plan --quality 99");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("error:") != std::string::npos);

    r = cli("");
    CHECK(r.exit_code == 2);
}
