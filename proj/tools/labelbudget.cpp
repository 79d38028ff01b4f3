// labelbudget: dataset ingestion, phantom generation, grid runs, analysis,
// plots and labeling-plan recommendations.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "labelbudget/analysis.hpp"
#include "labelbudget/error.hpp"
#include "labelbudget/experiment_runner.hpp"
#include "labelbudget/planner.hpp"
#include "labelbudget/plots.hpp"
#include "labelbudget/voxel_store.hpp"

namespace fs = std::filesystem;
using namespace labelbudget;

namespace {

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DomainError(fmt::format("cannot write '{}'", file.string()));
    out << text;
    if (!out) throw DomainError(fmt::format("write to '{}' failed", file.string()));
}

Dims parse_dims(const std::string& text) {
    std::vector<int> v;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stoi(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--dims", fmt::format("'{}' is not an integer", part));
        }
    }
    if (v.size() == 1) return {v[0], v[0], v[0]};
    if (v.size() == 3) return {v[0], v[1], v[2]};
    throw CLI::ValidationError("--dims", "expected N or NX,NY,NZ");
}

// Accepts an aggregated CSV, a per-run results CSV next to one, or a run directory.
fs::path aggregated_path(const fs::path& input) {
    if (fs::is_directory(input)) return input / "aggregated.csv";
    if (input.filename() == "results.csv") {
        auto sibling = input.parent_path() / "aggregated.csv";
        if (!fs::exists(sibling))
            throw NotFoundError(fmt::format("'{}' is a per-run table and '{}' does not exist", input.string(),
                                            sibling.string()));
        return sibling;
    }
    return input;
}

EffortAxis axis_option(const std::string& s) { return effort_axis_from_string(s); }

std::string axis_tag(EffortAxis a) { return a == EffortAxis::quality_diversity ? "qd" : "dc"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Label-budget experiments for volumetric segmentation"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Import a directory of PGM slice stacks");
    std::string ingest_src, ingest_out, ingest_id;
    ingest->add_option("source", ingest_src, "Directory with one subdirectory per volume")->required();
    ingest->add_option("--out", ingest_out, "Output dataset directory")->required();
    ingest->add_option("--id", ingest_id, "Dataset id")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic ellipsoid phantom dataset");
    int synth_n = 20;
    std::string synth_dims = "32";
    std::uint64_t synth_seed = 1;
    std::string synth_out, synth_id = "phantom";
    synth->add_option("--n", synth_n, "Number of volumes")->check(CLI::PositiveNumber);
    synth->add_option("--dims", synth_dims, "N or NX,NY,NZ");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--id", synth_id, "Dataset id");

    // run
    auto* run = app.add_subcommand("run", "Execute an experiment grid");
    std::string run_grid_file, run_out;
    int run_parallel = 0;
    bool run_quiet = false;
    run->add_option("--grid", run_grid_file, "Grid configuration file")->required();
    run->add_option("--out", run_out, "Output directory (default: <grid stem>-results next to the grid file)");
    run->add_option("--parallel", run_parallel, "Concurrent runs (overrides the grid file)")->check(CLI::PositiveNumber);
    run->add_flag("--quiet", run_quiet, "No per-run progress lines");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Trajectory, importance and saturation tables");
    std::string an_axis = "qd", an_input, an_out;
    double an_eps = 0.01;
    int an_window = 2;
    analyze->add_option("--axis", an_axis, "qd (quality-diversity) or dc (diversity-completeness)");
    analyze->add_option("input", an_input, "aggregated.csv, results.csv or a run directory")->required();
    analyze->add_option("--out", an_out, "Output directory (default: next to the input)");
    analyze->add_option("--epsilon", an_eps, "Saturation tolerance (fraction of max performance)");
    analyze->add_option("--window", an_window, "Saturation window")->check(CLI::PositiveNumber);

    // plot
    auto* plot = app.add_subcommand("plot", "SVG plots from aggregated results");
    std::string pl_axis = "qd", pl_input, pl_out;
    double pl_eps = 0.01;
    int pl_window = 2;
    plot->add_option("--axis", pl_axis, "qd or dc");
    plot->add_option("input", pl_input, "aggregated.csv, results.csv or a run directory")->required();
    plot->add_option("--out", pl_out, "Output directory (default: next to the input)");
    plot->add_option("--epsilon", pl_eps, "Saturation tolerance");
    plot->add_option("--window", pl_window, "Saturation window")->check(CLI::PositiveNumber);

    // plan
    auto* plan = app.add_subcommand("plan", "Recommend the next labeling action");
    double pn_quality = 0.0;
    std::string pn_results;
    double pn_completeness = 1.0;
    PlanOptions pn_opts;
    plan->add_option("--quality", pn_quality, "Achieved label quality in percent")->required();
    plan->add_option("--results", pn_results, "Aggregated results with a diversity sweep");
    plan->add_option("--completeness", pn_completeness, "Current completeness level");
    plan->add_option("--threshold", pn_opts.quality_threshold_pct, "Quality threshold in percent");
    plan->add_option("--epsilon", pn_opts.epsilon, "Saturation tolerance");
    plan->add_option("--window", pn_opts.window, "Saturation window")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*ingest) {
            const auto m = ingest_slice_stack(ingest_src, ingest_id, ingest_out);
            fmt::print("ingested {} volumes ({} labeled slices) into {}\n", m.entries.size(), m.labeled_slice_count(),
                       ingest_out);
        } else if (*synth) {
            PhantomParams p;
            p.n_volumes = synth_n;
            try {
                p.dims = parse_dims(synth_dims);
            } catch (const CLI::ParseError& e) {
                synth->exit(e);
                return 2;
            }
            p.seed = synth_seed;
            const auto m = generate_phantoms(p, synth_out, synth_id);
            fmt::print("wrote {} phantoms ({}x{}x{}) to {}\n", m.entries.size(), p.dims.nx, p.dims.ny, p.dims.nz,
                       synth_out);
        } else if (*run) {
            const fs::path grid_file = run_grid_file;
            auto spec = read_grid_config(grid_file);
            if (run_parallel > 0) spec.parallelism = run_parallel;
            const fs::path out = run_out.empty()
                                     ? grid_file.parent_path() / (grid_file.stem().string() + "-results")
                                     : fs::path(run_out);
            ProgressCallback progress;
            if (!run_quiet)
                progress = [](const RunRecord& r, bool cached) {
                    std::fprintf(stderr, "%s d=%s c=%s step=%d seed=%llu perf=%s%s\n", cached ? "cached" : "trained",
                                 format_number(r.diversity).c_str(), format_number(r.completeness).c_str(),
                                 r.slice_step, static_cast<unsigned long long>(r.seed),
                                 r.status == RunStatus::ok ? format_number(r.perf_raw).c_str() : "failed",
                                 r.error.empty() ? "" : (": " + r.error).c_str());
                };
            const auto result = run_grid(spec, out, progress);
            std::size_t failed = 0;
            for (const auto& r : result.runs) failed += r.status == RunStatus::failed;
            fmt::print("{} runs ({} trained, {} cached, {} failed); results in {}\n", result.runs.size(),
                       result.trainings, result.cache_hits, failed, out.string());
        } else if (*analyze) {
            const auto axis = axis_option(an_axis);
            const auto input = aggregated_path(an_input);
            const auto points = read_aggregated_csv(input);
            const fs::path out = an_out.empty() ? input.parent_path() : fs::path(an_out);
            const auto pts = perf_points(points, axis);
            if (pts.empty()) throw DomainError(fmt::format("'{}' has no valid cells", input.string()));
            const auto trajectory = optimal_trajectory(pts);
            const auto virtues = compared_virtues(axis);
            const auto series = importance_curves(trajectory, virtues);
            const auto saturation = saturation_table(points, an_eps, an_window);
            const auto tag = axis_tag(axis);
            write_text(out / fmt::format("trajectory_{}.csv", tag), trajectory_csv(trajectory));
            write_text(out / fmt::format("importance_{}.csv", tag), importance_csv(series));
            write_text(out / "saturation.csv", saturation_csv(saturation));
            fmt::print("trajectory: {} vertices; wrote trajectory_{}.csv, importance_{}.csv, saturation.csv to {}\n",
                       trajectory.vertices.size(), tag, tag, out.string());
        } else if (*plot) {
            const auto axis = axis_option(pl_axis);
            const auto input = aggregated_path(pl_input);
            const auto points = read_aggregated_csv(input);
            const fs::path out = pl_out.empty() ? input.parent_path() : fs::path(pl_out);
            const auto set = render_plots(points, axis, pl_eps, pl_window);
            const auto tag = axis_tag(axis);
            write_text(out / fmt::format("trajectory_{}.svg", tag), set.trajectory);
            write_text(out / fmt::format("importance_{}.svg", tag), set.importance);
            write_text(out / "saturation.svg", set.saturation);
            fmt::print("wrote trajectory_{}.svg, importance_{}.svg, saturation.svg to {}\n", tag, tag, out.string());
        } else if (*plan) {
            PlanState state;
            state.achieved_quality_pct = pn_quality;
            state.completeness = pn_completeness;
            if (!pn_results.empty()) {
                const auto points = read_aggregated_csv(aggregated_path(pn_results));
                state.diversity_curve = plan_diversity_curve(points, pn_completeness);
            }
            fmt::print("{}", format_recommendation(recommend_next(state, pn_opts)));
        }
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
