#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelbudget/external_trainer.hpp"
#include "labelbudget/trainer.hpp"
#include "labelbudget/virtue_transforms.hpp"

namespace labelbudget {

enum class GridAxis { quality_diversity, diversity_completeness, quality_sweep, diversity_sweep };

[[nodiscard]] std::string_view to_string(GridAxis axis) noexcept;
[[nodiscard]] GridAxis grid_axis_from_string(std::string_view s);

struct TrainerSelection {
    std::string command;  // empty selects the builtin learner
    [[nodiscard]] bool builtin() const noexcept { return command.empty(); }
    [[nodiscard]] std::string label() const { return builtin() ? std::string("builtin") : command; }
};

struct GridSpec {
    std::filesystem::path dataset;  // manifest.json of an ingested dataset
    GridAxis axis = GridAxis::quality_diversity;
    std::vector<double> diversity{1.0};
    std::vector<double> completeness{1.0};
    std::vector<double> quality{100.0};  // targets in percent; ignored when slice_steps is set
    std::vector<int> slice_steps;        // explicit interpolation steps instead of quality targets
    int repeats = 5;
    std::uint64_t seed = 0;
    TrainerSelection trainer;
    TrainConfig train;  // seed is overwritten per run
    double test_fraction = 0.2;
    std::uint64_t test_seed = 0;
    int parallelism = 1;
    ExternalOptions external;

    void validate() const;
};

struct RunDescriptor {
    std::size_t cell = 0;
    int repeat = 0;
    VirtueConfig virtues;  // virtues.seed is the run seed
    std::string run_hash;
};

/// Cartesian product of the value lists times repeats, plus the unaltered
/// (1, 1, 100) cell when the product lacks it. Seeds depend only on
/// (base seed, cell values, repeat) so adding cells never moves existing seeds.
[[nodiscard]] std::vector<RunDescriptor> expand_grid(const GridSpec& spec, std::string_view dataset_fingerprint = {});

enum class RunStatus { ok, failed };

struct RunRecord {
    std::string dataset_id;
    GridAxis axis = GridAxis::quality_diversity;
    double diversity = 1.0;
    double completeness = 1.0;
    std::optional<double> quality_target;
    double quality_achieved = 100.0;  // percent
    int slice_step = 1;
    std::uint64_t seed = 0;
    double perf_raw = 0.0;
    int best_epoch = 0;
    RunStatus status = RunStatus::ok;
    std::string run_hash;
    std::string error;  // set when failed; not part of the CSV
};

struct ExperimentPoint {
    std::string dataset_id;
    GridAxis axis = GridAxis::quality_diversity;
    double diversity = 1.0;
    double completeness = 1.0;
    double quality_achieved = 100.0;
    double effort_qd = 1.0;
    double effort_dc = 1.0;
    std::optional<double> perf_raw_median;  // nullopt: fewer than the required seeds succeeded
    std::optional<double> perf_norm;
    int n_seeds = 0;
    std::vector<double> per_seed;
};

/// Exact median; mean of the two central values for even counts.
[[nodiscard]] double aggregate_median(std::span<const double> values);

struct GridResult {
    std::vector<RunRecord> runs;
    std::vector<ExperimentPoint> points;
    std::size_t trainings = 0;  // runs actually trained (cache misses)
    std::size_t cache_hits = 0;
};

using ProgressCallback = std::function<void(const RunRecord&, bool from_cache)>;

/// Executes every run of the grid (skipping cached ones), aggregates by median,
/// normalizes by the unaltered cell, and writes `results.csv`,
/// `aggregated.csv` and `cache/<run_hash>.json` under `out_dir`.
GridResult run_grid(const GridSpec& spec, const std::filesystem::path& out_dir, const ProgressCallback& progress = {});

/// Aggregates run records per cell in first-seen order.
[[nodiscard]] std::vector<ExperimentPoint> aggregate_runs(std::span<const RunRecord> runs, int repeats);

// --- CSV ---

[[nodiscard]] std::string format_number(double x);
[[nodiscard]] std::string results_csv(std::span<const RunRecord> runs);
[[nodiscard]] std::string aggregated_csv(std::span<const ExperimentPoint> points);
[[nodiscard]] std::vector<ExperimentPoint> parse_aggregated_csv(std::string_view text);
[[nodiscard]] std::vector<ExperimentPoint> read_aggregated_csv(const std::filesystem::path& file);

[[nodiscard]] nlohmann::json run_record_to_json(const RunRecord& r);
[[nodiscard]] RunRecord run_record_from_json(const nlohmann::json& j);

// --- grid configuration file ---
//
//   dataset = "ds/manifest.json"      # relative to the config file; a directory means its manifest.json
//   axis = "quality-diversity"
//   diversity = [0.25, 0.5, 1.0]
//   completeness = [1.0]
//   quality = [75, 90, 100]           # or: slice_step = [1, 2, 4]
//   repeats = 5
//   seed = 1
//   trainer = "builtin"               # or a shell command speaking the trainer protocol
//
// Optional: max_epochs, patience, lr, test_fraction, test_seed, parallelism, timeout_s.

[[nodiscard]] GridSpec parse_grid_config(std::string_view text, const std::filesystem::path& base_dir);
[[nodiscard]] GridSpec read_grid_config(const std::filesystem::path& file);

}  // namespace labelbudget
