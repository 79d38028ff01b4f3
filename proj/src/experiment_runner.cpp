#include "labelbudget/experiment_runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "labelbudget/effort_model.hpp"
#include "labelbudget/error.hpp"
#include "labelbudget/rng.hpp"
#include "labelbudget/trajectory.hpp"

namespace fs = std::filesystem;

namespace labelbudget {

std::string_view to_string(GridAxis axis) noexcept {
    switch (axis) {
        case GridAxis::quality_diversity: return "quality-diversity";
        case GridAxis::diversity_completeness: return "diversity-completeness";
        case GridAxis::quality_sweep: return "quality-sweep";
        case GridAxis::diversity_sweep: return "diversity-sweep";
    }
    return "quality-diversity";
}

GridAxis grid_axis_from_string(std::string_view s) {
    if (s == "quality-diversity" || s == "qd") return GridAxis::quality_diversity;
    if (s == "diversity-completeness" || s == "dc") return GridAxis::diversity_completeness;
    if (s == "quality-sweep") return GridAxis::quality_sweep;
    if (s == "diversity-sweep") return GridAxis::diversity_sweep;
    throw DomainError(fmt::format("unknown grid axis '{}'", s));
}

void GridSpec::validate() const {
    if (diversity.empty() || completeness.empty() || (quality.empty() && slice_steps.empty()))
        throw DomainError("grid value lists must not be empty");
    for (const double d : diversity)
        if (!(d > 0.0 && d <= 1.0)) throw DomainError(fmt::format("diversity value {} outside (0, 1]", d));
    for (const double c : completeness)
        if (!(c > 0.0 && c <= 1.0)) throw DomainError(fmt::format("completeness value {} outside (0, 1]", c));
    if (slice_steps.empty()) {
        for (const double q : quality)
            if (!(q >= 0.0 && q <= 100.0)) throw DomainError(fmt::format("quality value {} outside [0, 100]", q));
    }
    for (const int s : slice_steps)
        if (s < 1) throw DomainError(fmt::format("slice_step value {} must be >= 1", s));
    if (repeats < 1) throw DomainError(fmt::format("repeats must be >= 1, got {}", repeats));
    if (parallelism < 1) throw DomainError(fmt::format("parallelism must be >= 1, got {}", parallelism));
    train.validate();
}

// ---------------------------------------------------------------------------
// Grid expansion
// ---------------------------------------------------------------------------

namespace {

std::string cell_key(const VirtueConfig& v) {
    return fmt::format("d={};c={};{}", format_number(v.diversity), format_number(v.completeness),
                       v.quality_target ? "q=" + format_number(*v.quality_target)
                                        : fmt::format("step={}", *v.slice_step));
}

std::string hex64(std::uint64_t h) { return fmt::format("{:016x}", h); }

bool is_baseline(const VirtueConfig& v) {
    return v.diversity == 1.0 && v.completeness == 1.0 &&
           (v.quality_target ? *v.quality_target == 100.0 : *v.slice_step == 1);
}

// Per-stage seeds derived from the run seed.
enum class Stage : std::uint64_t { diversity = 1, completeness = 2, split = 3, train = 4 };

std::uint64_t stage_seed(std::uint64_t run_seed, Stage s) { return hash_combine(run_seed, static_cast<std::uint64_t>(s)); }

}  // namespace

std::vector<RunDescriptor> expand_grid(const GridSpec& spec, std::string_view dataset_fingerprint) {
    spec.validate();
    std::vector<VirtueConfig> cells;
    for (const double q_or_step : spec.slice_steps.empty() ? spec.quality
                                                           : std::vector<double>(spec.slice_steps.begin(),
                                                                                 spec.slice_steps.end()))
        for (const double d : spec.diversity)
            for (const double c : spec.completeness) {
                VirtueConfig v;
                v.diversity = d;
                v.completeness = c;
                if (spec.slice_steps.empty()) {
                    v.quality_target = q_or_step;
                } else {
                    v.quality_target.reset();
                    v.slice_step = static_cast<int>(q_or_step);
                }
                cells.push_back(v);
            }
    if (std::none_of(cells.begin(), cells.end(), is_baseline)) {
        VirtueConfig base;
        if (!spec.slice_steps.empty()) {
            base.quality_target.reset();
            base.slice_step = 1;
        }
        cells.push_back(base);
    }

    const std::string trainer_key =
        fmt::format("trainer={};epochs={};patience={};lr={};test={};test_seed={}", spec.trainer.label(),
                    spec.train.max_epochs, spec.train.patience, format_number(spec.train.learning_rate),
                    format_number(spec.test_fraction), spec.test_seed);
    std::vector<RunDescriptor> runs;
    for (std::size_t cell = 0; cell < cells.size(); ++cell) {
        const auto key = cell_key(cells[cell]);
        for (int r = 0; r < spec.repeats; ++r) {
            RunDescriptor run;
            run.cell = cell;
            run.repeat = r;
            run.virtues = cells[cell];
            run.virtues.seed = hash_combine(hash_combine(mix64(spec.seed), fnv1a64(key)), static_cast<std::uint64_t>(r));
            run.run_hash = hex64(fnv1a64(fmt::format("{}|{}|seed={}|{}", dataset_fingerprint, key, run.virtues.seed,
                                                     trainer_key)));
            runs.push_back(std::move(run));
        }
    }
    return runs;
}

double aggregate_median(std::span<const double> values) {
    if (values.empty()) throw DomainError("aggregate_median: empty list");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Number / CSV formatting
// ---------------------------------------------------------------------------

std::string format_number(double x) {
    auto s = fmt::format("{}", x);
    if (s.find_first_of(".eEni") == std::string::npos) s += ".0";
    return s;
}

namespace {

std::string_view to_string(RunStatus s) noexcept { return s == RunStatus::ok ? "ok" : "failed"; }

RunStatus run_status_from_string(std::string_view s) {
    if (s == "ok") return RunStatus::ok;
    if (s == "failed") return RunStatus::failed;
    throw CorruptionError(fmt::format("unknown run status '{}'", s));
}

std::string opt_number(const std::optional<double>& x) { return x ? format_number(*x) : std::string(); }

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        auto field = std::string(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        while (!field.empty() && (field.front() == ' ')) field.erase(field.begin());
        while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.pop_back();
        out.push_back(std::move(field));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw CorruptionError(fmt::format("line {}: '{}' is not a number", line, s));
    }
}

constexpr std::string_view kResultsHeader =
    "dataset_id,axis,diversity,completeness,quality_target,quality_achieved,slice_step,seed,perf_raw,best_epoch,status";
constexpr std::string_view kAggregatedHeader =
    "dataset_id,axis,diversity,completeness,quality_achieved,effort_qd,effort_dc,perf_raw_median,perf_norm,n_seeds";

}  // namespace

std::string results_csv(std::span<const RunRecord> runs) {
    std::string out(kResultsHeader);
    out += '\n';
    for (const auto& r : runs) {
        const bool ok = r.status == RunStatus::ok;
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.dataset_id, to_string(r.axis),
                           format_number(r.diversity), format_number(r.completeness), opt_number(r.quality_target),
                           format_number(r.quality_achieved), r.slice_step, r.seed,
                           ok ? format_number(r.perf_raw) : std::string(), ok ? std::to_string(r.best_epoch) : "",
                           to_string(r.status));
    }
    return out;
}

std::string aggregated_csv(std::span<const ExperimentPoint> points) {
    std::string out(kAggregatedHeader);
    out += '\n';
    for (const auto& p : points)
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", p.dataset_id, to_string(p.axis),
                           format_number(p.diversity), format_number(p.completeness),
                           format_number(p.quality_achieved), format_number(p.effort_qd), format_number(p.effort_dc),
                           opt_number(p.perf_raw_median), opt_number(p.perf_norm), p.n_seeds);
    return out;
}

std::vector<ExperimentPoint> parse_aggregated_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) throw CorruptionError("aggregated CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_csv_line(line) != split_csv_line(kAggregatedHeader))
        throw CorruptionError(fmt::format("unexpected aggregated CSV header '{}'", line));
    std::vector<ExperimentPoint> points;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 10) throw CorruptionError(fmt::format("line {}: expected 10 fields, got {}", line_no, f.size()));
        ExperimentPoint p;
        p.dataset_id = f[0];
        p.axis = grid_axis_from_string(f[1]);
        p.diversity = parse_double(f[2], line_no);
        p.completeness = parse_double(f[3], line_no);
        p.quality_achieved = parse_double(f[4], line_no);
        p.effort_qd = parse_double(f[5], line_no);
        p.effort_dc = parse_double(f[6], line_no);
        if (!f[7].empty()) p.perf_raw_median = parse_double(f[7], line_no);
        if (!f[8].empty()) p.perf_norm = parse_double(f[8], line_no);
        p.n_seeds = static_cast<int>(parse_double(f[9], line_no));
        points.push_back(std::move(p));
    }
    return points;
}

std::vector<ExperimentPoint> read_aggregated_csv(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw NotFoundError(fmt::format("cannot open '{}'", file.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_aggregated_csv(ss.str());
}

nlohmann::json run_record_to_json(const RunRecord& r) {
    nlohmann::json j{{"dataset_id", r.dataset_id},
                     {"axis", std::string(to_string(r.axis))},
                     {"diversity", r.diversity},
                     {"completeness", r.completeness},
                     {"quality_achieved", r.quality_achieved},
                     {"slice_step", r.slice_step},
                     {"seed", r.seed},
                     {"perf_raw", r.perf_raw},
                     {"best_epoch", r.best_epoch},
                     {"status", std::string(to_string(r.status))},
                     {"run_hash", r.run_hash}};
    j["quality_target"] = r.quality_target ? nlohmann::json(*r.quality_target) : nlohmann::json(nullptr);
    return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
    try {
        RunRecord r;
        r.dataset_id = j.at("dataset_id").get<std::string>();
        r.axis = grid_axis_from_string(j.at("axis").get<std::string>());
        r.diversity = j.at("diversity").get<double>();
        r.completeness = j.at("completeness").get<double>();
        if (!j.at("quality_target").is_null()) r.quality_target = j.at("quality_target").get<double>();
        r.quality_achieved = j.at("quality_achieved").get<double>();
        r.slice_step = j.at("slice_step").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.perf_raw = j.at("perf_raw").get<double>();
        r.best_epoch = j.at("best_epoch").get<int>();
        r.status = run_status_from_string(j.at("status").get<std::string>());
        r.run_hash = j.at("run_hash").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw CorruptionError(fmt::format("malformed run record: {}", ex.what()));
    }
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

std::vector<ExperimentPoint> aggregate_runs(std::span<const RunRecord> runs, int repeats) {
    struct Cell {
        ExperimentPoint point;
        std::vector<double> achieved;
        bool baseline = false;
    };
    std::vector<Cell> cells;
    std::map<std::string, std::size_t> index;
    for (const auto& r : runs) {
        const auto key = fmt::format("{}|{}|{}|{}", format_number(r.diversity), format_number(r.completeness),
                                     opt_number(r.quality_target), r.quality_target ? 0 : r.slice_step);
        auto [it, inserted] = index.try_emplace(key, cells.size());
        if (inserted) {
            Cell c;
            c.point.dataset_id = r.dataset_id;
            c.point.axis = r.axis;
            c.point.diversity = r.diversity;
            c.point.completeness = r.completeness;
            c.baseline = r.diversity == 1.0 && r.completeness == 1.0 &&
                         (r.quality_target ? *r.quality_target == 100.0 : r.slice_step == 1);
            cells.push_back(std::move(c));
        }
        auto& cell = cells[it->second];
        if (r.status == RunStatus::ok) {
            cell.point.per_seed.push_back(r.perf_raw);
            cell.achieved.push_back(r.quality_achieved);
        }
    }

    // Cells need at least 3 successful seeds (or all of them when fewer were requested).
    const auto required = static_cast<std::size_t>(std::min(3, repeats));
    std::optional<double> baseline;
    for (auto& c : cells) {
        auto& p = c.point;
        p.n_seeds = static_cast<int>(p.per_seed.size());
        p.quality_achieved = c.achieved.empty() ? 0.0 : aggregate_median(c.achieved);
        p.effort_qd = effort_qd(p.diversity, p.quality_achieved);
        p.effort_dc = effort_dc(p.diversity, p.completeness);
        if (p.per_seed.size() >= required && !p.per_seed.empty()) p.perf_raw_median = aggregate_median(p.per_seed);
        if (c.baseline && p.perf_raw_median) baseline = p.perf_raw_median;
    }
    if (!baseline) throw DomainError("the unaltered (1, 1, 100) cell has no valid median; the grid cannot be normalized");
    for (auto& c : cells)
        if (c.point.perf_raw_median) c.point.perf_norm = normalize(*c.point.perf_raw_median, *baseline);

    std::vector<ExperimentPoint> out;
    out.reserve(cells.size());
    for (auto& c : cells) out.push_back(std::move(c.point));
    return out;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

namespace {

void write_text_atomic(const fs::path& file, const std::string& text) {
    fs::create_directories(file.parent_path());
    auto tmp = file;
    tmp += fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DomainError(fmt::format("cannot write '{}'", tmp.string()));
        out << text;
    }
    fs::rename(tmp, file);
}

std::optional<RunRecord> read_cached(const fs::path& file, const std::string& run_hash) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        auto r = run_record_from_json(nlohmann::json::parse(in));
        if (r.run_hash != run_hash || r.status != RunStatus::ok) return std::nullopt;
        return r;
    } catch (const std::exception&) {
        return std::nullopt;  // unreadable entries are recomputed
    }
}

// State shared by all runs of one grid.
struct GridContext {
    const GridSpec* spec = nullptr;
    DatasetManifest trainval;
    DatasetManifest test;
    std::map<std::string, LoadedVolume, std::less<>> volumes;
    std::size_t original_labeled = 0;
    fs::path work_dir;
};

struct PreparedRun {
    DatasetManifest train;
    DatasetManifest val;
    QualityReport quality;
    std::map<std::string, LabelMask> degraded;  // train+val masks used for training
    std::vector<SliceRef> train_slices;
};

PreparedRun prepare_run(const GridContext& ctx, const VirtueConfig& v) {
    auto m = sample_diversity(ctx.trainval, v.diversity, stage_seed(v.seed, Stage::diversity));
    m = sample_completeness(m, v.completeness, stage_seed(v.seed, Stage::completeness));

    std::vector<LabeledMaskRef> refs;
    for (const auto& e : m.entries) refs.push_back({&ctx.volumes.at(e.volume_id).mask, e.labeled_slices});
    PreparedRun run;
    run.quality = v.quality_target ? step_for_target_quality(refs, *v.quality_target)
                                   : QualityReport{*v.slice_step, pooled_quality(refs, *v.slice_step)};
    for (const auto& e : m.entries)
        run.degraded.emplace(e.volume_id,
                             degrade_quality(ctx.volumes.at(e.volume_id).mask, e.labeled_slices, run.quality.slice_step).mask);
    m = record_quality(m, run.quality);
    std::tie(run.train, run.val) = split_train_val(m, stage_seed(v.seed, Stage::split));
    run.train_slices = upsample_train(run.train, ctx.original_labeled);
    return run;
}

RunResult run_builtin(const GridContext& ctx, PreparedRun& run, const TrainConfig& config) {
    TrainingData data;
    auto take = [&](const DatasetManifest& m, std::vector<LoadedVolume>& dst) {
        for (const auto& e : m.entries) {
            const auto& src = ctx.volumes.at(e.volume_id);
            dst.push_back({e.volume_id, src.image, std::move(run.degraded.at(e.volume_id))});
        }
    };
    take(run.train, data.train_volumes);
    take(run.val, data.val_volumes);
    for (const auto& e : ctx.test.entries) data.test_volumes.push_back(ctx.volumes.at(e.volume_id));
    data.train_slices = run.train_slices;
    for (const auto& e : run.val.entries)
        for (const int z : e.labeled_slices) data.val_slices.push_back({e.volume_id, z});
    return train_and_evaluate(data, config);
}

// Writes manifests plus degraded masks for an external trainer.
RunResult run_with_command(const GridContext& ctx, PreparedRun& run, const TrainConfig& config,
                           const std::string& run_hash) {
    const auto dir = ctx.work_dir / run_hash;
    fs::create_directories(dir / "masks");
    const auto dataset_root = fs::absolute(ctx.trainval.root);
    auto rebase = [&](DatasetManifest m, bool degraded) {
        m.root = dir;
        for (auto& e : m.entries) {
            e.volume_path = (dataset_root / e.volume_path).lexically_normal().string();
            if (degraded) {
                e.mask_path = "masks/" + e.volume_id + ".vol";
                write_mask(run.degraded.at(e.volume_id), dir / e.mask_path);
            } else {
                e.mask_path = (dataset_root / e.mask_path).lexically_normal().string();
            }
        }
        return m;
    };
    auto train = rebase(run.train, true);
    train.provenance.push_back({"upsample_train", {{"original_labeled_count", ctx.original_labeled}}, 0});
    write_manifest(train, dir / "train.json");
    write_manifest(rebase(run.val, true), dir / "val.json");
    write_manifest(rebase(ctx.test, false), dir / "test.json");
    TrainRequest req{dir / "train.json", dir / "val.json", dir / "test.json", config};
    auto result = run_external(ctx.spec->trainer.command, req, ctx.spec->external);
    fs::remove_all(dir);
    return result;
}

RunRecord execute(const GridContext& ctx, const RunDescriptor& d) {
    const auto& spec = *ctx.spec;
    RunRecord rec;
    rec.dataset_id = ctx.trainval.dataset_id;
    rec.axis = spec.axis;
    rec.diversity = d.virtues.diversity;
    rec.completeness = d.virtues.completeness;
    rec.quality_target = d.virtues.quality_target;
    rec.seed = d.virtues.seed;
    rec.run_hash = d.run_hash;
    try {
        auto run = prepare_run(ctx, d.virtues);
        rec.slice_step = run.quality.slice_step;
        rec.quality_achieved = 100.0 * run.quality.achieved_iou;
        TrainConfig config = spec.train;
        config.seed = stage_seed(d.virtues.seed, Stage::train);
        const auto result = spec.trainer.builtin() ? run_builtin(ctx, run, config)
                                                   : run_with_command(ctx, run, config, d.run_hash);
        rec.perf_raw = result.test_perf;
        rec.best_epoch = result.best_epoch;
        rec.status = RunStatus::ok;
    } catch (const std::exception& ex) {
        rec.status = RunStatus::failed;
        rec.error = ex.what();
    }
    return rec;
}

std::string file_fingerprint(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fmt::format("{:016x}", fnv1a64(ss.str()));
}

}  // namespace

GridResult run_grid(const GridSpec& spec, const fs::path& out_dir, const ProgressCallback& progress) {
    spec.validate();
    GridContext ctx;
    ctx.spec = &spec;
    const auto manifest_file = fs::is_directory(spec.dataset) ? spec.dataset / "manifest.json" : spec.dataset;
    const auto dataset = read_manifest(manifest_file);
    for (const auto& e : dataset.entries)
        if (e.split != Split::trainval)
            throw DomainError(fmt::format("dataset volume '{}' is already split ('{}'); run grids on the ingested "
                                          "manifest",
                                          e.volume_id, to_string(e.split)));
    std::tie(ctx.trainval, ctx.test) = split_test(dataset, spec.test_fraction, spec.test_seed);
    for (const auto& e : dataset.entries) ctx.volumes.emplace(e.volume_id, load_volume(dataset, e.volume_id));
    ctx.original_labeled = ctx.trainval.labeled_slice_count();
    ctx.work_dir = out_dir / "work";

    const auto runs = expand_grid(spec, file_fingerprint(manifest_file));
    const auto cache_dir = out_dir / "cache";
    fs::create_directories(cache_dir);

    GridResult result;
    result.runs.resize(runs.size());
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (auto cached = read_cached(cache_dir / (runs[i].run_hash + ".json"), runs[i].run_hash)) {
            cached->axis = spec.axis;
            result.runs[i] = std::move(*cached);
            ++result.cache_hits;
            if (progress) progress(result.runs[i], true);
        } else {
            pending.push_back(i);
        }
    }

    std::mutex progress_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < pending.size(); k = next++) {
            const auto i = pending[k];
            auto rec = execute(ctx, runs[i]);
            if (rec.status == RunStatus::ok)
                write_text_atomic(cache_dir / (rec.run_hash + ".json"), run_record_to_json(rec).dump(2) + "\n");
            result.runs[i] = std::move(rec);
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(result.runs[i], false);
            }
        }
    };
    {
        const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(spec.parallelism), pending.size());
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < n_workers; ++t) pool.emplace_back(worker);
        worker();
    }
    result.trainings = pending.size();

    write_text_atomic(out_dir / "results.csv", results_csv(result.runs));
    result.points = aggregate_runs(result.runs, spec.repeats);
    write_text_atomic(out_dir / "aggregated.csv", aggregated_csv(result.points));
    return result;
}

// ---------------------------------------------------------------------------
// Grid configuration
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
    }
    return std::string(line);
}

std::string unquote(const std::string& v, std::size_t line) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    if (v.find_first_of("\"[],") != std::string::npos)
        throw DomainError(fmt::format("grid config line {}: malformed value '{}'", line, v));
    return v;
}

std::vector<double> number_list(const std::string& v, std::size_t line) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        throw DomainError(fmt::format("grid config line {}: expected a [..] list, got '{}'", line, v));
    std::vector<double> out;
    const auto body = trim(std::string_view(v).substr(1, v.size() - 2));
    if (body.empty()) return out;
    for (const auto& item : split_csv_line(body)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw DomainError(fmt::format("grid config line {}: '{}' is not a number", line, item));
        }
    }
    return out;
}

double number(const std::string& v, std::size_t line) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw DomainError(fmt::format("grid config line {}: '{}' is not a number", line, v));
    }
}

int integer(const std::string& v, std::size_t line) {
    const double x = number(v, line);
    if (x != std::floor(x)) throw DomainError(fmt::format("grid config line {}: '{}' is not an integer", line, v));
    return static_cast<int>(x);
}

}  // namespace

GridSpec parse_grid_config(std::string_view text, const fs::path& base_dir) {
    GridSpec spec;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    bool have_dataset = false;
    bool have_quality = false;
    while (std::getline(in, raw)) {
        ++line;
        const auto content = trim(strip_comment(raw));
        if (content.empty() || content.front() == '[' ) continue;  // blank or TOML table header
        const auto eq = content.find('=');
        if (eq == std::string::npos) throw DomainError(fmt::format("grid config line {}: expected key = value", line));
        const auto key = trim(std::string_view(content).substr(0, eq));
        const auto value = trim(std::string_view(content).substr(eq + 1));
        if (key == "dataset") {
            fs::path p = unquote(value, line);
            spec.dataset = p.is_absolute() ? p : base_dir / p;
            have_dataset = true;
        } else if (key == "axis") {
            spec.axis = grid_axis_from_string(unquote(value, line));
        } else if (key == "diversity") {
            spec.diversity = number_list(value, line);
        } else if (key == "completeness") {
            spec.completeness = number_list(value, line);
        } else if (key == "quality") {
            spec.quality = number_list(value, line);
            have_quality = true;
        } else if (key == "slice_step") {
            for (const double s : number_list(value, line)) spec.slice_steps.push_back(integer(format_number(s), line));
        } else if (key == "repeats") {
            spec.repeats = integer(value, line);
        } else if (key == "seed") {
            spec.seed = static_cast<std::uint64_t>(integer(value, line));
        } else if (key == "trainer") {
            const auto t = unquote(value, line);
            spec.trainer.command = t == "builtin" ? std::string() : t;
        } else if (key == "max_epochs") {
            spec.train.max_epochs = integer(value, line);
        } else if (key == "patience") {
            spec.train.patience = integer(value, line);
        } else if (key == "lr") {
            spec.train.learning_rate = number(value, line);
        } else if (key == "test_fraction") {
            spec.test_fraction = number(value, line);
        } else if (key == "test_seed") {
            spec.test_seed = static_cast<std::uint64_t>(integer(value, line));
        } else if (key == "parallelism") {
            spec.parallelism = integer(value, line);
        } else if (key == "timeout_s") {
            spec.external.timeout = std::chrono::milliseconds(static_cast<long long>(number(value, line) * 1000.0));
        } else {
            throw DomainError(fmt::format("grid config line {}: unknown key '{}'", line, key));
        }
    }
    if (!have_dataset) throw DomainError("grid config: missing 'dataset'");
    if (have_quality && !spec.slice_steps.empty())
        throw DomainError("grid config: set either 'quality' or 'slice_step', not both");
    spec.validate();
    return spec;
}

GridSpec read_grid_config(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw NotFoundError(fmt::format("cannot open grid config '{}'", file.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_grid_config(ss.str(), file.parent_path());
}

}  // namespace labelbudget
