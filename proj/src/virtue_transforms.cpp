#include "labelbudget/virtue_transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "labelbudget/error.hpp"
#include "labelbudget/rng.hpp"

namespace labelbudget {

namespace {

void check_fraction(double f, std::string_view what) {
    if (!(f > 0.0 && f <= 1.0)) throw DomainError(fmt::format("{} must be in (0, 1], got {}", what, f));
}

DatasetManifest with_record(DatasetManifest m, std::string op, nlohmann::json params, std::uint64_t seed) {
    m.provenance.push_back({std::move(op), std::move(params), seed});
    return m;
}

}  // namespace

void VirtueConfig::validate() const {
    check_fraction(diversity, "diversity");
    check_fraction(completeness, "completeness");
    if (quality_target.has_value() == slice_step.has_value())
        throw DomainError("exactly one of quality_target and slice_step must be set");
    if (quality_target && !(*quality_target >= 0.0 && *quality_target <= 100.0))
        throw DomainError(fmt::format("quality_target must be in [0, 100], got {}", *quality_target));
    if (slice_step && *slice_step < 1) throw DomainError(fmt::format("slice_step must be >= 1, got {}", *slice_step));
}

// ---------------------------------------------------------------------------
// IoU
// ---------------------------------------------------------------------------

IouCounts iou_counts(const LabelMask& a, const LabelMask& b, int z_begin, int z_end) {
    if (!(a.dims() == b.dims()))
        throw DomainError(fmt::format("iou: dims differ ({}x{}x{} vs {}x{}x{})", a.dims().nx, a.dims().ny,
                                      a.dims().nz, b.dims().nx, b.dims().ny, b.dims().nz));
    z_begin = std::max(z_begin, 0);
    z_end = std::min(z_end, a.dims().nz);
    IouCounts c;
    if (z_end <= z_begin) return c;
    const auto* pa = a.slice(z_begin);
    const auto* pb = b.slice(z_begin);
    const std::size_t n = static_cast<std::size_t>(z_end - z_begin) * a.dims().slice_size();
    for (std::size_t i = 0; i < n; ++i) {
        c.intersection += pa[i] & pb[i];
        c.union_count += pa[i] | pb[i];
    }
    return c;
}

IouCounts iou_counts(const LabelMask& a, const LabelMask& b) { return iou_counts(a, b, 0, a.dims().nz); }

double iou(const LabelMask& a, const LabelMask& b) { return iou_counts(a, b).iou(); }

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

std::vector<std::size_t> shuffled_order(std::size_t n, std::string_view key, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(keyed_seed(key, seed));
    fisher_yates(std::span<std::size_t>(order), rng);
    return order;
}

namespace {

// Marks the first `k` shuffled entries; returns flags in manifest order.
std::vector<bool> select_prefix(const DatasetManifest& m, std::size_t k, std::uint64_t seed) {
    const auto order = shuffled_order(m.entries.size(), m.dataset_id, seed);
    std::vector<bool> chosen(m.entries.size(), false);
    for (std::size_t i = 0; i < k; ++i) chosen[order[i]] = true;
    return chosen;
}

std::pair<DatasetManifest, DatasetManifest> partition(const DatasetManifest& m, double fraction, std::uint64_t seed,
                                                      std::string_view op, Split keep_split, Split moved_split) {
    const auto k = fraction_count(fraction, m.entries.size());
    const auto moved = select_prefix(m, k, seed);
    DatasetManifest keep = m;
    DatasetManifest out = m;
    keep.entries.clear();
    out.entries.clear();
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        auto e = m.entries[i];
        if (moved[i]) {
            e.split = moved_split;
            out.entries.push_back(std::move(e));
        } else {
            e.split = keep_split;
            keep.entries.push_back(std::move(e));
        }
    }
    keep.provenance.push_back({std::string(op), {{"fraction", fraction}, {"side", std::string(to_string(keep_split))}}, seed});
    out.provenance.push_back({std::string(op), {{"fraction", fraction}, {"side", std::string(to_string(moved_split))}}, seed});
    return {std::move(keep), std::move(out)};
}

}  // namespace

std::pair<DatasetManifest, DatasetManifest> split_test(const DatasetManifest& manifest, double fraction,
                                                       std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw DomainError(fmt::format("test fraction must be in (0, 1), got {}", fraction));
    if (manifest.entries.size() < 2)
        throw DomainError(fmt::format("split_test needs >= 2 volumes, dataset '{}' has {}", manifest.dataset_id,
                                      manifest.entries.size()));
    for (const auto& e : manifest.entries)
        if (e.split != Split::trainval)
            throw DomainError(fmt::format("split_test: volume '{}' is already in split '{}'", e.volume_id,
                                          to_string(e.split)));
    return partition(manifest, fraction, seed, "split_test", Split::trainval, Split::test);
}

DatasetManifest sample_diversity(const DatasetManifest& manifest, double fraction, std::uint64_t seed) {
    check_fraction(fraction, "diversity fraction");
    if (manifest.entries.empty())
        throw DomainError(fmt::format("sample_diversity: dataset '{}' has no volumes", manifest.dataset_id));
    const auto chosen = select_prefix(manifest, fraction_count(fraction, manifest.entries.size()), seed);
    DatasetManifest out = manifest;
    out.entries.clear();
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
        if (chosen[i]) out.entries.push_back(manifest.entries[i]);
    return with_record(std::move(out), "sample_diversity", {{"fraction", fraction}}, seed);
}

DatasetManifest sample_completeness(const DatasetManifest& manifest, double fraction, std::uint64_t seed) {
    check_fraction(fraction, "completeness fraction");
    DatasetManifest out = manifest;
    for (auto& e : out.entries) {
        const std::size_t labeled = e.labeled_slices.size();
        if (labeled == 0)
            throw DomainError(fmt::format("sample_completeness: volume '{}' has no labeled slices", e.volume_id));
        const auto order = shuffled_order(labeled, e.volume_id, seed);
        std::vector<int> kept;
        const auto k = fraction_count(fraction, labeled);
        kept.reserve(k);
        for (std::size_t i = 0; i < k; ++i) kept.push_back(e.labeled_slices[order[i]]);
        std::sort(kept.begin(), kept.end());
        e.labeled_slices = std::move(kept);
    }
    return with_record(std::move(out), "sample_completeness", {{"fraction", fraction}}, seed);
}

// ---------------------------------------------------------------------------
// Quality
// ---------------------------------------------------------------------------

std::vector<int> kept_slices(std::span<const int> labeled_z, int step) {
    if (labeled_z.empty()) throw DomainError("kept_slices: no labeled slices");
    if (step < 1) throw DomainError(fmt::format("slice_step must be >= 1, got {}", step));
    const int first = labeled_z.front();
    const int last = labeled_z.back();
    std::vector<int> kept;
    for (int z = first; z <= last; z += step) kept.push_back(z);
    if (kept.back() != last) kept.push_back(last);
    return kept;
}

DegradedMask degrade_quality(const LabelMask& mask, std::span<const int> labeled_z, int slice_step) {
    const auto kept = kept_slices(labeled_z, slice_step);
    if (labeled_z.front() < 0 || labeled_z.back() >= mask.dims().nz)
        throw DomainError(fmt::format("degrade_quality: labeled slices [{}, {}] outside [0, {})", labeled_z.front(),
                                      labeled_z.back(), mask.dims().nz));
    DegradedMask out{mask, {slice_step, 1.0}, {}};
    const std::size_t plane = mask.dims().slice_size();
    for (int z = labeled_z.front(); z <= labeled_z.back(); ++z) {
        // Nearest kept slice; on equal distance the lower one wins.
        const auto it = std::lower_bound(kept.begin(), kept.end(), z);
        int source = *it;
        if (source != z && it != kept.begin() && z - *(it - 1) <= source - z) source = *(it - 1);
        if (source != z) std::copy_n(mask.slice(source), plane, out.mask.slice(z));
    }
    out.counts = iou_counts(out.mask, mask, labeled_z.front(), labeled_z.back() + 1);
    out.report.achieved_iou = out.counts.iou();
    return out;
}

double pooled_quality(std::span<const LabeledMaskRef> volumes, int slice_step) {
    IouCounts total;
    for (const auto& v : volumes) {
        if (v.labeled_z.empty()) continue;
        total += degrade_quality(*v.mask, v.labeled_z, slice_step).counts;
    }
    return total.iou();
}

QualityReport step_for_target_quality(std::span<const LabeledMaskRef> volumes, double quality_target) {
    if (!(quality_target >= 0.0 && quality_target <= 100.0))
        throw DomainError(fmt::format("quality_target must be in [0, 100], got {}", quality_target));
    int max_step = 1;
    for (const auto& v : volumes)
        if (!v.labeled_z.empty()) max_step = std::max(max_step, v.labeled_z.back() - v.labeled_z.front());
    const double threshold = quality_target / 100.0;
    QualityReport best{1, pooled_quality(volumes, 1)};
    for (int step = 2; step <= max_step; ++step) {
        const double q = pooled_quality(volumes, step);
        if (q < threshold - 1e-12) break;
        best = {step, q};
    }
    return best;
}

QualityReport step_for_target_quality(const DatasetManifest& manifest, double quality_target) {
    std::vector<LabelMask> masks;
    masks.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) masks.push_back(read_mask(manifest.root / e.mask_path));
    std::vector<LabeledMaskRef> refs;
    for (std::size_t i = 0; i < masks.size(); ++i) refs.push_back({&masks[i], manifest.entries[i].labeled_slices});
    return step_for_target_quality(refs, quality_target);
}

DatasetManifest record_quality(const DatasetManifest& manifest, const QualityReport& report) {
    return with_record(manifest, "degrade_quality",
                       {{"slice_step", report.slice_step}, {"achieved_iou", report.achieved_iou}}, 0);
}

// ---------------------------------------------------------------------------
// Train/val and upsampling
// ---------------------------------------------------------------------------

std::pair<DatasetManifest, DatasetManifest> split_train_val(const DatasetManifest& manifest, std::uint64_t seed) {
    if (manifest.entries.size() < 2)
        throw DomainError(fmt::format("split_train_val needs >= 2 volumes, got {}; slice-level splitting is not "
                                      "supported, raise the diversity fraction",
                                      manifest.entries.size()));
    return partition(manifest, 0.2, seed, "split_train_val", Split::train, Split::val);
}

std::vector<SliceRef> upsample_train(const DatasetManifest& train, std::size_t original_labeled_count) {
    std::vector<SliceRef> base;
    for (const auto& e : train.entries)
        for (const int z : e.labeled_slices) base.push_back({e.volume_id, z});
    if (base.empty()) throw DomainError("upsample_train: train split has zero labeled slices");
    const auto target = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(original_labeled_count)));
    if (target == 0) throw DomainError("upsample_train: original labeled slice count is zero");
    std::vector<SliceRef> out;
    out.reserve(target);
    for (std::size_t i = 0; i < target; ++i) out.push_back(base[i % base.size()]);
    return out;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

DatasetManifest replay_provenance(const DatasetManifest& original, std::span<const TransformRecord> provenance) {
    const auto& prefix = original.provenance;
    if (provenance.size() < prefix.size() || !std::equal(prefix.begin(), prefix.end(), provenance.begin()))
        throw DomainError("replay_provenance: the original manifest's provenance is not a prefix of the record");
    DatasetManifest m = original;
    for (std::size_t i = prefix.size(); i < provenance.size(); ++i) {
        const auto& r = provenance[i];
        if (r.op == "split_test" || r.op == "split_train_val") {
            const auto side = split_from_string(r.params.at("side").get<std::string>());
            auto parts = r.op == "split_test" ? split_test(m, r.params.at("fraction").get<double>(), r.seed)
                                              : split_train_val(m, r.seed);
            m = (side == Split::trainval || side == Split::train) ? std::move(parts.first) : std::move(parts.second);
        } else if (r.op == "sample_diversity") {
            m = sample_diversity(m, r.params.at("fraction").get<double>(), r.seed);
        } else if (r.op == "sample_completeness") {
            m = sample_completeness(m, r.params.at("fraction").get<double>(), r.seed);
        } else if (r.op == "degrade_quality" || r.op == "upsample_train") {
            // Mask-level effects live in the mask files; the manifest only carries the record.
            m.provenance.push_back(r);
        } else {
            throw DomainError(fmt::format("replay_provenance: unknown transform '{}'", r.op));
        }
    }
    return m;
}

}  // namespace labelbudget
