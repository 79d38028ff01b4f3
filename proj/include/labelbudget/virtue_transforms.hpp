#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "labelbudget/voxel_store.hpp"

namespace labelbudget {

/// One point in (diversity, completeness, quality) space.
/// Exactly one of `quality_target` (percent) and `slice_step` is set.
struct VirtueConfig {
    double diversity = 1.0;
    double completeness = 1.0;
    std::optional<double> quality_target = 100.0;
    std::optional<int> slice_step;
    std::uint64_t seed = 0;

    void validate() const;
};

struct QualityReport {
    int slice_step = 1;
    double achieved_iou = 1.0;
};

/// Voxel counts behind an IoU, so several volumes can be pooled.
struct IouCounts {
    std::size_t intersection = 0;
    std::size_t union_count = 0;

    /// 1.0 when both masks are empty.
    [[nodiscard]] double iou() const noexcept {
        return union_count == 0 ? 1.0 : static_cast<double>(intersection) / static_cast<double>(union_count);
    }
    IouCounts& operator+=(const IouCounts& o) noexcept {
        intersection += o.intersection;
        union_count += o.union_count;
        return *this;
    }
};

[[nodiscard]] IouCounts iou_counts(const LabelMask& a, const LabelMask& b);
/// Counts restricted to slices z in [z_begin, z_end).
[[nodiscard]] IouCounts iou_counts(const LabelMask& a, const LabelMask& b, int z_begin, int z_end);
[[nodiscard]] double iou(const LabelMask& a, const LabelMask& b);

/// Volume order produced by the Fisher-Yates/splitmix64 shuffle keyed by (key, seed).
[[nodiscard]] std::vector<std::size_t> shuffled_order(std::size_t n, std::string_view key, std::uint64_t seed);

/// Moves ceil(fraction * N) volumes to the test split. Returns (trainval, test).
[[nodiscard]] std::pair<DatasetManifest, DatasetManifest> split_test(const DatasetManifest& manifest,
                                                                     double fraction, std::uint64_t seed);

[[nodiscard]] DatasetManifest sample_diversity(const DatasetManifest& manifest, double fraction, std::uint64_t seed);

[[nodiscard]] DatasetManifest sample_completeness(const DatasetManifest& manifest, double fraction,
                                                  std::uint64_t seed);

/// Slices that keep their original label under `step`: labeled_z.front(),
/// front + step, ... up to labeled_z.back(), which is always included.
[[nodiscard]] std::vector<int> kept_slices(std::span<const int> labeled_z, int step);

struct DegradedMask {
    LabelMask mask;
    QualityReport report;
    IouCounts counts;  // over [labeled_z.front(), labeled_z.back()]
};

/// Nearest-neighbour label interpolation between equidistant kept slices.
[[nodiscard]] DegradedMask degrade_quality(const LabelMask& mask, std::span<const int> labeled_z, int slice_step);

/// A mask paired with the slice indices considered labeled in it.
struct LabeledMaskRef {
    const LabelMask* mask = nullptr;
    std::span<const int> labeled_z;
};

/// Pooled achieved IoU of degrading every volume with `slice_step`.
[[nodiscard]] double pooled_quality(std::span<const LabeledMaskRef> volumes, int slice_step);

/// Largest step admitted by a scan from 1 upward that stops at the first step
/// whose pooled IoU falls below quality_target / 100.
[[nodiscard]] QualityReport step_for_target_quality(std::span<const LabeledMaskRef> volumes, double quality_target);
/// Same, loading the masks referenced by `manifest`.
[[nodiscard]] QualityReport step_for_target_quality(const DatasetManifest& manifest, double quality_target);

/// Records a quality degradation in the manifest provenance.
[[nodiscard]] DatasetManifest record_quality(const DatasetManifest& manifest, const QualityReport& report);

/// Volume-level 80/20 split. Returns (train, val).
[[nodiscard]] std::pair<DatasetManifest, DatasetManifest> split_train_val(const DatasetManifest& manifest,
                                                                          std::uint64_t seed);

struct SliceRef {
    std::string volume_id;
    int z = 0;
    friend bool operator==(const SliceRef&, const SliceRef&) = default;
    friend auto operator<=>(const SliceRef&, const SliceRef&) = default;
};

/// round(0.8 * original_labeled_count) slices by cyclic repetition of the
/// train slices in manifest order.
[[nodiscard]] std::vector<SliceRef> upsample_train(const DatasetManifest& train, std::size_t original_labeled_count);

/// Re-applies the transforms recorded in `provenance` beyond those already in
/// `original.provenance`. Throws DomainError if `original` is not a prefix.
[[nodiscard]] DatasetManifest replay_provenance(const DatasetManifest& original,
                                                std::span<const TransformRecord> provenance);

}  // namespace labelbudget
