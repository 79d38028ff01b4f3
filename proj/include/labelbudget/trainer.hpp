#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "labelbudget/virtue_transforms.hpp"
#include "labelbudget/voxel_store.hpp"

namespace labelbudget {

struct TrainConfig {
    int max_epochs = 100;
    int patience = 10;
    double learning_rate = 3e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RunResult {
    double test_perf = 0.0;  // pooled foreground IoU on test
    int best_epoch = 0;      // 1-based; 0 when no epoch ran
    std::vector<double> val_history;
};

// Per-voxel slice features: intensity, 3x3 mean, 3x3 standard deviation,
// Sobel gradient magnitude. Borders replicate the edge pixel.
inline constexpr int kFeatureCount = 4;
inline constexpr int kWeightCount = kFeatureCount + 1;  // + bias

using Weights = std::array<double, kWeightCount>;

/// Feature planes of one slice, feature-major: value(f, i) = data[f * n + i].
struct SliceFeatures {
    int nx = 0;
    int ny = 0;
    std::vector<double> data;

    [[nodiscard]] std::size_t voxel_count() const noexcept { return static_cast<std::size_t>(nx) * ny; }
    [[nodiscard]] double value(int f, std::size_t i) const noexcept { return data[f * voxel_count() + i]; }
};

[[nodiscard]] SliceFeatures compute_slice_features(std::span<const float> slice, int nx, int ny);

struct Standardizer {
    std::array<double, kFeatureCount> mean{};
    std::array<double, kFeatureCount> stddev{1.0, 1.0, 1.0, 1.0};

    void apply(SliceFeatures& f) const noexcept;
};

/// Class-balanced mean logistic loss of one slice (the SGD batch).
/// Each class is weighted by n / (2 * n_class); a class absent from the batch
/// leaves the other at weight 1.
[[nodiscard]] double slice_loss(const Weights& w, const SliceFeatures& x, std::span<const std::uint8_t> labels);
[[nodiscard]] Weights slice_gradient(const Weights& w, const SliceFeatures& x, std::span<const std::uint8_t> labels);

class LogisticModel {
public:
    LogisticModel() = default;
    LogisticModel(Weights w, Standardizer s) : weights_(w), standardizer_(s) {}

    [[nodiscard]] const Weights& weights() const noexcept { return weights_; }
    [[nodiscard]] const Standardizer& standardizer() const noexcept { return standardizer_; }

    /// Foreground where the logit is positive. `x` must already be standardized.
    void predict_standardized(const SliceFeatures& x, std::span<std::uint8_t> out) const;
    [[nodiscard]] LabelMask predict(const VolumeGrid& volume) const;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static LogisticModel from_json(const nlohmann::json& j);

private:
    Weights weights_{};
    Standardizer standardizer_;
};

/// One training or validation slice: an image slice and the labels used for it
/// (possibly degraded).
struct SliceSample {
    const VolumeGrid* image = nullptr;
    const LabelMask* labels = nullptr;
    int z = 0;
};

struct TrainOutput {
    LogisticModel model;  // best snapshot by val IoU
    std::vector<double> val_history;
    int best_epoch = 0;
};

using EpochCallback = std::function<void(int epoch, double val_iou)>;

/// Stochastic gradient training with Adam step scaling over `train` in a
/// seeded per-epoch order (one slice = one batch), early stopping on pooled
/// val IoU. Deterministic given `config.seed`.
[[nodiscard]] TrainOutput train_builtin(std::span<const SliceSample> train, std::span<const SliceSample> val,
                                        const TrainConfig& config, const EpochCallback& on_epoch = {});

using VolumePredictor = std::function<LabelMask(const VolumeGrid&)>;

/// Pooled foreground IoU over every slice of every test volume.
[[nodiscard]] double evaluate(const VolumePredictor& predict, std::span<const LoadedVolume> test);
[[nodiscard]] double evaluate(const LogisticModel& model, std::span<const LoadedVolume> test);

/// Everything one builtin run needs, already transformed.
struct TrainingData {
    std::vector<LoadedVolume> train_volumes;  // masks hold the labels used for training
    std::vector<LoadedVolume> val_volumes;
    std::vector<LoadedVolume> test_volumes;   // original masks
    std::vector<SliceRef> train_slices;       // upsampled order, refers to train_volumes
    std::vector<SliceRef> val_slices;
};

[[nodiscard]] RunResult train_and_evaluate(const TrainingData& data, const TrainConfig& config,
                                           const EpochCallback& on_epoch = {});

/// Loads train/val/test manifests as written for an external trainer and runs
/// the builtin learner on them. The train manifest's `upsample_train` record
/// supplies the original labeled-slice count.
[[nodiscard]] RunResult train_from_manifests(const DatasetManifest& train, const DatasetManifest& val,
                                             const DatasetManifest& test, const TrainConfig& config,
                                             const EpochCallback& on_epoch = {});

}  // namespace labelbudget
