#include "labelbudget/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

#include "labelbudget/error.hpp"
#include "labelbudget/rng.hpp"

namespace labelbudget {

void TrainConfig::validate() const {
    if (max_epochs < 1) throw DomainError(fmt::format("max_epochs must be >= 1, got {}", max_epochs));
    if (patience < 0) throw DomainError(fmt::format("patience must be >= 0, got {}", patience));
    if (!(learning_rate > 0.0)) throw DomainError(fmt::format("learning rate must be > 0, got {}", learning_rate));
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

SliceFeatures compute_slice_features(std::span<const float> slice, int nx, int ny) {
    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    if (slice.size() != n) throw DomainError(fmt::format("slice has {} pixels, expected {}x{}", slice.size(), nx, ny));
    SliceFeatures f{nx, ny, std::vector<double>(kFeatureCount * n)};
    auto px = [&](int x, int y) -> double {
        x = std::clamp(x, 0, nx - 1);
        y = std::clamp(y, 0, ny - 1);
        return slice[static_cast<std::size_t>(y) * nx + x];
    };
    double* intensity = f.data.data();
    double* mean = intensity + n;
    double* stddev = mean + n;
    double* sobel = stddev + n;
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * nx + x;
            double s = 0.0;
            double s2 = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const double v = px(x + dx, y + dy);
                    s += v;
                    s2 += v * v;
                }
            const double m = s / 9.0;
            const double gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                              (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            const double gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                              (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
            intensity[i] = px(x, y);
            mean[i] = m;
            stddev[i] = std::sqrt(std::max(0.0, s2 / 9.0 - m * m));
            sobel[i] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return f;
}

void Standardizer::apply(SliceFeatures& f) const noexcept {
    const std::size_t n = f.voxel_count();
    for (int k = 0; k < kFeatureCount; ++k) {
        double* p = f.data.data() + k * n;
        for (std::size_t i = 0; i < n; ++i) p[i] = (p[i] - mean[k]) / stddev[k];
    }
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

namespace {

struct ClassWeights {
    double positive = 1.0;
    double negative = 1.0;
};

ClassWeights class_weights(std::span<const std::uint8_t> labels) {
    const auto n = static_cast<double>(labels.size());
    const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    const double neg = n - pos;
    if (pos == 0.0 || neg == 0.0) return {};
    return {n / (2.0 * pos), n / (2.0 * neg)};
}

double logit(const Weights& w, const SliceFeatures& x, std::size_t i) noexcept {
    double z = w[kFeatureCount];
    for (int k = 0; k < kFeatureCount; ++k) z += w[k] * x.value(k, i);
    return z;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_batch(const SliceFeatures& x, std::span<const std::uint8_t> labels) {
    if (labels.size() != x.voxel_count())
        throw DomainError(fmt::format("label count {} does not match feature voxels {}", labels.size(), x.voxel_count()));
    if (labels.empty()) throw DomainError("empty batch");
}

}  // namespace

double slice_loss(const Weights& w, const SliceFeatures& x, std::span<const std::uint8_t> labels) {
    check_batch(x, labels);
    const auto cw = class_weights(labels);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double z = logit(w, x, i);
        // -log(sigmoid(z)) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
        total += labels[i] ? cw.positive * softplus(-z) : cw.negative * softplus(z);
    }
    return total / static_cast<double>(labels.size());
}

Weights slice_gradient(const Weights& w, const SliceFeatures& x, std::span<const std::uint8_t> labels) {
    check_batch(x, labels);
    const auto cw = class_weights(labels);
    Weights g{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double residual = labels[i] ? cw.positive * (sigmoid(logit(w, x, i)) - 1.0)
                                          : cw.negative * sigmoid(logit(w, x, i));
        for (int k = 0; k < kFeatureCount; ++k) g[k] += residual * x.value(k, i);
        g[kFeatureCount] += residual;
    }
    for (auto& v : g) v /= static_cast<double>(labels.size());
    return g;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

void LogisticModel::predict_standardized(const SliceFeatures& x, std::span<std::uint8_t> out) const {
    if (out.size() != x.voxel_count()) throw DomainError("prediction buffer size mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = logit(weights_, x, i) > 0.0 ? 1 : 0;
}

LabelMask LogisticModel::predict(const VolumeGrid& volume) const {
    const auto& d = volume.dims();
    LabelMask out(d, volume.spacing());
    for (int z = 0; z < d.nz; ++z) {
        auto f = compute_slice_features({volume.slice(z), d.slice_size()}, d.nx, d.ny);
        standardizer_.apply(f);
        predict_standardized(f, {out.slice(z), d.slice_size()});
    }
    return out;
}

nlohmann::json LogisticModel::to_json() const {
    return {{"weights", weights_}, {"mean", standardizer_.mean}, {"stddev", standardizer_.stddev}};
}

LogisticModel LogisticModel::from_json(const nlohmann::json& j) {
    return {j.at("weights").get<Weights>(),
            {j.at("mean").get<std::array<double, kFeatureCount>>(),
             j.at("stddev").get<std::array<double, kFeatureCount>>()}};
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct PreparedSlice {
    SliceFeatures features;
    std::vector<std::uint8_t> labels;
};

// Deduplicates samples (the upsampled list repeats slices) and returns the
// distinct slices plus, for every input sample, its index among them.
std::pair<std::vector<PreparedSlice>, std::vector<std::size_t>> prepare(std::span<const SliceSample> samples) {
    std::map<std::tuple<const VolumeGrid*, const LabelMask*, int>, std::size_t> seen;
    std::vector<PreparedSlice> distinct;
    std::vector<std::size_t> index;
    index.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.image == nullptr || s.labels == nullptr) throw DomainError("slice sample without image or labels");
        const auto key = std::make_tuple(s.image, s.labels, s.z);
        auto [it, inserted] = seen.try_emplace(key, distinct.size());
        if (inserted) {
            const auto& d = s.image->dims();
            if (!(d == s.labels->dims())) throw DomainError("slice sample image/label dims differ");
            if (s.z < 0 || s.z >= d.nz) throw DomainError(fmt::format("slice index {} outside [0, {})", s.z, d.nz));
            const auto* lab = s.labels->slice(s.z);
            distinct.push_back({compute_slice_features({s.image->slice(s.z), d.slice_size()}, d.nx, d.ny),
                                std::vector<std::uint8_t>(lab, lab + d.slice_size())});
        }
        index.push_back(it->second);
    }
    return {std::move(distinct), std::move(index)};
}

Standardizer fit_standardizer(const std::vector<PreparedSlice>& slices) {
    Standardizer s;
    std::array<double, kFeatureCount> sum{};
    std::array<double, kFeatureCount> sum2{};
    double count = 0.0;
    for (const auto& p : slices) {
        const std::size_t n = p.features.voxel_count();
        for (int k = 0; k < kFeatureCount; ++k)
            for (std::size_t i = 0; i < n; ++i) {
                const double v = p.features.value(k, i);
                sum[k] += v;
                sum2[k] += v * v;
            }
        count += static_cast<double>(n);
    }
    for (int k = 0; k < kFeatureCount; ++k) {
        s.mean[k] = sum[k] / count;
        const double var = sum2[k] / count - s.mean[k] * s.mean[k];
        s.stddev[k] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    return s;
}

double pooled_iou(const LogisticModel& model, const std::vector<PreparedSlice>& slices) {
    std::size_t inter = 0;
    std::size_t uni = 0;
    std::vector<std::uint8_t> pred;
    for (const auto& p : slices) {
        pred.resize(p.labels.size());
        model.predict_standardized(p.features, pred);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            inter += pred[i] & p.labels[i];
            uni += pred[i] | p.labels[i];
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TrainOutput train_builtin(std::span<const SliceSample> train, std::span<const SliceSample> val,
                          const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train.empty()) throw DomainError("train_builtin: empty training set");
    if (val.empty()) throw DomainError("train_builtin: empty validation set");

    auto [train_slices, sequence] = prepare(train);
    auto [val_slices, val_index] = prepare(val);
    // Frozen before the first update; val sees the same transform.
    const auto standardizer = fit_standardizer(train_slices);
    for (auto& p : train_slices) standardizer.apply(p.features);
    for (auto& p : val_slices) standardizer.apply(p.features);

    Weights w{};
    TrainOutput out;
    out.model = LogisticModel(w, standardizer);
    double best = -1.0;
    int since_best = 0;
    std::vector<std::size_t> order(sequence.size());
    // Adam moments; one step per slice.
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double adam_eps = 1e-8;
    Weights m1{};
    Weights m2{};
    double b1t = 1.0;
    double b2t = 1.0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        SplitMix64 rng(hash_combine(config.seed, static_cast<std::uint64_t>(epoch)));
        fisher_yates(std::span<std::size_t>(order), rng);
        for (const auto pos : order) {
            const auto& s = train_slices[sequence[pos]];
            const auto g = slice_gradient(w, s.features, s.labels);
            b1t *= beta1;
            b2t *= beta2;
            for (int k = 0; k < kWeightCount; ++k) {
                m1[k] = beta1 * m1[k] + (1.0 - beta1) * g[k];
                m2[k] = beta2 * m2[k] + (1.0 - beta2) * g[k] * g[k];
                const double mhat = m1[k] / (1.0 - b1t);
                const double vhat = m2[k] / (1.0 - b2t);
                w[k] -= config.learning_rate * mhat / (std::sqrt(vhat) + adam_eps);
            }
        }
        const LogisticModel current(w, standardizer);
        const double val_iou = pooled_iou(current, val_slices);
        out.val_history.push_back(val_iou);
        if (on_epoch) on_epoch(epoch, val_iou);
        if (val_iou > best) {
            best = val_iou;
            out.best_epoch = epoch;
            out.model = current;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double evaluate(const VolumePredictor& predict, std::span<const LoadedVolume> test) {
    if (test.empty()) throw DomainError("evaluate: empty test set");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (const auto& v : test) {
        const auto pred = predict(v.image);
        if (!(pred.dims() == v.mask.dims()))
            throw DomainError(fmt::format("evaluate: prediction dims differ for '{}'", v.volume_id));
        const auto& a = pred.voxels();
        const auto& b = v.mask.voxels();
        for (std::size_t i = 0; i < a.size(); ++i) {
            inter += a[i] & b[i];
            uni += a[i] | b[i];
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double evaluate(const LogisticModel& model, std::span<const LoadedVolume> test) {
    return evaluate([&model](const VolumeGrid& v) { return model.predict(v); }, test);
}

// ---------------------------------------------------------------------------
// Whole runs
// ---------------------------------------------------------------------------

namespace {

std::vector<SliceSample> to_samples(const std::vector<SliceRef>& refs, const std::vector<LoadedVolume>& volumes) {
    std::map<std::string, const LoadedVolume*, std::less<>> by_id;
    for (const auto& v : volumes) by_id.emplace(v.volume_id, &v);
    std::vector<SliceSample> out;
    out.reserve(refs.size());
    for (const auto& r : refs) {
        const auto it = by_id.find(r.volume_id);
        if (it == by_id.end()) throw NotFoundError(fmt::format("slice references unknown volume '{}'", r.volume_id));
        out.push_back({&it->second->image, &it->second->mask, r.z});
    }
    return out;
}

std::vector<LoadedVolume> load_all(const DatasetManifest& m) {
    std::vector<LoadedVolume> out;
    out.reserve(m.entries.size());
    for (const auto& e : m.entries) out.push_back(load_volume(m, e.volume_id));
    return out;
}

std::vector<SliceRef> labeled_refs(const DatasetManifest& m) {
    std::vector<SliceRef> out;
    for (const auto& e : m.entries)
        for (const int z : e.labeled_slices) out.push_back({e.volume_id, z});
    return out;
}

}  // namespace

RunResult train_and_evaluate(const TrainingData& data, const TrainConfig& config, const EpochCallback& on_epoch) {
    const auto train = to_samples(data.train_slices, data.train_volumes);
    const auto val = to_samples(data.val_slices, data.val_volumes);
    auto trained = train_builtin(train, val, config, on_epoch);
    return {evaluate(trained.model, data.test_volumes), trained.best_epoch, std::move(trained.val_history)};
}

RunResult train_from_manifests(const DatasetManifest& train, const DatasetManifest& val, const DatasetManifest& test,
                               const TrainConfig& config, const EpochCallback& on_epoch) {
    TrainingData data;
    data.train_volumes = load_all(train);
    data.val_volumes = load_all(val);
    data.test_volumes = load_all(test);
    const auto record = std::find_if(train.provenance.rbegin(), train.provenance.rend(),
                                     [](const TransformRecord& r) { return r.op == "upsample_train"; });
    data.train_slices = record != train.provenance.rend()
                            ? upsample_train(train, record->params.at("original_labeled_count").get<std::size_t>())
                            : labeled_refs(train);
    data.val_slices = labeled_refs(val);
    return train_and_evaluate(data, config, on_epoch);
}

}  // namespace labelbudget
