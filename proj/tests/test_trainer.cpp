#include <doctest.h>

#include <cmath>

#include "labelbudget/error.hpp"
#include "labelbudget/rng.hpp"
#include "labelbudget/trainer.hpp"

using namespace labelbudget;

namespace {

// Squares of side 4..7 centred in 16x16 slices on z in [2, 38); intensity 1 inside, 0 outside.
LoadedVolume square_volume(int id) {
    const Dims d{16, 16, 40};
    LoadedVolume v{"s" + std::to_string(id), VolumeGrid(d, {1, 1, 1}), LabelMask(d)};
    const int side = 4 + id % 4;
    const int lo = 8 - side / 2;
    for (int z = 2; z < 38; ++z)
        for (int y = lo; y < lo + side; ++y)
            for (int x = lo; x < lo + side; ++x) {
                v.image.at(x, y, z) = 1.0f;
                v.mask.at(x, y, z) = 1;
            }
    return v;
}

TrainingData separable_data() {
    TrainingData d;
    for (int i = 0; i < 4; ++i) d.train_volumes.push_back(square_volume(i));
    d.val_volumes.push_back(square_volume(5));
    d.test_volumes.push_back(square_volume(6));
    d.test_volumes.push_back(square_volume(7));
    for (const auto& v : d.train_volumes)
        for (const int z : v.mask.labeled_slices()) d.train_slices.push_back({v.volume_id, z});
    for (const auto& v : d.val_volumes)
        for (const int z : v.mask.labeled_slices()) d.val_slices.push_back({v.volume_id, z});
    return d;
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<float> slice(256);
        std::vector<std::uint8_t> labels(256);
        for (std::size_t i = 0; i < 256; ++i) {
            slice[i] = static_cast<float>(rng.uniform());
            labels[i] = rng.uniform() < 0.3 ? 1 : 0;
        }
        const auto x = compute_slice_features(slice, 16, 16);
        Weights w;
        for (auto& v : w) v = rng.uniform(-1.0, 1.0);
        const auto g = slice_gradient(w, x, labels);
        for (int k = 0; k < kWeightCount; ++k) {
            const double h = 1e-5;
            auto wp = w;
            auto wm = w;
            wp[k] += h;
            wm[k] -= h;
            const double fd = (slice_loss(wp, x, labels) - slice_loss(wm, x, labels)) / (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(g[k]), 1e-8});
            CHECK(std::abs(fd - g[k]) / denom < 1e-4);
        }
    }
}

TEST_CASE("slice features on a constant and a step image") {
    std::vector<float> flat(9, 2.0f);
    const auto f = compute_slice_features(flat, 3, 3);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(f.value(0, i) == 2.0);
        CHECK(f.value(1, i) == doctest::Approx(2.0));
        CHECK(f.value(2, i) == doctest::Approx(0.0));
        CHECK(f.value(3, i) == doctest::Approx(0.0));
    }
    std::vector<float> step{0, 0, 1, 0, 0, 1, 0, 0, 1};
    const auto s = compute_slice_features(step, 3, 3);
    CHECK(s.value(1, 4) == doctest::Approx(1.0 / 3.0));
    CHECK(s.value(3, 4) == doctest::Approx(4.0));  // Sobel x: 1 + 2 + 1
}

TEST_CASE("linearly separable slices are learned") {
    const auto d = separable_data();
    // threshold oracle
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (const auto& v : d.test_volumes)
        for (std::size_t i = 0; i < v.image.voxels().size(); ++i) {
            const bool p = v.image.voxels()[i] > 0.5f;
            inter += p && v.mask.voxels()[i];
            uni += p || v.mask.voxels()[i];
        }
    REQUIRE(inter == uni);
    TrainConfig c;
    c.seed = 3;
    // Val IoU on noise-free slices is piecewise constant in the weights, so
    // early stopping is disabled here.
    c.patience = c.max_epochs;
    const auto r = train_and_evaluate(d, c);
    CHECK(r.test_perf >= 0.99);
    CHECK(r.best_epoch >= 1);
    CHECK(r.val_history.size() <= 100u);
}

TEST_CASE("training is deterministic and early stopping is consistent") {
    const auto d = separable_data();
    TrainConfig c;
    c.seed = 9;
    c.max_epochs = 30;
    const auto a = train_and_evaluate(d, c);
    const auto b = train_and_evaluate(d, c);
    CHECK(a.val_history == b.val_history);
    CHECK(a.test_perf == b.test_perf);
    const double best = *std::max_element(a.val_history.begin(), a.val_history.end());
    CHECK(a.val_history[a.best_epoch - 1] == best);
    for (const double v : a.val_history) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("patience 0 stops at the first non-improving epoch") {
    const auto d = separable_data();
    TrainConfig c;
    c.seed = 1;
    c.patience = 0;
    c.max_epochs = 60;
    const auto r = train_and_evaluate(d, c);
    const auto& h = r.val_history;
    std::size_t expected = h.size();
    double best = h.front();
    for (std::size_t i = 1; i < h.size(); ++i) {
        if (h[i] <= best) {
            expected = i + 1;
            break;
        }
        best = h[i];
    }
    CHECK(h.size() == expected);
    CHECK((h.size() == 60u || h.back() <= *std::max_element(h.begin(), h.end() - 1)));
}

TEST_CASE("evaluate with stub predictors") {
    const auto ph = make_phantom({24, 24, 24}, 3, "p");
    const std::vector<LoadedVolume> test{ph};
    CHECK(evaluate([&](const VolumeGrid&) { return ph.mask; }, test) == 1.0);
    CHECK(evaluate([&](const VolumeGrid&) { return LabelMask(ph.mask.dims()); }, test) == 0.0);

    // one-voxel 6-neighbourhood dilation
    const auto& m = ph.mask;
    const Dims d = m.dims();
    LabelMask dil(d);
    std::size_t fg = 0;
    std::size_t dilated = 0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const int off[7][3] = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                bool any = false;
                for (const auto& o : off) {
                    const int a = x + o[0], b = y + o[1], c = z + o[2];
                    if (a >= 0 && b >= 0 && c >= 0 && a < d.nx && b < d.ny && c < d.nz && m.at(a, b, c)) any = true;
                }
                dil.at(x, y, z) = any ? 1 : 0;
                fg += m.at(x, y, z);
                dilated += any;
            }
    const double expected = static_cast<double>(fg) / static_cast<double>(dilated);
    CHECK(evaluate([&](const VolumeGrid&) { return dil; }, test) == expected);
    CHECK_THROWS_AS((void)evaluate([&](const VolumeGrid&) { return ph.mask; }, std::vector<LoadedVolume>{}),
                    DomainError);
}

TEST_CASE("training input errors") {
    const auto d = separable_data();
    TrainConfig c;
    std::vector<SliceSample> none;
    std::vector<SliceSample> one{{&d.train_volumes[0].image, &d.train_volumes[0].mask, 2}};
    CHECK_THROWS_AS((void)train_builtin(none, one, c), DomainError);
    CHECK_THROWS_AS((void)train_builtin(one, none, c), DomainError);
    c.max_epochs = 0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c.max_epochs = 1;
    c.patience = -1;
    CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("model json round trip") {
    Weights w{0.5, -1.25, 2.0, 0.125, -3.0};
    Standardizer s;
    s.mean = {0.1, 0.2, 0.3, 0.4};
    s.stddev = {1.5, 2.5, 3.5, 4.5};
    const LogisticModel m(w, s);
    const auto back = LogisticModel::from_json(nlohmann::json::parse(m.to_json().dump()));
    CHECK(back.weights() == w);
    CHECK(back.standardizer().mean == s.mean);
    CHECK(back.standardizer().stddev == s.stddev);
}
