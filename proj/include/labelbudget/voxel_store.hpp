#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace labelbudget {

struct Dims {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    [[nodiscard]] std::size_t voxel_count() const noexcept {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    [[nodiscard]] std::size_t slice_size() const noexcept {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    }
    friend bool operator==(const Dims&, const Dims&) = default;
};

using Spacing = std::array<double, 3>;

/// 3D f32 intensity grid, x-fastest. Slices are indexed along z.
class VolumeGrid {
public:
    VolumeGrid() = default;
    VolumeGrid(Dims dims, Spacing spacing);
    VolumeGrid(Dims dims, Spacing spacing, std::vector<float> voxels);

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] const Spacing& spacing() const noexcept { return spacing_; }
    [[nodiscard]] const std::vector<float>& voxels() const noexcept { return voxels_; }
    [[nodiscard]] std::vector<float>& voxels() noexcept { return voxels_; }

    [[nodiscard]] float at(int x, int y, int z) const noexcept { return voxels_[index(x, y, z)]; }
    float& at(int x, int y, int z) noexcept { return voxels_[index(x, y, z)]; }
    [[nodiscard]] std::size_t index(int x, int y, int z) const noexcept {
        return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
    }
    [[nodiscard]] const float* slice(int z) const noexcept { return voxels_.data() + z * dims_.slice_size(); }

private:
    Dims dims_;
    Spacing spacing_{1.0, 1.0, 1.0};
    std::vector<float> voxels_;
};

/// Binary u8 mask aligned with a VolumeGrid. Values are exactly 0 or 1.
class LabelMask {
public:
    LabelMask() = default;
    explicit LabelMask(Dims dims, Spacing spacing = {1.0, 1.0, 1.0});
    LabelMask(Dims dims, Spacing spacing, std::vector<std::uint8_t> voxels);

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] const Spacing& spacing() const noexcept { return spacing_; }
    [[nodiscard]] const std::vector<std::uint8_t>& voxels() const noexcept { return voxels_; }
    [[nodiscard]] std::vector<std::uint8_t>& voxels() noexcept { return voxels_; }

    [[nodiscard]] std::uint8_t at(int x, int y, int z) const noexcept { return voxels_[index(x, y, z)]; }
    std::uint8_t& at(int x, int y, int z) noexcept { return voxels_[index(x, y, z)]; }
    [[nodiscard]] std::size_t index(int x, int y, int z) const noexcept {
        return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
    }
    [[nodiscard]] const std::uint8_t* slice(int z) const noexcept {
        return voxels_.data() + z * dims_.slice_size();
    }
    std::uint8_t* slice(int z) noexcept { return voxels_.data() + z * dims_.slice_size(); }

    [[nodiscard]] bool slice_has_foreground(int z) const noexcept;
    /// z-indices with at least one foreground voxel, ascending.
    [[nodiscard]] std::vector<int> labeled_slices() const;
    [[nodiscard]] std::size_t foreground_count() const noexcept;

    friend bool operator==(const LabelMask&, const LabelMask&) = default;

private:
    Dims dims_;
    Spacing spacing_{1.0, 1.0, 1.0};
    std::vector<std::uint8_t> voxels_;
};

enum class Split { trainval, test, train, val };

[[nodiscard]] std::string_view to_string(Split s) noexcept;
[[nodiscard]] Split split_from_string(std::string_view s);

struct ManifestEntry {
    std::string volume_id;
    std::string volume_path;  // relative to the manifest root
    std::string mask_path;
    Split split = Split::trainval;
    std::vector<int> labeled_slices;  // sorted ascending

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// One recorded transform: `{op, params, seed}`.
struct TransformRecord {
    std::string op;
    nlohmann::json params = nlohmann::json::object();
    std::uint64_t seed = 0;

    friend bool operator==(const TransformRecord& a, const TransformRecord& b) {
        return a.op == b.op && a.params == b.params && a.seed == b.seed;
    }
};

struct DatasetManifest {
    std::string dataset_id;
    std::vector<ManifestEntry> entries;
    std::vector<TransformRecord> provenance;
    /// Directory that entry paths are relative to. Not serialized.
    std::filesystem::path root;

    [[nodiscard]] const ManifestEntry& entry(std::string_view volume_id) const;
    [[nodiscard]] std::size_t labeled_slice_count() const noexcept;

    /// Throws DomainError on duplicate ids or unsorted/negative labeled slices.
    void validate() const;

    friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
        return a.dataset_id == b.dataset_id && a.entries == b.entries && a.provenance == b.provenance;
    }
};

// --- manifest serialization (stable key order, so bytes are comparable) ---

[[nodiscard]] nlohmann::json manifest_to_json(const DatasetManifest& m);
[[nodiscard]] DatasetManifest manifest_from_json(const nlohmann::json& j);
[[nodiscard]] std::string manifest_to_string(const DatasetManifest& m);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& file);
/// Reads a manifest; `root` is set to the file's parent directory.
[[nodiscard]] DatasetManifest read_manifest(const std::filesystem::path& file);

// --- volume container: `LBVOL1 nx ny nz sx sy sz dtype\n` + little-endian payload ---

void write_volume(const VolumeGrid& v, const std::filesystem::path& file);
void write_mask(const LabelMask& m, const std::filesystem::path& file);
[[nodiscard]] VolumeGrid read_volume(const std::filesystem::path& file);
[[nodiscard]] LabelMask read_mask(const std::filesystem::path& file);

struct LoadedVolume {
    std::string volume_id;
    VolumeGrid image;
    LabelMask mask;
};

/// Loads the volume/mask pair for `volume_id`; NotFoundError when absent.
[[nodiscard]] LoadedVolume load_volume(const DatasetManifest& manifest, std::string_view volume_id);

/// Stores a pair under `root/volumes/<id>.vol` and `root/masks/<id>.vol` and
/// returns the manifest entry (split = trainval, labeled slices from the mask).
ManifestEntry store_volume(const std::filesystem::path& root, const std::string& volume_id,
                           const VolumeGrid& image, const LabelMask& mask);

// --- ingestion / generation ---

/// Reads `<source_dir>/<volume_id>/img_<zzzz>.pgm` and `msk_<zzzz>.pgm` stacks and
/// writes the container files plus `manifest.json` into `out_dir`.
DatasetManifest ingest_slice_stack(const std::filesystem::path& source_dir, const std::string& dataset_id,
                                   const std::filesystem::path& out_dir);

struct PhantomParams {
    int n_volumes = 20;
    Dims dims{32, 32, 32};
    std::uint64_t seed = 1;
};

/// Synthetic ellipsoid phantoms written to `out_dir` with a manifest.
DatasetManifest generate_phantoms(const PhantomParams& params, const std::filesystem::path& out_dir,
                                  const std::string& dataset_id = "phantom");

/// In-memory generation of one phantom; `generate_phantoms` uses this per volume.
[[nodiscard]] LoadedVolume make_phantom(const Dims& dims, std::uint64_t volume_seed, std::string volume_id);

// --- minimal PGM (P2/P5) support for slice stacks ---

struct GrayImage {
    int width = 0;
    int height = 0;
    int maxval = 255;
    std::vector<std::uint16_t> pixels;
};

[[nodiscard]] GrayImage read_pgm(const std::filesystem::path& file);
void write_pgm(const GrayImage& img, const std::filesystem::path& file);

}  // namespace labelbudget
