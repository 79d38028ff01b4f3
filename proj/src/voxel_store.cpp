#include "labelbudget/voxel_store.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "labelbudget/error.hpp"
#include "labelbudget/rng.hpp"

namespace fs = std::filesystem;

namespace labelbudget {

namespace {

void check_dims(const Dims& d) {
    if (d.nx < 1 || d.ny < 1 || d.nz < 1)
        throw DomainError(fmt::format("invalid dims {}x{}x{}: every dimension must be >= 1", d.nx, d.ny, d.nz));
}

template <typename T>
void to_little_endian(std::vector<T>& values) {
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        for (auto& v : values) {
            auto* b = reinterpret_cast<unsigned char*>(&v);
            std::reverse(b, b + sizeof(T));
        }
    }
}

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw NotFoundError(fmt::format("cannot open '{}'", file.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const fs::path& file, std::string_view bytes) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DomainError(fmt::format("cannot write '{}'", file.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DomainError(fmt::format("write failed for '{}'", file.string()));
}

struct VolHeader {
    Dims dims;
    Spacing spacing{};
    std::string dtype;
    std::size_t payload_offset = 0;
};

VolHeader parse_header(const std::string& bytes, const fs::path& file) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw CorruptionError(fmt::format("'{}': missing header line", file.string()));
    std::istringstream hs(bytes.substr(0, nl));
    std::string magic;
    VolHeader h;
    hs >> magic >> h.dims.nx >> h.dims.ny >> h.dims.nz >> h.spacing[0] >> h.spacing[1] >> h.spacing[2] >> h.dtype;
    if (!hs || magic != "LBVOL1")
        throw CorruptionError(fmt::format("'{}': malformed header '{}'", file.string(), bytes.substr(0, nl)));
    if (h.dims.nx < 1 || h.dims.ny < 1 || h.dims.nz < 1)
        throw CorruptionError(fmt::format("'{}': non-positive dims in header", file.string()));
    if (h.dtype != "f32" && h.dtype != "u8")
        throw CorruptionError(fmt::format("'{}': unknown dtype '{}'", file.string(), h.dtype));
    h.payload_offset = nl + 1;
    return h;
}

std::string header_line(const Dims& d, const Spacing& s, std::string_view dtype) {
    return fmt::format("LBVOL1 {} {} {} {} {} {} {}\n", d.nx, d.ny, d.nz, s[0], s[1], s[2], dtype);
}

void check_payload(const VolHeader& h, std::size_t actual, std::size_t elem, const fs::path& file) {
    const std::size_t expected = h.dims.voxel_count() * elem;
    if (actual != expected)
        throw CorruptionError(fmt::format("'{}': payload is {} bytes, header requires {} bytes ({}x{}x{} {})",
                                          file.string(), actual, expected, h.dims.nx, h.dims.ny, h.dims.nz,
                                          h.dtype));
}

}  // namespace

// ---------------------------------------------------------------------------
// VolumeGrid / LabelMask
// ---------------------------------------------------------------------------

VolumeGrid::VolumeGrid(Dims dims, Spacing spacing)
    : dims_(dims), spacing_(spacing) {
    check_dims(dims_);
    voxels_.assign(dims_.voxel_count(), 0.0f);
}

VolumeGrid::VolumeGrid(Dims dims, Spacing spacing, std::vector<float> voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
    check_dims(dims_);
    if (voxels_.size() != dims_.voxel_count())
        throw DomainError(fmt::format("volume has {} voxels, dims require {}", voxels_.size(), dims_.voxel_count()));
}

LabelMask::LabelMask(Dims dims, Spacing spacing)
    : dims_(dims), spacing_(spacing) {
    check_dims(dims_);
    voxels_.assign(dims_.voxel_count(), 0);
}

LabelMask::LabelMask(Dims dims, Spacing spacing, std::vector<std::uint8_t> voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
    check_dims(dims_);
    if (voxels_.size() != dims_.voxel_count())
        throw DomainError(fmt::format("mask has {} voxels, dims require {}", voxels_.size(), dims_.voxel_count()));
    for (std::size_t i = 0; i < voxels_.size(); ++i)
        if (voxels_[i] > 1) throw DomainError(fmt::format("mask value {} at voxel {} is not 0/1", voxels_[i], i));
}

bool LabelMask::slice_has_foreground(int z) const noexcept {
    const auto* s = slice(z);
    return std::any_of(s, s + dims_.slice_size(), [](std::uint8_t v) { return v != 0; });
}

std::vector<int> LabelMask::labeled_slices() const {
    std::vector<int> out;
    for (int z = 0; z < dims_.nz; ++z)
        if (slice_has_foreground(z)) out.push_back(z);
    return out;
}

std::size_t LabelMask::foreground_count() const noexcept {
    return static_cast<std::size_t>(std::count(voxels_.begin(), voxels_.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::string_view to_string(Split s) noexcept {
    switch (s) {
        case Split::trainval: return "trainval";
        case Split::test: return "test";
        case Split::train: return "train";
        case Split::val: return "val";
    }
    return "trainval";
}

Split split_from_string(std::string_view s) {
    if (s == "trainval") return Split::trainval;
    if (s == "test") return Split::test;
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    throw DomainError(fmt::format("unknown split '{}'", s));
}

const ManifestEntry& DatasetManifest::entry(std::string_view volume_id) const {
    for (const auto& e : entries)
        if (e.volume_id == volume_id) return e;
    throw NotFoundError(fmt::format("volume '{}' not found in dataset '{}'", volume_id, dataset_id));
}

std::size_t DatasetManifest::labeled_slice_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.labeled_slices.size();
    return n;
}

void DatasetManifest::validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.volume_id).second)
            throw DomainError(fmt::format("duplicate volume_id '{}' in dataset '{}'", e.volume_id, dataset_id));
        if (!std::is_sorted(e.labeled_slices.begin(), e.labeled_slices.end()) ||
            std::adjacent_find(e.labeled_slices.begin(), e.labeled_slices.end()) != e.labeled_slices.end())
            throw DomainError(fmt::format("labeled_slices of '{}' must be strictly ascending", e.volume_id));
        if (!e.labeled_slices.empty() && e.labeled_slices.front() < 0)
            throw DomainError(fmt::format("labeled_slices of '{}' contain a negative index", e.volume_id));
    }
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["dataset_id"] = m.dataset_id;
    auto& entries = j["entries"] = nlohmann::json::array();
    for (const auto& e : m.entries) {
        entries.push_back({{"volume_id", e.volume_id},
                           {"volume_path", e.volume_path},
                           {"mask_path", e.mask_path},
                           {"split", std::string(to_string(e.split))},
                           {"labeled_slices", e.labeled_slices}});
    }
    auto& prov = j["provenance"] = nlohmann::json::array();
    for (const auto& t : m.provenance) prov.push_back({{"op", t.op}, {"params", t.params}, {"seed", t.seed}});
    return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.dataset_id = j.at("dataset_id").get<std::string>();
        for (const auto& e : j.at("entries")) {
            ManifestEntry me;
            me.volume_id = e.at("volume_id").get<std::string>();
            me.volume_path = e.at("volume_path").get<std::string>();
            me.mask_path = e.at("mask_path").get<std::string>();
            me.split = split_from_string(e.at("split").get<std::string>());
            me.labeled_slices = e.at("labeled_slices").get<std::vector<int>>();
            m.entries.push_back(std::move(me));
        }
        if (j.contains("provenance"))
            for (const auto& t : j.at("provenance"))
                m.provenance.push_back({t.at("op").get<std::string>(), t.at("params"), t.at("seed").get<std::uint64_t>()});
    } catch (const nlohmann::json::exception& ex) {
        throw CorruptionError(fmt::format("malformed manifest: {}", ex.what()));
    }
    m.validate();
    return m;
}

std::string manifest_to_string(const DatasetManifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

void write_manifest(const DatasetManifest& m, const fs::path& file) { write_file(file, manifest_to_string(m)); }

DatasetManifest read_manifest(const fs::path& file) {
    const auto text = read_file(file);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw CorruptionError(fmt::format("'{}': {}", file.string(), ex.what()));
    }
    auto m = manifest_from_json(j);
    m.root = file.parent_path();
    return m;
}

// ---------------------------------------------------------------------------
// Container files
// ---------------------------------------------------------------------------

void write_volume(const VolumeGrid& v, const fs::path& file) {
    auto payload = v.voxels();
    to_little_endian(payload);
    std::string bytes = header_line(v.dims(), v.spacing(), "f32");
    bytes.append(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(float));
    write_file(file, bytes);
}

void write_mask(const LabelMask& m, const fs::path& file) {
    std::string bytes = header_line(m.dims(), m.spacing(), "u8");
    bytes.append(reinterpret_cast<const char*>(m.voxels().data()), m.voxels().size());
    write_file(file, bytes);
}

VolumeGrid read_volume(const fs::path& file) {
    const auto bytes = read_file(file);
    const auto h = parse_header(bytes, file);
    if (h.dtype != "f32") throw CorruptionError(fmt::format("'{}': expected dtype f32, got {}", file.string(), h.dtype));
    check_payload(h, bytes.size() - h.payload_offset, sizeof(float), file);
    std::vector<float> voxels(h.dims.voxel_count());
    std::memcpy(voxels.data(), bytes.data() + h.payload_offset, voxels.size() * sizeof(float));
    to_little_endian(voxels);
    return VolumeGrid(h.dims, h.spacing, std::move(voxels));
}

LabelMask read_mask(const fs::path& file) {
    const auto bytes = read_file(file);
    const auto h = parse_header(bytes, file);
    if (h.dtype != "u8") throw CorruptionError(fmt::format("'{}': expected dtype u8, got {}", file.string(), h.dtype));
    check_payload(h, bytes.size() - h.payload_offset, 1, file);
    std::vector<std::uint8_t> voxels(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload_offset), bytes.end());
    for (const auto v : voxels)
        if (v > 1) throw CorruptionError(fmt::format("'{}': mask value {} is not 0/1", file.string(), v));
    return LabelMask(h.dims, h.spacing, std::move(voxels));
}

LoadedVolume load_volume(const DatasetManifest& manifest, std::string_view volume_id) {
    const auto& e = manifest.entry(volume_id);
    LoadedVolume out{e.volume_id, read_volume(manifest.root / e.volume_path), read_mask(manifest.root / e.mask_path)};
    if (!(out.image.dims() == out.mask.dims()))
        throw CorruptionError(fmt::format("volume '{}': image and mask dims differ", e.volume_id));
    if (!e.labeled_slices.empty() && e.labeled_slices.back() >= out.image.dims().nz)
        throw CorruptionError(fmt::format("volume '{}': labeled slice {} outside [0, {})", e.volume_id,
                                          e.labeled_slices.back(), out.image.dims().nz));
    return out;
}

ManifestEntry store_volume(const fs::path& root, const std::string& volume_id, const VolumeGrid& image,
                           const LabelMask& mask) {
    if (!(image.dims() == mask.dims()))
        throw DomainError(fmt::format("volume '{}': image and mask dims differ", volume_id));
    ManifestEntry e;
    e.volume_id = volume_id;
    e.volume_path = "volumes/" + volume_id + ".vol";
    e.mask_path = "masks/" + volume_id + ".vol";
    e.split = Split::trainval;
    e.labeled_slices = mask.labeled_slices();
    write_volume(image, root / e.volume_path);
    write_mask(mask, root / e.mask_path);
    return e;
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

namespace {

// Skips whitespace and '#' comments between PGM header tokens.
int next_pgm_int(const std::string& bytes, std::size_t& pos, const fs::path& file) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    int value = 0;
    const auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), value);
    if (ec != std::errc{}) throw DomainError(fmt::format("'{}': malformed PGM header", file.string()));
    pos = static_cast<std::size_t>(ptr - bytes.data());
    return value;
}

}  // namespace

GrayImage read_pgm(const fs::path& file) {
    const auto bytes = read_file(file);
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2'))
        throw DomainError(fmt::format("'{}': not a PGM (P2/P5) image", file.string()));
    const bool binary = bytes[1] == '5';
    std::size_t pos = 2;
    GrayImage img;
    img.width = next_pgm_int(bytes, pos, file);
    img.height = next_pgm_int(bytes, pos, file);
    img.maxval = next_pgm_int(bytes, pos, file);
    if (img.width < 1 || img.height < 1 || img.maxval < 1 || img.maxval > 65535)
        throw DomainError(fmt::format("'{}': invalid PGM header values", file.string()));
    const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    img.pixels.resize(n);
    if (binary) {
        ++pos;  // single whitespace after maxval
        const std::size_t bpp = img.maxval > 255 ? 2 : 1;
        if (bytes.size() < pos + n * bpp)
            throw DomainError(fmt::format("'{}': PGM payload truncated", file.string()));
        for (std::size_t i = 0; i < n; ++i) {
            const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * bpp);
            img.pixels[i] = bpp == 2 ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : p[0];
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<std::uint16_t>(next_pgm_int(bytes, pos, file));
    }
    return img;
}

void write_pgm(const GrayImage& img, const fs::path& file) {
    std::string bytes = fmt::format("P5\n{} {}\n{}\n", img.width, img.height, img.maxval);
    for (const auto px : img.pixels) {
        if (img.maxval > 255) bytes.push_back(static_cast<char>(px >> 8));
        bytes.push_back(static_cast<char>(px & 0xff));
    }
    write_file(file, bytes);
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

namespace {

std::vector<int> slice_indices(const fs::path& dir, const std::string& prefix) {
    std::vector<int> zs;
    for (const auto& f : fs::directory_iterator(dir)) {
        const auto name = f.path().filename().string();
        if (name.size() == prefix.size() + 8 && name.starts_with(prefix) && name.ends_with(".pgm")) {
            int z = -1;
            const auto* b = name.data() + prefix.size();
            const auto [ptr, ec] = std::from_chars(b, b + 4, z);
            if (ec == std::errc{} && ptr == b + 4) zs.push_back(z);
        }
    }
    std::sort(zs.begin(), zs.end());
    return zs;
}

fs::path slice_file(const fs::path& dir, std::string_view prefix, int z) {
    return dir / fmt::format("{}{:04d}.pgm", prefix, z);
}

}  // namespace

DatasetManifest ingest_slice_stack(const fs::path& source_dir, const std::string& dataset_id, const fs::path& out_dir) {
    if (!fs::is_directory(source_dir))
        throw NotFoundError(fmt::format("source directory '{}' does not exist", source_dir.string()));
    std::vector<fs::path> volume_dirs;
    for (const auto& d : fs::directory_iterator(source_dir))
        if (d.is_directory()) volume_dirs.push_back(d.path());
    std::sort(volume_dirs.begin(), volume_dirs.end());
    if (volume_dirs.empty()) throw DomainError(fmt::format("'{}' contains no volume directories", source_dir.string()));

    DatasetManifest manifest;
    manifest.dataset_id = dataset_id;
    manifest.root = out_dir;
    for (const auto& dir : volume_dirs) {
        const auto volume_id = dir.filename().string();
        const auto zs = slice_indices(dir, "img_");
        if (zs.empty()) throw DomainError(fmt::format("volume '{}' has no img_####.pgm slices", volume_id));
        for (std::size_t i = 0; i < zs.size(); ++i)
            if (zs[i] != static_cast<int>(i))
                throw DomainError(fmt::format("volume '{}': slice numbering must be contiguous from 0, missing {}",
                                              volume_id, slice_file(dir, "img_", static_cast<int>(i)).string()));

        const int nz = static_cast<int>(zs.size());
        int nx = 0;
        int ny = 0;
        std::vector<float> image;
        std::vector<std::uint8_t> mask;
        for (int z = 0; z < nz; ++z) {
            const auto img_path = slice_file(dir, "img_", z);
            const auto msk_path = slice_file(dir, "msk_", z);
            if (!fs::exists(msk_path)) throw NotFoundError(fmt::format("missing mask slice '{}'", msk_path.string()));
            const auto img = read_pgm(img_path);
            const auto msk = read_pgm(msk_path);
            if (z == 0) {
                nx = img.width;
                ny = img.height;
                image.reserve(static_cast<std::size_t>(nx) * ny * nz);
                mask.reserve(static_cast<std::size_t>(nx) * ny * nz);
            }
            if (img.width != nx || img.height != ny)
                throw DomainError(fmt::format("'{}' is {}x{}, expected {}x{} like the first slice of '{}'",
                                              img_path.string(), img.width, img.height, nx, ny, volume_id));
            if (msk.width != nx || msk.height != ny)
                throw DomainError(fmt::format("'{}' is {}x{}, expected {}x{} like the first slice of '{}'",
                                              msk_path.string(), msk.width, msk.height, nx, ny, volume_id));
            if (msk.maxval > 255)
                throw DomainError(fmt::format("'{}': 16-bit mask cannot be binarized by the 8-bit threshold rule",
                                              msk_path.string()));
            for (const auto px : img.pixels) image.push_back(static_cast<float>(px) / static_cast<float>(img.maxval));
            // Rescale to 8-bit range, then threshold at > 127.
            for (const auto px : msk.pixels) mask.push_back((px * 255) / msk.maxval > 127 ? 1 : 0);
        }
        const Dims dims{nx, ny, nz};
        manifest.entries.push_back(store_volume(out_dir, volume_id, VolumeGrid(dims, {1.0, 1.0, 1.0}, std::move(image)),
                                                LabelMask(dims, {1.0, 1.0, 1.0}, std::move(mask))));
    }
    manifest.provenance.push_back({"ingest_slice_stack", {{"source", source_dir.filename().string()}}, 0});
    manifest.validate();
    write_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

// ---------------------------------------------------------------------------
// Phantoms
// ---------------------------------------------------------------------------

LoadedVolume make_phantom(const Dims& dims, std::uint64_t volume_seed, std::string volume_id) {
    if (dims.nx < 8 || dims.ny < 8 || dims.nz < 8)
        throw DomainError(fmt::format("phantom dims {}x{}x{} too small: every dimension must be >= 8 to fit the "
                                      "minimum radius",
                                      dims.nx, dims.ny, dims.nz));
    SplitMix64 rng(volume_seed);
    const double min_dim = std::min({dims.nx, dims.ny, dims.nz});
    const std::array<int, 3> extent{dims.nx, dims.ny, dims.nz};
    std::array<double, 3> radius{};
    std::array<double, 3> center{};
    for (int a = 0; a < 3; ++a) radius[a] = rng.uniform(0.15, 0.35) * min_dim;
    // Centre keeps the ellipsoid inside the grid.
    for (int a = 0; a < 3; ++a) {
        const double lo = radius[a];
        const double hi = extent[a] - 1 - radius[a];
        center[a] = hi > lo ? rng.uniform(lo, hi) : 0.5 * (extent[a] - 1);
    }
    const double fg_level = rng.normal(0.8, 0.1);
    const double bg_level = rng.normal(0.2, 0.1);

    VolumeGrid image(dims, {1.0, 1.0, 1.0});
    LabelMask mask(dims, {1.0, 1.0, 1.0});
    for (int z = 0; z < dims.nz; ++z)
        for (int y = 0; y < dims.ny; ++y)
            for (int x = 0; x < dims.nx; ++x) {
                const double dx = (x - center[0]) / radius[0];
                const double dy = (y - center[1]) / radius[1];
                const double dz = (z - center[2]) / radius[2];
                const bool inside = dx * dx + dy * dy + dz * dz <= 1.0;
                mask.at(x, y, z) = inside ? 1 : 0;
                image.at(x, y, z) = static_cast<float>((inside ? fg_level : bg_level) + rng.normal(0.0, 0.05));
            }
    return {std::move(volume_id), std::move(image), std::move(mask)};
}

DatasetManifest generate_phantoms(const PhantomParams& params, const fs::path& out_dir, const std::string& dataset_id) {
    if (params.n_volumes < 1) throw DomainError("n_volumes must be >= 1");
    DatasetManifest manifest;
    manifest.dataset_id = dataset_id;
    manifest.root = out_dir;
    SplitMix64 seeds(params.seed);
    for (int i = 0; i < params.n_volumes; ++i) {
        auto volume_id = fmt::format("ph{:04d}", i);
        const auto pv = make_phantom(params.dims, seeds.next(), volume_id);
        manifest.entries.push_back(store_volume(out_dir, volume_id, pv.image, pv.mask));
    }
    manifest.provenance.push_back({"generate_phantoms",
                                   {{"n_volumes", params.n_volumes},
                                    {"dims", {params.dims.nx, params.dims.ny, params.dims.nz}}},
                                   params.seed});
    write_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

}  // namespace labelbudget
