#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "labelbudget/voxel_store.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Fresh directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("lbtest-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const fs::path& path() const noexcept { return path_; }
    [[nodiscard]] fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Manifest without backing files: ids v0..v{n-1}, `slices` labeled slices each.
inline labelbudget::DatasetManifest toy_manifest(std::size_t n, int slices, std::string id = "toy") {
    labelbudget::DatasetManifest m;
    m.dataset_id = std::move(id);
    for (std::size_t i = 0; i < n; ++i) {
        labelbudget::ManifestEntry e;
        e.volume_id = "v" + std::to_string(i);
        e.volume_path = "volumes/" + e.volume_id + ".vol";
        e.mask_path = "masks/" + e.volume_id + ".vol";
        for (int z = 0; z < slices; ++z) e.labeled_slices.push_back(z);
        m.entries.push_back(std::move(e));
    }
    return m;
}

inline std::vector<std::string> ids(const labelbudget::DatasetManifest& m) {
    std::vector<std::string> out;
    for (const auto& e : m.entries) out.push_back(e.volume_id);
    return out;
}

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

/// Runs a shell command, capturing stdout and stderr together.
inline CommandResult run_command(const std::string& command) {
    TempDir dir;
    const auto log = dir / "out.txt";
    const int status = std::system((command + " > '" + log.string() + "' 2>&1").c_str());
    CommandResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = slurp(log);
    return r;
}

}  // namespace testutil
