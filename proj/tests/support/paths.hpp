#pragma once

// Build-time locations injected by CMake, plus a scratch-directory helper.

#include <filesystem>
#include <random>
#include <string>

namespace testsupport {

inline std::filesystem::path assets_dir() { return OPPBENCH_ASSETS_DIR; }
inline std::filesystem::path fixtures_dir() { return OPPBENCH_FIXTURES_DIR; }
inline std::filesystem::path golden_dir() { return OPPBENCH_GOLDEN_DIR; }
inline std::filesystem::path samples_dir() { return OPPBENCH_SAMPLES_DIR; }
inline std::filesystem::path cli_path() { return OPPBENCH_CLI_PATH; }

/// A fresh directory under the system temp root, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng{std::random_device{}()};
        auto base = std::filesystem::temp_directory_path();
        for (;;) {
            path_ = base / ("oppbench-test-" + std::to_string(rng()));
            if (std::filesystem::create_directory(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace testsupport
