#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

namespace hh::fixtures {

/// Fresh per-process directory under the system temp dir (removed first if left over).
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("hh_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace hh::fixtures
