#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hh {

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);

/// Derives an independent stream seed from a base seed and a salt (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

std::string read_file(const std::filesystem::path& path);

/// Writes to `path.tmp` then renames, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// Round-half-up, the nearest-neighbour convention used for all resampling.
inline long round_half_up(double x) { return static_cast<long>(std::floor(x + 0.5)); }

}  // namespace hh
