#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "hh/ad/adam.hpp"
#include "hh/ad/tensor.hpp"

namespace hh::ad {

inline constexpr char kCheckpointMagic[4] = {'H', 'H', 'R', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: "HHRF", u32 version, u64 header length, JSON header, then f32 little-endian payloads.
/// The header holds `metadata` and a `tensors` table of {name, shape, offset} with offsets
/// relative to the start of the payload section.
struct Checkpoint {
    nlohmann::json metadata = nlohmann::json::object();
    std::map<std::string, Tensor<float>> tensors;

    bool operator==(const Checkpoint&) const = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws IncompatibleError on bad magic or version, IoError on truncation.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters go in under their own names, Adam moments as `adam/m/<name>` and `adam/v/<name>`.
void store_params(Checkpoint& ckpt, const ParamStore<float>& params, const AdamState<float>* adam = nullptr);
/// Every parameter in `params` must be present with a matching shape.
void restore_params(const Checkpoint& ckpt, ParamStore<float>& params, AdamState<float>* adam = nullptr);

/// Refuses a checkpoint whose metadata.config_hash differs from `expected`, naming both.
void require_config_hash(const Checkpoint& ckpt, const std::string& expected);

}  // namespace hh::ad
