#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hh/cond/conditioning.hpp"
#include "hh/schema.hpp"

namespace hh::flow {

/// 1-D U-Net over time with mel bins (plus conditioning) as channels.
struct VectorFieldConfig {
    int n_mels = 40;
    int base_channels = 64;
    /// One entry per down/up stage; stage i has base_channels * channel_mults[i] channels.
    std::vector<int> channel_mults = {1, 2, 2};
    int embed_dim = 128;
    int time_dim = 64;
    int groups = 8;

    int depth() const { return static_cast<int>(channel_mults.size()); }
    int stage_channels(int i) const { return base_channels * channel_mults[i]; }
    void validate() const;
    bool operator==(const VectorFieldConfig&) const = default;
};

void to_json(nlohmann::json& j, const VectorFieldConfig& c);
void from_json(const nlohmann::json& j, VectorFieldConfig& c);
void read_config(SchemaReader& r, VectorFieldConfig& c);

struct ModelConfig {
    VectorFieldConfig vf;
    cond::CondConfig cond;

    static ModelConfig desk();
    static ModelConfig reference();
    void validate() const;
    std::string hash() const;
    bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Linear warmup from lr_init to lr_peak over warmup_steps, linear decay to lr_final over
/// decay_epochs epochs, then constant.
struct TrainConfig {
    int epochs = 40;
    int batch_size = 128;
    double lr_init = 1e-5;
    double lr_peak = 4e-4;
    int warmup_steps = 1000;
    double lr_final = 3.4e-4;
    int decay_epochs = 22;
    double dropout = 0.1;
    std::uint64_t seed = 0;
    /// Validation clips used per epoch; 0 uses the whole validation split.
    int val_clips = 0;

    static TrainConfig reference();
    static TrainConfig desk();
    void validate() const;
    std::string hash() const;
    bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

double learning_rate(const TrainConfig& c, std::int64_t step, int steps_per_epoch);

struct SampleConfig {
    int steps = 26;
    double guidance_scale = 4.5;
    std::uint64_t seed = 0;
    int griffin_lim_iterations = 64;

    void validate() const;
    bool operator==(const SampleConfig&) const = default;
};

void to_json(nlohmann::json& j, const SampleConfig& c);
void from_json(const nlohmann::json& j, SampleConfig& c);

}  // namespace hh::flow
