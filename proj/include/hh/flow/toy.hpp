#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "hh/ad/nn.hpp"

/// Two-component 2-D Gaussian mixture with one conditioning code per component: a check of the
/// rectified-flow engine that involves no audio.
namespace hh::flow::toy {

struct Component {
    std::array<double, 2> mean;
    std::array<double, 2> std;
};

struct ToyConfig {
    std::array<Component, 2> components = {Component{{-1.5, 0.5}, {0.3, 0.6}}, Component{{1.0, -1.0}, {0.5, 0.25}}};
    int hidden = 64;
    int time_dim = 16;
    int train_steps = 4000;
    int batch = 256;
    double lr = 2e-3;
    double dropout = 0.1;
    int sample_steps = 26;
    double guidance = 1.0;
    int samples_per_component = 2000;
    std::uint64_t seed = 0;
};

/// Inputs stacked per column: [x (2); one-hot code (2); time embedding (time_dim)].
template <typename T>
void init_toy_net(ad::ParamStore<T>& store, const ToyConfig& cfg, std::mt19937_64& rng);

/// x [2 x N], per-column times, per-column code in {-1 (none), 0, 1}; returns [2 x N].
template <typename T>
ad::Var<T> toy_velocity(ad::Tape<T>& tape, ad::ParamStore<T>& store, const ToyConfig& cfg, const ad::Tensor<T>& x,
                        const std::vector<double>& t, const std::vector<int>& code);

struct ComponentStats {
    std::array<double, 2> mean;
    std::array<double, 2> var;
};

struct ToyResult {
    std::vector<double> losses;  // per training step
    std::array<ComponentStats, 2> samples;
    double seconds = 0.0;
};

ToyResult run_toy(const ToyConfig& cfg);

}  // namespace hh::flow::toy
