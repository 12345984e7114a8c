#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hh/ad/tensor.hpp"

namespace hh::ad {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    AdamConfig cfg;
    std::int64_t step = 0;
    std::map<std::string, std::vector<T>> m;
    std::map<std::string, std::vector<T>> v;
};

/// One bias-corrected Adam update of every parameter in `params` from its accumulated grad.
/// Moments are created lazily; a moment whose size disagrees with its parameter is a usage error.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, double lr);

}  // namespace hh::ad
