#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "hh/ad/tape.hpp"

namespace hh::ad {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    int coordinates = 0;
};

/// Builds the loss on a fresh recording from the parameters in `params`.
using LossFn = std::function<Var<double>(Tape<double>&, ParamStore<double>&)>;

/// Compares backward() against central differences on up to `max_coords` coordinates drawn
/// uniformly from all parameters. Relative error is |a - n| / max(|a|, |n|, abs_floor).
GradCheckResult grad_check(const LossFn& fn, ParamStore<double>& params, double eps = 1e-4, int max_coords = 200,
                           std::uint64_t seed = 0, double abs_floor = 1e-6);

}  // namespace hh::ad
