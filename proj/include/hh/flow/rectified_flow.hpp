#pragma once

#include <cstdint>
#include <functional>

#include "hh/ad/ops.hpp"

namespace hh::flow {

/// x_t = (1 - t) x0 + t x1.
template <typename T>
ad::Tensor<T> interpolate(const ad::Tensor<T>& x0, const ad::Tensor<T>& x1, double t);

/// Standard-normal tensor, deterministic in seed.
template <typename T>
ad::Tensor<T> gaussian_noise(const ad::Shape& shape, std::uint64_t seed);

/// Flow time and noise drawn for one training example.
template <typename T>
struct FlowDraw {
    double t = 0.0;
    ad::Tensor<T> x0;
};

/// t ~ U(0, 1) and x0 ~ N(0, I), deterministic in seed.
template <typename T>
FlowDraw<T> draw_flow(const ad::Shape& shape, std::uint64_t seed);

template <typename T>
using VelocityNet = std::function<ad::Var<T>(ad::Tape<T>&, ad::Var<T> x_t, double t)>;

/// mse(net(x_t, t), x1 - x0) for one draw.
template <typename T>
ad::Var<T> rf_loss(ad::Tape<T>& tape, const VelocityNet<T>& net, const ad::Tensor<T>& x1, const FlowDraw<T>& draw);

/// Convenience form drawing (t, x0) from `seed`.
template <typename T>
ad::Var<T> rf_loss(ad::Tape<T>& tape, const VelocityNet<T>& net, const ad::Tensor<T>& x1, std::uint64_t seed);

/// Velocity at (x, t), conditional or unconditional.
using GuidedVelocity = std::function<ad::Tensor<float>(const ad::Tensor<float>& x, double t, bool conditional)>;

/// Euler integration from noise at t = 0 to t = 1 in `steps` uniform steps with
/// v = v_uncond + g (v_cond - v_uncond). g = 0 and g = 1 evaluate only the branch they need.
ad::Tensor<float> euler_sample(const GuidedVelocity& velocity, const ad::Shape& shape, int steps, double guidance,
                               std::uint64_t seed);

/// Same, starting from a given x0.
ad::Tensor<float> euler_integrate(const GuidedVelocity& velocity, ad::Tensor<float> x, int steps, double guidance);

}  // namespace hh::flow
