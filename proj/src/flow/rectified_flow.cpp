#include "hh/flow/rectified_flow.hpp"

#include <random>

#include "hh/error.hpp"
#include "hh/util.hpp"

namespace hh::flow {

using ad::Tensor;
using ad::Var;

template <typename T>
Tensor<T> interpolate(const Tensor<T>& x0, const Tensor<T>& x1, double t) {
    if (x0.shape != x1.shape)
        throw ValidationError("interpolation endpoints differ: " + ad::shape_str(x0.shape) + " vs " + ad::shape_str(x1.shape));
    if (!(t >= 0 && t <= 1)) throw ValidationError("flow time must be in [0, 1]", "t");
    Tensor<T> out(x0.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = static_cast<T>((1 - t) * x0.data[i] + t * x1.data[i]);
    return out;
}

template <typename T>
Tensor<T> gaussian_noise(const ad::Shape& shape, std::uint64_t seed) {
    Tensor<T> out(shape);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : out.data) v = static_cast<T>(g(rng));
    return out;
}

template <typename T>
FlowDraw<T> draw_flow(const ad::Shape& shape, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0x7));
    FlowDraw<T> d;
    d.t = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    d.x0 = gaussian_noise<T>(shape, derive_seed(seed, 0x0));
    return d;
}

template <typename T>
Var<T> rf_loss(ad::Tape<T>& tape, const VelocityNet<T>& net, const Tensor<T>& x1, const FlowDraw<T>& draw) {
    if (draw.x0.shape != x1.shape)
        throw ValidationError("noise " + ad::shape_str(draw.x0.shape) + " does not match data " + ad::shape_str(x1.shape));
    Tensor<T> target(x1.shape);
    for (std::size_t i = 0; i < target.size(); ++i) target.data[i] = x1.data[i] - draw.x0.data[i];
    const Var<T> v = net(tape, tape.constant(interpolate(draw.x0, x1, draw.t)), draw.t);
    if (v.shape() != x1.shape)
        throw ValidationError("velocity " + ad::shape_str(v.shape()) + " does not match data " + ad::shape_str(x1.shape));
    return ad::mse(v, tape.constant(std::move(target)));
}

template <typename T>
Var<T> rf_loss(ad::Tape<T>& tape, const VelocityNet<T>& net, const Tensor<T>& x1, std::uint64_t seed) {
    return rf_loss(tape, net, x1, draw_flow<T>(x1.shape, seed));
}

Tensor<float> euler_integrate(const GuidedVelocity& velocity, Tensor<float> x, int steps, double guidance) {
    if (steps < 1) throw ValidationError("sampling needs at least one step", "steps");
    if (!(guidance >= 0)) throw ValidationError("guidance scale must be non-negative", "guidance_scale");
    const double dt = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
        const double t = k * dt;
        Tensor<float> v;
        if (guidance == 1.0) {
            v = velocity(x, t, true);
        } else if (guidance == 0.0) {
            v = velocity(x, t, false);
        } else {
            const auto vc = velocity(x, t, true);
            v = velocity(x, t, false);
            for (std::size_t i = 0; i < v.size(); ++i)
                v.data[i] = static_cast<float>(v.data[i] + guidance * (double(vc.data[i]) - v.data[i]));
        }
        if (v.shape != x.shape)
            throw ValidationError("velocity " + ad::shape_str(v.shape) + " does not match state " + ad::shape_str(x.shape));
        for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = static_cast<float>(x.data[i] + dt * v.data[i]);
    }
    return x;
}

Tensor<float> euler_sample(const GuidedVelocity& velocity, const ad::Shape& shape, int steps, double guidance,
                           std::uint64_t seed) {
    return euler_integrate(velocity, gaussian_noise<float>(shape, seed), steps, guidance);
}

#define HH_INSTANTIATE(T)                                                                           \
    template Tensor<T> interpolate(const Tensor<T>&, const Tensor<T>&, double);                     \
    template Tensor<T> gaussian_noise(const ad::Shape&, std::uint64_t);                             \
    template FlowDraw<T> draw_flow(const ad::Shape&, std::uint64_t);                                \
    template Var<T> rf_loss(ad::Tape<T>&, const VelocityNet<T>&, const Tensor<T>&, const FlowDraw<T>&); \
    template Var<T> rf_loss(ad::Tape<T>&, const VelocityNet<T>&, const Tensor<T>&, std::uint64_t);

HH_INSTANTIATE(float)
HH_INSTANTIATE(double)

}  // namespace hh::flow
