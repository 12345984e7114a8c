#include "hh/flow/toy.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "hh/ad/adam.hpp"
#include "hh/flow/rectified_flow.hpp"
#include "hh/util.hpp"

namespace hh::flow::toy {

using ad::Tensor;
using ad::Var;

template <typename T>
void init_toy_net(ad::ParamStore<T>& store, const ToyConfig& cfg, std::mt19937_64& rng) {
    ad::init_linear(store, "toy/fc1", 4 + cfg.time_dim, cfg.hidden, rng);
    ad::init_linear(store, "toy/fc2", cfg.hidden, cfg.hidden, rng);
    ad::init_linear(store, "toy/fc3", cfg.hidden, 2, rng);
}

template <typename T>
Var<T> toy_velocity(ad::Tape<T>& tape, ad::ParamStore<T>& store, const ToyConfig& cfg, const Tensor<T>& x,
                    const std::vector<double>& t, const std::vector<int>& code) {
    const int n = x.dim(1);
    const int rows = 4 + cfg.time_dim, half = cfg.time_dim / 2;
    Tensor<T> in({rows, n});
    auto at = [&](int r, int c) -> T& { return in.data[static_cast<std::size_t>(r) * n + c]; };
    for (int c = 0; c < n; ++c) {
        at(0, c) = x.data[c];
        at(1, c) = x.data[n + c];
        if (code[c] >= 0) at(2 + code[c], c) = T(1);
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(100.0) * i / half);
            at(4 + i, c) = static_cast<T>(std::sin(10.0 * t[c] * freq));
            at(4 + half + i, c) = static_cast<T>(std::cos(10.0 * t[c] * freq));
        }
    }
    Var<T> h = ad::silu(ad::linear_layer(tape, store, "toy/fc1", tape.constant(std::move(in))));
    h = ad::silu(ad::linear_layer(tape, store, "toy/fc2", h));
    return ad::linear_layer(tape, store, "toy/fc3", h);
}

ToyResult run_toy(const ToyConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    ad::ParamStore<float> store;
    std::mt19937_64 init(derive_seed(cfg.seed, 1));
    init_toy_net(store, cfg, init);
    ad::AdamState<float> adam;
    ToyResult result;
    std::mt19937_64 rng(derive_seed(cfg.seed, 2));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const int n = cfg.batch;
    for (int step = 0; step < cfg.train_steps; ++step) {
        Tensor<float> xt({2, n}), target({2, n});
        std::vector<double> t(n);
        std::vector<int> code(n);
        for (int c = 0; c < n; ++c) {
            const int k = static_cast<int>(unif(rng) * 2) % 2;
            const auto& comp = cfg.components[k];
            t[c] = unif(rng);
            code[c] = unif(rng) < cfg.dropout ? -1 : k;
            for (int d = 0; d < 2; ++d) {
                const double x1 = comp.mean[d] + comp.std[d] * gauss(rng);
                const double x0 = gauss(rng);
                xt.data[d * n + c] = static_cast<float>((1 - t[c]) * x0 + t[c] * x1);
                target.data[d * n + c] = static_cast<float>(x1 - x0);
            }
        }
        store.zero_grad();
        ad::Tape<float> tape;
        const auto loss = ad::mse(toy_velocity(tape, store, cfg, xt, t, code), tape.constant(std::move(target)));
        result.losses.push_back(loss.value().data[0]);
        tape.backward(loss);
        ad::adam_step(store, adam, cfg.lr);
    }

    for (int k = 0; k < 2; ++k) {
        const int m = cfg.samples_per_component;
        const GuidedVelocity velocity = [&](const Tensor<float>& x, double t, bool conditional) {
            ad::Tape<float> tape(false);
            return toy_velocity(tape, store, cfg, x, std::vector<double>(m, t), std::vector<int>(m, conditional ? k : -1))
                .value();
        };
        const auto x = euler_sample(velocity, {2, m}, cfg.sample_steps, cfg.guidance, derive_seed(cfg.seed, 10 + k));
        auto& s = result.samples[k];
        for (int d = 0; d < 2; ++d) {
            double sum = 0, sq = 0;
            for (int c = 0; c < m; ++c) sum += x.data[d * m + c];
            s.mean[d] = sum / m;
            for (int c = 0; c < m; ++c) sq += (x.data[d * m + c] - s.mean[d]) * (x.data[d * m + c] - s.mean[d]);
            s.var[d] = sq / (m - 1);
        }
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

template void init_toy_net(ad::ParamStore<float>&, const ToyConfig&, std::mt19937_64&);
template void init_toy_net(ad::ParamStore<double>&, const ToyConfig&, std::mt19937_64&);
template Var<float> toy_velocity(ad::Tape<float>&, ad::ParamStore<float>&, const ToyConfig&, const Tensor<float>&,
                                 const std::vector<double>&, const std::vector<int>&);
template Var<double> toy_velocity(ad::Tape<double>&, ad::ParamStore<double>&, const ToyConfig&, const Tensor<double>&,
                                  const std::vector<double>&, const std::vector<int>&);

}  // namespace hh::flow::toy
