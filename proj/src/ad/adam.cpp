#include "hh/ad/adam.hpp"

#include <cmath>

#include "hh/error.hpp"

namespace hh::ad {

template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, double lr) {
    ++state.step;
    const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, double(state.step));
    const double c2 = 1.0 - std::pow(b2, double(state.step));
    for (auto& [name, p] : params.items()) {
        const std::size_t n = p.value.size();
        if (p.grad.size() != n) p.zero_grad();
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) m.assign(n, T{});
        if (v.empty()) v.assign(n, T{});
        if (m.size() != n || v.size() != n) throw UsageError("optimizer moments do not match parameter " + name);
        for (std::size_t i = 0; i < n; ++i) {
            const double g = p.grad[i];
            m[i] = static_cast<T>(b1 * m[i] + (1.0 - b1) * g);
            v[i] = static_cast<T>(b2 * v[i] + (1.0 - b2) * g * g);
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p.value.data[i] = static_cast<T>(p.value.data[i] - lr * mhat / (std::sqrt(vhat) + state.cfg.eps));
        }
    }
}

template void adam_step(ParamStore<float>&, AdamState<float>&, double);
template void adam_step(ParamStore<double>&, AdamState<double>&, double);

}  // namespace hh::ad
