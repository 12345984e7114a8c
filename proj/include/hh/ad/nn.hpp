#pragma once

#include <cmath>
#include <random>
#include <string>

#include "hh/ad/ops.hpp"

/// Named-parameter layers. A layer `name` owns `name/w`, `name/b` (and `name/gamma`,
/// `name/beta` for normalization) inside a ParamStore.
namespace hh::ad {

template <typename T>
void fill_uniform(Parameter<T>& p, T bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-double(bound), double(bound));
    for (auto& v : p.value.data) v = static_cast<T>(u(rng));
}

template <typename T>
void init_conv1d(ParamStore<T>& store, const std::string& name, int cin, int cout, int k, std::mt19937_64& rng) {
    const T bound = T(1) / std::sqrt(T(cin * k));
    fill_uniform(store.create(name + "/w", {cout, cin, k}), bound, rng);
    fill_uniform(store.create(name + "/b", {cout}), bound, rng);
}

template <typename T>
void init_conv2d(ParamStore<T>& store, const std::string& name, int cin, int cout, int k, std::mt19937_64& rng) {
    const T bound = T(1) / std::sqrt(T(cin * k * k));
    fill_uniform(store.create(name + "/w", {cout, cin, k, k}), bound, rng);
    fill_uniform(store.create(name + "/b", {cout}), bound, rng);
}

template <typename T>
void init_linear(ParamStore<T>& store, const std::string& name, int in, int out, std::mt19937_64& rng) {
    const T bound = T(1) / std::sqrt(T(in));
    fill_uniform(store.create(name + "/w", {out, in}), bound, rng);
    fill_uniform(store.create(name + "/b", {out}), bound, rng);
}

template <typename T>
void init_group_norm(ParamStore<T>& store, const std::string& name, int channels) {
    auto& g = store.create(name + "/gamma", {channels});
    for (auto& v : g.value.data) v = T(1);
    store.create(name + "/beta", {channels});
}

template <typename T>
Var<T> conv1d_layer(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var<T> x, int stride = 1,
                    int padding = 0) {
    return conv1d(x, tape.param(store.get(name + "/w")), tape.param(store.get(name + "/b")), stride, padding);
}

template <typename T>
Var<T> conv2d_layer(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var<T> x, int stride = 1,
                    int padding = 0) {
    return conv2d(x, tape.param(store.get(name + "/w")), tape.param(store.get(name + "/b")), stride, padding);
}

/// x is [in x N]; returns [out x N].
template <typename T>
Var<T> linear_layer(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var<T> x) {
    return affine(x, tape.param(store.get(name + "/w")), tape.param(store.get(name + "/b")));
}

template <typename T>
Var<T> group_norm_layer(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var<T> x, int groups) {
    return group_norm(x, tape.param(store.get(name + "/gamma")), tape.param(store.get(name + "/beta")), groups);
}

}  // namespace hh::ad
