#include "hh/flow/unet.hpp"

#include <cmath>
#include <numeric>

#include "hh/error.hpp"

namespace hh::flow {

using ad::Tensor;
using ad::Var;

template <typename T>
Tensor<T> time_embedding(double t, int dim) {
    Tensor<T> out({dim, 1});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        out.data[i] = static_cast<T>(std::sin(1000.0 * t * freq));
        out.data[half + i] = static_cast<T>(std::cos(1000.0 * t * freq));
    }
    return out;
}

template <typename T>
void init_res_block(ad::ParamStore<T>& store, const std::string& name, int cin, int cout, int time_dim, int groups,
                    std::mt19937_64& rng) {
    (void)groups;
    ad::init_group_norm(store, name + "/norm1", cin);
    ad::init_conv1d(store, name + "/conv1", cin, cout, 3, rng);
    ad::init_linear(store, name + "/time", time_dim, cout, rng);
    ad::init_group_norm(store, name + "/norm2", cout);
    ad::init_conv1d(store, name + "/conv2", cout, cout, 3, rng);
    if (cin != cout) ad::init_conv1d(store, name + "/skip", cin, cout, 1, rng);
}

template <typename T>
Var<T> res_block(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& name, Var<T> x, Var<T> temb,
                 int groups) {
    const int cin = x.shape()[0];
    Var<T> h = ad::silu(ad::group_norm_layer(tape, store, name + "/norm1", x, std::gcd(groups, cin)));
    h = ad::conv1d_layer(tape, store, name + "/conv1", h, 1, 1);
    h = ad::add(h, ad::linear_layer(tape, store, name + "/time", temb));
    h = ad::silu(ad::group_norm_layer(tape, store, name + "/norm2", h, std::gcd(groups, h.shape()[0])));
    h = ad::conv1d_layer(tape, store, name + "/conv2", h, 1, 1);
    const Var<T> skip = store.contains(name + "/skip/w") ? ad::conv1d_layer(tape, store, name + "/skip", x) : x;
    return ad::add(skip, h);
}

namespace {

std::string stage(const char* kind, int i) { return std::string("unet/") + kind + std::to_string(i); }

/// Nearest-neighbour doubling along time as a matmul with a fixed [T x 2T] selection matrix.
template <typename T>
Var<T> upsample2(ad::Tape<T>& tape, Var<T> x) {
    const int n = x.shape()[1];
    Tensor<T> sel({n, 2 * n});
    for (int j = 0; j < 2 * n; ++j) sel.data[static_cast<std::size_t>(j / 2) * 2 * n + j] = T(1);
    return ad::matmul(x, tape.constant(std::move(sel)));
}

}  // namespace

template <typename T>
void init_unet(ad::ParamStore<T>& store, const VectorFieldConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    ad::init_linear(store, "unet/time/fc1", cfg.time_dim, cfg.time_dim, rng);
    ad::init_linear(store, "unet/time/fc2", cfg.time_dim, cfg.time_dim, rng);
    ad::init_conv1d(store, "unet/in", cfg.n_mels + cfg.embed_dim, cfg.stage_channels(0), 3, rng);
    int ch = cfg.stage_channels(0);
    for (int i = 0; i < cfg.depth(); ++i) {
        init_res_block(store, stage("down", i), ch, cfg.stage_channels(i), cfg.time_dim, cfg.groups, rng);
        ch = cfg.stage_channels(i);
        ad::init_conv1d(store, stage("pool", i), ch, ch, 3, rng);
    }
    init_res_block(store, "unet/mid", ch, ch, cfg.time_dim, cfg.groups, rng);
    for (int i = cfg.depth() - 1; i >= 0; --i) {
        init_res_block(store, stage("up", i), ch + cfg.stage_channels(i), cfg.stage_channels(i), cfg.time_dim, cfg.groups,
                       rng);
        ch = cfg.stage_channels(i);
    }
    ad::init_group_norm(store, "unet/out_norm", ch);
    // Zero output projection: the untrained field predicts zero velocity.
    store.create("unet/out/w", {cfg.n_mels, ch, 3});
    store.create("unet/out/b", {cfg.n_mels});
}

template <typename T>
Var<T> unet_forward(ad::Tape<T>& tape, ad::ParamStore<T>& store, const VectorFieldConfig& cfg, Var<T> x, double t,
                    Var<T> cond) {
    if (x.shape().size() != 2 || x.shape()[0] != cfg.n_mels)
        throw ValidationError("vector field input must be [" + std::to_string(cfg.n_mels) + " x T], got " +
                              ad::shape_str(x.shape()));
    if (cond.shape().size() != 2 || cond.shape()[0] != cfg.embed_dim || cond.shape()[1] != x.shape()[1])
        throw ValidationError("conditioning " + ad::shape_str(cond.shape()) + " does not match input " +
                              ad::shape_str(x.shape()));
    if (!(t >= 0 && t <= 1)) throw ValidationError("flow time must be in [0, 1]", "t");
    const int n = x.shape()[1];
    const int mult = 1 << cfg.depth();
    const int padded = (n + mult - 1) / mult * mult;

    Var<T> h = ad::concat<T>({x, cond}, 0);
    if (padded != n) h = ad::concat<T>({h, tape.constant(Tensor<T>({cfg.n_mels + cfg.embed_dim, padded - n}))}, 1);

    Var<T> temb = tape.constant(time_embedding<T>(t, cfg.time_dim));
    temb = ad::silu(ad::linear_layer(tape, store, "unet/time/fc1", temb));
    temb = ad::linear_layer(tape, store, "unet/time/fc2", temb);

    h = ad::conv1d_layer(tape, store, "unet/in", h, 1, 1);
    std::vector<Var<T>> skips;
    for (int i = 0; i < cfg.depth(); ++i) {
        h = res_block(tape, store, stage("down", i), h, temb, cfg.groups);
        skips.push_back(h);
        h = ad::conv1d_layer(tape, store, stage("pool", i), h, 2, 1);
    }
    h = res_block(tape, store, "unet/mid", h, temb, cfg.groups);
    for (int i = cfg.depth() - 1; i >= 0; --i) {
        h = ad::concat<T>({upsample2(tape, h), skips[i]}, 0);
        h = res_block(tape, store, stage("up", i), h, temb, cfg.groups);
    }
    h = ad::silu(ad::group_norm_layer(tape, store, "unet/out_norm", h, std::gcd(cfg.groups, h.shape()[0])));
    h = ad::conv1d_layer(tape, store, "unet/out", h, 1, 1);
    return padded != n ? ad::slice(h, 1, 0, n) : h;
}

#define HH_INSTANTIATE(T)                                                                                                \
    template Tensor<T> time_embedding(double, int);                                                                      \
    template void init_unet(ad::ParamStore<T>&, const VectorFieldConfig&, std::mt19937_64&);                             \
    template void init_res_block(ad::ParamStore<T>&, const std::string&, int, int, int, int, std::mt19937_64&);          \
    template Var<T> res_block(ad::Tape<T>&, ad::ParamStore<T>&, const std::string&, Var<T>, Var<T>, int);                \
    template Var<T> unet_forward(ad::Tape<T>&, ad::ParamStore<T>&, const VectorFieldConfig&, Var<T>, double, Var<T>);

HH_INSTANTIATE(float)
HH_INSTANTIATE(double)

}  // namespace hh::flow
