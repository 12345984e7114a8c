#pragma once

#include <random>

#include "hh/ad/nn.hpp"
#include "hh/flow/config.hpp"

namespace hh::flow {

/// Sinusoidal embedding of t in [0, 1] as a [dim x 1] tensor (sines then cosines).
template <typename T>
ad::Tensor<T> time_embedding(double t, int dim);

template <typename T>
void init_unet(ad::ParamStore<T>& store, const VectorFieldConfig& cfg, std::mt19937_64& rng);

/// GroupNorm -> SiLU -> conv, twice, with the stage's time projection added in between, plus a
/// residual path (1x1 conv when channels change). x is [C_in x T], temb is [time_dim x 1].
template <typename T>
ad::Var<T> res_block(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& name, ad::Var<T> x,
                     ad::Var<T> temb, int groups);

template <typename T>
void init_res_block(ad::ParamStore<T>& store, const std::string& name, int cin, int cout, int time_dim, int groups,
                    std::mt19937_64& rng);

/// Velocity for x [n_mels x T] at time t given cond [D x T]. T need not be a multiple of
/// 2^depth; inputs are zero-padded on the right and the output cropped back.
template <typename T>
ad::Var<T> unet_forward(ad::Tape<T>& tape, ad::ParamStore<T>& store, const VectorFieldConfig& cfg, ad::Var<T> x,
                        double t, ad::Var<T> cond);

}  // namespace hh::flow
