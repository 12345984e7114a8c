#pragma once

#include <vector>

#include "hh/ad/tape.hpp"

/// The closed operator set. Every op validates shapes (errors name both shapes), checks its
/// output is finite and defines a gradient. Broadcasting of the second operand is limited to
/// trailing singleton dimensions, e.g. [C x T] with [C x 1].
namespace hh::ad {

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);

/// [m x k] * [k x n].
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
/// weight [out x in] * x [in x N] + bias [out] (bias broadcast over columns).
template <typename T> Var<T> affine(Var<T> x, Var<T> weight, Var<T> bias);
/// x [Cin x T], weight [Cout x Cin x K], bias [Cout] -> [Cout x T'].
template <typename T> Var<T> conv1d(Var<T> x, Var<T> weight, Var<T> bias, int stride = 1, int padding = 0);
/// x [Cin x H x W], weight [Cout x Cin x K x K], bias [Cout] -> [Cout x H' x W'].
template <typename T> Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, int stride = 1, int padding = 0);

template <typename T> Var<T> silu(Var<T> x);
/// x [C x ...]; statistics per group of C/groups channels over all trailing positions.
template <typename T> Var<T> group_norm(Var<T> x, Var<T> gamma, Var<T> beta, int groups, T eps = T(1e-5));

template <typename T> Var<T> reshape(Var<T> x, Shape shape);
template <typename T> Var<T> concat(const std::vector<Var<T>>& parts, int axis);
template <typename T> Var<T> slice(Var<T> x, int axis, int start, int length);

template <typename T> Var<T> sum(Var<T> x);
template <typename T> Var<T> mean(Var<T> x);
/// Mean over one axis, kept as a singleton dimension.
template <typename T> Var<T> mean_axis(Var<T> x, int axis);
/// mean((a - b)^2) as a one-element tensor.
template <typename T> Var<T> mse(Var<T> a, Var<T> b);

/// Scales every column of a 2-D tensor to unit L2 norm.
template <typename T> Var<T> l2_normalize_columns(Var<T> x);
/// -log softmax(logits)[label] for a logit vector of K entries.
template <typename T> Var<T> softmax_cross_entropy(Var<T> logits, int label);

}  // namespace hh::ad
