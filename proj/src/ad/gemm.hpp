#pragma once

#include <Eigen/Core>

namespace hh::ad::detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapM = Eigen::Map<const RowMat<T>>;

/// C (+)= op(A) * op(B) on row-major buffers. op(A) is m x k, op(B) is k x n.
template <typename T>
void gemm(const T* a, bool trans_a, const T* b, bool trans_b, T* c, int m, int n, int k, bool accumulate) {
    MapM<T> cm(c, m, n);
    auto run = [&](const auto& lhs, const auto& rhs) {
        if (accumulate)
            cm.noalias() += lhs * rhs;
        else
            cm.noalias() = lhs * rhs;
    };
    if (!trans_a && !trans_b) run(CMapM<T>(a, m, k), CMapM<T>(b, k, n));
    if (!trans_a && trans_b) run(CMapM<T>(a, m, k), CMapM<T>(b, n, k).transpose());
    if (trans_a && !trans_b) run(CMapM<T>(a, k, m).transpose(), CMapM<T>(b, k, n));
    if (trans_a && trans_b) run(CMapM<T>(a, k, m).transpose(), CMapM<T>(b, n, k).transpose());
}

}  // namespace hh::ad::detail
