#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace hh {

/// Dense row-major 2-D array.
template <typename T>
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(int r, int c, T fill = T{}) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    const T& operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::span<T> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const T> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }

    bool operator==(const Matrix&) const = default;
};

}  // namespace hh
