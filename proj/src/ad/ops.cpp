#include "hh/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gemm.hpp"
#include "hh/error.hpp"

namespace hh::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw ValidationError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& why) {
    throw ValidationError(std::string(op) + ": shape " + shape_str(a) + " " + why);
}

template <typename T>
Tape<T>& same_tape(const char* op, Var<T> a, Var<T> b) {
    if (a.tape != b.tape || a.tape == nullptr) throw UsageError(std::string(op) + ": operands on different recordings");
    return *a.tape;
}

/// Size of each broadcast block when `b` is broadcast onto `a` over trailing singleton dims.
std::size_t broadcast_inner(const char* op, const Shape& a, const Shape& b) {
    if (a == b) return 1;
    if (numel(b) == 1) return numel(a);
    if (a.size() != b.size()) shape_error(op, a, b);
    std::size_t k = 0;
    while (k < a.size() && a[k] == b[k]) ++k;
    std::size_t inner = 1;
    for (std::size_t i = k; i < a.size(); ++i) {
        if (b[i] != 1) shape_error(op, a, b);
        inner *= static_cast<std::size_t>(a[i]);
    }
    return inner;
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    auto& tape = same_tape("add", a, b);
    const auto& av = a.value();
    const auto& bv = b.value();
    const std::size_t inner = broadcast_inner("add", av.shape, bv.shape);
    Tensor<T> out(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] + bv.data[i / inner];
    return tape.push("add", std::move(out), tape.any_requires_grad({a.id, b.id}), [&tape, a, b, inner, id = int(tape.node_count())] {
        auto g = tape.grad_buffer(id);
        if (tape.requires_grad(a.id)) {
            auto ga = tape.grad_buffer(a.id);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (tape.requires_grad(b.id)) {
            auto gb = tape.grad_buffer(b.id);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i / inner] += g[i];
        }
    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    auto& tape = same_tape("sub", a, b);
    const auto& av = a.value();
    const auto& bv = b.value();
    const std::size_t inner = broadcast_inner("sub", av.shape, bv.shape);
    Tensor<T> out(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] - bv.data[i / inner];
    return tape.push("sub", std::move(out), tape.any_requires_grad({a.id, b.id}), [&tape, a, b, inner, id = int(tape.node_count())] {
        auto g = tape.grad_buffer(id);
        if (tape.requires_grad(a.id)) {
            auto ga = tape.grad_buffer(a.id);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (tape.requires_grad(b.id)) {
            auto gb = tape.grad_buffer(b.id);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i / inner] -= g[i];
        }
    });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    auto& tape = same_tape("mul", a, b);
    const auto& av = a.value();
    const auto& bv = b.value();
    const std::size_t inner = broadcast_inner("mul", av.shape, bv.shape);
    Tensor<T> out(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] * bv.data[i / inner];
    return tape.push("mul", std::move(out), tape.any_requires_grad({a.id, b.id}), [&tape, a, b, inner, id = int(tape.node_count())] {
        auto g = tape.grad_buffer(id);
        const auto& av = tape.value(a.id).data;
        const auto& bv = tape.value(b.id).data;
        if (tape.requires_grad(a.id)) {
            auto ga = tape.grad_buffer(a.id);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i / inner];
        }
        if (tape.requires_grad(b.id)) {
            auto gb = tape.grad_buffer(b.id);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i / inner] += g[i] * av[i];
        }
    });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
    auto& tape = *a.tape;
    Tensor<T> out(a.value().shape);
    const auto& av = a.value().data;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av[i] * factor;
    return tape.push("scale", std::move(out), tape.any_requires_grad({a.id}), [&tape, a, factor, id = int(tape.node_count())] {
        auto g = tape.grad_buffer(id);
        auto ga = tape.grad_buffer(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    auto& tape = same_tape("matmul", a, b);
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) shape_error("matmul", as, bs);
    const int m = as[0], k = as[1], n = bs[1];
    Tensor<T> out({m, n});
    detail::gemm(a.value().data.data(), false, b.value().data.data(), false, out.data.data(), m, n, k, false);
    return tape.push("matmul", std::move(out), tape.any_requires_grad({a.id, b.id}), [&tape, a, b, m, n, k, id = int(tape.node_count())] {
        const T* g = tape.grad_buffer(id).data();
        if (tape.requires_grad(a.id))
            detail::gemm(g, false, tape.value(b.id).data.data(), true, tape.grad_buffer(a.id).data(), m, k, n, true);
        if (tape.requires_grad(b.id))
            detail::gemm(tape.value(a.id).data.data(), true, g, false, tape.grad_buffer(b.id).data(), k, n, m, true);
    });
}

template <typename T>
Var<T> affine(Var<T> x, Var<T> weight, Var<T> bias) {
    auto& tape = same_tape("affine", x, weight);
    const auto& xs = x.shape();
    const auto& ws = weight.shape();
    if (xs.size() != 2 || ws.size() != 2 || ws[1] != xs[0]) shape_error("affine", ws, xs);
    if (numel(bias.shape()) != static_cast<std::size_t>(ws[0])) shape_error("affine", ws, bias.shape());
    const int out_dim = ws[0], in_dim = ws[1], cols = xs[1];
    Tensor<T> out({out_dim, cols});
    detail::gemm(weight.value().data.data(), false, x.value().data.data(), false, out.data.data(), out_dim, cols, in_dim,
                 false);
    const auto& bv = bias.value().data;
    for (int o = 0; o < out_dim; ++o)
        for (int c = 0; c < cols; ++c) out.data[std::size_t(o) * cols + c] += bv[o];
    return tape.push("affine", std::move(out), tape.any_requires_grad({x.id, weight.id, bias.id}),
                     [&tape, x, weight, bias, out_dim, in_dim, cols, id = int(tape.node_count())] {
                         const T* g = tape.grad_buffer(id).data();
                         if (tape.requires_grad(x.id))
                             detail::gemm(tape.value(weight.id).data.data(), true, g, false,
                                          tape.grad_buffer(x.id).data(), in_dim, cols, out_dim, true);
                         if (tape.requires_grad(weight.id))
                             detail::gemm(g, false, tape.value(x.id).data.data(), true,
                                          tape.grad_buffer(weight.id).data(), out_dim, in_dim, cols, true);
                         if (tape.requires_grad(bias.id)) {
                             auto gb = tape.grad_buffer(bias.id);
                             for (int o = 0; o < out_dim; ++o)
                                 for (int c = 0; c < cols; ++c) gb[o] += g[std::size_t(o) * cols + c];
                         }
                     });
}

template <typename T>
Var<T> conv1d(Var<T> x, Var<T> weight, Var<T> bias, int stride, int padding) {
    auto& tape = same_tape("conv1d", x, weight);
    const auto& xs = x.shape();
    const auto& ws = weight.shape();
    if (xs.size() != 2 || ws.size() != 3 || ws[1] != xs[0]) shape_error("conv1d", xs, ws);
    if (numel(bias.shape()) != static_cast<std::size_t>(ws[0])) shape_error("conv1d", ws, bias.shape());
    if (stride < 1 || padding < 0) throw ValidationError("conv1d: stride must be >= 1 and padding >= 0");
    const int cin = xs[0], t_in = xs[1], cout = ws[0], kk = ws[2];
    const int t_out = (t_in + 2 * padding - kk) / stride + 1;
    if (t_out <= 0) shape_error("conv1d", xs, "is shorter than the kernel");
    const int rows = cin * kk;

    // im2col: cols[(c*K + k), t] = x[c, t*stride + k - padding]
    std::vector<T> cols(static_cast<std::size_t>(rows) * t_out, T{});
    const auto& xv = x.value().data;
    for (int c = 0; c < cin; ++c)
        for (int k = 0; k < kk; ++k) {
            T* dst = cols.data() + std::size_t(c * kk + k) * t_out;
            for (int t = 0; t < t_out; ++t) {
                const int src = t * stride + k - padding;
                if (src >= 0 && src < t_in) dst[t] = xv[std::size_t(c) * t_in + src];
            }
        }
    Tensor<T> out({cout, t_out});
    detail::gemm(weight.value().data.data(), false, cols.data(), false, out.data.data(), cout, t_out, rows, false);
    const auto& bv = bias.value().data;
    for (int o = 0; o < cout; ++o)
        for (int t = 0; t < t_out; ++t) out.data[std::size_t(o) * t_out + t] += bv[o];

    const bool needs = tape.any_requires_grad({x.id, weight.id, bias.id});
    return tape.push("conv1d", std::move(out), needs,
                     [&tape, x, weight, bias, cols = needs ? std::move(cols) : std::vector<T>{}, cin, t_in, cout, kk,
                      t_out, rows, stride, padding, id = int(tape.node_count())] {
                         const T* g = tape.grad_buffer(id).data();
                         if (tape.requires_grad(weight.id))
                             detail::gemm(g, false, cols.data(), true, tape.grad_buffer(weight.id).data(), cout, rows,
                                          t_out, true);
                         if (tape.requires_grad(bias.id)) {
                             auto gb = tape.grad_buffer(bias.id);
                             for (int o = 0; o < cout; ++o)
                                 for (int t = 0; t < t_out; ++t) gb[o] += g[std::size_t(o) * t_out + t];
                         }
                         if (tape.requires_grad(x.id)) {
                             std::vector<T> dcols(static_cast<std::size_t>(rows) * t_out);
                             detail::gemm(tape.value(weight.id).data.data(), true, g, false, dcols.data(), rows, t_out,
                                          cout, false);
                             auto gx = tape.grad_buffer(x.id);
                             for (int c = 0; c < cin; ++c)
                                 for (int k = 0; k < kk; ++k) {
                                     const T* src = dcols.data() + std::size_t(c * kk + k) * t_out;
                                     for (int t = 0; t < t_out; ++t) {
                                         const int dst = t * stride + k - padding;
                                         if (dst >= 0 && dst < t_in) gx[std::size_t(c) * t_in + dst] += src[t];
                                     }
                                 }
                         }
                     });
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, int stride, int padding) {
    auto& tape = same_tape("conv2d", x, weight);
    const auto& xs = x.shape();
    const auto& ws = weight.shape();
    if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || ws[2] != ws[3]) shape_error("conv2d", xs, ws);
    if (numel(bias.shape()) != static_cast<std::size_t>(ws[0])) shape_error("conv2d", ws, bias.shape());
    if (stride < 1 || padding < 0) throw ValidationError("conv2d: stride must be >= 1 and padding >= 0");
    const int cin = xs[0], h = xs[1], w = xs[2], cout = ws[0], kk = ws[2];
    const int ho = (h + 2 * padding - kk) / stride + 1;
    const int wo = (w + 2 * padding - kk) / stride + 1;
    if (ho <= 0 || wo <= 0) shape_error("conv2d", xs, "is smaller than the kernel");
    const int rows = cin * kk * kk;
    const int npos = ho * wo;

    std::vector<T> cols(static_cast<std::size_t>(rows) * npos, T{});
    const auto& xv = x.value().data;
    for (int c = 0; c < cin; ++c)
        for (int ky = 0; ky < kk; ++ky)
            for (int kx = 0; kx < kk; ++kx) {
                T* dst = cols.data() + std::size_t((c * kk + ky) * kk + kx) * npos;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ky - padding;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride + kx - padding;
                        if (ix >= 0 && ix < w) dst[oy * wo + ox] = xv[(std::size_t(c) * h + iy) * w + ix];
                    }
                }
            }
    Tensor<T> out({cout, ho, wo});
    detail::gemm(weight.value().data.data(), false, cols.data(), false, out.data.data(), cout, npos, rows, false);
    const auto& bv = bias.value().data;
    for (int o = 0; o < cout; ++o)
        for (int p = 0; p < npos; ++p) out.data[std::size_t(o) * npos + p] += bv[o];

    const bool needs = tape.any_requires_grad({x.id, weight.id, bias.id});
    return tape.push("conv2d", std::move(out), needs,
                     [&tape, x, weight, bias, cols = needs ? std::move(cols) : std::vector<T>{}, cin, h, w, cout, kk,
                      ho, wo, rows, npos, stride, padding, id = int(tape.node_count())] {
                         const T* g = tape.grad_buffer(id).data();
                         if (tape.requires_grad(weight.id))
                             detail::gemm(g, false, cols.data(), true, tape.grad_buffer(weight.id).data(), cout, rows,
                                          npos, true);
                         if (tape.requires_grad(bias.id)) {
                             auto gb = tape.grad_buffer(bias.id);
                             for (int o = 0; o < cout; ++o)
                                 for (int p = 0; p < npos; ++p) gb[o] += g[std::size_t(o) * npos + p];
                         }
                         if (tape.requires_grad(x.id)) {
                             std::vector<T> dcols(static_cast<std::size_t>(rows) * npos);
                             detail::gemm(tape.value(weight.id).data.data(), true, g, false, dcols.data(), rows, npos,
                                          cout, false);
                             auto gx = tape.grad_buffer(x.id);
                             for (int c = 0; c < cin; ++c)
                                 for (int ky = 0; ky < kk; ++ky)
                                     for (int kx = 0; kx < kk; ++kx) {
                                         const T* src = dcols.data() + std::size_t((c * kk + ky) * kk + kx) * npos;
                                         for (int oy = 0; oy < ho; ++oy) {
                                             const int iy = oy * stride + ky - padding;
                                             if (iy < 0 || iy >= h) continue;
                                             for (int ox = 0; ox < wo; ++ox) {
                                                 const int ix = ox * stride + kx - padding;
                                                 if (ix >= 0 && ix < w)
                                                     gx[(std::size_t(c) * h + iy) * w + ix] += src[oy * wo + ox];
                                             }
                                         }
                                     }
                         }
                     });
}

template <typename T>
Var<T> silu(Var<T> x) {
    auto& tape = *x.tape;
    const auto& xv = x.value().data;
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out.data[i] = xv[i] / (T(1) + std::exp(-xv[i]));
    return tape.push("silu", std::move(out), tape.any_requires_grad({x.id}), [&tape, x, id = int(tape.node_count())] {
        auto g = tape.grad_buffer(id);
        auto gx = tape.grad_buffer(x.id);
        const auto& xv = tape.value(x.id).data;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T s = T(1) / (T(1) + std::exp(-xv[i]));
            gx[i] += g[i] * s * (T(1) + xv[i] * (T(1) - s));
        }
    });
}

template <typename T>
Var<T> group_norm(Var<T> x, Var<T> gamma, Var<T> beta, int groups, T eps) {
    auto& tape = same_tape("group_norm", x, gamma);
    const auto& xs = x.shape();
    if (xs.empty()) shape_error("group_norm", xs, "has no channel axis");
    const int channels = xs[0];
    if (groups < 1 || channels % groups != 0)
        shape_error("group_norm", xs, "channel count is not divisible by " + std::to_string(groups) + " groups");
    if (numel(gamma.shape()) != std::size_t(channels) || numel(beta.shape()) != std::size_t(channels))
        shape_error("group_norm", xs, gamma.shape());
    const std::size_t spatial = numel(xs) / channels;
    const std::size_t group_size = spatial * (channels / groups);

    const auto& xv = x.value().data;
    const auto& gv = gamma.value().data;
    const auto& bv = beta.value().data;
    std::vector<T> xhat(xv.size());
    std::vector<T> inv_std(static_cast<std::size_t>(groups));
    Tensor<T> out(xs);
    for (int g = 0; g < groups; ++g) {
        const std::size_t begin = g * group_size;
        T m = 0;
        for (std::size_t i = 0; i < group_size; ++i) m += xv[begin + i];
        m /= T(group_size);
        T var = 0;
        for (std::size_t i = 0; i < group_size; ++i) var += (xv[begin + i] - m) * (xv[begin + i] - m);
        var /= T(group_size);
        inv_std[g] = T(1) / std::sqrt(var + eps);
        for (std::size_t i = 0; i < group_size; ++i) {
            const std::size_t idx = begin + i;
            const int c = static_cast<int>(idx / spatial);
            xhat[idx] = (xv[idx] - m) * inv_std[g];
            out.data[idx] = gv[c] * xhat[idx] + bv[c];
        }
    }
    const bool needs = tape.any_requires_grad({x.id, gamma.id, beta.id});
    return tape.push("group_norm", std::move(out), needs,
                     [&tape, x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), groups, spatial,
                      group_size, id = int(tape.node_count())] {
                         auto g = tape.grad_buffer(id);
                         const auto& gv = tape.value(gamma.id).data;
                         if (tape.requires_grad(gamma.id)) {
                             auto gg = tape.grad_buffer(gamma.id);
                             for (std::size_t i = 0; i < g.size(); ++i) gg[i / spatial] += g[i] * xhat[i];
                         }
                         if (tape.requires_grad(beta.id)) {
                             auto gb = tape.grad_buffer(beta.id);
                             for (std::size_t i = 0; i < g.size(); ++i) gb[i / spatial] += g[i];
                         }
                         if (tape.requires_grad(x.id)) {
                             auto gx = tape.grad_buffer(x.id);
                             const T n = T(group_size);
                             for (int grp = 0; grp < groups; ++grp) {
                                 const std::size_t begin = grp * group_size;
                                 T sum_d = 0, sum_dx = 0;
                                 for (std::size_t i = 0; i < group_size; ++i) {
                                     const std::size_t idx = begin + i;
                                     const T d = g[idx] * gv[idx / spatial];
                                     sum_d += d;
                                     sum_dx += d * xhat[idx];
                                 }
                                 for (std::size_t i = 0; i < group_size; ++i) {
                                     const std::size_t idx = begin + i;
                                     const T d = g[idx] * gv[idx / spatial];
                                     gx[idx] += inv_std[grp] / n * (n * d - sum_d - xhat[idx] * sum_dx);
                                 }
                             }
                         }
                     });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
    auto& tape = *x.tape;
    if (numel(shape) != x.size()) shape_error("reshape", x.shape(), shape);
    Tensor<T> out(std::move(shape));
    out.data = x.value().data;
    return tape.push("reshape", std::move(out), tape.any_requires_grad({x.id}), [&tape, x, id = int(tape.node_count())] {
        auto g = tape.grad_buffer(id);
        auto gx = tape.grad_buffer(x.id);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
    if (parts.empty()) throw ValidationError("concat: no inputs");
    auto& tape = *parts[0].tape;
    Shape shape = parts[0].shape();
    if (axis < 0 || axis >= static_cast<int>(shape.size())) shape_error("concat", shape, "has no axis " + std::to_string(axis));
    int total = 0;
    bool needs = false;
    for (const auto& p : parts) {
        if (p.tape != &tape) throw UsageError("concat: operands on different recordings");
        const auto& s = p.shape();
        if (s.size() != shape.size()) shape_error("concat", shape, s);
        for (std::size_t d = 0; d < s.size(); ++d)
            if (int(d) != axis && s[d] != shape[d]) shape_error("concat", shape, s);
        total += s[axis];
        needs = needs || tape.any_requires_grad({p.id});
    }
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= shape[d];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
    shape[axis] = total;
    Tensor<T> out(shape);
    std::size_t offset = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        const std::size_t block = std::size_t(p.shape()[axis]) * inner;
        const auto& pv = p.value().data;
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(pv.data() + o * block, block, out.data.data() + o * total * inner + offset);
        offsets.push_back(offset);
        offset += block;
    }
    return tape.push("concat", std::move(out), needs,
                     [&tape, parts, offsets, outer, inner, total, axis, id = int(tape.node_count())] {
                         auto g = tape.grad_buffer(id);
                         for (std::size_t k = 0; k < parts.size(); ++k) {
                             if (!tape.requires_grad(parts[k].id)) continue;
                             const std::size_t block = std::size_t(tape.value(parts[k].id).shape[axis]) * inner;
                             auto gp = tape.grad_buffer(parts[k].id);
                             for (std::size_t o = 0; o < outer; ++o)
                                 for (std::size_t i = 0; i < block; ++i)
                                     gp[o * block + i] += g[o * total * inner + offsets[k] + i];
                         }
                     });
}

template <typename T>
Var<T> slice(Var<T> x, int axis, int start, int length) {
    auto& tape = *x.tape;
    const Shape xs = x.shape();
    if (axis < 0 || axis >= static_cast<int>(xs.size()) || start < 0 || length < 1 || start + length > xs[axis])
        shape_error("slice", xs,
                    "cannot be sliced at axis " + std::to_string(axis) + " [" + std::to_string(start) + ", +" +
                        std::to_string(length) + ")");
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= xs[d];
    for (std::size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
    Shape os = xs;
    os[axis] = length;
    Tensor<T> out(os);
    const auto& xv = x.value().data;
    const std::size_t src_block = std::size_t(xs[axis]) * inner, dst_block = std::size_t(length) * inner;
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(xv.data() + o * src_block + std::size_t(start) * inner, dst_block, out.data.data() + o * dst_block);
    return tape.push("slice", std::move(out), tape.any_requires_grad({x.id}),
                     [&tape, x, outer, inner, src_block, dst_block, start, id = int(tape.node_count())] {
                         auto g = tape.grad_buffer(id);
                         auto gx = tape.grad_buffer(x.id);
                         for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t i = 0; i < dst_block; ++i)
                                 gx[o * src_block + std::size_t(start) * inner + i] += g[o * dst_block + i];
                     });
}

template <typename T>
Var<T> sum(Var<T> x) {
    auto& tape = *x.tape;
    const auto& xv = x.value().data;
    Tensor<T> out({1}, std::accumulate(xv.begin(), xv.end(), T{}));
    return tape.push("sum", std::move(out), tape.any_requires_grad({x.id}), [&tape, x, id = int(tape.node_count())] {
        const T g = tape.grad_buffer(id)[0];
        for (auto& v : tape.grad_buffer(x.id)) v += g;
    });
}

template <typename T>
Var<T> mean(Var<T> x) {
    auto& tape = *x.tape;
    const auto& xv = x.value().data;
    const T n = T(xv.size());
    Tensor<T> out({1}, std::accumulate(xv.begin(), xv.end(), T{}) / n);
    return tape.push("mean", std::move(out), tape.any_requires_grad({x.id}), [&tape, x, n, id = int(tape.node_count())] {
        const T g = tape.grad_buffer(id)[0] / n;
        for (auto& v : tape.grad_buffer(x.id)) v += g;
    });
}

template <typename T>
Var<T> mean_axis(Var<T> x, int axis) {
    auto& tape = *x.tape;
    const Shape xs = x.shape();
    if (axis < 0 || axis >= static_cast<int>(xs.size())) shape_error("mean_axis", xs, "has no axis " + std::to_string(axis));
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= xs[d];
    for (std::size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
    const int len = xs[axis];
    Shape os = xs;
    os[axis] = 1;
    Tensor<T> out(os);
    const auto& xv = x.value().data;
    for (std::size_t o = 0; o < outer; ++o)
        for (int a = 0; a < len; ++a)
            for (std::size_t i = 0; i < inner; ++i) out.data[o * inner + i] += xv[(o * len + a) * inner + i];
    for (auto& v : out.data) v /= T(len);
    return tape.push("mean_axis", std::move(out), tape.any_requires_grad({x.id}),
                     [&tape, x, outer, inner, len, id = int(tape.node_count())] {
                         auto g = tape.grad_buffer(id);
                         auto gx = tape.grad_buffer(x.id);
                         for (std::size_t o = 0; o < outer; ++o)
                             for (int a = 0; a < len; ++a)
                                 for (std::size_t i = 0; i < inner; ++i)
                                     gx[(o * len + a) * inner + i] += g[o * inner + i] / T(len);
                     });
}

template <typename T>
Var<T> mse(Var<T> a, Var<T> b) {
    auto& tape = same_tape("mse", a, b);
    if (a.shape() != b.shape()) shape_error("mse", a.shape(), b.shape());
    const auto& av = a.value().data;
    const auto& bv = b.value().data;
    T acc = 0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += (av[i] - bv[i]) * (av[i] - bv[i]);
    const T n = T(av.size());
    Tensor<T> out({1}, acc / n);
    return tape.push("mse", std::move(out), tape.any_requires_grad({a.id, b.id}), [&tape, a, b, n, id = int(tape.node_count())] {
        const T g = tape.grad_buffer(id)[0] * T(2) / n;
        const auto& av = tape.value(a.id).data;
        const auto& bv = tape.value(b.id).data;
        if (tape.requires_grad(a.id)) {
            auto ga = tape.grad_buffer(a.id);
            for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g * (av[i] - bv[i]);
        }
        if (tape.requires_grad(b.id)) {
            auto gb = tape.grad_buffer(b.id);
            for (std::size_t i = 0; i < av.size(); ++i) gb[i] -= g * (av[i] - bv[i]);
        }
    });
}

template <typename T>
Var<T> l2_normalize_columns(Var<T> x) {
    auto& tape = *x.tape;
    const auto& xs = x.shape();
    if (xs.size() != 2) shape_error("l2_normalize_columns", xs, "is not 2-D");
    const int rows = xs[0], cols = xs[1];
    const auto& xv = x.value().data;
    std::vector<T> norms(static_cast<std::size_t>(cols));
    Tensor<T> out(xs);
    for (int c = 0; c < cols; ++c) {
        T s = 0;
        for (int r = 0; r < rows; ++r) s += xv[std::size_t(r) * cols + c] * xv[std::size_t(r) * cols + c];
        norms[c] = std::max(std::sqrt(s), T(1e-12));
        for (int r = 0; r < rows; ++r) out.data[std::size_t(r) * cols + c] = xv[std::size_t(r) * cols + c] / norms[c];
    }
    return tape.push("l2_normalize_columns", std::move(out), tape.any_requires_grad({x.id}),
                     [&tape, x, norms = std::move(norms), rows, cols, id = int(tape.node_count())] {
                         auto g = tape.grad_buffer(id);
                         auto gx = tape.grad_buffer(x.id);
                         const auto& y = tape.value(id).data;
                         for (int c = 0; c < cols; ++c) {
                             T dot = 0;
                             for (int r = 0; r < rows; ++r) dot += y[std::size_t(r) * cols + c] * g[std::size_t(r) * cols + c];
                             for (int r = 0; r < rows; ++r) {
                                 const std::size_t i = std::size_t(r) * cols + c;
                                 gx[i] += (g[i] - y[i] * dot) / norms[c];
                             }
                         }
                     });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, int label) {
    auto& tape = *logits.tape;
    const auto& z = logits.value().data;
    if (label < 0 || label >= static_cast<int>(z.size()))
        shape_error("softmax_cross_entropy", logits.shape(), "has no class " + std::to_string(label));
    const T zmax = *std::max_element(z.begin(), z.end());
    T denom = 0;
    for (T v : z) denom += std::exp(v - zmax);
    const T loss = std::log(denom) + zmax - z[label];
    return tape.push("softmax_cross_entropy", Tensor<T>({1}, loss), tape.any_requires_grad({logits.id}),
                     [&tape, logits, label, id = int(tape.node_count())] {
                         const T g = tape.grad_buffer(id)[0];
                         const auto& z = tape.value(logits.id).data;
                         const T zmax = *std::max_element(z.begin(), z.end());
                         T denom = 0;
                         for (T v : z) denom += std::exp(v - zmax);
                         auto gz = tape.grad_buffer(logits.id);
                         for (std::size_t k = 0; k < z.size(); ++k)
                             gz[k] += g * (std::exp(z[k] - zmax) / denom - (int(k) == label ? T(1) : T(0)));
                     });
}

#define HH_INSTANTIATE(T)                                                              \
    template Var<T> add(Var<T>, Var<T>);                                               \
    template Var<T> sub(Var<T>, Var<T>);                                               \
    template Var<T> mul(Var<T>, Var<T>);                                               \
    template Var<T> scale(Var<T>, T);                                                  \
    template Var<T> matmul(Var<T>, Var<T>);                                            \
    template Var<T> affine(Var<T>, Var<T>, Var<T>);                                    \
    template Var<T> conv1d(Var<T>, Var<T>, Var<T>, int, int);                          \
    template Var<T> conv2d(Var<T>, Var<T>, Var<T>, int, int);                          \
    template Var<T> silu(Var<T>);                                                      \
    template Var<T> group_norm(Var<T>, Var<T>, Var<T>, int, T);                        \
    template Var<T> reshape(Var<T>, Shape);                                            \
    template Var<T> concat(const std::vector<Var<T>>&, int);                           \
    template Var<T> slice(Var<T>, int, int, int);                                      \
    template Var<T> sum(Var<T>);                                                       \
    template Var<T> mean(Var<T>);                                                      \
    template Var<T> mean_axis(Var<T>, int);                                            \
    template Var<T> mse(Var<T>, Var<T>);                                               \
    template Var<T> l2_normalize_columns(Var<T>);                                      \
    template Var<T> softmax_cross_entropy(Var<T>, int);

HH_INSTANTIATE(float)
HH_INSTANTIATE(double)

}  // namespace hh::ad
