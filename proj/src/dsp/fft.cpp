#include "hh/dsp/fft.hpp"

#include <cmath>
#include <numbers>

#include "hh/error.hpp"

namespace hh::dsp {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_power_of_two(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

Fft::Fft(int n) : n_(n), rev_(static_cast<std::size_t>(n)), twiddle_(static_cast<std::size_t>(n / 2)) {
    if (!is_power_of_two(n)) throw ConfigError("FFT size must be a power of two, got " + std::to_string(n));
    int bits = 0;
    while ((1 << bits) < n) ++bits;
    for (int i = 0; i < n; ++i) {
        int r = 0;
        for (int b = 0; b < bits; ++b)
            if (i & (1 << b)) r |= 1 << (bits - 1 - b);
        rev_[i] = r;
    }
    for (int k = 0; k < n / 2; ++k) twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * k / n);
}

void Fft::run(std::span<std::complex<double>> a, bool inverse) const {
    const int n = n_;
    for (int i = 0; i < n; ++i)
        if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len / 2;
        const int step = n / len;
        for (int start = 0; start < n; start += len) {
            for (int k = 0; k < half; ++k) {
                auto w = twiddle_[k * step];
                if (inverse) w = std::conj(w);
                auto u = a[start + k];
                auto v = a[start + k + half] * w;
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
    }
}

void Fft::inverse(std::span<std::complex<double>> a) const {
    run(a, true);
    const double s = 1.0 / n_;
    for (auto& x : a) x *= s;
}

void Fft::rfft(std::span<const double> in, std::span<std::complex<double>> out) const {
    scratch_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) scratch_[i] = {in[i], 0.0};
    run(scratch_, false);
    for (int k = 0; k <= n_ / 2; ++k) out[k] = scratch_[k];
}

void Fft::irfft(std::span<const std::complex<double>> in, std::span<double> out) const {
    scratch_.resize(static_cast<std::size_t>(n_));
    const int half = n_ / 2;
    for (int k = 0; k <= half; ++k) scratch_[k] = in[k];
    // Hermitian extension; DC and Nyquist imaginary parts are dropped.
    scratch_[0] = {in[0].real(), 0.0};
    scratch_[half] = {in[half].real(), 0.0};
    for (int k = 1; k < half; ++k) scratch_[n_ - k] = std::conj(in[k]);
    inverse(scratch_);
    for (int i = 0; i < n_; ++i) out[i] = scratch_[i].real();
}

}  // namespace hh::dsp
