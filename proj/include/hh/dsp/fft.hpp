#pragma once

#include <complex>
#include <span>
#include <vector>

namespace hh::dsp {

/// Iterative radix-2 FFT for a fixed power-of-two size.
class Fft {
public:
    explicit Fft(int n);

    int size() const { return n_; }
    /// In-place forward transform (no scaling).
    void forward(std::span<std::complex<double>> a) const { run(a, false); }
    /// In-place inverse transform, scaled by 1/n.
    void inverse(std::span<std::complex<double>> a) const;

    /// Real input of length n -> n/2+1 bins.
    void rfft(std::span<const double> in, std::span<std::complex<double>> out) const;
    /// n/2+1 Hermitian bins -> real output of length n.
    void irfft(std::span<const std::complex<double>> in, std::span<double> out) const;

private:
    void run(std::span<std::complex<double>> a, bool inverse) const;

    int n_;
    std::vector<int> rev_;
    std::vector<std::complex<double>> twiddle_;
    mutable std::vector<std::complex<double>> scratch_;
};

bool is_power_of_two(int n);
int next_power_of_two(int n);

}  // namespace hh::dsp
