#include "hh/dsp/envelope.hpp"

#include <algorithm>

#include "hh/error.hpp"
#include "hh/util.hpp"

namespace hh::dsp {

std::vector<float> envelope(const Waveform& w, double window_ms) {
    if (!(window_ms > 0.0)) throw ValidationError("window_ms must be positive", "window_ms");
    w.validate();
    const long n = static_cast<long>(w.samples.size());
    const long len = std::max(1L, round_half_up(window_ms * w.sample_rate / 1000.0));
    std::vector<double> prefix(static_cast<std::size_t>(n + 1), 0.0);
    for (long i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + std::abs(double(w.samples[i]));
    std::vector<float> out(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const long lo = std::clamp(i - len / 2, 0L, n);
        const long hi = std::clamp(i - len / 2 + len, 0L, n);
        out[i] = static_cast<float>((prefix[hi] - prefix[lo]) / double(len));
    }
    return out;
}

}  // namespace hh::dsp
