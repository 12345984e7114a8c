#include "hh/dsp/stft.hpp"

#include <cmath>
#include <numbers>

#include "hh/dsp/fft.hpp"
#include "hh/error.hpp"

namespace hh::dsp {

std::vector<double> analysis_window(const DspConfig& cfg) {
    std::vector<double> w(static_cast<std::size_t>(cfg.n_fft), 0.0);
    const int offset = (cfg.n_fft - cfg.win) / 2;
    for (int i = 0; i < cfg.win; ++i)
        w[offset + i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.win);
    return w;
}

std::vector<double> center_pad(std::span<const float> samples, int pad) {
    const long n = static_cast<long>(samples.size());
    std::vector<double> out(static_cast<std::size_t>(n + 2L * pad));
    const long period = 2 * (n - 1);
    for (long i = 0; i < static_cast<long>(out.size()); ++i) {
        long src = i - pad;
        if (n == 1) {
            src = 0;
        } else {
            src = ((src % period) + period) % period;
            if (src >= n) src = period - src;
        }
        out[i] = samples[src];
    }
    return out;
}

Matrix<std::complex<double>> stft_frames(std::span<const double> padded, int n_frames, const DspConfig& cfg) {
    const Fft fft(cfg.n_fft);
    const auto window = analysis_window(cfg);
    Matrix<std::complex<double>> out(n_frames, cfg.n_bins());
    std::vector<double> frame(static_cast<std::size_t>(cfg.n_fft));
    for (int t = 0; t < n_frames; ++t) {
        const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
        for (int i = 0; i < cfg.n_fft; ++i) {
            const std::size_t idx = start + i;
            frame[i] = idx < padded.size() ? padded[idx] * window[i] : 0.0;
        }
        fft.rfft(frame, out.row(t));
    }
    return out;
}

std::vector<double> istft_frames(const Matrix<std::complex<double>>& frames, std::size_t padded_len,
                                 const DspConfig& cfg) {
    const Fft fft(cfg.n_fft);
    const auto window = analysis_window(cfg);
    std::vector<double> acc(padded_len, 0.0), norm(padded_len, 0.0), buf(static_cast<std::size_t>(cfg.n_fft));
    for (int t = 0; t < frames.rows; ++t) {
        fft.irfft(frames.row(t), buf);
        const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
        for (int i = 0; i < cfg.n_fft; ++i) {
            const std::size_t idx = start + i;
            if (idx >= padded_len) break;
            acc[idx] += window[i] * buf[i];
            norm[idx] += window[i] * window[i];
        }
    }
    for (std::size_t i = 0; i < padded_len; ++i) acc[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
    return acc;
}

MagnitudeSpectrogram stft(const Waveform& w, const DspConfig& cfg) {
    cfg.validate();
    if (w.sample_rate != cfg.sample_rate)
        throw ConfigError("sample-rate mismatch: waveform " + std::to_string(w.sample_rate) + " Hz, config " +
                          std::to_string(cfg.sample_rate) + " Hz");
    w.validate();
    const auto padded = center_pad(w.samples, cfg.n_fft / 2);
    const int n_frames = cfg.n_frames(w.samples.size());
    const auto spec = stft_frames(padded, n_frames, cfg);
    MagnitudeSpectrogram mag(spec.rows, spec.cols);
    for (std::size_t i = 0; i < spec.data.size(); ++i) mag.data[i] = std::abs(spec.data[i]);
    return mag;
}

}  // namespace hh::dsp
