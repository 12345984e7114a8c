#include "hh/dsp/mel.hpp"

#include <algorithm>
#include <cmath>

#include "hh/dsp/stft.hpp"
#include "hh/error.hpp"

namespace hh::dsp {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank build_mel_filterbank(const DspConfig& cfg) {
    cfg.validate();
    const int n_bins = cfg.n_bins();
    const double mel_lo = hz_to_mel(cfg.f_min);
    const double mel_hi = hz_to_mel(cfg.f_max);
    std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

    MelFilterbank fb{Matrix<double>(cfg.n_mels, n_bins)};
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        bool any = false;
        for (int k = 0; k < n_bins; ++k) {
            const double f = double(k) * cfg.sample_rate / cfg.n_fft;
            const double w = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
            fb.weights(m, k) = w;
            any = any || w > 0.0;
        }
        if (!any)
            throw ConfigError("mel filter " + std::to_string(m) + " has empty support; n_mels=" +
                              std::to_string(cfg.n_mels) + " is too large for n_fft=" + std::to_string(cfg.n_fft));
    }
    return fb;
}

MelSpectrogram magnitude_to_mel(const MagnitudeSpectrogram& mag, const MelFilterbank& fb, const DspConfig& cfg) {
    const int n_mels = fb.weights.rows;
    MelSpectrogram out{Matrix<float>(mag.rows, n_mels), cfg.frame_rate(), cfg.fingerprint()};
    for (int t = 0; t < mag.rows; ++t) {
        const auto frame = mag.row(t);
        for (int m = 0; m < n_mels; ++m) {
            const auto w = fb.weights.row(m);
            double acc = 0.0;
            for (int k = 0; k < mag.cols; ++k) acc += w[k] * frame[k];
            out.frames(t, m) = static_cast<float>(std::log(std::max(acc, cfg.log_floor)));
        }
    }
    return out;
}

MelSpectrogram waveform_to_mel(const Waveform& w, const DspConfig& cfg) {
    return magnitude_to_mel(stft(w, cfg), build_mel_filterbank(cfg), cfg);
}

}  // namespace hh::dsp
