#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "hh/matrix.hpp"

namespace hh::dsp {

/// Mono audio at a fixed sample rate; samples nominally in [-1, 1].
struct Waveform {
    std::vector<float> samples;
    int sample_rate = 16000;

    double duration() const { return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0; }
    /// Throws ValidationError on empty or non-finite data.
    void validate() const;
};

struct DspConfig {
    int sample_rate = 16000;
    int n_fft = 1024;
    int hop = 256;
    int win = 1024;
    int n_mels = 80;
    double f_min = 0.0;
    double f_max = 8000.0;
    double log_floor = 1e-5;

    /// 16 kHz, 80 mel bins, hop 256.
    static DspConfig reference();
    /// 8 kHz, 40 mel bins, hop 128 (same 62.5 Hz frame rate as the reference preset).
    static DspConfig desk();

    void validate() const;
    int n_bins() const { return n_fft / 2 + 1; }
    double frame_rate() const { return double(sample_rate) / hop; }
    /// Frame count under centre padding.
    int n_frames(std::size_t n_samples) const { return static_cast<int>(n_samples / hop) + 1; }
    /// Stable hash of every field, used to detect mismatched spectrograms.
    std::string fingerprint() const;

    bool operator==(const DspConfig&) const = default;
};

void to_json(nlohmann::json& j, const DspConfig& c);
void from_json(const nlohmann::json& j, DspConfig& c);

/// [n_frames x n_bins] STFT magnitudes.
using MagnitudeSpectrogram = Matrix<double>;

/// [n_frames x n_mels] natural-log mel magnitudes.
struct MelSpectrogram {
    Matrix<float> frames;
    double frame_rate = 0.0;
    std::string fingerprint;

    int n_frames() const { return frames.rows; }
    int n_mels() const { return frames.cols; }
};

struct MelFilterbank {
    Matrix<double> weights;  // [n_mels x n_bins]
};

}  // namespace hh::dsp
