#pragma once

#include "hh/dsp/types.hpp"

namespace hh::dsp {

/// HTK mel scale: 2595 * log10(1 + f / 700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular, area-unnormalised filters with centres equally spaced in mel between f_min and f_max.
/// Throws ConfigError if any filter covers no FFT bin.
MelFilterbank build_mel_filterbank(const DspConfig& cfg);

/// log(max(filterbank * magnitude, log_floor)) per frame.
MelSpectrogram magnitude_to_mel(const MagnitudeSpectrogram& mag, const MelFilterbank& fb, const DspConfig& cfg);

MelSpectrogram waveform_to_mel(const Waveform& w, const DspConfig& cfg);

/// Linear map of log-mel values into [-1, 1] using dataset-level extremes.
struct MelNormalizer {
    float min = 0.0f;
    float max = 1.0f;

    float normalize(float v) const { return 2.0f * (v - min) / (max - min) - 1.0f; }
    float denormalize(float v) const { return (v + 1.0f) * 0.5f * (max - min) + min; }
    bool valid() const { return max > min; }
};

}  // namespace hh::dsp
