#pragma once

#include <vector>

#include "hh/dsp/types.hpp"

namespace hh::dsp {

/// Non-negative linear magnitudes whose mel projection approximates `mel`
/// (multiplicative-update NNLS against the filterbank). Floor entries map to zero energy.
MagnitudeSpectrogram mel_to_magnitude(const MelSpectrogram& mel, const DspConfig& cfg, int nnls_iterations = 200);

struct GriffinLimTrace {
    Waveform waveform;
    /// Spectral convergence ||(|X_k| - S)|| / ||S|| after each iteration (Hermitian-weighted norm).
    std::vector<double> convergence;
};

/// Phase reconstruction from zero initial phase. The output length is (n_frames - 1) * hop.
GriffinLimTrace griffin_lim_trace(const MagnitudeSpectrogram& target, const DspConfig& cfg, int iterations);

/// Mel -> waveform vocoder. Throws ValidationError if the mel was produced under another config.
Waveform griffin_lim(const MelSpectrogram& mel, const DspConfig& cfg, int iterations = 64);

}  // namespace hh::dsp
