#pragma once

#include <complex>
#include <span>
#include <vector>

#include "hh/dsp/types.hpp"

namespace hh::dsp {

/// Periodic Hann window of length `win`, zero-padded and centred in `n_fft`.
std::vector<double> analysis_window(const DspConfig& cfg);

/// Reflect padding by n_fft/2 on both sides (numpy "reflect" semantics, repeated for short input).
std::vector<double> center_pad(std::span<const float> samples, int pad);

/// Complex frames of an already-padded signal: frame t covers [t*hop, t*hop + n_fft).
Matrix<std::complex<double>> stft_frames(std::span<const double> padded, int n_frames, const DspConfig& cfg);

/// Least-squares inverse of `stft_frames` (overlap-add normalised by the summed squared window).
std::vector<double> istft_frames(const Matrix<std::complex<double>>& frames, std::size_t padded_len,
                                 const DspConfig& cfg);

/// Hann-windowed, reflect-centred magnitude STFT.
MagnitudeSpectrogram stft(const Waveform& w, const DspConfig& cfg);

}  // namespace hh::dsp
