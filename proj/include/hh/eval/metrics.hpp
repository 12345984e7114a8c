#pragma once

#include <vector>

#include "hh/dsp/types.hpp"
#include "hh/matrix.hpp"

namespace hh::eval {

/// sqrt(mean over frames and bins of (log|A| - log|B|)^2), magnitudes floored at cfg.log_floor.
double stft_distance(const dsp::Waveform& a, const dsp::Waveform& b, const dsp::DspConfig& cfg);

/// RMS difference of the two amplitude envelopes.
double envelope_distance(const dsp::Waveform& a, const dsp::Waveform& b, double window_ms = 10.0);

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)) for row-per-sample feature sets. Needs
/// at least `min_samples` rows per side (pass F + 1 for a full-rank covariance).
double frechet_distance(const Matrix<double>& a, const Matrix<double>& b, int min_samples = 2);

/// exp(E_x KL(p(y|x) || p(y))) over rows of class probabilities.
double score_entropy(const Matrix<double>& probs);

/// Lag (seconds, b relative to a) maximizing the cross-correlation of the two envelopes, searched
/// over |lag| <= max_lag_s.
double envelope_lag(const dsp::Waveform& a, const dsp::Waveform& b, double window_ms, double max_lag_s);

/// Wasserstein-1 distance between the empirical value distributions of two equal-size arrays.
double value_wasserstein(std::vector<float> a, std::vector<float> b);

}  // namespace hh::eval
