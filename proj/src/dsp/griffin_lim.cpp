#include "hh/dsp/griffin_lim.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "hh/dsp/mel.hpp"
#include "hh/dsp/stft.hpp"
#include "hh/error.hpp"

namespace hh::dsp {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double hermitian_weight(int k, int n_bins) { return (k == 0 || k == n_bins - 1) ? 1.0 : 2.0; }

}  // namespace

MagnitudeSpectrogram mel_to_magnitude(const MelSpectrogram& mel, const DspConfig& cfg, int nnls_iterations) {
    const auto fb = build_mel_filterbank(cfg);
    const int n_bins = cfg.n_bins();
    const int n_frames = mel.n_frames();
    const int n_mels = mel.n_mels();
    if (n_mels != cfg.n_mels) throw ValidationError("mel bin count does not match config", "mel");

    Eigen::Map<const RowMat> basis(fb.weights.data.data(), n_mels, n_bins);
    // Columns are frames.
    Eigen::MatrixXd target(n_mels, n_frames);
    const double floor_log = std::log(cfg.log_floor);
    for (int t = 0; t < n_frames; ++t)
        for (int m = 0; m < n_mels; ++m) {
            const double v = mel.frames(t, m);
            target(m, t) = v <= floor_log + 1e-6 ? 0.0 : std::exp(v);
        }

    const Eigen::VectorXd col_mass = basis.colwise().sum().transpose();
    const Eigen::MatrixXd numer = basis.transpose() * target;
    Eigen::MatrixXd s(n_bins, n_frames);
    for (int k = 0; k < n_bins; ++k)
        for (int t = 0; t < n_frames; ++t) s(k, t) = col_mass(k) > 0.0 ? numer(k, t) / (col_mass(k) * col_mass(k)) : 0.0;

    constexpr double kEps = 1e-12;
    for (int it = 0; it < nnls_iterations; ++it) {
        const Eigen::MatrixXd denom = basis.transpose() * (basis * s);
        s = s.cwiseProduct(numer).cwiseQuotient(denom.array().max(kEps).matrix());
    }

    MagnitudeSpectrogram out(n_frames, n_bins);
    for (int t = 0; t < n_frames; ++t)
        for (int k = 0; k < n_bins; ++k) out(t, k) = s(k, t);
    return out;
}

GriffinLimTrace griffin_lim_trace(const MagnitudeSpectrogram& target, const DspConfig& cfg, int iterations) {
    cfg.validate();
    if (iterations < 1) throw ValidationError("iterations must be >= 1", "iterations");
    if (target.cols != cfg.n_bins()) throw ValidationError("magnitude bin count does not match config", "target");
    const int n_frames = target.rows;
    const int n_bins = target.cols;
    const std::size_t padded_len = static_cast<std::size_t>(n_frames - 1) * cfg.hop + cfg.n_fft;

    double target_norm = 0.0;
    for (int t = 0; t < n_frames; ++t)
        for (int k = 0; k < n_bins; ++k) target_norm += hermitian_weight(k, n_bins) * target(t, k) * target(t, k);
    target_norm = std::sqrt(target_norm);

    GriffinLimTrace trace;
    Matrix<std::complex<double>> spec(n_frames, n_bins);
    for (std::size_t i = 0; i < spec.data.size(); ++i) spec.data[i] = {target.data[i], 0.0};

    std::vector<double> signal;
    for (int it = 0; it < iterations; ++it) {
        signal = istft_frames(spec, padded_len, cfg);
        const auto rebuilt = stft_frames(signal, n_frames, cfg);
        double err = 0.0;
        for (int t = 0; t < n_frames; ++t)
            for (int k = 0; k < n_bins; ++k) {
                const auto x = rebuilt(t, k);
                const double mag = std::abs(x);
                const double d = mag - target(t, k);
                err += hermitian_weight(k, n_bins) * d * d;
                spec(t, k) = mag > 0.0 ? x * (target(t, k) / mag) : std::complex<double>(target(t, k), 0.0);
            }
        trace.convergence.push_back(target_norm > 0.0 ? std::sqrt(err) / target_norm : std::sqrt(err));
    }
    // The final estimate is the consistent signal of the last projection.
    signal = istft_frames(spec, padded_len, cfg);

    const int pad = cfg.n_fft / 2;
    const std::size_t n_out = static_cast<std::size_t>(n_frames - 1) * cfg.hop;
    trace.waveform.sample_rate = cfg.sample_rate;
    trace.waveform.samples.resize(std::max<std::size_t>(n_out, 1));
    for (std::size_t i = 0; i < trace.waveform.samples.size(); ++i)
        trace.waveform.samples[i] = static_cast<float>(signal[pad + i]);
    return trace;
}

Waveform griffin_lim(const MelSpectrogram& mel, const DspConfig& cfg, int iterations) {
    if (mel.fingerprint != cfg.fingerprint())
        throw ValidationError("mel fingerprint " + mel.fingerprint + " does not match config " + cfg.fingerprint(),
                              "fingerprint");
    return griffin_lim_trace(mel_to_magnitude(mel, cfg), cfg, iterations).waveform;
}

}  // namespace hh::dsp
