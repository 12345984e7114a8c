#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hh/dsp/types.hpp"

namespace hh::fixtures {

inline dsp::Waveform sine(double freq, double amp, double seconds, int sr) {
    dsp::Waveform w;
    w.sample_rate = sr;
    w.samples.resize(static_cast<std::size_t>(std::lround(seconds * sr)));
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * double(i) / sr));
    return w;
}

/// Band-limited clips used for the mel/Griffin-Lim round-trip property. Every clip carries a
/// low noise bed, as recorded and simulated interaction sounds do.
inline std::vector<dsp::Waveform> round_trip_clips(int sr) {
    std::vector<dsp::Waveform> clips;
    const double secs = 1.0;
    const auto n = static_cast<std::size_t>(secs * sr);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Harmonic tone with slow vibrato.
    dsp::Waveform tone{std::vector<float>(n), sr};
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = 330.0 * (1.0 + 0.02 * std::sin(2.0 * std::numbers::pi * 3.0 * double(i) / sr));
        phase += 2.0 * std::numbers::pi * f / sr;
        tone.samples[i] = static_cast<float>(0.3 * std::sin(phase) + 0.15 * std::sin(2 * phase) + 0.08 * std::sin(3 * phase) +
                                             0.01 * gauss(rng));
    }
    clips.push_back(tone);

    // Linear chirp.
    dsp::Waveform chirp{std::vector<float>(n), sr};
    for (std::size_t i = 0; i < n; ++i) {
        const double t = double(i) / sr;
        const double f0 = 200.0, f1 = 0.35 * sr;
        chirp.samples[i] = static_cast<float>(
            0.4 * std::sin(2.0 * std::numbers::pi * (f0 * t + 0.5 * (f1 - f0) / secs * t * t)) + 0.01 * gauss(rng));
    }
    clips.push_back(chirp);

    // Repeated damped modal strikes over a low noise bed.
    dsp::Waveform strikes{std::vector<float>(n), sr};
    const double modes[][3] = {{523.0, 9.0, 0.5}, {1210.0, 14.0, 0.3}, {2270.0, 25.0, 0.2}};
    for (int s = 0; s < 4; ++s) {
        const std::size_t onset = static_cast<std::size_t>((0.05 + 0.25 * s) * sr);
        for (std::size_t i = onset; i < n; ++i) {
            const double t = double(i - onset) / sr;
            double v = 0.0;
            for (const auto& m : modes) v += m[2] * std::exp(-m[1] * t) * std::sin(2.0 * std::numbers::pi * m[0] * t);
            strikes.samples[i] += static_cast<float>(0.5 * v);
        }
    }
    for (auto& x : strikes.samples) x += static_cast<float>(0.01 * gauss(rng));
    clips.push_back(strikes);

    // Smoothed noise (one-pole low-pass).
    dsp::Waveform noise{std::vector<float>(n), sr};
    double y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y = 0.7 * y + 0.3 * gauss(rng);
        noise.samples[i] = static_cast<float>(0.3 * y);
    }
    clips.push_back(noise);
    return clips;
}

}  // namespace hh::fixtures
