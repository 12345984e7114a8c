#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "../support/oracles.hpp"
#include "../support/signals.hpp"
#include "hh/dsp/audio_io.hpp"
#include "hh/dsp/envelope.hpp"
#include "hh/dsp/griffin_lim.hpp"
#include "hh/dsp/mel.hpp"
#include "hh/dsp/stft.hpp"
#include "hh/error.hpp"

using namespace hh;
using namespace hh::dsp;
using hh::fixtures::brute_force_stft;
using hh::fixtures::mean_abs_diff;

namespace {

DspConfig small_config() {
    DspConfig c = DspConfig::desk();
    c.n_fft = 256;
    c.win = 256;
    c.hop = 64;
    c.n_mels = 24;
    return c;
}

}  // namespace

TEST(Stft, ZeroInputGivesZeroMagnitudes) {
    const auto cfg = DspConfig::reference();
    Waveform w{std::vector<float>(16000, 0.0f), 16000};
    const auto mag = stft(w, cfg);
    for (double v : mag.data) EXPECT_EQ(v, 0.0);
}

TEST(Stft, FrameCountFollowsCentrePadding) {
    const auto cfg = DspConfig::reference();
    Waveform w{std::vector<float>(256 * 10, 0.1f), 16000};
    EXPECT_EQ(stft(w, cfg).rows, 11);
}

TEST(Stft, BinCentredSineMatchesDirectDft) {
    const auto cfg = DspConfig::reference();
    const int k = 40;
    const double f = double(k) * cfg.sample_rate / cfg.n_fft;
    const auto w = fixtures::sine(f, 1.0, 0.25, cfg.sample_rate);
    const auto mag = stft(w, cfg);
    const int t = mag.rows / 2;

    int argmax = 0;
    for (int b = 1; b < mag.cols; ++b)
        if (mag(t, b) > mag(t, argmax)) argmax = b;
    EXPECT_EQ(argmax, k);

    // Direct DFT of the windowed interior frame.
    std::vector<std::complex<double>> ref(3);
    for (int d = -1; d <= 1; ++d) {
        std::complex<double> acc = 0.0;
        for (int i = 0; i < cfg.n_fft; ++i) {
            const long src = long(t) * cfg.hop + i - cfg.n_fft / 2;
            const double win = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.n_fft);
            acc += double(w.samples[src]) * win * std::polar(1.0, -2.0 * std::numbers::pi * (k + d) * i / cfg.n_fft);
        }
        ref[d + 1] = acc;
    }
    for (int d = -1; d <= 1; ++d) EXPECT_NEAR(mag(t, k + d), std::abs(ref[d + 1]), 1e-6 * std::abs(ref[1]));
}

TEST(Stft, AgreesWithBruteForceDftOnShortClips) {
    const auto cfg = small_config();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (int n : {300, 1000, 4096}) {
        Waveform w{std::vector<float>(n), cfg.sample_rate};
        for (auto& x : w.samples) x = u(rng);
        const auto mag = stft(w, cfg);
        const auto ref = brute_force_stft(w, cfg);
        ASSERT_EQ(mag.rows, ref.rows);
        double scale = 0.0;
        for (auto c : ref.data) scale = std::max(scale, std::abs(c));
        for (std::size_t i = 0; i < mag.data.size(); ++i) ASSERT_NEAR(mag.data[i], std::abs(ref.data[i]), 1e-6 * scale);
    }
}

TEST(Stft, ParsevalAgainstWindowedEnergy) {
    const auto cfg = small_config();
    std::mt19937_64 rng(5);
    std::normal_distribution<float> g(0.0f, 0.3f);
    Waveform w{std::vector<float>(3000), cfg.sample_rate};
    for (auto& x : w.samples) x = g(rng);
    const auto mag = stft(w, cfg);
    double spectral = 0.0;
    for (int t = 0; t < mag.rows; ++t)
        for (int k = 0; k < mag.cols; ++k)
            spectral += (k == 0 || k == mag.cols - 1 ? 1.0 : 2.0) * mag(t, k) * mag(t, k);

    const auto padded = center_pad(w.samples, cfg.n_fft / 2);
    const auto win = analysis_window(cfg);
    double temporal = 0.0;
    for (int t = 0; t < mag.rows; ++t)
        for (int i = 0; i < cfg.n_fft; ++i) {
            const double v = padded[std::size_t(t) * cfg.hop + i] * win[i];
            temporal += v * v;
        }
    temporal *= cfg.n_fft;
    EXPECT_NEAR(spectral / temporal, 1.0, 1e-3);
}

TEST(Stft, RejectsSampleRateMismatchAndNonFinite) {
    const auto cfg = DspConfig::reference();
    Waveform w{std::vector<float>(100, 0.0f), 8000};
    EXPECT_THROW(stft(w, cfg), ConfigError);
    Waveform bad{std::vector<float>(100, 0.0f), 16000};
    bad.samples[10] = std::nanf("");
    EXPECT_THROW(stft(bad, cfg), ValidationError);
}

TEST(Stft, SingleSampleInputIsHandled) {
    const auto cfg = small_config();
    Waveform w{{0.5f}, cfg.sample_rate};
    const auto mag = stft(w, cfg);
    EXPECT_EQ(mag.rows, 1);
}

TEST(MelFilterbank, ScaleAndShape) {
    EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-9);
    EXPECT_NEAR(hz_to_mel(700.0), 781.17, 0.01);
    EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
    const auto fb = build_mel_filterbank(DspConfig::reference());
    EXPECT_EQ(fb.weights.rows, 80);
    EXPECT_EQ(fb.weights.cols, 513);
}

TEST(MelFilterbank, RowsAreContiguousOrderedAndCoverTheBand) {
    for (const auto& cfg : {DspConfig::reference(), DspConfig::desk()}) {
        const auto fb = build_mel_filterbank(cfg);
        double prev_centre = -1.0;
        int first_centre = -1, last_centre = -1;
        for (int m = 0; m < fb.weights.rows; ++m) {
            int lo = -1, hi = -1, peak = 0;
            for (int k = 0; k < fb.weights.cols; ++k) {
                const double v = fb.weights(m, k);
                ASSERT_GE(v, 0.0);
                if (v > 0.0) {
                    if (lo < 0) lo = k;
                    hi = k;
                }
                if (v > fb.weights(m, peak)) peak = k;
            }
            ASSERT_GE(lo, 0) << "row " << m << " empty";
            for (int k = lo; k <= hi; ++k) ASSERT_GT(fb.weights(m, k), 0.0) << "row " << m << " not contiguous";
            const double centre = mel_to_hz(hz_to_mel(cfg.f_min) +
                                            (hz_to_mel(cfg.f_max) - hz_to_mel(cfg.f_min)) * (m + 1) / (cfg.n_mels + 1));
            EXPECT_GT(centre, prev_centre);
            prev_centre = centre;
            if (m == 0) first_centre = peak;
            last_centre = peak;
        }
        for (int k = first_centre; k <= last_centre; ++k) {
            double col = 0.0;
            for (int m = 0; m < fb.weights.rows; ++m) col += fb.weights(m, k);
            EXPECT_GT(col, 0.0) << "bin " << k;
        }
    }
}

TEST(MelFilterbank, TooManyFiltersIsConfigError) {
    auto cfg = DspConfig::desk();
    cfg.n_mels = 400;
    EXPECT_THROW(build_mel_filterbank(cfg), ConfigError);
}

TEST(WaveformToMel, SilenceSitsOnTheFloor) {
    const auto cfg = DspConfig::desk();
    Waveform w{std::vector<float>(8000, 0.0f), 8000};
    const auto mel = waveform_to_mel(w, cfg);
    for (float v : mel.frames.data) EXPECT_FLOAT_EQ(v, static_cast<float>(std::log(cfg.log_floor)));
}

TEST(WaveformToMel, FullScaleChunkFrameCountAndRate) {
    const auto cfg = DspConfig::reference();
    const auto w = fixtures::sine(440.0, 0.5, 8.0, 16000);
    const auto mel = waveform_to_mel(w, cfg);
    EXPECT_EQ(mel.n_frames(), 501);
    EXPECT_EQ(mel.n_mels(), 80);
    EXPECT_DOUBLE_EQ(mel.frame_rate, 62.5);
    EXPECT_DOUBLE_EQ(mel.frame_rate * cfg.hop, cfg.sample_rate);
}

TEST(WaveformToMel, DoublingAmplitudeAddsLogTwo) {
    const auto cfg = DspConfig::desk();
    const auto clips = fixtures::round_trip_clips(cfg.sample_rate);
    for (const auto& clip : clips) {
        auto loud = clip;
        for (auto& x : loud.samples) x *= 2.0f;
        const auto a = waveform_to_mel(clip, cfg);
        const auto b = waveform_to_mel(loud, cfg);
        const float floor_log = static_cast<float>(std::log(cfg.log_floor));
        for (std::size_t i = 0; i < a.frames.data.size(); ++i)
            if (a.frames.data[i] > floor_log + 1e-3f)
                ASSERT_NEAR(b.frames.data[i] - a.frames.data[i], std::log(2.0), 1e-5);
    }
}

TEST(WaveformToMel, IsBitIdenticalAcrossRuns) {
    const auto cfg = DspConfig::desk();
    const auto clip = fixtures::round_trip_clips(cfg.sample_rate)[2];
    EXPECT_EQ(waveform_to_mel(clip, cfg).frames, waveform_to_mel(clip, cfg).frames);
}

TEST(GriffinLim, RecoversDominantBinOfSine) {
    const auto cfg = DspConfig::desk();
    const auto w = fixtures::sine(440.0, 0.5, 1.0, cfg.sample_rate);
    const auto rec = griffin_lim(waveform_to_mel(w, cfg), cfg, 64);
    auto dominant = [&](const Waveform& x) {
        const auto mag = stft(x, cfg);
        std::vector<double> sum(mag.cols, 0.0);
        for (int t = 0; t < mag.rows; ++t)
            for (int k = 0; k < mag.cols; ++k) sum[k] += mag(t, k);
        return int(std::max_element(sum.begin(), sum.end()) - sum.begin());
    };
    EXPECT_LE(std::abs(dominant(rec) - dominant(w)), 1);
}

TEST(GriffinLim, SpectralConvergenceIsNonIncreasing) {
    const auto cfg = DspConfig::desk();
    const auto clip = fixtures::round_trip_clips(cfg.sample_rate)[0];
    const auto target = mel_to_magnitude(waveform_to_mel(clip, cfg), cfg);
    const auto trace = griffin_lim_trace(target, cfg, 40);
    for (std::size_t i = 1; i < trace.convergence.size(); ++i)
        EXPECT_LE(trace.convergence[i], trace.convergence[i - 1] * (1.0 + 1e-9)) << "iteration " << i;
}

TEST(GriffinLim, FloorMelGivesNearSilence) {
    const auto cfg = DspConfig::desk();
    Waveform w{std::vector<float>(8000, 0.0f), 8000};
    const auto rec = griffin_lim(waveform_to_mel(w, cfg), cfg, 8);
    double rms = 0.0;
    for (float x : rec.samples) rms += double(x) * x;
    EXPECT_LT(std::sqrt(rms / rec.samples.size()), 1e-3);
}

TEST(GriffinLim, RejectsFingerprintMismatch) {
    const auto desk = DspConfig::desk();
    auto other = desk;
    other.log_floor = 1e-4;
    const auto mel = waveform_to_mel(fixtures::sine(440.0, 0.5, 0.5, 8000), desk);
    EXPECT_THROW(griffin_lim(mel, other, 4), ValidationError);
}

TEST(GriffinLim, MelRoundTripErrorIsSmall) {
    for (const auto& cfg : {DspConfig::desk(), DspConfig::reference()}) {
        for (const auto& clip : fixtures::round_trip_clips(cfg.sample_rate)) {
            const auto mel = waveform_to_mel(clip, cfg);
            const auto again = waveform_to_mel(griffin_lim(mel, cfg, 64), cfg);
            ASSERT_EQ(again.n_frames(), mel.n_frames());
            EXPECT_LT(mean_abs_diff(mel, again), 0.35);
        }
    }
}

TEST(Envelope, ConstantSignal) {
    Waveform w{std::vector<float>(1600, 0.5f), 16000};
    const auto env = envelope(w, 10.0);
    for (std::size_t i = 100; i < 1500; ++i) EXPECT_NEAR(env[i], 0.5f, 1e-6);
}

TEST(Envelope, ImpulsePlateau) {
    Waveform w{std::vector<float>(1600, 0.0f), 16000};
    w.samples[800] = 1.0f;
    const auto env = envelope(w, 10.0);
    int plateau = 0;
    for (float v : env) {
        if (v > 0.0f) {
            EXPECT_NEAR(v, 1.0f / 160.0f, 1e-9);
            ++plateau;
        }
    }
    EXPECT_EQ(plateau, 160);
}

TEST(Envelope, SineMeanMatchesNumericIntegral) {
    const double amp = 0.7;
    const auto w = fixtures::sine(200.0, amp, 1.0, 16000);
    const auto env = envelope(w, 20.0);
    // Trapezoidal integral of |A sin| over one period.
    const int steps = 100000;
    double integral = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double v = amp * std::abs(std::sin(2.0 * std::numbers::pi * i / steps));
        integral += (i == 0 || i == steps) ? 0.5 * v : v;
    }
    const double expected = integral / steps;
    double mean = 0.0;
    for (std::size_t i = 1000; i < 15000; ++i) mean += env[i];
    mean /= 14000.0;
    EXPECT_NEAR(mean, expected, 0.02 * expected);
    EXPECT_NEAR(expected, 2.0 * amp / std::numbers::pi, 1e-6);
}

TEST(Envelope, RejectsNonPositiveWindow) {
    Waveform w{std::vector<float>(10, 0.0f), 16000};
    EXPECT_THROW(envelope(w, 0.0), ValidationError);
}

TEST(AudioIo, WavRoundTripWithinQuantisation) {
    const auto w = fixtures::round_trip_clips(8000)[1];
    const auto back = decode_wav(encode_wav(w));
    ASSERT_EQ(back.samples.size(), w.samples.size());
    EXPECT_EQ(back.sample_rate, 8000);
    for (std::size_t i = 0; i < w.samples.size(); ++i) ASSERT_NEAR(back.samples[i], w.samples[i], 1.0 / 32767.0);
    EXPECT_EQ(encode_wav(back), encode_wav(w));
}

TEST(AudioIo, MelRoundTripIsExact) {
    const auto cfg = DspConfig::desk();
    const auto mel = waveform_to_mel(fixtures::round_trip_clips(8000)[2], cfg);
    const auto back = decode_mel(encode_mel(mel));
    EXPECT_EQ(back.frames, mel.frames);
    EXPECT_EQ(back.fingerprint, mel.fingerprint);
    EXPECT_EQ(back.frame_rate, mel.frame_rate);
}

TEST(AudioIo, RejectsGarbage) {
    EXPECT_THROW(decode_wav("not a wav"), ValidationError);
    EXPECT_THROW(decode_mel("{\"shape\":[2,2],\"frame_rate\":1,\"fingerprint\":\"x\"}\nabc"), ValidationError);
}
