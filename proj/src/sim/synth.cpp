#include "hh/sim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>

#include "hh/dsp/fft.hpp"
#include "hh/error.hpp"
#include "hh/util.hpp"

namespace hh::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBurstTau = 0.004;
constexpr double kScratchGain = 3.0;
constexpr double kPatImpact = 0.6;
constexpr double kPatNoiseTau = 0.03;
constexpr double kResonatorTail = 0.25;

std::vector<double> white(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::vector<double> x(n);
    for (auto& v : x) v = g(rng);
    return x;
}

/// Unit-RMS noise with a spectral tilt of `db_per_octave` relative to 1 kHz.
std::vector<double> tilted_noise(std::size_t n, double db_per_octave, int sr, std::mt19937_64& rng) {
    if (n == 0) return {};
    const int size = dsp::next_power_of_two(static_cast<int>(std::max<std::size_t>(n, 2)));
    dsp::Fft fft(size);
    std::normal_distribution<double> g;
    std::vector<std::complex<double>> spec(size / 2 + 1);
    const double exponent = db_per_octave / (20.0 * std::log10(2.0));
    for (int k = 1; k <= size / 2; ++k) {
        const double f = std::max(double(k) * sr / size, 50.0);
        const double a = std::pow(f / 1000.0, exponent);
        spec[k] = {a * g(rng), k == size / 2 ? 0.0 : a * g(rng)};
    }
    std::vector<double> out(size);
    fft.irfft(spec, out);
    out.resize(n);
    double ss = 0;
    for (double v : out) ss += v * v;
    const double rms = std::sqrt(ss / n);
    if (rms > 0)
        for (auto& v : out) v /= rms;
    return out;
}

/// Two-pole resonator at f with pole radius exp(-d / sr).
std::vector<double> resonate(const std::vector<double>& x, double f, double d, int sr) {
    const double r = std::exp(-d / sr);
    const double c = 2 * r * std::cos(kTwoPi * f / sr);
    std::vector<double> y(x.size());
    double y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i] + c * y1 - r * r * y2;
        y[i] = v;
        y2 = y1;
        y1 = v;
    }
    return y;
}

double rms(const std::vector<double>& x, std::size_t n) {
    n = std::min(n, x.size());
    if (n == 0) return 0.0;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) ss += x[i] * x[i];
    return std::sqrt(ss / n);
}

void add_modes(std::vector<double>& out, const Material& m, double amplitude, int sr, bool soften) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = double(i) / sr;
        double v = 0;
        for (const auto& mode : m.modes) {
            const double g = soften ? mode.gain / (1.0 + mode.frequency / 1000.0) : mode.gain;
            v += g * std::exp(-mode.damping * t) * std::sin(kTwoPi * mode.frequency * t);
        }
        out[i] += amplitude * v;
    }
}

std::size_t ring_length(const Material& m, int sr) {
    double d_min = m.modes.front().damping;
    for (const auto& mode : m.modes) d_min = std::min(d_min, mode.damping);
    return static_cast<std::size_t>(std::ceil(std::log(1e4) / d_min * sr));
}

/// Noise seed key from the event's kind, material and length only: shifting an event in time or
/// changing its speeds scales and moves the same noise.
std::uint64_t event_key(const ContactEvent& e) {
    std::string bytes;
    auto put = [&](const void* p, std::size_t n) { bytes.append(static_cast<const char*>(p), n); };
    put(&e.kind, sizeof e.kind);
    put(&e.material_id, sizeof e.material_id);
    const int frames = e.n_frames();
    put(&frames, sizeof frames);
    return fnv1a(bytes);
}

/// Contribution of one event, starting at its onset sample, truncated to `max_len`.
std::vector<double> render_event(const ContactEvent& e, const Material& m, int sr, std::size_t max_len,
                                 std::mt19937_64& rng) {
    const std::size_t contact = static_cast<std::size_t>(std::lround(e.duration * sr));
    switch (e.kind) {
        case ContactKind::tap: {
            std::vector<double> out(std::min(ring_length(m, sr), max_len));
            add_modes(out, m, e.normal_speed, sr, false);
            const double burst = m.contact_noise_gain * (1.0 - m.hardness) * e.normal_speed;
            if (burst > 0) {
                const auto n = white(std::min<std::size_t>(out.size(), std::lround(8 * kBurstTau * sr)), rng);
                for (std::size_t i = 0; i < n.size(); ++i) out[i] += burst * n[i] * std::exp(-double(i) / sr / kBurstTau);
            }
            return out;
        }
        case ContactKind::pat: {
            std::vector<double> out(std::min(ring_length(m, sr), max_len));
            add_modes(out, m, kPatImpact * e.normal_speed, sr, true);
            const std::size_t len = std::min(out.size(), contact + static_cast<std::size_t>(0.05 * sr));
            const auto n = tilted_noise(len, m.noise_color, sr, rng);
            const double level = (m.contact_noise_gain + 0.3) * e.normal_speed;
            for (std::size_t i = 0; i < len; ++i) out[i] += level * n[i] * std::exp(-double(i) / sr / kPatNoiseTau);
            return out;
        }
        case ContactKind::scratch: {
            const std::size_t len =
                std::min(max_len, contact + static_cast<std::size_t>(std::lround(kResonatorTail * sr)));
            // Speed envelope: linear between frame samples, raised-cosine fades at contact edges.
            std::vector<double> env(len, 0.0);
            const std::size_t fade = std::max<std::size_t>(1, sr / 200);
            for (std::size_t i = 0; i < std::min(contact, len); ++i) {
                const double pos = double(i) / sr * kTrajectoryRate;
                const std::size_t f0 = std::min<std::size_t>(static_cast<std::size_t>(pos), e.tangential_profile.size() - 1);
                const std::size_t f1 = std::min(f0 + 1, e.tangential_profile.size() - 1);
                const double w = std::clamp(pos - f0, 0.0, 1.0);
                double a = (1 - w) * e.tangential_profile[f0] + w * e.tangential_profile[f1];
                if (i < fade) a *= 0.5 - 0.5 * std::cos(std::numbers::pi * i / fade);
                if (contact - i <= fade) a *= 0.5 - 0.5 * std::cos(std::numbers::pi * (contact - i) / fade);
                env[i] = kScratchGain * a;
            }
            auto excitation = white(len, rng);
            for (std::size_t i = 0; i < len; ++i) excitation[i] *= env[i];
            const double ref = rms(excitation, contact);
            std::vector<double> out(len, 0.0);
            if (ref > 0) {
                for (const auto& mode : m.modes) {
                    auto y = resonate(excitation, mode.frequency, mode.damping, sr);
                    const double r = rms(y, contact);
                    if (r <= 0) continue;
                    const double k = 0.5 * mode.gain * ref / r;
                    for (std::size_t i = 0; i < len; ++i) out[i] += k * y[i];
                }
            }
            const auto n = tilted_noise(len, m.noise_color, sr, rng);
            for (std::size_t i = 0; i < len; ++i) out[i] += m.contact_noise_gain * env[i] * n[i];
            return out;
        }
    }
    return {};
}

}  // namespace

SynthResult synthesize(const std::vector<ContactEvent>& events, const MaterialLookup& materials, int sample_rate,
                       double duration, std::uint64_t seed, const SynthOptions& options) {
    if (sample_rate <= 0 || !(duration > 0)) throw ValidationError("synthesis needs a positive rate and duration");
    const std::size_t n = static_cast<std::size_t>(std::lround(duration * sample_rate));
    std::vector<double> mix(n, 0.0);
    SynthResult result;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (e.onset < 0 || e.onset + e.duration > duration + 1e-9)
            throw ValidationError("contact event at " + std::to_string(e.onset) + " s lies outside the clip", "events");
        const Material& m = materials(e.material_id);
        const std::size_t start = static_cast<std::size_t>(round_half_up(e.onset * sample_rate));
        std::mt19937_64 rng(derive_seed(seed, event_key(e)));
        auto part = render_event(e, m, sample_rate, n > start ? n - start : 0, rng);
        double energy = 0;
        for (std::size_t k = 0; k < part.size(); ++k) {
            const double v = options.gain * part[k];
            mix[start + k] += v;
            energy += v * v;
        }
        result.event_energy.push_back(energy);
    }
    if (options.noise_bed > 0) {
        std::mt19937_64 rng(derive_seed(seed, 0));
        std::normal_distribution<double> g(0.0, options.noise_bed);
        for (auto& v : mix) v += g(rng);
    }
    double peak = 0;
    for (double v : mix) peak = std::max(peak, std::abs(v));
    const double scale = peak > 1.0 ? 0.9 / peak : 1.0;
    result.normalized = peak > 1.0;
    result.waveform.sample_rate = sample_rate;
    result.waveform.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.waveform.samples[i] = static_cast<float>(mix[i] * scale);
    return result;
}

dsp::Waveform synthesize_sound(const SceneModel& scene, const std::vector<ContactEvent>& events, int sample_rate,
                               double duration, std::uint64_t seed, const SynthOptions& options) {
    for (const auto& e : events)
        if (e.cell.row < 0 || e.cell.row >= scene.rows() || e.cell.col < 0 || e.cell.col >= scene.cols())
            throw ValidationError("contact event cell outside the scene", "events");
    return synthesize(events, material_by_id, sample_rate, duration, seed, options).waveform;
}

int dominant_event(const SynthResult& r) {
    if (r.event_energy.empty()) return -1;
    return static_cast<int>(std::max_element(r.event_energy.begin(), r.event_energy.end()) - r.event_energy.begin());
}

}  // namespace hh::sim
