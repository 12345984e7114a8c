#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hh/dsp/types.hpp"
#include "hh/sim/contacts.hpp"
#include "hh/sim/material.hpp"

namespace hh::sim {

struct SynthOptions {
    double gain = 1.0;       // applied to every event before summing
    double noise_bed = 0.0;  // std of an additive white background
};

struct SynthResult {
    dsp::Waveform waveform;
    /// Sum of squares of each event's own contribution, before normalization.
    std::vector<double> event_energy;
    bool normalized = false;
};

using MaterialLookup = std::function<const Material&(int)>;

/// Taps ring the material's modes (gain * normal_speed * exp(-d t) sin(2 pi f t)) plus a contact
/// burst; scratches drive the modes and tilted noise with the tangential-speed profile; pats are a
/// softened impact plus a decaying noise burst. Peak-normalized to 0.9 if the sum would clip.
SynthResult synthesize(const std::vector<ContactEvent>& events, const MaterialLookup& materials, int sample_rate,
                       double duration, std::uint64_t seed, const SynthOptions& options = {});

/// Uses the shipped material table.
dsp::Waveform synthesize_sound(const SceneModel& scene, const std::vector<ContactEvent>& events, int sample_rate,
                               double duration, std::uint64_t seed, const SynthOptions& options = {});

/// Index of the event with the largest energy, or -1 when there are none.
int dominant_event(const SynthResult& r);

}  // namespace hh::sim
