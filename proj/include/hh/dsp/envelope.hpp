#pragma once

#include <vector>

#include "hh/dsp/types.hpp"

namespace hh::dsp {

/// Centred moving average of |x| over round(window_ms * sr / 1000) samples, zero beyond the edges.
std::vector<float> envelope(const Waveform& w, double window_ms);

}  // namespace hh::dsp
